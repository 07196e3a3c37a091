#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "wb/errors.hpp"

namespace wb::cli {

const char* const kScheduleHeader = "stage,beta_angle,delta,constraint_argmin_l1,constraint_argmin_l2,variant";
const char* const kStagesHeader = "stage,trunc,norm_head,norm_tail,residual,const_term,defect,radii_min";

namespace {

[[noreturn]] void mismatch(const std::string& msg) { fail(ErrorKind::SchemaMismatch, msg); }

double number(const std::string& s, const std::string& what) {
    try {
        size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        mismatch(what + ": '" + s + "' is not a number");
    }
}

Csv checked(const std::string& text, const char* header) {
    Csv c = parse_csv(text);
    std::string h;
    for (size_t i = 0; i < c.header.size(); ++i) h += (i ? "," : "") + c.header[i];
    if (h != header) mismatch("header '" + h + "' does not match '" + header + "'");
    for (size_t r = 0; r < c.rows.size(); ++r)
        if (c.rows[r].size() != c.header.size())
            mismatch("row " + std::to_string(r + 2) + " has " + std::to_string(c.rows[r].size()) + " fields");
    if (c.rows.empty()) mismatch("no data rows");
    return c;
}

std::string fmt(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f", v);
    return b;
}

std::string label(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3g", v);
    return b;
}

// dark blue -> teal -> yellow
std::string colour(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const double stops[3][3] = {{33, 25, 110}, {33, 145, 140}, {250, 230, 35}};
    const int k = t < 0.5 ? 0 : 1;
    const double u = t < 0.5 ? 2 * t : 2 * t - 1;
    int rgb[3];
    for (int i = 0; i < 3; ++i) rgb[i] = int(std::lround(stops[k][i] + u * (stops[k + 1][i] - stops[k][i])));
    char b[8];
    std::snprintf(b, sizeof b, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
    return b;
}

const int W = 640, H = 400, L = 70, R = 110, T = 40, B = 50;

void frame(std::ostringstream& os, const std::string& title, const std::string& xl, const std::string& yl) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    os << "<text x=\"" << L + (W - L - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xl
       << "</text>\n";
    os << "<text x=\"16\" y=\"" << T + (H - T - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << T + (H - T - B) / 2 << ")\">" << yl << "</text>\n";
}

}  // namespace

Csv parse_csv(const std::string& text) {
    Csv c;
    std::stringstream ss(text);
    std::string line;
    bool first = true;
    while (std::getline(ss, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (line.back() == ',') f.push_back("");
        if (first) {
            c.header = f;
            first = false;
        } else {
            c.rows.push_back(f);
        }
    }
    if (first) mismatch("empty CSV");
    return c;
}

std::string heatmap_svg(const std::string& text) {
    Csv c = checked(text, kScheduleHeader);
    std::map<long, int> stages;
    std::map<double, int> angles;
    struct Cell {
        long n;
        double a, v;
    };
    std::vector<Cell> cells;
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& r : c.rows) {
        double sn = number(r[0], "stage");
        if (sn != std::floor(sn) || sn < 0) mismatch("stage '" + r[0] + "' is not a nonnegative integer");
        Cell x{long(sn), number(r[1], "beta_angle"), number(r[2], "delta")};
        if (!std::isfinite(x.v)) mismatch("delta is not finite");
        stages[x.n] = 0;
        angles[x.a] = 0;
        lo = std::min(lo, x.v);
        hi = std::max(hi, x.v);
        cells.push_back(x);
    }
    int k = 0;
    for (auto& [s, i] : stages) i = k++;
    k = 0;
    for (auto& [a, i] : angles) i = k++;
    const double cw = double(W - L - R) / stages.size(), ch = double(H - T - B) / angles.size();
    std::ostringstream os;
    frame(os, "delta over directions and stages", "stage n", "direction angle");
    for (const auto& x : cells) {
        const double t = hi > lo ? (x.v - lo) / (hi - lo) : 0.5;
        os << "<rect x=\"" << fmt(L + cw * stages[x.n]) << "\" y=\"" << fmt(T + ch * angles[x.a]) << "\" width=\""
           << fmt(cw) << "\" height=\"" << fmt(ch) << "\" fill=\"" << colour(t) << "\"/>\n";
    }
    for (const auto& [s, i] : stages)
        os << "<text x=\"" << fmt(L + cw * (i + 0.5)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << s
           << "</text>\n";
    const size_t every = std::max<size_t>(1, angles.size() / 8);
    for (const auto& [a, i] : angles)
        if (i % every == 0)
            os << "<text x=\"" << L - 6 << "\" y=\"" << fmt(T + ch * (i + 0.5) + 4) << "\" text-anchor=\"end\">"
               << label(a) << "</text>\n";
    // colour bar
    for (int s = 0; s < 20; ++s)
        os << "<rect x=\"" << W - R + 30 << "\" y=\"" << fmt(T + (H - T - B) * s / 20.0) << "\" width=\"20\" height=\""
           << fmt((H - T - B) / 20.0) << "\" fill=\"" << colour(1 - s / 19.0) << "\"/>\n";
    os << "<text x=\"" << W - R + 56 << "\" y=\"" << T + 10 << "\">" << label(hi) << "</text>\n";
    os << "<text x=\"" << W - R + 56 << "\" y=\"" << H - B << "\">" << label(lo) << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

std::string decay_svg(const std::string& text) {
    Csv c = checked(text, kStagesHeader);
    struct Pt {
        double n, y;
    };
    std::vector<Pt> defect, head;
    double nlo = INFINITY, nhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
    for (const auto& r : c.rows) {
        const double n = number(r[0], "stage");
        std::vector<double> v;
        for (size_t i = 1; i < r.size(); ++i) v.push_back(number(r[i], c.header[i]));
        nlo = std::min(nlo, n);
        nhi = std::max(nhi, n + 1);
        const double hn = v[1] + v[2];   // norm_head + norm_tail, before the step
        const double d = v[5];           // defect after the step
        if (hn > 0) head.push_back({n, std::log10(hn)});
        if (d > 0) defect.push_back({n + 1, std::log10(d)});
    }
    for (const auto* s : {&defect, &head})
        for (const auto& p : *s) {
            ylo = std::min(ylo, p.y);
            yhi = std::max(yhi, p.y);
        }
    if (!std::isfinite(ylo)) ylo = -1, yhi = 0;
    ylo = std::floor(ylo);
    yhi = std::ceil(yhi);
    if (yhi <= ylo) yhi = ylo + 1;
    auto X = [&](double n) { return L + (W - L - R) * (nhi > nlo ? (n - nlo) / (nhi - nlo) : 0.5); };
    auto Y = [&](double y) { return T + (H - T - B) * (yhi - y) / (yhi - ylo); };

    std::ostringstream os;
    frame(os, "perturbation size per stage (log10)", "stage n", "log10 norm");
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"#888\"/>\n";
    const int ystep = std::max(1, int((yhi - ylo) / 8));
    for (int y = int(ylo); y <= int(yhi); y += ystep)
        os << "<text x=\"" << L - 6 << "\" y=\"" << fmt(Y(y) + 4) << "\" text-anchor=\"end\">" << y << "</text>\n";
    for (int n = int(std::ceil(nlo)); n <= int(nhi); ++n)
        os << "<text x=\"" << fmt(X(n)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << n << "</text>\n";
    const char* col[2] = {"#c0392b", "#2c5aa0"};
    const char* name[2] = {"defect after step", "norm before step"};
    int k = 0;
    for (const auto* s : {&defect, &head}) {
        if (!s->empty()) {
            os << "<polyline fill=\"none\" stroke=\"" << col[k] << "\" stroke-width=\"2\" points=\"";
            for (size_t i = 0; i < s->size(); ++i) os << (i ? " " : "") << fmt(X((*s)[i].n)) << ',' << fmt(Y((*s)[i].y));
            os << "\"/>\n";
            for (const auto& p : *s)
                os << "<circle cx=\"" << fmt(X(p.n)) << "\" cy=\"" << fmt(Y(p.y)) << "\" r=\"3\" fill=\"" << col[k]
                   << "\"/>\n";
        }
        os << "<text x=\"" << W - R + 8 << "\" y=\"" << T + 14 + 18 * k << "\" fill=\"" << col[k] << "\">" << name[k]
           << "</text>\n";
        ++k;
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace wb::cli
