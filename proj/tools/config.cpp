#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "wb/errors.hpp"

namespace wb::cli {

namespace {

[[noreturn]] void bad(const std::string& msg) { fail(ErrorKind::ValidationError, msg); }

template <class T>
T typed(const nlohmann::json& v, const std::string& key) {
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (v.is_boolean()) return v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (v.is_number_integer() || v.is_number_unsigned()) return v.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (v.is_number()) return v.get<T>();
        } else {
            if (v.is_string()) return v.get<T>();
        }
    } catch (const nlohmann::json::exception&) {
    }
    bad("config key '" + key + "' has the wrong type: " + v.dump());
}

template <class T>
void range(const std::string& key, T v, T lo, T hi) {
    if (!(v >= lo && v <= hi)) {
        std::ostringstream os;
        os << key << " = " << v << " outside [" << lo << ", " << hi << "]";
        bad(os.str());
    }
}

void one_of(const std::string& key, const std::string& v, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed)
        if (v == a) return;
    bad(key + " = '" + v + "' is not one of the accepted values");
}

}  // namespace

nlohmann::json RunConfig::recorded() const {
    return {{"command", command},     {"precision", precision}, {"theta", theta},
            {"mode", mode},           {"base", base},           {"scale", scale},
            {"levels", levels},       {"alpha", alpha},         {"depth", depth},
            {"grid", grid},           {"weights", weights},     {"weights_N", weights_N},
            {"stages", stages},       {"variant", variant},     {"strict_grid", strict_grid},
            {"scan_cap", scan_cap},   {"omega_bits_cap", omega_bits_cap}, {"n_max", n_max},
            {"kam_stages", kam_stages}, {"amplitude", amplitude}, {"h_degree", h_degree},
            {"kappa", kappa},         {"target", target},       {"smallness", smallness},
            {"repeats", repeats},     {"oracle", oracle},       {"perturbation", perturbation},
            {"kind", kind},           {"seed", seed},           {"threads", threads}};
}

RunConfig defaults() {
    RunConfig c;
    if (const char* p = std::getenv("WB_PRECISION")) {
        char* end = nullptr;
        long v = std::strtol(p, &end, 10);
        if (end == p || *end) bad(std::string("WB_PRECISION is not an integer: ") + p);
        c.precision = v;
    }
    return c;
}

void apply_json(RunConfig& c, const nlohmann::json& j) {
    if (!j.is_object()) bad("config must be a JSON object");
    for (const auto& [k, v] : j.items()) {
        if (k == "command") c.command = typed<std::string>(v, k);
        else if (k == "precision") c.precision = typed<long>(v, k);
        else if (k == "theta") c.theta = typed<std::string>(v, k);
        else if (k == "mode") c.mode = typed<std::string>(v, k);
        else if (k == "base") c.base = typed<std::string>(v, k);
        else if (k == "scale") c.scale = typed<std::string>(v, k);
        else if (k == "levels") c.levels = typed<int>(v, k);
        else if (k == "alpha") c.alpha = typed<std::string>(v, k);
        else if (k == "depth") c.depth = typed<int>(v, k);
        else if (k == "grid") c.grid = typed<int>(v, k);
        else if (k == "weights") c.weights = typed<std::string>(v, k);
        else if (k == "weights_N") c.weights_N = typed<int>(v, k);
        else if (k == "stages") c.stages = typed<int>(v, k);
        else if (k == "variant") c.variant = typed<std::string>(v, k);
        else if (k == "strict_grid") c.strict_grid = typed<bool>(v, k);
        else if (k == "scan_cap") c.scan_cap = typed<int>(v, k);
        else if (k == "omega_bits_cap") c.omega_bits_cap = typed<long>(v, k);
        else if (k == "n_max") c.n_max = typed<int>(v, k);
        else if (k == "kam_stages") c.kam_stages = typed<int>(v, k);
        else if (k == "amplitude") c.amplitude = typed<double>(v, k);
        else if (k == "h_degree") c.h_degree = typed<int>(v, k);
        else if (k == "kappa") c.kappa = typed<double>(v, k);
        else if (k == "target") c.target = typed<double>(v, k);
        else if (k == "smallness") c.smallness = typed<double>(v, k);
        else if (k == "repeats") c.repeats = typed<int>(v, k);
        else if (k == "oracle") c.oracle = typed<bool>(v, k);
        else if (k == "perturbation") c.perturbation = typed<std::string>(v, k);
        else if (k == "out") c.out = typed<std::string>(v, k);
        else if (k == "input") c.input = typed<std::string>(v, k);
        else if (k == "kind") c.kind = typed<std::string>(v, k);
        else if (k == "output") c.output = typed<std::string>(v, k);
        else if (k == "seed") c.seed = typed<unsigned long>(v, k);
        else if (k == "threads") c.threads = typed<int>(v, k);
        else bad("unknown config key '" + k + "'");
    }
}

void validate(const RunConfig& c) {
    range("precision", c.precision, 64L, 1L << 20);
    mpq_class th = parse_rational(c.theta);
    if (!(th > 0 && th < mpq_class(1, 2))) bad("theta must lie in (0, 1/2)");
    one_of("mode", c.mode, {"paper", "toy"});
    if (!(parse_rational(c.base) > 1)) bad("base must exceed 1");
    if (!(parse_rational(c.scale) > 0)) bad("scale must be positive");
    range("levels", c.levels, 1, 8);
    range("depth", c.depth, 1, 40);
    range("grid", c.grid, 2, 1024);
    range("weights_N", c.weights_N, 0, 60);
    range("stages", c.stages, 1, 30);
    one_of("variant", c.variant, {"definition14", "scoglio"});
    range("scan_cap", c.scan_cap, 1, 100000);
    range("omega_bits_cap", c.omega_bits_cap, 64L, 10000000L);
    range("n_max", c.n_max, 4, 256);
    range("kam_stages", c.kam_stages, 1, 40);
    range("amplitude", c.amplitude, 0.0, 0.1);
    if (c.amplitude <= 0) bad("amplitude must be positive");
    range("h_degree", c.h_degree, 1, 64);
    if (c.h_degree > c.n_max) bad("h_degree exceeds n_max");
    range("kappa", c.kappa, 1e-6, 1.0);
    range("target", c.target, 0.0, 1.0);
    range("smallness", c.smallness, 0.0, 1.0);
    range("repeats", c.repeats, 1, 16);
    range("threads", c.threads, 1, 1024);
    if (!c.kind.empty()) one_of("kind", c.kind, {"heatmap", "decay"});
    if (c.out.empty()) bad("out must name a directory");
}

GrowthSchedule growth(const RunConfig& c) {
    if (c.mode == "paper") return GrowthSchedule::paper();
    return GrowthSchedule::toy(parse_rational(c.base), parse_rational(c.scale));
}

RealVec parse_alpha(const std::string& spec, const RunConfig& c) {
    const long p = c.precision;
    auto sq = [&](double v) { return sqrt(Real(v, p)); };
    if (spec == "golden") return {(sq(5) - Real(1.0, p)) / Real(2.0, p)};
    if (spec == "sqrt2") return {sq(2) - Real(1.0, p)};
    if (spec == "sqrt23") return {sq(2) - Real(1.0, p), sq(3) - Real(1.0, p)};
    if (spec == "liouville") return {Real::from_mpq(cf_rational(0, liouville_quotients(4)), std::max(p, 6000L))};
    if (spec == "construction") {
        auto s = construct_levels(parse_rational(c.theta), growth(c), c.levels - 1);
        return construction_alpha(s, p);
    }
    RealVec out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) bad("empty component in alpha '" + spec + "'");
        if (item.find('/') != std::string::npos) {
            out.push_back(Real::from_mpq(parse_rational(item), p));
        } else {
            try {
                out.push_back(Real::parse(item, p));
            } catch (const std::exception&) {
                bad("cannot parse alpha component '" + item + "'");
            }
        }
    }
    if (out.empty() || out.size() > 2) bad("alpha must have one or two components");
    return out;
}

WeightSequence weights_for(const RunConfig& c, const RealVec& alpha) {
    const std::string& w = c.weights;
    if (w.rfind("constant:", 0) == 0) {
        double v = 0;
        try {
            v = std::stod(w.substr(9));
        } catch (const std::exception&) {
            bad("weights '" + w + "': bad constant");
        }
        if (!(v >= 0) || !std::isfinite(v)) bad("weights constant must be finite and nonnegative");
        return constant_weights(v, c.stages + 1, 1, c.weights_N);
    }
    if (w == "appendix") return appendix_weights(DivisorTable::build(alpha, 2L << c.stages), c.stages + 1, 1, c.weights_N);
    if (w == "construction") {
        auto s = construct_levels(parse_rational(c.theta), growth(c), c.levels - 1);
        return construction_weights(s, c.stages + 1, 1.0, 1.0, c.weights_N);
    }
    bad("weights must be constant:<v>, appendix or construction");
}

void write_atomic(const std::string& path, const std::string& data) {
    namespace fs = std::filesystem;
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) bad("cannot write " + tmp.string());
        f << data;
        f.flush();
        if (!f) bad("write failed: " + tmp.string());
    }
    fs::rename(tmp, p);
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) bad("cannot read " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

}  // namespace wb::cli
