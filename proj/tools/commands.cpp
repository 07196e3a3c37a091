#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <set>

#include "cli.hpp"
#include "criteria.hpp"
#include "wb/errors.hpp"
#include "wb/fourier.hpp"
#include "wb/kam.hpp"

namespace wb::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* const kDiagnosticSchema = "wb.diagnostic/1";

struct Flag {
    const char* key;
    const char* help;
    bool text;   // kept as a string; otherwise parsed as a JSON scalar
};

const Flag kFlags[] = {
    {"precision", "MPFR working precision in bits (default: WB_PRECISION or 256)", false},
    {"theta", "twist exponent, rational in (0, 1/2)", true},
    {"mode", "growth schedule: paper | toy", true},
    {"base", "toy growth base (rational > 1)", true},
    {"scale", "toy exponent scale (rational > 0)", true},
    {"levels", "construction levels 0..levels-1", false},
    {"alpha", "golden | sqrt2 | sqrt23 | liouville | construction | x[,y]", true},
    {"depth", "continued-fraction / dyadic depth", false},
    {"grid", "directions on the circle", false},
    {"weights", "constant:<c> | appendix | construction", true},
    {"weights_N", "stages held at the initial radius", false},
    {"stages", "schedule stages", false},
    {"variant", "definition14 | scoglio", true},
    {"strict_grid", "fail instead of clamping the neighbourhood radius", false},
    {"scan_cap", "brute-force scale for construction scans", false},
    {"omega_bits_cap", "largest q~ (bits) for exact lattice minima", false},
    {"n_max", "Fourier truncation of the KAM run", false},
    {"kam_stages", "KAM stage budget", false},
    {"amplitude", "||h*|| of the manufactured conjugacy", false},
    {"h_degree", "degree of the manufactured conjugacy", false},
    {"kappa", "KAM radii = kappa * schedule", false},
    {"target", "stop once ||df|| drops below", false},
    {"smallness", "refuse perturbations with a larger initial norm", false},
    {"repeats", "cohomological solves per stage", false},
    {"oracle", "direct-composition oracle at every stage", false},
    {"perturbation", "FourierMap JSON of f - R_alpha (default: manufactured)", true},
    {"out", "output directory", true},
    {"input", "CSV to render (report)", true},
    {"kind", "heatmap | decay (default: from the CSV header)", true},
    {"output", "SVG path (report)", true},
    {"seed", "seed for randomized inputs", false},
    {"threads", "worker threads", false},
};

std::string flag_name(const char* key) {
    std::string s = key;
    for (auto& ch : s)
        if (ch == '_') ch = '-';
    return "--" + s;
}

json stamp(const RunConfig& c) { return {{"schema", "wb.run/1"}, {"config", c.recorded()}}; }

std::string path_in(const RunConfig& c, const std::string& name) { return (fs::path(c.out) / name).string(); }

void put_json(const RunConfig& c, const std::string& name, const json& j) { write_atomic(path_in(c, name), j.dump(2) + "\n"); }

std::string num17(double v) {
    char b[40];
    std::snprintf(b, sizeof b, "%.17g", v);
    return b;
}

// ---------------------------------------------------------------------------

int cmd_construct(const RunConfig& c, std::ostream& out) {
    auto s = construct_levels(parse_rational(c.theta), growth(c), c.levels - 1);
    VerificationReport rep = verify_construction(s);
    if (s.level >= 1 && s.record(0).q_tilde <= 100000) rep.append(verify_divisor_bounds(s, 0));
    if (s.level >= 1) rep.append(verify_criterio(s, c.scan_cap, c.omega_bits_cap));
    json st = stamp(c);
    st["state"] = state_to_json(s);
    put_json(c, "state.json", st);
    json rj = stamp(c);
    rj["report"] = rep.to_json();
    put_json(c, "construction_report.json", rj);
    write_atomic(path_in(c, "construction_report.txt"), rep.to_text());
    out << "construct: " << c.levels << " levels (" << s.schedule.describe() << "), "
        << rep.entries.size() - rep.failures() << "/" << rep.entries.size() << " checks pass\n";
    if (rep.failures()) {
        std::string names;
        for (const auto& e : rep.entries)
            if (!e.pass) names += " " + e.name + "[" + std::to_string(e.level) + "]";
        fail(ErrorKind::ValidationError, "verification failures:" + names);
    }
    return 0;
}

int cmd_analyze(const RunConfig& c, std::ostream& out) {
    const RealVec a = parse_alpha(c.alpha.empty() ? "golden" : c.alpha, c);
    const int d = int(a.size());
    if (d == 2 && c.depth > 10)
        fail(ErrorKind::ScanTooLarge, "a two-dimensional scan to 2^" + std::to_string(c.depth) + " is beyond budget (depth <= 10)");
    json j = stamp(c);
    j["alpha"] = json::array();
    for (const auto& x : a) j["alpha"].push_back(x.str(30));
    if (d == 1) {
        ContinuedFraction cf = continued_fraction(a[0], c.depth);
        std::string csv = "k,a_k,p_k,q_k\n";
        for (int k = 0; k <= cf.depth; ++k)
            csv += std::to_string(k) + "," + (k ? cf.a[k] : cf.a0).get_str() + "," + cf.p[k].get_str() + "," +
                   cf.q[k].get_str() + "\n";
        write_atomic(path_in(c, "cf.csv"), csv);
        BryunoSums b = bryuno_1d(a[0], c.depth);
        j["bryuno_function_partial"] = b.b_function.str(20);
        j["bryuno_series_partial"] = b.q_sum.str(20);
    }
    auto table = omega_dyadic(a, c.depth);
    std::string csv = "k,two_pow_k,omega,partial_sum\n";
    j["argmin"] = json::array();
    for (int k = 1; k <= c.depth; ++k) {
        const auto& rec = table[k - 1];
        csv += std::to_string(k) + "," + std::to_string(1L << k) + "," + rec.value.str(17) + "," +
               bryuno_partial_sum(table, k).str(17) + "\n";
        j["argmin"].push_back(rec.argmin);
    }
    write_atomic(path_in(c, "omega.csv"), csv);
    put_json(c, "analysis.json", j);
    out << "analyze: d = " << d << ", depth " << c.depth << ", partial sum " << bryuno_partial_sum(table, c.depth).str(10)
        << "\n";
    return 0;
}

DeltaSchedule build_schedule(const RunConfig& c, const RealVec& a) {
    const DirectionGrid g = a.size() == 1 ? DirectionGrid::two_point() : DirectionGrid::circle(c.grid);
    ScheduleOptions opt;
    opt.variant = c.variant == "scoglio" ? ScheduleVariant::Scoglio : ScheduleVariant::Definition14;
    opt.strict_grid = c.strict_grid;
    opt.threads = c.threads;
    return delta_schedule(a, g, weights_for(c, a), c.stages, opt);
}

int cmd_schedule(const RunConfig& c, std::ostream& out) {
    const RealVec a = parse_alpha(c.alpha.empty() ? "sqrt23" : c.alpha, c);
    DeltaSchedule s = build_schedule(c, a);
    write_atomic(path_in(c, "schedule.csv"), s.to_csv());
    json j = stamp(c);
    j["headline"] = s.headline();
    put_json(c, "headline.json", j);
    write_atomic(path_in(c, "heatmap.svg"), heatmap_svg(s.to_csv()));
    out << "schedule: " << s.grid.size() << " directions x " << s.n_max + 1 << " stages, inf delta "
        << num17(s.inf_delta()) << "\n";
    return 0;
}

FourierMap zero_mean(FourierMap f) {
    const Lattice z(f.d, 0);
    for (auto& col : f.comp) col[f.index(z)] = 0;
    return f;
}

int cmd_linearize(const RunConfig& c, std::ostream& out) {
    const RealVec a = parse_alpha(c.alpha.empty() ? "sqrt23" : c.alpha, c);
    const int d = int(a.size());
    KamParams p;
    p.alpha = a;
    p.N_max = c.n_max;
    p.max_stages = c.kam_stages;
    p.repeats = c.repeats;
    p.target = c.target;
    p.smallness = c.smallness;
    p.kappa = c.kappa;
    p.grid = c.grid;
    p.oracle = c.oracle;
    p.threads = c.threads;

    json j = stamp(c);
    FourierMap df, hs;
    const bool manufactured = c.perturbation.empty();
    if (manufactured) {
        std::mt19937_64 rng(c.seed);
        hs = zero_mean(random_map(d, c.h_degree, d, 1.0, 0.5, rng));
        hs *= c.amplitude / hs.abs_sum();
        double spill = 0;
        df = manufacture_test_map(hs, a, c.n_max, c.threads, &spill);
        j["manufactured"] = {{"h_star_norm", hs.abs_sum()}, {"h_star_degree", c.h_degree}, {"spill", spill}};
        put_json(c, "h_star.json", hs.to_json());
    } else {
        json in;
        try {
            in = json::parse(read_file(c.perturbation));
        } catch (const json::exception& e) {
            fail(ErrorKind::SchemaMismatch, c.perturbation + ": " + e.what());
        }
        df = FourierMap::from_json(in);
    }
    put_json(c, "perturbation.json", df.to_json());

    const auto t0 = std::chrono::steady_clock::now();
    LinearizeResult R;
    try {
        R = run_linearize(df, p);
    } catch (const LedgerError& e) {
        // the partial ledger is an artifact of the failed run
        put_json(c, "ledger.json", e.ledger());
        throw;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    j["summary"] = R.summary();
    if (manufactured) {
        // the conjugacy is unique up to a translation: eta - c = h* o T_c
        const auto m = R.eta.mean();
        ComposeOptions co;
        co.N_out = c.n_max;
        FourierMap shifted = compose_shift(hs, FourierMap::constant(d, m), co).map;
        j["summary"]["distance_to_h_star_up_to_translation"] = (R.eta - FourierMap::constant(d, m) - shifted).abs_sum();
    }
    const std::string csv = R.stages_csv();
    write_atomic(path_in(c, "stages.csv"), csv);
    put_json(c, "summary.json", j);
    put_json(c, "conjugacy.json", R.eta.to_json());
    if (!R.state.steps.empty()) write_atomic(path_in(c, "decay.svg"), decay_svg(csv));
    char b[64];
    std::snprintf(b, sizeof b, "%.2f s", secs);
    out << "linearize: " << R.state.steps.size() << " stages, defect " << num17(R.defect) << " (direct "
        << num17(R.defect_direct) << "), stop: " << R.stop_reason << ", " << b << "\n";
    if (!R.converged) fail(ErrorKind::StepDiverged, "no convergence within the stage budget: " + R.stop_reason);
    return 0;
}

int cmd_verify(const RunConfig& c, std::ostream& out) {
    json j = stamp(c);
    j["criteria"] = json::array();
    std::string text, failed;
    for (int id = 1; id <= 9; ++id) {
        CriterionResult r = run_criterion(id, c.out, c.threads);
        out << format_line(r) << "\n" << std::flush;
        j["criteria"].push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"summary", r.summary}, {"detail", r.detail}});
        text += std::string(r.pass ? "PASS" : "FAIL") + "  [" + std::to_string(id) + "] " + r.name + ": " + r.summary + "\n";
        if (!r.pass) failed += " " + std::to_string(id);
    }
    put_json(c, "verify_report.json", j);
    write_atomic(path_in(c, "verify_report.txt"), text);
    if (!failed.empty()) fail(ErrorKind::ValidationError, "failing checks:" + failed);
    return 0;
}

int cmd_report(const RunConfig& c, std::ostream& out) {
    if (c.input.empty()) fail(ErrorKind::ValidationError, "report needs --input <csv>");
    const std::string text = read_file(c.input);
    std::string kind = c.kind;
    if (kind.empty()) {
        const std::string first = text.substr(0, text.find('\n'));
        if (first == kScheduleHeader) kind = "heatmap";
        else if (first == kStagesHeader) kind = "decay";
        else fail(ErrorKind::SchemaMismatch, "unrecognised CSV header '" + first + "'");
    }
    const std::string svg = kind == "heatmap" ? heatmap_svg(text) : decay_svg(text);
    const std::string dest = c.output.empty() ? path_in(c, kind + ".svg") : c.output;
    write_atomic(dest, svg);
    out << "report: " << kind << " -> " << dest << "\n";
    return 0;
}

void diagnose(const std::string& outdir, const std::string& command, const std::string& kind, const std::string& msg,
              int code, const json* ledger, std::ostream& err) {
    err << "error (" << kind << "): " << msg << "\n";
    json d = {{"schema", kDiagnosticSchema}, {"command", command}, {"error_kind", kind}, {"message", msg},
              {"exit_code", code}};
    if (ledger) d["ledger"] = *ledger;
    try {
        write_atomic((fs::path(outdir.empty() ? "." : outdir) / "diagnostic.json").string(), d.dump(2) + "\n");
    } catch (const std::exception& e) {
        err << "could not write diagnostic.json: " << e.what() << "\n";
    }
}

}  // namespace

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::ValidationError:
        case ErrorKind::SchemaMismatch:
        case ErrorKind::RationalTruncation:
        case ErrorKind::ZeroVector:
            return 2;
        default:
            return 3;
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"weak-Bryuno construction, schedules and KAM linearization"};
    app.require_subcommand(1);
    std::string config_path;
    std::map<std::string, std::string> raw;
    const char* names[] = {"construct", "analyze", "schedule", "linearize", "verify", "report"};
    const char* about[] = {"build the twisted vector and verify its identities",
                           "continued fraction, small divisors and Bryuno sums",
                           "delta schedule CSV and headline",
                           "KAM linearization of a perturbed rotation",
                           "run the property suite across modules",
                           "render an SVG from a schedule or stages CSV"};
    for (int i = 0; i < 6; ++i) {
        CLI::App* sub = app.add_subcommand(names[i], about[i]);
        sub->add_option("--config", config_path, "JSON config; flags override its keys");
        for (const Flag& f : kFlags) sub->add_option(flag_name(f.key), raw[f.key], f.help);
    }

    const long saved_precision = default_precision();
    std::string command, outdir = "out";
    int code = 0;
    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        try {
            app.parse(rev);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e, out, err);
        } catch (const CLI::ParseError& e) {
            app.exit(e, out, err);
            fail(ErrorKind::ValidationError, e.what());
        }
        for (auto* s : app.get_subcommands()) command = s->get_name();
        // a bad config still reports into the requested directory
        if (app.get_subcommand(command)->count("--out")) outdir = raw["out"];
        RunConfig c = defaults();
        if (!config_path.empty()) {
            json j;
            try {
                j = json::parse(read_file(config_path));
            } catch (const json::exception& e) {
                fail(ErrorKind::ValidationError, config_path + ": " + e.what());
            }
            apply_json(c, j);
        }
        json over = json::object();
        CLI::App* sub = app.get_subcommand(command);
        for (const Flag& f : kFlags) {
            if (sub->count(flag_name(f.key)) == 0) continue;
            const std::string& v = raw[f.key];
            if (f.text) {
                over[f.key] = v;
            } else {
                try {
                    over[f.key] = json::parse(v);
                } catch (const json::exception&) {
                    fail(ErrorKind::ValidationError, flag_name(f.key) + ": cannot parse '" + v + "'");
                }
            }
        }
        apply_json(c, over);
        c.command = command;
        outdir = c.out;
        validate(c);
        set_default_precision(c.precision);
        if (command == "construct") code = cmd_construct(c, out);
        else if (command == "analyze") code = cmd_analyze(c, out);
        else if (command == "schedule") code = cmd_schedule(c, out);
        else if (command == "linearize") code = cmd_linearize(c, out);
        else if (command == "verify") code = cmd_verify(c, out);
        else code = cmd_report(c, out);
    } catch (const LedgerError& e) {
        code = exit_code(e.kind());
        diagnose(outdir, command, kind_name(e.kind()), e.what(), code, &e.ledger(), err);
    } catch (const Error& e) {
        code = exit_code(e.kind());
        diagnose(outdir, command, kind_name(e.kind()), e.what(), code, nullptr, err);
    } catch (const std::exception& e) {
        code = 2;
        diagnose(outdir, command, "ValidationError", e.what(), code, nullptr, err);
    }
    set_default_precision(saved_precision);
    return code;
}

}  // namespace wb::cli
