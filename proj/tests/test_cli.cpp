#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <json.hpp>
#include <sstream>

#include "cli.hpp"
#include "wb/construction.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wb;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / "wb_test_cli" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int wb_run(std::vector<std::string> args) {
    std::ostringstream out, err;
    return cli::run(args, out, err);
}

json load(const fs::path& p) { return json::parse(cli::read_file(p.string())); }

}  // namespace

TEST_CASE("unknown config key is rejected") {
    auto d = scratch("badkey");
    cli::write_atomic((d / "c.json").string(), R"({"depth": 4, "colour": "red"})");
    CHECK(wb_run({"analyze", "--config", (d / "c.json").string(), "--out", d.string()}) == 2);
    auto diag = load(d / "diagnostic.json");
    CHECK(diag["schema"] == "wb.diagnostic/1");
    CHECK(diag["error_kind"] == "ValidationError");
    CHECK(diag["message"].get<std::string>().find("colour") != std::string::npos);
}

TEST_CASE("flags override the config file") {
    auto d = scratch("override");
    cli::write_atomic((d / "c.json").string(), R"({"depth": 4, "alpha": "golden"})");
    REQUIRE(wb_run({"analyze", "--config", (d / "c.json").string(), "--depth", "7", "--out", d.string()}) == 0);
    auto csv = cli::parse_csv(cli::read_file((d / "omega.csv").string()));
    CHECK(csv.rows.size() == 7);
    CHECK(load(d / "analysis.json")["config"]["depth"] == 7);
}

TEST_CASE("out-of-range flag value") {
    auto d = scratch("range");
    CHECK(wb_run({"linearize", "--amplitude", "0.5", "--out", d.string()}) == 2);
    CHECK(fs::exists(d / "diagnostic.json"));
    CHECK(wb_run({"analyze", "--depth", "abc", "--out", d.string()}) == 2);
}

TEST_CASE("analyze golden: omega table against brute force") {
    auto d = scratch("golden");
    REQUIRE(wb_run({"analyze", "--alpha", "golden", "--depth", "12", "--out", d.string()}) == 0);
    auto csv = cli::parse_csv(cli::read_file((d / "omega.csv").string()));
    REQUIRE(csv.header == std::vector<std::string>{"k", "two_pow_k", "omega", "partial_sum"});
    REQUIRE(csv.rows.size() == 12);
    const double g = (std::sqrt(5.0) - 1) / 2;
    double best = 1, sum = 0;
    long l = 1;
    for (int k = 1; k <= 12; ++k) {
        for (; l <= (1L << k); ++l) {
            const double x = g * double(l);
            best = std::min(best, std::fabs(x - std::round(x)));
        }
        sum += std::log(1 / best) / double(1L << k);
        const auto& row = csv.rows[k - 1];
        CHECK(std::stol(row[1]) == (1L << k));
        CHECK(std::stod(row[2]) == doctest::Approx(best).epsilon(1e-9));
        CHECK(std::stod(row[3]) == doctest::Approx(sum).epsilon(1e-9));
    }
    // continued fraction of the golden mean: all partial quotients 1, q_k Fibonacci
    auto cf = cli::parse_csv(cli::read_file((d / "cf.csv").string()));
    long q0 = 1, q1 = 1;
    for (size_t k = 1; k < cf.rows.size(); ++k) {
        CHECK(cf.rows[k][1] == "1");
        CHECK(std::stol(cf.rows[k][3]) == q1);
        const long t = q0 + q1;
        q0 = q1;
        q1 = t;
    }
}

TEST_CASE("construct writes a state that round-trips") {
    auto d = scratch("construct");
    // the seed's iter upper bound fails, so the run reports a validation failure after writing everything
    CHECK(wb_run({"construct", "--mode", "toy", "--levels", "2", "--out", d.string()}) == 2);
    for (const char* f : {"state.json", "construction_report.json", "construction_report.txt", "diagnostic.json"})
        CHECK(fs::exists(d / f));
    auto st = load(d / "state.json");
    CHECK(st["schema"] == "wb.run/1");
    auto s = state_from_json(st["state"]);
    auto again = construct_levels(mpq_class(2, 5), GrowthSchedule::toy(), 1);
    CHECK(s == again);
    CHECK(state_to_json(s) == st["state"]);
    auto diag = load(d / "diagnostic.json");
    CHECK(diag["message"].get<std::string>().find("iter.upper[0]") != std::string::npos);
}

TEST_CASE("linearize refuses a perturbation above the smallness threshold") {
    auto d = scratch("refuse");
    CHECK(wb_run({"linearize", "--smallness", "1e-5", "--out", d.string()}) == 3);
    auto diag = load(d / "diagnostic.json");
    CHECK(diag["error_kind"] == "GuardViolation");
    CHECK(diag["exit_code"] == 3);
    CHECK(diag["command"] == "linearize");
}

TEST_CASE("schedule and report are byte-deterministic") {
    auto a = scratch("sched_a"), b = scratch("sched_b");
    const std::vector<std::string> common = {"schedule", "--alpha", "golden", "--depth", "8"};
    auto with = [&](const fs::path& p) {
        auto v = common;
        v.insert(v.end(), {"--out", p.string()});
        return v;
    };
    REQUIRE(wb_run(with(a)) == 0);
    REQUIRE(wb_run(with(b)) == 0);
    for (const char* f : {"schedule.csv", "headline.json", "heatmap.svg"})
        CHECK(cli::read_file((a / f).string()) == cli::read_file((b / f).string()));

    // report regenerates the same SVG from the CSV, kind inferred from the header
    const auto svg = (a / "again.svg").string();
    REQUIRE(wb_run({"report", "--input", (a / "schedule.csv").string(), "--output", svg, "--out", a.string()}) == 0);
    CHECK(cli::read_file(svg) == cli::read_file((a / "heatmap.svg").string()));
}

TEST_CASE("malformed CSV is a schema mismatch") {
    auto d = scratch("badcsv");
    std::string csv = cli::kScheduleHeader;
    csv += "\n0,0,1,0\n";
    CHECK_THROWS_AS(cli::heatmap_svg(csv), Error);
    try {
        cli::heatmap_svg(csv);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SchemaMismatch);
    }
    cli::write_atomic((d / "bad.csv").string(), "x,y\n1,2\n");
    CHECK(wb_run({"report", "--input", (d / "bad.csv").string(), "--out", d.string()}) == 2);
    CHECK(load(d / "diagnostic.json")["error_kind"] == "SchemaMismatch");
    cli::write_atomic((d / "short.csv").string(), csv);
    CHECK(wb_run({"report", "--input", (d / "short.csv").string(), "--out", d.string()}) == 2);
}

TEST_CASE("exit code mapping") {
    CHECK(cli::exit_code(ErrorKind::ValidationError) == 2);
    CHECK(cli::exit_code(ErrorKind::SchemaMismatch) == 2);
    CHECK(cli::exit_code(ErrorKind::GuardViolation) == 3);
    CHECK(cli::exit_code(ErrorKind::StepDiverged) == 3);
}
