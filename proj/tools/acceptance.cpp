#include <CLI11.hpp>
#include <iostream>

#include "criteria.hpp"
#include "cli.hpp"

// One line per acceptance criterion; exit status is the number of failures.
int main(int argc, char** argv) {
    CLI::App app{"acceptance checks, one line per criterion"};
    std::string workdir = "acceptance_runs";
    int threads = 1;
    std::vector<int> only;
    std::string json_path;
    app.add_option("--workdir", workdir, "scratch directory for the determinism runs");
    app.add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 1024));
    app.add_option("--only", only, "criterion ids to run")->check(CLI::Range(1, 10));
    app.add_option("--json", json_path, "also write the results as JSON");
    CLI11_PARSE(app, argc, argv);
    if (only.empty())
        for (int i = 1; i <= 10; ++i) only.push_back(i);

    int failures = 0;
    nlohmann::json all = nlohmann::json::array();
    for (int id : only) {
        auto r = wb::cli::run_criterion(id, workdir, threads);
        std::cout << wb::cli::format_line(r) << std::endl;
        failures += !r.pass;
        all.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"summary", r.summary}, {"seconds", r.seconds}});
    }
    std::cout << only.size() - failures << "/" << only.size() << " criteria pass" << std::endl;
    if (!json_path.empty()) wb::cli::write_atomic(json_path, all.dump(2) + "\n");
    return failures;
}
