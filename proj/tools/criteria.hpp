#pragma once

#include <json.hpp>
#include <string>
#include <vector>

namespace wb::cli {

struct CriterionResult {
    CriterionResult(int id, std::string name) : id(id), name(std::move(name)) {}
    int id = 0;
    std::string name;
    bool pass = false;
    std::string summary;      // one line, no timings
    double seconds = 0;
    nlohmann::json detail;    // deterministic
};

// Runs criterion id (1..10). Criterion 10 writes two runs under workdir.
CriterionResult run_criterion(int id, const std::string& workdir, int threads = 1);
std::string format_line(const CriterionResult& r);

}  // namespace wb::cli
