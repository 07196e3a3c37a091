#pragma once

#include <json.hpp>
#include <ostream>
#include <string>
#include <vector>

#include "wb/construction.hpp"
#include "wb/diophantine.hpp"
#include "wb/errors.hpp"
#include "wb/report.hpp"
#include "wb/schedule.hpp"

namespace wb::cli {

// Every key a config file or flag may set. Defaults live in defaults().
struct RunConfig {
    std::string command;
    long precision = 256;
    std::string theta = "2/5";
    std::string mode = "toy";
    std::string base = "2";
    std::string scale = "1/8";
    int levels = 6;               // construction levels 0..levels-1
    std::string alpha;            // empty: the command's default
    int depth = 12;
    int grid = 16;
    std::string weights = "constant:0.5";
    int weights_N = 0;
    int stages = 8;
    std::string variant = "definition14";
    bool strict_grid = false;
    int scan_cap = 200;           // brute-force scale for construction scans
    long omega_bits_cap = 200000;
    int n_max = 32;
    int kam_stages = 8;
    double amplitude = 1e-3;
    int h_degree = 6;
    double kappa = 0.02;
    double target = 1e-12;
    double smallness = 1e-2;
    int repeats = 1;
    bool oracle = true;
    std::string perturbation;     // FourierMap JSON; empty: manufactured from seed
    std::string out = "out";
    std::string input;
    std::string kind;             // heatmap | decay; empty: from the CSV header
    std::string output;
    unsigned long seed = 1;
    int threads = 1;

    // the config as recorded in artifacts (no output locations)
    nlohmann::json recorded() const;
};

RunConfig defaults();
// keys: the JSON names above; unknown keys and out-of-range values raise ValidationError
void apply_json(RunConfig& c, const nlohmann::json& j);
void validate(const RunConfig& c);

GrowthSchedule growth(const RunConfig& c);
RealVec parse_alpha(const std::string& spec, const RunConfig& c);
WeightSequence weights_for(const RunConfig& c, const RealVec& alpha);

// write to path.tmp, then rename
void write_atomic(const std::string& path, const std::string& data);
std::string read_file(const std::string& path);

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
Csv parse_csv(const std::string& text);

extern const char* const kScheduleHeader;
extern const char* const kStagesHeader;
// fixed canvas, fixed number formatting; SchemaMismatch on a malformed CSV
std::string heatmap_svg(const std::string& schedule_csv);
std::string decay_svg(const std::string& stages_csv);

// exit codes: 0 success, 2 validation failure, 3 guarded numerical failure
int exit_code(ErrorKind k);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wb::cli
