#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mcem {

// One `key = value` per line, `#` starts a comment, blank lines ignored,
// no sections. Parse errors are config_error and name the key and line.
struct RunConfig {
    std::string model;             // lmm | glmm
    std::string algorithm;         // em | em-gradient | mcem | stable-mcem | mcem-adaptive
    std::string dataset;           // builtin-bulls | synthetic | <path>; default by model
    std::vector<double> theta0;    // default by model
    std::optional<std::uint64_t> seed; // required by the mcem variants
    std::string out = "trace.csv";

    // stopping
    double delta = 1e-3;
    double epsilon = 1e-6;
    int consecutive = 3;
    std::int64_t max_iter = 500;

    // schedule
    std::string schedule = "constant"; // constant | polynomial
    std::int64_t m0 = 1000;
    double alpha = 2.0;

    // stabilized runs
    std::vector<double> r0 = {1.0}; // single value broadcasts
    double growth_c = 2.0;

    // sample-size adaptation
    int batches = 10;
    double conf = 0.95;
    double adapt_growth = 1.5;
    std::int64_t m_cap = 100000;

    // glmm sampling/integration
    std::int64_t burnin = 500;
    int quad_nodes = 32;

    // synthetic glmm generation
    int gen_q = 10;
    int gen_n = 15;
    double gen_beta = 6.0;
    double gen_sigma2 = 2.0;
    std::uint64_t gen_seed = 606;

    // experiments
    std::string exp_kind = "hit-prob"; // hit-prob | rate | mcem-error-scaling
    std::vector<std::int64_t> exp_m_grid = {100, 1000, 10000};
    int exp_t0 = 30;
    double exp_epsilon = 0.5;
    int exp_r = 50;
    bool exp_standardized = false;
    int exp_window = 10;
    int exp_seeds = 30;

    // Cross-field checks (model/algorithm compatibility, seed presence,
    // schedule sanity for the chosen algorithm). Throws config_error.
    void validate() const;
};

struct ConfigKeyInfo {
    const char* key;
    const char* type;     // human-readable
    const char* def;      // default shown by --help ("" = required)
    const char* help;
};

// The single source of truth for accepted keys: the parser accepts exactly
// this set and --help prints exactly this set.
const std::vector<ConfigKeyInfo>& config_keys();

RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);

std::string config_help_text();

} // namespace mcem
