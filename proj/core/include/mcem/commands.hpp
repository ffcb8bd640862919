#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mcem/config.hpp"

namespace mcem {

// Subcommand bodies, callable in-process (the CLI binary is a thin shell
// around these). Each returns the process exit code:
//   0 success, 1 numeric/convergence failure, 2 config or usage error.
// Human-readable status goes to `out`, errors to `err`.

// Runs the configured algorithm, writes the trace CSV to cfg.out and one
// summary line (final theta, final loglik, iterations, reinits) to `out`.
int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Runs the configured experiment kind over its grid and writes one CSV row
// per grid cell to cfg.out. Schemas:
//   hit-prob:           m,R,T0,epsilon,hits,fraction
//   rate:               window,median_rate,cv,jacobian_rate
//   mcem-error-scaling: m,seeds,dev_<component>...
int cmd_experiment(const RunConfig& cfg, std::ostream& out, std::ostream& err);

struct GenDataArgs {
    std::string model = "glmm"; // lmm writes the builtin grouped dataset
    int q = 10;
    int n = 15;
    double beta = 6.0;
    double sigma2 = 2.0;
    std::uint64_t seed = 606;
    std::string out = "data.csv";
};
int cmd_gen_data(const GenDataArgs& args, std::ostream& out, std::ostream& err);

// Emits a self-contained Python script that plots the given trace CSVs
// (loglik and component panels). The script is written, not executed.
int cmd_plot_script(const std::vector<std::string>& traces,
                    const std::string& out_path, std::ostream& out,
                    std::ostream& err);

} // namespace mcem
