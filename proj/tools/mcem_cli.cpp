#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mcem/commands.hpp"
#include "mcem/config.hpp"
#include "mcem/errors.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out;
    bool out_given = false;
};

// Flags always win over config file keys.
void apply_overrides(mcem::RunConfig& cfg, const CommonFlags& flags) {
    if (flags.seed_given) cfg.seed = flags.seed;
    if (flags.out_given) cfg.out = flags.out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"EM and Monte Carlo EM for two-stage hierarchical models"};
    app.require_subcommand(1);

    CommonFlags run_flags, exp_flags;
    std::string exp_kind_override;

    CLI::App* run = app.add_subcommand(
        "run", "Run one algorithm and write its iteration trace CSV");
    run->add_option("--config", run_flags.config_path, "config file path")
        ->required();
    auto* run_seed = run->add_option("--seed", run_flags.seed,
                                     "random seed (overrides the config)");
    auto* run_out =
        run->add_option("--out", run_flags.out, "trace CSV path (overrides)");
    run->footer(mcem::config_help_text());

    CLI::App* exp = app.add_subcommand(
        "experiment", "Sweep a study over its grid and write one CSV row per cell");
    exp->add_option("--config", exp_flags.config_path, "config file path")
        ->required();
    auto* exp_seed = exp->add_option("--seed", exp_flags.seed,
                                     "random seed (overrides the config)");
    auto* exp_out =
        exp->add_option("--out", exp_flags.out, "results CSV path (overrides)");
    auto* exp_kind = exp->add_option("--kind", exp_kind_override,
                                     "experiment kind (overrides exp_kind)");
    exp->footer(mcem::config_help_text());

    mcem::GenDataArgs gen;
    CLI::App* gd = app.add_subcommand("gen-data", "Write a dataset CSV");
    gd->add_option("--model", gen.model, "lmm|glmm")->capture_default_str();
    gd->add_option("--q", gen.q, "groups (glmm)")->capture_default_str();
    gd->add_option("--n", gen.n, "observations per group (glmm)")
        ->capture_default_str();
    gd->add_option("--beta", gen.beta, "true slope (glmm)")
        ->capture_default_str();
    gd->add_option("--sigma2", gen.sigma2, "true intercept variance (glmm)")
        ->capture_default_str();
    gd->add_option("--seed", gen.seed, "generation seed")->capture_default_str();
    gd->add_option("--out", gen.out, "output CSV path")->capture_default_str();

    std::vector<std::string> plot_traces;
    std::string plot_out = "plot_traces.py";
    CLI::App* ps = app.add_subcommand(
        "plot-script", "Emit a Python script that plots trace CSVs");
    ps->add_option("traces", plot_traces, "trace CSV paths")->required();
    ps->add_option("--out", plot_out, "script path")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // prints help, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e, std::cout, std::cerr);
        return 2;
    }

    try {
        if (run->parsed()) {
            run_flags.seed_given = run_seed->count() > 0;
            run_flags.out_given = run_out->count() > 0;
            mcem::RunConfig cfg = mcem::load_config_file(run_flags.config_path);
            apply_overrides(cfg, run_flags);
            return mcem::cmd_run(cfg, std::cout, std::cerr);
        }
        if (exp->parsed()) {
            exp_flags.seed_given = exp_seed->count() > 0;
            exp_flags.out_given = exp_out->count() > 0;
            mcem::RunConfig cfg = mcem::load_config_file(exp_flags.config_path);
            apply_overrides(cfg, exp_flags);
            if (exp_kind->count() > 0) cfg.exp_kind = exp_kind_override;
            return mcem::cmd_experiment(cfg, std::cout, std::cerr);
        }
        if (gd->parsed()) return mcem::cmd_gen_data(gen, std::cout, std::cerr);
        if (ps->parsed())
            return mcem::cmd_plot_script(plot_traces, plot_out, std::cout,
                                         std::cerr);
    } catch (const mcem::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const mcem::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2; // no subcommand (require_subcommand should prevent this)
}
