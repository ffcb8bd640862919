#include "mcem/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include "mcem/diagnostics.hpp"
#include "mcem/em.hpp"
#include "mcem/engine.hpp"
#include "mcem/errors.hpp"
#include "mcem/glmm.hpp"
#include "mcem/lmm.hpp"
#include "mcem/trace.hpp"

namespace mcem {

namespace {

std::unique_ptr<Model> build_model(const RunConfig& cfg) {
    try {
        if (cfg.model == "lmm") {
            if (cfg.dataset.empty() || cfg.dataset == "builtin-bulls")
                return std::make_unique<LmmModel>(bulls_data());
            return std::make_unique<LmmModel>(load_grouped_csv(cfg.dataset));
        }
        if (cfg.dataset.empty() || cfg.dataset == "synthetic")
            return std::make_unique<GlmmModel>(
                glmm_synthetic(cfg.gen_q, cfg.gen_n, cfg.gen_beta,
                               cfg.gen_sigma2, cfg.gen_seed),
                cfg.burnin, cfg.quad_nodes);
        return std::make_unique<GlmmModel>(load_panel_csv(cfg.dataset),
                                           cfg.burnin, cfg.quad_nodes);
    } catch (const io_error& e) {
        // A bad dataset path comes from the config, so report it as such.
        throw config_error(std::string("dataset: ") + e.what());
    }
}

Theta resolve_theta0(const RunConfig& cfg) {
    if (cfg.model == "lmm") {
        if (cfg.theta0.empty()) return lmm_theta(55.0, 45.0, 260.0);
        return lmm_theta(cfg.theta0[0], cfg.theta0[1], cfg.theta0[2]);
    }
    if (cfg.theta0.empty()) return glmm_theta(2.0, 1.0);
    return glmm_theta(cfg.theta0[0], cfg.theta0[1]);
}

ScheduleConfig make_schedule(const RunConfig& cfg) {
    return cfg.schedule == "constant" ? constant_schedule(cfg.m0)
                                      : polynomial_schedule(cfg.m0, cfg.alpha);
}

StoppingConfig make_stopping(const RunConfig& cfg) {
    StoppingConfig stop;
    stop.delta = cfg.delta;
    stop.epsilon = cfg.epsilon;
    stop.consecutive = cfg.consecutive;
    stop.max_iter = cfg.max_iter;
    return stop;
}

std::string join_values(const Theta& theta) {
    std::string out;
    for (std::size_t i = 0; i < theta.dim(); ++i) {
        if (i) out += ',';
        out += format_double(theta[i]);
    }
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open '" + path + "' for writing");
    f << text;
    f.flush();
    if (!f) throw io_error("write failed for '" + path + "'");
}

// The published MLE target used by the experiments: the model's own EM
// fixed point (driven to machine precision) or the quadrature maximizer.
Theta experiment_target(const Model& model, const Theta& theta0,
                        const RunConfig& cfg) {
    if (model.has_em_step()) {
        StoppingConfig tight;
        tight.delta = cfg.delta;
        tight.epsilon = 1e-12;
        tight.consecutive = 3;
        tight.max_iter = std::max<std::int64_t>(cfg.max_iter, 2000);
        return run_em(model, theta0, tight).back().theta;
    }
    const auto* glmm = dynamic_cast<const GlmmModel*>(&model);
    if (!glmm)
        throw config_error("experiment: no way to locate the target optimum "
                           "for this model");
    return glmm_direct_mle(glmm->data(), cfg.quad_nodes);
}

} // namespace

int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        cfg.validate();
        const std::unique_ptr<Model> model = build_model(cfg);
        const Theta theta0 = resolve_theta0(cfg);
        const StoppingConfig stop = make_stopping(cfg);

        Trace tr;
        if (cfg.algorithm == "em") {
            tr = run_em(*model, theta0, stop);
        } else if (cfg.algorithm == "em-gradient") {
            tr = run_em_gradient(*model, theta0, stop);
        } else {
            RngStream rng(*cfg.seed);
            if (cfg.algorithm == "mcem") {
                tr = run_mcem(*model, theta0, make_schedule(cfg), stop, rng);
            } else if (cfg.algorithm == "stable-mcem") {
                const StableConfig sc =
                    StableConfig::make(theta0, cfg.r0, cfg.growth_c);
                tr = stable_mcem_run(*model, sc, make_schedule(cfg), stop, rng);
            } else { // mcem-adaptive
                AdaptiveConfig ac;
                ac.batches = cfg.batches;
                ac.conf = cfg.conf;
                ac.growth = cfg.adapt_growth;
                ac.m_start = cfg.m0;
                ac.m_cap = cfg.m_cap;
                tr = run_mcem_adaptive(*model, theta0, ac, stop, rng);
            }
        }

        trace_write(tr, cfg.out);
        if (tr.m_cap_hit)
            err << "warning: sample size cap reached while the update was "
                   "still swamped by Monte Carlo noise\n";
        const IterationRecord& last = tr.back();
        out << "theta=" << join_values(last.theta)
            << " loglik=" << format_double(last.loglik)
            << " iterations=" << tr.size() << " reinits=" << last.p << "\n";
        return 0;
    } catch (const config_error& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_experiment(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        cfg.validate();
        const bool needs_seed = cfg.exp_kind != "rate";
        if (needs_seed && !cfg.seed)
            throw config_error("experiment '" + cfg.exp_kind +
                               "' requires a seed");
        const std::unique_ptr<Model> model = build_model(cfg);
        const Theta theta0 = resolve_theta0(cfg);

        std::ostringstream csv;
        std::size_t rows = 0;

        if (cfg.exp_kind == "hit-prob") {
            const Theta target = experiment_target(*model, theta0, cfg);
            std::vector<double> scale;
            if (cfg.exp_standardized)
                for (std::size_t i = 0; i < target.dim(); ++i)
                    scale.push_back(std::fabs(target[i]) + 1.0);
            RngStream base(*cfg.seed);
            csv << "m,R,T0,epsilon,hits,fraction\n";
            for (std::size_t idx = 0; idx < cfg.exp_m_grid.size(); ++idx) {
                RngStream row_rng = base.split(idx);
                const HitProbResult res = hit_probability(
                    *model, theta0, target, cfg.exp_m_grid[idx], cfg.exp_t0,
                    cfg.exp_epsilon, cfg.exp_r, row_rng, scale);
                csv << res.m << ',' << res.runs << ',' << res.t0 << ','
                    << format_double(res.epsilon) << ',' << res.hits << ','
                    << format_double(res.fraction) << '\n';
                ++rows;
            }
        } else if (cfg.exp_kind == "rate") {
            if (!model->has_em_step())
                throw config_error("the rate experiment needs a model with an "
                                   "exact EM update (lmm)");
            // The estimator's precondition wants the trace essentially at the
            // fixed point, far tighter than the default stopping rule.
            StoppingConfig tight;
            tight.delta = cfg.delta;
            tight.epsilon = 1e-12;
            tight.consecutive = 3;
            tight.max_iter = std::max<std::int64_t>(cfg.max_iter, 2000);
            const Trace trace = run_em(*model, theta0, tight);
            const Theta target = trace.back().theta;
            const RateReport rep = rate_estimate(trace, target, cfg.exp_window);
            const double jac_rate =
                spectral_radius(em_map_jacobian(*model, target));
            csv << "window,median_rate,cv,jacobian_rate\n";
            csv << cfg.exp_window << ',' << format_double(rep.median_rate)
                << ',' << format_double(rep.cv) << ','
                << format_double(jac_rate) << '\n';
            rows = 1;
        } else { // mcem-error-scaling
            if (!model->has_em_step())
                throw config_error("the mcem-error-scaling experiment needs a "
                                   "model with an exact EM update (lmm)");
            const Theta target = model->em_step(theta0);
            RngStream base(*cfg.seed);
            csv << "m,seeds";
            for (const auto& name : target.names()) csv << ",dev_" << name;
            csv << '\n';
            for (std::size_t idx = 0; idx < cfg.exp_m_grid.size(); ++idx) {
                RngStream row_rng = base.split(idx);
                std::vector<std::vector<double>> devs(target.dim());
                for (int s = 0; s < cfg.exp_seeds; ++s) {
                    RngStream stream = row_rng.split(static_cast<std::uint64_t>(s));
                    const Theta got =
                        model->mcem_step(theta0, cfg.exp_m_grid[idx], stream);
                    for (std::size_t i = 0; i < target.dim(); ++i)
                        devs[i].push_back(std::fabs(got[i] - target[i]));
                }
                csv << cfg.exp_m_grid[idx] << ',' << cfg.exp_seeds;
                for (auto& d : devs) {
                    std::sort(d.begin(), d.end());
                    const std::size_t n = d.size();
                    const double med = (n % 2 == 1)
                                           ? d[n / 2]
                                           : 0.5 * (d[n / 2 - 1] + d[n / 2]);
                    csv << ',' << format_double(med);
                }
                csv << '\n';
                ++rows;
            }
        }

        write_text(cfg.out, csv.str());
        out << "wrote " << cfg.exp_kind << " results (" << rows << " rows) to "
            << cfg.out << "\n";
        return 0;
    } catch (const config_error& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_gen_data(const GenDataArgs& args, std::ostream& out, std::ostream& err) {
    try {
        if (args.model == "lmm") {
            save_grouped_csv(bulls_data(), args.out);
            out << "wrote builtin grouped dataset (" << bulls_data().N()
                << " rows) to " << args.out << "\n";
            return 0;
        }
        if (args.model != "glmm")
            throw config_error("gen-data: model must be 'lmm' or 'glmm', got '" +
                               args.model + "'");
        const PanelDataset data = glmm_synthetic(args.q, args.n, args.beta,
                                                 args.sigma2, args.seed);
        save_panel_csv(data, args.out);
        out << "wrote synthetic panel dataset (" << data.N() << " rows) to "
            << args.out << "\n";
        return 0;
    } catch (const config_error& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

namespace {

std::string python_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '\\' || c == '"') out += '\\';
        out += c;
    }
    out += '"';
    return out;
}

} // namespace

int cmd_plot_script(const std::vector<std::string>& traces,
                    const std::string& out_path, std::ostream& out,
                    std::ostream& err) {
    try {
        if (traces.empty())
            throw config_error("plot-script: need at least one trace CSV");

        std::ostringstream py;
        py << "#!/usr/bin/env python3\n"
           << "\"\"\"Plot iteration traces produced by the run subcommand.\"\"\"\n"
           << "import csv\n"
           << "import sys\n"
           << "\n"
           << "import matplotlib\n"
           << "matplotlib.use(\"Agg\")\n"
           << "import matplotlib.pyplot as plt\n"
           << "\n"
           << "TRACES = [\n";
        for (const auto& t : traces) py << "    " << python_quote(t) << ",\n";
        py << "]\n"
           << "\n"
           << "\n"
           << "def read_trace(path):\n"
           << "    with open(path, newline=\"\") as f:\n"
           << "        rows = list(csv.DictReader(f))\n"
           << "    if not rows:\n"
           << "        raise SystemExit(f\"{path}: no records\")\n"
           << "    return {name: [float(r[name]) for r in rows] for name in rows[0]}\n"
           << "\n"
           << "\n"
           << "def main():\n"
           << "    out = sys.argv[1] if len(sys.argv) > 1 else \"traces.png\"\n"
           << "    data = {path: read_trace(path) for path in TRACES}\n"
           << "    names = []  # union across traces; models may differ\n"
           << "    for cols in data.values():\n"
           << "        for c in cols:\n"
           << "            if c not in (\"t\", \"m\", \"p\", \"loglik\") and c not in names:\n"
           << "                names.append(c)\n"
           << "    n_panels = 1 + len(names)\n"
           << "    fig, axes = plt.subplots(n_panels, 1, figsize=(8, 3 * n_panels),\n"
           << "                             sharex=True, squeeze=False)\n"
           << "    axes = [ax for row in axes for ax in row]\n"
           << "    for path, cols in data.items():\n"
           << "        axes[0].plot(cols[\"t\"], cols[\"loglik\"], label=path)\n"
           << "        for k, name in enumerate(names, start=1):\n"
           << "            if name in cols:\n"
           << "                axes[k].plot(cols[\"t\"], cols[name], label=path)\n"
           << "    axes[0].set_ylabel(\"loglik\")\n"
           << "    for k, name in enumerate(names, start=1):\n"
           << "        axes[k].set_ylabel(name)\n"
           << "    axes[-1].set_xlabel(\"iteration\")\n"
           << "    axes[0].legend(loc=\"best\", fontsize=8)\n"
           << "    fig.tight_layout()\n"
           << "    fig.savefig(out, dpi=120)\n"
           << "    print(f\"wrote {out}\")\n"
           << "\n"
           << "\n"
           << "if __name__ == \"__main__\":\n"
           << "    main()\n";

        write_text(out_path, py.str());
        out << "wrote plot script for " << traces.size() << " trace(s) to "
            << out_path << "\n";
        return 0;
    } catch (const config_error& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace mcem
