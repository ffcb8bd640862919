#pragma once

#include <cstdint>
#include <vector>

#include "mcem/model.hpp"
#include "mcem/schedule.hpp"
#include "mcem/stopping.hpp"
#include "mcem/trace.hpp"

namespace mcem {

// Plain Monte Carlo EM: update #i uses m = schedule_size(cfg, i-1) fresh
// draws from the current conditional. Stopping as in run_em; loglik is
// recorded when the model supports it, NaN otherwise.
Trace run_mcem(const Model& model, const Theta& theta0,
               const ScheduleConfig& schedule, const StoppingConfig& stop,
               RngStream& rng);

enum class Transform { identity, log };

// Nested acceptance regions K_p around theta0: component i is inside when
// |T_i(theta_i) - T_i(theta0_i)| <= r0_i * c^p, with T_i = log for
// positive-domain components and identity otherwise. Boundary inclusive.
struct StableConfig {
    Theta theta0;
    std::vector<double> r0;          // per component, all > 0
    double c = 2.0;                  // region growth factor, > 1
    std::vector<Transform> transform;

    // Builds transforms from theta0's domain tags. Broadcasts a single r0
    // over all components. Validates (config_error) on bad r0/c.
    static StableConfig make(const Theta& theta0, std::vector<double> r0,
                             double c);
};

bool in_k_set(const Theta& theta, std::int64_t p, const StableConfig& cfg);

// Stabilized MCEM: run plain MCEM updates, but whenever an update lands
// outside the current K_p, discard it, reset theta to cfg.theta0 and grow
// the region (p += 1). The schedule index keeps advancing so sample sizes
// keep growing through reinitializations; records carry the current p.
// Requires a schedule with summable reciprocals (polynomial); constant
// schedules throw config_error. theta0 must satisfy in_k_set(theta0, 0).
Trace stable_mcem_run(const Model& model, const StableConfig& cfg,
                      const ScheduleConfig& schedule, const StoppingConfig& stop,
                      RngStream& rng);

struct AdaptiveConfig {
    int batches = 10;        // sub-updates per adaptation check, >= 2
    double conf = 0.95;      // interval level in (0,1)
    double growth = 1.5;     // m multiplier when swamped, > 1
    std::int64_t m_start = 100;
    std::int64_t m_cap = 100000;

    void validate() const;
};

struct AdaptResult {
    Theta theta_next;     // the full-m update
    std::int64_t m_next;  // m for the next iteration; never smaller than m
    bool swamped;         // update indistinguishable from Monte Carlo noise
};

// One adaptive update at sample size m (requires m >= 2*batches):
// run `batches` independent sub-updates of floor(m/batches) draws each to
// get componentwise spread, call the step swamped when the current theta
// sits inside every componentwise interval mean +/- z_conf * se, then take
// the reported update from m fresh draws. Swamped steps grow the next m by
// `growth` up to m_cap; m never decreases.
AdaptResult booth_hobert_adapt(const Model& model, const Theta& theta,
                               std::int64_t m, const AdaptiveConfig& cfg,
                               RngStream& rng);

// MCEM with the sample size driven by booth_hobert_adapt. Hitting m_cap
// while still swamped sets trace.m_cap_hit and the run continues at m_cap.
Trace run_mcem_adaptive(const Model& model, const Theta& theta0,
                        const AdaptiveConfig& cfg, const StoppingConfig& stop,
                        RngStream& rng);

enum class AscentDecision {
    accept, // estimated objective gain clears its Monte Carlo noise
    extend, // inconclusive; caller should enlarge the sample and retry
};

struct AscentReport {
    AscentDecision decision;
    double delta_q; // mean of per-draw objective differences
    double se;      // its standard error (iid or batch means)
};

// Decide whether theta_prop improves the Monte Carlo objective built from
// `draws`, the same E-step sample that produced theta_prop. Works on the
// per-draw differences d_k = complete_loglik(theta_prop, u_k) -
// complete_loglik(theta, u_k), so theta-free terms cancel exactly.
// Requires at least 10 draws (numeric_error otherwise). Standard error by
// iid formula when model.estep_iid(), batch means otherwise.
AscentReport ascent_check(const Model& model, const Theta& theta,
                          const Theta& theta_prop, const DrawMatrix& draws,
                          double conf);

} // namespace mcem
