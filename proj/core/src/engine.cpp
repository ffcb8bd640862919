#include "mcem/engine.hpp"

#include <chrono>
#include <cmath>

#include "accum.hpp"
#include "mcem/errors.hpp"

namespace mcem {

namespace {

double record_loglik(const Model& model, const Theta& theta) {
    return model.has_loglik() ? model.loglik(theta) : std::nan("");
}

double wall_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - t0)
        .count();
}

} // namespace

Trace run_mcem(const Model& model, const Theta& theta0,
               const ScheduleConfig& schedule, const StoppingConfig& stop,
               RngStream& rng) {
    schedule.validate();
    stop.validate();
    theta0.validate();

    Trace tr;
    tr.component_names = theta0.names();
    std::vector<bool> small;
    Theta cur = theta0;

    for (std::int64_t t = 1; t <= stop.max_iter; ++t) {
        auto t0 = std::chrono::steady_clock::now();
        const std::int64_t m = schedule_size(schedule, t - 1);
        Theta next = model.mcem_step(cur, m, rng);
        next.validate();
        IterationRecord rec;
        rec.t = t;
        rec.theta = next;
        rec.loglik = record_loglik(model, next);
        rec.m = m;
        rec.p = 0;
        rec.wall_ms = wall_since(t0);
        small.push_back(
            stopping_relative_change(cur, next, stop.delta, stop.epsilon));
        cur = std::move(next);
        tr.push(std::move(rec));
        if (stopping_consecutive(small, stop.consecutive)) break;
    }
    return tr;
}

StableConfig StableConfig::make(const Theta& theta0, std::vector<double> r0,
                                double c) {
    theta0.validate();
    if (r0.size() == 1 && theta0.dim() > 1)
        r0.assign(theta0.dim(), r0[0]);
    if (r0.size() != theta0.dim())
        throw config_error("stable config: r0 needs one radius per component");
    for (double r : r0)
        if (!(r > 0.0)) throw config_error("stable config: radii must be > 0");
    if (!(c > 1.0)) throw config_error("stable config: growth factor c must be > 1");

    StableConfig cfg;
    cfg.theta0 = theta0;
    cfg.r0 = std::move(r0);
    cfg.c = c;
    cfg.transform.reserve(theta0.dim());
    for (Domain d : theta0.domains())
        cfg.transform.push_back(d == Domain::positive ? Transform::log
                                                      : Transform::identity);
    return cfg;
}

namespace {

double apply_transform(Transform tf, double x) {
    return tf == Transform::log ? std::log(x) : x;
}

void check_stable_config(const StableConfig& cfg) {
    if (cfg.r0.size() != cfg.theta0.dim() ||
        cfg.transform.size() != cfg.theta0.dim())
        throw config_error("stable config: r0/transform size does not match theta0");
    for (double r : cfg.r0)
        if (!(r > 0.0)) throw config_error("stable config: radii must be > 0");
    if (!(cfg.c > 1.0))
        throw config_error("stable config: growth factor c must be > 1");
}

} // namespace

bool in_k_set(const Theta& theta, std::int64_t p, const StableConfig& cfg) {
    check_stable_config(cfg);
    if (p < 0) throw config_error("in_k_set: p must be >= 0");
    if (theta.dim() != cfg.theta0.dim())
        throw config_error("in_k_set: dimension mismatch");
    const double scale = std::pow(cfg.c, static_cast<double>(p));
    for (std::size_t i = 0; i < theta.dim(); ++i) {
        const double ti = apply_transform(cfg.transform[i], theta[i]);
        const double t0 = apply_transform(cfg.transform[i], cfg.theta0[i]);
        const double radius = cfg.r0[i] * scale;
        // NaN (log of a negative value) and infinities land outside.
        if (!(std::fabs(ti - t0) <= radius)) return false;
    }
    return true;
}

Trace stable_mcem_run(const Model& model, const StableConfig& cfg,
                      const ScheduleConfig& schedule, const StoppingConfig& stop,
                      RngStream& rng) {
    check_stable_config(cfg);
    schedule.validate();
    stop.validate();
    if (schedule.kind != ScheduleKind::polynomial)
        throw config_error("stable-mcem: the sample size schedule must have "
                           "summable reciprocals; use a polynomial schedule");
    if (!in_k_set(cfg.theta0, 0, cfg))
        throw config_error("stable-mcem: theta0 must lie in the initial region");

    Trace tr;
    tr.component_names = cfg.theta0.names();
    std::vector<bool> small;
    Theta cur = cfg.theta0;
    std::int64_t p = 0;

    for (std::int64_t t = 1; t <= stop.max_iter; ++t) {
        auto t0 = std::chrono::steady_clock::now();
        const std::int64_t m = schedule_size(schedule, t - 1);
        Theta prop = model.mcem_step(cur, m, rng);
        prop.validate();
        if (in_k_set(prop, p, cfg)) {
            small.push_back(
                stopping_relative_change(cur, prop, stop.delta, stop.epsilon));
            cur = std::move(prop);
        } else {
            // Escaped the current region: drop the update, restart from the
            // anchor and widen the region. Stopping history restarts too.
            p += 1;
            cur = cfg.theta0;
            small.clear();
        }
        IterationRecord rec;
        rec.t = t;
        rec.theta = cur;
        rec.loglik = record_loglik(model, cur);
        rec.m = m;
        rec.p = p;
        rec.wall_ms = wall_since(t0);
        tr.push(std::move(rec));
        if (stopping_consecutive(small, stop.consecutive)) break;
    }
    return tr;
}

void AdaptiveConfig::validate() const {
    if (batches < 2) throw config_error("adaptive: batches must be >= 2");
    if (!(conf > 0.0 && conf < 1.0))
        throw config_error("adaptive: conf must lie in (0,1)");
    if (!(growth > 1.0)) throw config_error("adaptive: growth must be > 1");
    if (m_start < 2 * static_cast<std::int64_t>(batches))
        throw config_error("adaptive: m_start must be >= 2*batches");
    if (m_cap < m_start)
        throw config_error("adaptive: m_cap must be >= m_start");
}

AdaptResult booth_hobert_adapt(const Model& model, const Theta& theta,
                               std::int64_t m, const AdaptiveConfig& cfg,
                               RngStream& rng) {
    cfg.validate();
    theta.validate();
    const int B = cfg.batches;
    if (m < 2 * static_cast<std::int64_t>(B))
        throw config_error("booth_hobert_adapt: m must be >= 2*batches");

    // Spread of the update under resampling, from B small sub-updates.
    const std::int64_t sub = m / B;
    const std::size_t d = theta.dim();
    std::vector<std::vector<double>> comps(d);
    for (int b = 0; b < B; ++b) {
        DrawMatrix draws = model.sample_posterior(theta, sub, rng);
        Theta tb = model.mstep(draws, theta);
        for (std::size_t i = 0; i < d; ++i) comps[i].push_back(tb[i]);
    }
    const double z = normal_quantile(0.5 + cfg.conf / 2.0);
    bool swamped = true;
    for (std::size_t i = 0; i < d && swamped; ++i) {
        const double mean = compensated_mean(comps[i]);
        const double se = sample_sd(comps[i]) / std::sqrt(static_cast<double>(B));
        if (std::fabs(theta[i] - mean) > z * se) swamped = false;
    }

    AdaptResult res;
    res.theta_next = model.mcem_step(theta, m, rng);
    res.swamped = swamped;
    if (swamped) {
        std::int64_t grown = static_cast<std::int64_t>(
            std::ceil(static_cast<double>(m) * cfg.growth));
        res.m_next = std::min(grown, cfg.m_cap);
    } else {
        res.m_next = m;
    }
    if (res.m_next < m) res.m_next = m; // the sample size never shrinks
    return res;
}

Trace run_mcem_adaptive(const Model& model, const Theta& theta0,
                        const AdaptiveConfig& cfg, const StoppingConfig& stop,
                        RngStream& rng) {
    cfg.validate();
    stop.validate();
    theta0.validate();

    Trace tr;
    tr.component_names = theta0.names();
    std::vector<bool> small;
    Theta cur = theta0;
    std::int64_t m = cfg.m_start;

    for (std::int64_t t = 1; t <= stop.max_iter; ++t) {
        auto t0 = std::chrono::steady_clock::now();
        AdaptResult res = booth_hobert_adapt(model, cur, m, cfg, rng);
        res.theta_next.validate();
        if (res.swamped && m == cfg.m_cap) tr.m_cap_hit = true;
        IterationRecord rec;
        rec.t = t;
        rec.theta = res.theta_next;
        rec.loglik = record_loglik(model, res.theta_next);
        rec.m = m;
        rec.p = 0;
        rec.wall_ms = wall_since(t0);
        small.push_back(stopping_relative_change(cur, res.theta_next, stop.delta,
                                                 stop.epsilon));
        cur = std::move(res.theta_next);
        m = res.m_next;
        tr.push(std::move(rec));
        if (stopping_consecutive(small, stop.consecutive)) break;
    }
    return tr;
}

AscentReport ascent_check(const Model& model, const Theta& theta,
                          const Theta& theta_prop, const DrawMatrix& draws,
                          double conf) {
    if (!(conf > 0.0 && conf < 1.0))
        throw config_error("ascent_check: conf must lie in (0,1)");
    if (draws.m < 10)
        throw numeric_error("ascent_check: needs at least 10 draws");
    theta.validate();
    theta_prop.validate();

    // Per-draw objective differences; terms free of theta cancel exactly.
    std::vector<double> d(static_cast<std::size_t>(draws.m));
    for (std::int64_t k = 0; k < draws.m; ++k)
        d[k] = model.complete_loglik(theta_prop, draws.row(k)) -
               model.complete_loglik(theta, draws.row(k));

    const double mean = compensated_mean(d);
    double se;
    if (model.estep_iid()) {
        se = sample_sd(d) / std::sqrt(static_cast<double>(draws.m));
    } else {
        // Correlated draws (Markov chain E-step): batch means.
        const std::int64_t nb = static_cast<std::int64_t>(
            std::floor(std::sqrt(static_cast<double>(draws.m))));
        const std::int64_t bs = draws.m / nb;
        std::vector<double> bm(static_cast<std::size_t>(nb));
        for (std::int64_t b = 0; b < nb; ++b) {
            Accum a;
            for (std::int64_t k = b * bs; k < (b + 1) * bs; ++k) a.add(d[k]);
            bm[b] = a.value() / static_cast<double>(bs);
        }
        se = sample_sd(bm) / std::sqrt(static_cast<double>(nb));
    }

    AscentReport rep;
    rep.delta_q = mean;
    rep.se = se;
    const double z = normal_quantile(conf);
    rep.decision = (mean - z * se > 0.0) ? AscentDecision::accept
                                         : AscentDecision::extend;
    return rep;
}

} // namespace mcem
