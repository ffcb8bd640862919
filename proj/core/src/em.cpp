#include "mcem/em.hpp"

#include <chrono>
#include <cmath>
#include <functional>

#include "mcem/errors.hpp"

namespace mcem {

namespace {

Trace run_deterministic(const Model& model, const Theta& theta0,
                        const StoppingConfig& stop,
                        const std::function<Theta(const Theta&)>& step) {
    stop.validate();
    theta0.validate();

    Trace tr;
    tr.component_names = theta0.names();
    std::vector<bool> small;
    Theta cur = theta0;

    for (std::int64_t t = 1; t <= stop.max_iter; ++t) {
        auto t0 = std::chrono::steady_clock::now();
        Theta next = step(cur);
        next.validate();
        IterationRecord rec;
        rec.t = t;
        rec.theta = next;
        rec.loglik = model.has_loglik() ? model.loglik(next)
                                        : std::nan("");
        rec.m = 0;
        rec.p = 0;
        rec.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        small.push_back(
            stopping_relative_change(cur, next, stop.delta, stop.epsilon));
        cur = std::move(next);
        tr.push(std::move(rec));
        if (stopping_consecutive(small, stop.consecutive)) break;
    }
    return tr;
}

} // namespace

Trace run_em(const Model& model, const Theta& theta0, const StoppingConfig& stop) {
    if (!model.has_em_step())
        throw capability_error("run_em: model has no exact EM update");
    return run_deterministic(model, theta0, stop,
                             [&](const Theta& th) { return model.em_step(th); });
}

Trace run_em_gradient(const Model& model, const Theta& theta0,
                      const StoppingConfig& stop) {
    if (!model.has_em_gradient_step())
        throw capability_error("run_em_gradient: model has no Newton-flavored update");
    return run_deterministic(model, theta0, stop, [&](const Theta& th) {
        return model.em_gradient_step(th);
    });
}

} // namespace mcem
