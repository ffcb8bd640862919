#pragma once

#include <cstdint>
#include <vector>

#include "mcem/model.hpp"
#include "mcem/trace.hpp"

namespace mcem {

// Convergence-rate evidence from the tail of a deterministic trace:
// ratios r_t = ||theta_{t+1} - theta*|| / ||theta_t - theta*|| over the
// last `window` positions where both distances sit above the 1e-9 noise
// floor. A linearly convergent map shows a stable ratio; superlinear decay
// drives the ratios toward 0.
struct RateReport {
    std::vector<double> ratios;
    double median_rate = 0;
    double cv = 0; // sd / mean of the ratios
};

// Preconditions (numeric_error): the trace's final iterate lies within
// 1e-6 of theta_star (plain Euclidean), window >= 3, and at least `window`
// usable ratios exist above the floor.
RateReport rate_estimate(const Trace& trace, const Theta& theta_star,
                         int window);

// Central finite-difference Jacobian of the EM map at theta_star,
// step 1e-5 * (1 + |component|).
std::vector<std::vector<double>> em_map_jacobian(const Model& model,
                                                 const Theta& theta_star);

// Largest eigenvalue modulus of a d x d matrix, d <= 3, via the
// characteristic polynomial (complex pairs handled).
double spectral_radius(const std::vector<std::vector<double>>& a);

struct HitProbResult {
    std::int64_t m = 0;
    int runs = 0;
    int t0 = 0;
    double epsilon = 0;
    int hits = 0;
    double fraction = 0;
};

// Fraction of R independent constant-m MCEM runs from theta0 that enter
// the epsilon-ball around theta_star within t0 iterations. Distance is
// plain Euclidean; pass `scale` (one entry per component, used as
// denominators) to standardize instead. Run r draws from rng.split(r), so
// results do not depend on evaluation order. R >= 1 (config_error).
HitProbResult hit_probability(const Model& model, const Theta& theta0,
                              const Theta& theta_star, std::int64_t m, int t0,
                              double epsilon, int R, RngStream& rng,
                              const std::vector<double>& scale = {});

} // namespace mcem
