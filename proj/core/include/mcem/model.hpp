#pragma once

#include <cstdint>
#include <vector>

#include "mcem/rng.hpp"
#include "mcem/theta.hpp"

namespace mcem {

// m rows of latent draws, one row per simulated completion of the data.
// Row-major: draw k, component i at a[k*q + i].
struct DrawMatrix {
    std::int64_t m = 0;
    std::int64_t q = 0;
    std::vector<double> a;

    DrawMatrix() = default;
    DrawMatrix(std::int64_t m_, std::int64_t q_)
        : m(m_), q(q_), a(static_cast<std::size_t>(m_ * q_)) {}

    double* row(std::int64_t k) { return a.data() + k * q; }
    const double* row(std::int64_t k) const { return a.data() + k * q; }
    double& at(std::int64_t k, std::int64_t i) { return a[k * q + i]; }
    double at(std::int64_t k, std::int64_t i) const { return a[k * q + i]; }
};

// A two-stage hierarchical model bound to its dataset.
//
// Required: simulate the latent vector given theta (the E-step sample) and
// maximize the resulting Monte Carlo objective (the M-step). Everything
// else is optional capability; default implementations throw
// capability_error so drivers can probe with the has_* methods.
class Model {
public:
    virtual ~Model() = default;

    virtual std::int64_t latent_dim() const = 0;

    virtual bool has_loglik() const { return false; }
    virtual double loglik(const Theta& theta) const;

    virtual bool has_em_step() const { return false; }
    virtual Theta em_step(const Theta& theta) const;

    // Deterministic Newton-flavored update built from the curvature of the
    // expected complete-data objective at the current point.
    virtual bool has_em_gradient_step() const { return false; }
    virtual Theta em_gradient_step(const Theta& theta) const;

    virtual DrawMatrix sample_posterior(const Theta& theta, std::int64_t m,
                                        RngStream& rng) const = 0;

    // Maximizer of the Monte Carlo objective built from `draws` (which were
    // sampled at `current`). `current` also seeds any inner root finding.
    virtual Theta mstep(const DrawMatrix& draws, const Theta& current) const = 0;

    // Complete-data log likelihood at one latent row. Additive constants
    // that do not depend on theta may be dropped; only differences across
    // theta at a fixed row are ever consumed.
    virtual double complete_loglik(const Theta& theta, const double* u) const = 0;

    // True when sample_posterior returns independent draws; false for
    // Markov chain samplers (their standard errors need batch means).
    virtual bool estep_iid() const = 0;

    // One Monte Carlo EM update: simulate m draws, then maximize.
    Theta mcem_step(const Theta& theta, std::int64_t m, RngStream& rng) const;
};

} // namespace mcem
