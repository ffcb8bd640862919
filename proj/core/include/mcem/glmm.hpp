#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mcem/model.hpp"

namespace mcem {

// Binary panel data for the logit-normal random intercept model
//   logit P(y_ij = 1 | u_i) = beta * x_ij + u_i,  u_i ~ N(0, sigma2).
// Per-group score sums c_i = sum_j x_ij y_ij are cached.
class PanelDataset {
public:
    static PanelDataset from_columns(std::vector<std::vector<double>> x,
                                     std::vector<std::vector<double>> y);

    std::size_t q() const { return x_.size(); }
    std::int64_t N() const { return N_; }
    std::size_t n(std::size_t i) const { return x_[i].size(); }
    const std::vector<double>& x(std::size_t i) const { return x_[i]; }
    const std::vector<double>& y(std::size_t i) const { return y_[i]; }
    double score_sum(std::size_t i) const { return c_[i]; } // sum_j x_ij y_ij
    double score_total() const { return T_; }               // sum_ij x_ij y_ij

private:
    std::vector<std::vector<double>> x_, y_;
    std::vector<double> c_;
    double T_ = 0;
    std::int64_t N_ = 0;
};

// Simulated dataset on the grid x_ij = j/n, j = 1..n, for each of q groups,
// with intercepts u_i ~ N(0, sigma2) and y_ij ~ Bernoulli(expit(beta x + u)).
// Group i consumes one normal, then its y's consume one uniform each.
PanelDataset glmm_synthetic(int q, int n, double beta, double sigma2,
                            std::uint64_t seed);

// CSV with header "group,x,y": one row per observation.
PanelDataset load_panel_csv(const std::string& path);
void save_panel_csv(const PanelDataset& data, const std::string& path);

// theta = (beta unconstrained, sigma2 > 0).
Theta glmm_theta(double beta, double sigma2);

// sum_j [ y_ij * v - log(1 + exp(beta x_ij + v)) ]: the group-i response
// terms of the joint loglik that involve its intercept.
double glmm_group_g(const PanelDataset& data, std::size_t i, double v,
                    double beta);

// Complete-data log likelihood at latent row u (full Bernoulli log-pmf
// plus the intercept density, 2 pi constant dropped):
//   sum_ij [ y_ij (beta x_ij + u_i) - log(1+e^{beta x_ij + u_i}) ]
//   - (q/2) log sigma2 - sum_i u_i^2 / (2 sigma2).
double glmm_complete_loglik(const Theta& theta, const double* u,
                            const PanelDataset& data);

// d/d(beta), d/d(sigma2) of the above at fixed u.
std::array<double, 2> glmm_complete_grad(const Theta& theta, const double* u,
                                         const PanelDataset& data);

// Unnormalized log of the conditional density of u given y:
//   sum_i g_i(u_i) - sum_i u_i^2/(2 sigma2).
// Differs from glmm_complete_loglik by a function of theta only.
double glmm_target_logdensity(const double* u, const Theta& theta,
                              const PanelDataset& data);

// Metropolis-Hastings sampler for that conditional: one sweep updates the
// coordinates in order i = 0..q-1, each with an independence proposal
// u_i' ~ N(0, sigma2) accepted with probability min(1, exp(g_i(u') - g_i(u)))
// (the prior factor cancels against the proposal). Each coordinate consumes
// one normal then one uniform. `burnin` whole sweeps are discarded; the
// state after each of the m kept sweeps becomes a row of the result.
DrawMatrix glmm_mh_chain(const Theta& theta, const PanelDataset& data,
                         std::int64_t m, std::int64_t burnin,
                         const std::vector<double>& u0, RngStream& rng);

// Monte Carlo M-step from m >= 2 latent rows:
//   sigma2' = mean of u_ik^2 over all rows and groups
//   beta'   = root of the averaged score sum_ij x_ij y_ij
//             - (1/m) sum_k sum_ij x_ij expit(beta x_ij + u_ik),
// by Newton from beta_init (tol 1e-10, <= 100 iters) with a bisection
// fallback on [-50, 50]. Throws numeric_error when the score has no root
// there, domain_error when the draws are identically zero.
Theta glmm_mcem_mstep(const DrawMatrix& draws, const PanelDataset& data,
                      double beta_init);

// Observed-data log likelihood by mode-centered (adaptive) Gauss-Hermite
// quadrature with `nodes` points (>= 10), full constants included:
//   sum_i [ beta c_i + log integral exp(g_i(v)) phi(v; 0, sigma2) dv ].
double glmm_loglik_quadrature(const Theta& theta, const PanelDataset& data,
                              int nodes);

// Maximizer of the quadrature loglik by Nelder-Mead over (beta, log sigma2)
// started at (0,0); converges when the simplex function spread drops under
// 1e-8, throws numeric_error past 10^4 evaluations.
Theta glmm_direct_mle(const PanelDataset& data, int nodes = 32);

class GlmmModel : public Model {
public:
    explicit GlmmModel(PanelDataset data, std::int64_t burnin = 500,
                       int quad_nodes = 32)
        : data_(std::move(data)), burnin_(burnin), nodes_(quad_nodes) {}

    const PanelDataset& data() const { return data_; }

    std::int64_t latent_dim() const override;
    bool has_loglik() const override { return true; }
    double loglik(const Theta& theta) const override;
    // Chains restart from u = 0 with a full burn-in on every call: draws
    // for an update never depend on earlier iterations' chains.
    DrawMatrix sample_posterior(const Theta& theta, std::int64_t m,
                                RngStream& rng) const override;
    Theta mstep(const DrawMatrix& draws, const Theta& current) const override;
    double complete_loglik(const Theta& theta, const double* u) const override;
    bool estep_iid() const override { return false; }

private:
    PanelDataset data_;
    std::int64_t burnin_;
    int nodes_;
};

} // namespace mcem
