#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mcem/model.hpp"

namespace mcem {

// Responses grouped by cluster, for the one-way random effects model
//   y_ij = u_i + e_ij,  u_i ~ N(mu, sigma_u^2),  e_ij ~ N(0, sigma_e^2),
// all independent. Group sizes may differ. Group means, sums of squares
// and N are cached at construction; everything downstream reads the cache.
class GroupedDataset {
public:
    static GroupedDataset from_groups(std::vector<std::vector<double>> groups);

    std::size_t q() const { return groups_.size(); }
    std::int64_t N() const { return N_; }
    std::int64_t n(std::size_t i) const { return n_[i]; }
    double ybar(std::size_t i) const { return ybar_[i]; }
    double ss(std::size_t i) const { return ss_[i]; } // sum_j y_ij^2
    const std::vector<double>& group(std::size_t i) const { return groups_[i]; }

private:
    std::vector<std::vector<double>> groups_;
    std::vector<std::int64_t> n_;
    std::vector<double> ybar_, ss_;
    std::int64_t N_ = 0;
};

// The six-sire breeding value dataset (average daily weight gains of bull
// calves, in grams/day over 100): group sizes 5,2,7,5,7,9, N = 35.
const GroupedDataset& bulls_data();

// CSV with header "bull,rate": one row per observation, group label in the
// first column. Groups ordered by first appearance.
GroupedDataset load_grouped_csv(const std::string& path);
void save_grouped_csv(const GroupedDataset& data, const std::string& path);

// theta = (mu unconstrained, sigma_u2 > 0, sigma_e2 > 0).
Theta lmm_theta(double mu, double sigma_u2, double sigma_e2);

// Conditional distribution of u_i given the data: N(uhat_i, vhat_i) with
//   uhat_i = (sigma_e2 * mu + n_i * sigma_u2 * ybar_i) / (sigma_e2 + n_i * sigma_u2)
//   vhat_i = sigma_u2 * sigma_e2 / (sigma_e2 + n_i * sigma_u2).
struct PosteriorParams {
    std::vector<double> uhat, vhat;
};
PosteriorParams lmm_posterior(const Theta& theta, const GroupedDataset& data);

// Observed-data (marginal) log likelihood, full constants included.
double lmm_loglik(const Theta& theta, const GroupedDataset& data);

// Exact EM update (closed form via the conditional moments above).
Theta lmm_em_step(const Theta& theta, const GroupedDataset& data);

// Expected complete-data log likelihood E[log f(y,u;theta) | y; theta_tilde],
// additive 2 pi constants dropped (they carry no theta dependence).
double lmm_q(const Theta& theta, const Theta& theta_tilde,
             const GroupedDataset& data);

// Gradient and Hessian in theta of q(theta | theta_tilde) evaluated on the
// diagonal theta = theta_tilde. The gradient equals the marginal loglik
// gradient there. Singularity of the Hessian is the caller's problem; this
// just evaluates.
struct GradHess {
    std::array<double, 3> grad;
    std::array<std::array<double, 3>, 3> hess;
};
GradHess lmm_grad_q_diag(const Theta& theta, const GroupedDataset& data);

// Newton step on the diagonal objective, theta - H^-1 g, with step halving
// (up to 30 halvings) until the marginal loglik does not decrease and the
// iterate stays in-domain. Throws numeric_error on a singular Hessian or
// when halving runs out.
Theta lmm_em_gradient_step(const Theta& theta, const GroupedDataset& data);

// m independent rows of (u_1..u_q) from the conditional above.
// Row k, group i consumes the (k*q+i)-th normal from rng.
DrawMatrix lmm_sample_posterior(const Theta& theta, const GroupedDataset& data,
                                std::int64_t m, RngStream& rng);

// Statistics of one latent row sufficient for the M-step.
// Cauchy-Schwarz forces sum_u^2 <= q * sum_u2.
struct LmmSuffStats {
    double sum_u = 0;   // sum_i u_i
    double sum_u2 = 0;  // sum_i u_i^2
    double cross = 0;   // sum_i n_i * ybar_i * u_i
    double wsum_u2 = 0; // sum_i n_i * u_i^2 (needed when group sizes differ)
};
LmmSuffStats lmm_suffstats(const GroupedDataset& data, const double* u);

// Monte Carlo EM update from m >= 2 simulated completions:
//   mu'       = mean of all u_ik
//   sigma_u2' = (1/(mq)) sum_ik (u_ik - mu')^2        (the new mu')
//   sigma_e2' = (1/(mN)) sum_k sum_i [ss_i - 2 n_i ybar_i u_ik + n_i u_ik^2]
// Sums are compensated (Neumaier) so accumulation order noise stays out of
// the update.
Theta lmm_mcem_step(const Theta& theta, const GroupedDataset& data,
                    std::int64_t m, RngStream& rng);

class LmmModel : public Model {
public:
    explicit LmmModel(GroupedDataset data) : data_(std::move(data)) {}

    const GroupedDataset& data() const { return data_; }

    std::int64_t latent_dim() const override;
    bool has_loglik() const override { return true; }
    double loglik(const Theta& theta) const override;
    bool has_em_step() const override { return true; }
    Theta em_step(const Theta& theta) const override;
    bool has_em_gradient_step() const override { return true; }
    Theta em_gradient_step(const Theta& theta) const override;
    DrawMatrix sample_posterior(const Theta& theta, std::int64_t m,
                                RngStream& rng) const override;
    Theta mstep(const DrawMatrix& draws, const Theta& current) const override;
    double complete_loglik(const Theta& theta, const double* u) const override;
    bool estep_iid() const override { return true; }

private:
    GroupedDataset data_;
};

} // namespace mcem
