#include "mcem/model.hpp"

#include "mcem/errors.hpp"

namespace mcem {

double Model::loglik(const Theta&) const {
    throw capability_error("model does not provide an observed-data loglik");
}

Theta Model::em_step(const Theta&) const {
    throw capability_error("model does not provide an exact EM update");
}

Theta Model::em_gradient_step(const Theta&) const {
    throw capability_error("model does not provide a Newton-flavored update");
}

Theta Model::mcem_step(const Theta& theta, std::int64_t m, RngStream& rng) const {
    if (m < 2) throw config_error("mcem_step: sample size m must be >= 2");
    theta.validate();
    DrawMatrix draws = sample_posterior(theta, m, rng);
    return mstep(draws, theta);
}

} // namespace mcem
