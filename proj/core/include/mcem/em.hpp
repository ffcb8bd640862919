#pragma once

#include "mcem/model.hpp"
#include "mcem/stopping.hpp"
#include "mcem/trace.hpp"

namespace mcem {

// Deterministic EM loop. Requires model.has_em_step(); otherwise throws
// capability_error before touching theta0. Each update is validated
// (domain_error names the component that left its domain). Records carry
// m = 0 and, when the model can evaluate it, the observed-data loglik.
// Stops when `consecutive` relative changes in a row fall under epsilon,
// or at max_iter.
Trace run_em(const Model& model, const Theta& theta0, const StoppingConfig& stop);

// Same loop driven by the model's Newton-flavored update.
Trace run_em_gradient(const Model& model, const Theta& theta0,
                      const StoppingConfig& stop);

} // namespace mcem
