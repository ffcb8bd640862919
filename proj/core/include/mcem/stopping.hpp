#pragma once

#include <cstdint>
#include <vector>

#include "mcem/theta.hpp"

namespace mcem {

struct StoppingConfig {
    double delta = 1e-3;        // guard in the relative-change denominator
    double epsilon = 1e-6;      // relative-change threshold
    int consecutive = 3;        // how many small changes in a row stop a run
    std::int64_t max_iter = 500;

    void validate() const; // throws config_error on any out-of-range field
};

// max_i |new_i - old_i| / (|new_i| + delta) < epsilon, strict.
// Appending components whose values do not change cannot flip the result.
bool stopping_relative_change(const Theta& prev, const Theta& next,
                              double delta, double epsilon);
double relative_change(const Theta& prev, const Theta& next, double delta);

// True when the last k entries exist and are all true.
bool stopping_consecutive(const std::vector<bool>& history, int k);

} // namespace mcem
