#pragma once

#include <vector>

namespace mcem {

// Nodes and weights for integrals of the form  integral f(x) exp(-x^2) dx
// = sum_k w_k f(x_k)  (physicists' convention). Nodes ascend; weights sum
// to sqrt(pi). Computed by Newton iteration on the orthonormal Hermite
// recurrence; accurate to machine precision for the n used here (<= 200).
struct GhRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

GhRule gauss_hermite(int n);

} // namespace mcem
