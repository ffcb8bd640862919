#include "mcem/gauss_hermite.hpp"

#include <algorithm>
#include <cmath>

#include "mcem/errors.hpp"

namespace mcem {

// Roots of H_n by Newton iteration on the orthonormal recurrence
// (Golub-Welsch initial guesses). Largest roots are found first and each
// subsequent guess extrapolates from its neighbors.
GhRule gauss_hermite(int n) {
    if (n < 1) throw config_error("gauss_hermite: need at least one node");
    if (n > 200) throw config_error("gauss_hermite: node count capped at 200");

    const double EPS = 3e-15;
    const int MAXIT = 80;
    const double PIM4 = 0.7511255444649425; // pi^{-1/4}

    const int half = (n + 1) / 2;
    std::vector<double> x(n), w(n);
    double z = 0.0;
    for (int i = 0; i < half; ++i) {
        if (i == 0)
            z = std::sqrt(2.0 * n + 1.0) -
                1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
        else if (i == 1)
            z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * x[0];
        else if (i == 3)
            z = 1.91 * z - 0.91 * x[1];
        else
            z = 2.0 * z - x[i - 2];

        double pp = 0.0;
        for (int it = 0; it < MAXIT; ++it) {
            double p1 = PIM4, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1)) * p2 -
                     std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            double z1 = z;
            z = z1 - p1 / pp;
            if (std::fabs(z - z1) <= EPS * (1.0 + std::fabs(z))) break;
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }

    // Stored largest-first above; hand back ascending.
    std::reverse(x.begin(), x.end());
    std::reverse(w.begin(), w.end());

    GhRule rule;
    rule.nodes = std::move(x);
    rule.weights = std::move(w);
    return rule;
}

} // namespace mcem
