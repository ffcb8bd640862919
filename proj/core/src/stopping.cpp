#include "mcem/stopping.hpp"

#include <cmath>

#include "mcem/errors.hpp"

namespace mcem {

void StoppingConfig::validate() const {
    if (!(delta > 0.0)) throw config_error("stopping: delta must be > 0");
    if (!(epsilon > 0.0)) throw config_error("stopping: epsilon must be > 0");
    if (consecutive < 1) throw config_error("stopping: consecutive must be >= 1");
    if (max_iter < 1) throw config_error("stopping: max_iter must be >= 1");
}

double relative_change(const Theta& prev, const Theta& next, double delta) {
    if (prev.dim() != next.dim())
        throw config_error("relative_change: dimension mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < prev.dim(); ++i) {
        double r = std::fabs(next[i] - prev[i]) / (std::fabs(next[i]) + delta);
        if (r > worst) worst = r;
    }
    return worst;
}

bool stopping_relative_change(const Theta& prev, const Theta& next,
                              double delta, double epsilon) {
    return relative_change(prev, next, delta) < epsilon;
}

bool stopping_consecutive(const std::vector<bool>& history, int k) {
    if (k < 1) throw config_error("stopping: consecutive count must be >= 1");
    if (history.size() < static_cast<std::size_t>(k)) return false;
    for (std::size_t i = history.size() - k; i < history.size(); ++i)
        if (!history[i]) return false;
    return true;
}

} // namespace mcem
