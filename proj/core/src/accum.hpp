#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace mcem {

// Neumaier-compensated accumulator. Keeps long Monte Carlo sums stable so
// update values do not drift with accumulation order or sample size.
class Accum {
public:
    void add(double x) {
        double t = s_ + x;
        if (std::fabs(s_) >= std::fabs(x))
            c_ += (s_ - t) + x;
        else
            c_ += (x - t) + s_;
        s_ = t;
    }
    double value() const { return s_ + c_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

inline double compensated_mean(const std::vector<double>& v) {
    Accum a;
    for (double x : v) a.add(x);
    return a.value() / static_cast<double>(v.size());
}

// Sample standard deviation (n-1 denominator), two-pass.
inline double sample_sd(const std::vector<double>& v) {
    const double mean = compensated_mean(v);
    Accum a;
    for (double x : v) a.add((x - mean) * (x - mean));
    return std::sqrt(a.value() / static_cast<double>(v.size() - 1));
}

} // namespace mcem
