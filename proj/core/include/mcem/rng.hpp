#pragma once

#include <cstdint>
#include <random>

namespace mcem {

// Inverse standard normal CDF (Wichura's AS241, PPND16 constants).
// Accurate to about 1e-15 over (0,1); throws domain_error outside.
double normal_quantile(double p);

// Standard normal CDF and log density, used by diagnostics and tests.
double normal_cdf(double z);
double normal_logpdf(double x, double mean, double var);

// Deterministic random stream with pinned output values.
//
// mt19937_64 is fully specified by the standard, uniforms use the plain
// 53-bit construction and normal draws go through normal_quantile, so a
// given seed yields the same doubles on every platform and toolchain.
// std::normal_distribution is deliberately avoided: its algorithm is
// implementation-defined and would break byte-identical output files.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform on the open interval (0,1): (x >> 11) never reaches 2^53,
    // and the half-ulp offset keeps 0 out.
    double uniform();

    double normal();
    double normal(double mean, double sd);

    // Child stream derived from (root seed, child index) only, so it does
    // not depend on how much this stream has already produced. Replicated
    // runs draw from split(r) and stay comparable across configurations.
    RngStream split(std::uint64_t child) const;

    std::uint64_t root_seed() const { return root_; }

private:
    std::uint64_t root_;
    std::mt19937_64 gen_;
};

} // namespace mcem
