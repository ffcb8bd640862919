#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>

#include "mcem/errors.hpp"
#include "mcem/rng.hpp"

using mcem::RngStream;

namespace {

// Reference quantiles of the standard normal, correctly rounded from
// 50-digit evaluations of the inverse error function.
struct QuantilePair {
    double p;
    double z;
};
const QuantilePair kQuantiles[] = {
    {0.5, 0.0},
    {0.975, 1.959963984540054235525},
    {0.025, -1.959963984540054235525},
    {0.95, 1.644853626951472714864},
    {0.3, -0.5244005127080407840383},
    {0.7, 0.5244005127080407840383},
    {0.00135, -2.999976992703393127558},
    {0.99865, 2.999976992703393127558},
    {1e-10, -6.361340902404056204695},
    {0.84134474606854294859, 1.0},
};

} // namespace

TEST_CASE("normal quantile matches tabulated values") {
    for (const auto& [p, z] : kQuantiles) {
        const double got = mcem::normal_quantile(p);
        if (z == 0.0) {
            CHECK(std::fabs(got) < 1e-15);
        } else {
            CHECK(got == doctest::Approx(z).epsilon(5e-14));
        }
    }
}

TEST_CASE("normal quantile rejects probabilities outside (0,1)") {
    CHECK_THROWS_AS(mcem::normal_quantile(0.0), mcem::domain_error);
    CHECK_THROWS_AS(mcem::normal_quantile(1.0), mcem::domain_error);
    CHECK_THROWS_AS(mcem::normal_quantile(-0.2), mcem::domain_error);
    CHECK_THROWS_AS(mcem::normal_quantile(1.5), mcem::domain_error);
}

TEST_CASE("quantile inverts the cdf across the support") {
    // The upper limit stays below the region where cdf values are absorbed
    // into 1 faster than the inverse can resolve them.
    for (double z = -6.0; z <= 5.0; z += 0.22) {
        const double back = mcem::normal_quantile(mcem::normal_cdf(z));
        CHECK(back == doctest::Approx(z).epsilon(1e-9));
    }
    CHECK(mcem::normal_cdf(0.0) == 0.5);
    CHECK(mcem::normal_cdf(1.959963984540054235525) ==
          doctest::Approx(0.975).epsilon(1e-13));
}

TEST_CASE("quantile is antisymmetric in the central region") {
    // 1-p sheds up to half an ulp, so equality holds to rounding only.
    for (double p = 0.3; p < 0.7; p += 0.017) {
        const double a = mcem::normal_quantile(p);
        const double b = -mcem::normal_quantile(1.0 - p);
        CHECK(std::fabs(a - b) <= 4e-16 + 2e-15 * std::fabs(a));
    }
}

TEST_CASE("normal_logpdf worked values") {
    CHECK(mcem::normal_logpdf(0.0, 0.0, 1.0) ==
          doctest::Approx(-0.9189385332046727418).epsilon(1e-15));
    // N(2, 4) at 4: -0.5*log(2*pi*4) - 4/8
    CHECK(mcem::normal_logpdf(4.0, 2.0, 4.0) ==
          doctest::Approx(-0.5 * std::log(8.0 * std::acos(-1.0)) - 0.5)
              .epsilon(1e-14));
}

TEST_CASE("uniforms stay strictly inside the open unit interval") {
    RngStream rng(12345);
    double lo = 1.0, hi = 0.0, sum = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        sum += u;
    }
    CHECK(lo > 0.0);
    CHECK(hi < 1.0);
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.005));
}

TEST_CASE("normal draws have the right first two moments and bounded tails") {
    RngStream rng(777);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0, worst = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sumsq += z * z;
        worst = std::max(worst, std::fabs(z));
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::fabs(mean) < 0.01);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
    // 53-bit open-interval uniforms cap the inverse-cdf output magnitude.
    CHECK(worst < 8.5);
}

TEST_CASE("scaled normal draws are an exact affine map of unit draws") {
    RngStream a(31), b(31);
    for (int i = 0; i < 100; ++i) {
        const double z = a.normal();
        const double x = b.normal(3.25, 2.5);
        CHECK(x == 3.25 + 2.5 * z);
    }
}

TEST_CASE("same seed reproduces the same stream") {
    RngStream a(99), b(99);
    for (int i = 0; i < 64; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("split streams depend only on the root seed and child index") {
    RngStream parent1(4242), parent2(4242);
    // Consume from one parent before splitting; splits must not care.
    for (int i = 0; i < 17; ++i) parent1.uniform();
    RngStream c1 = parent1.split(5);
    RngStream c2 = parent2.split(5);
    for (int i = 0; i < 32; ++i) CHECK(c1.next_u64() == c2.next_u64());

    RngStream d1 = parent2.split(0);
    RngStream d2 = parent2.split(1);
    int agree = 0;
    for (int i = 0; i < 32; ++i) agree += (d1.next_u64() == d2.next_u64());
    CHECK(agree == 0);
}
