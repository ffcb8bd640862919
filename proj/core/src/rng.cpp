#include "mcem/rng.hpp"

#include <cmath>

#include "mcem/errors.hpp"

namespace mcem {

namespace {

// splitmix64 finalizer; decorrelates consecutive integer seeds.
std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double poly(const double* c, int n, double r) {
    double v = c[n - 1];
    for (int i = n - 2; i >= 0; --i) v = v * r + c[i];
    return v;
}

} // namespace

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw domain_error("normal_quantile: p must lie strictly in (0,1)");

    // Wichura's algorithm AS241, the double precision (PPND16) fit.
    static const double A[8] = {
        3.3871328727963666080e0,  1.3314166789178437745e2,
        1.9715909503065514427e3,  1.3731693765509461125e4,
        4.5921953931549871457e4,  6.7265770927008700853e4,
        3.3430575583588128105e4,  2.5090809287301226727e3};
    static const double B[8] = {
        1.0,                      4.2313330701600911252e1,
        6.8718700749205790830e2,  5.3941960214247511077e3,
        2.1213794301586595867e4,  3.9307895800092710610e4,
        2.8729085735721942674e4,  5.2264952788528545610e3};
    static const double C[8] = {
        1.42343711074968357734e0, 4.63033784615654529590e0,
        5.76949722146069140550e0, 3.64784832476320460504e0,
        1.27045825245236838258e0, 2.41780725177450611770e-1,
        2.27238449892691845833e-2, 7.74545014278341407640e-4};
    static const double D[8] = {
        1.0,                      2.05319162663775882187e0,
        1.67638483018380384940e0, 6.89767334985100004550e-1,
        1.48103976427480074590e-1, 1.51986665636164571966e-2,
        5.47593808499534494600e-4, 1.05075007164441684324e-9};
    static const double E[8] = {
        6.65790464350110377720e0, 5.46378491116411436990e0,
        1.78482653991729133580e0, 2.96560571828504891230e-1,
        2.65321895265761230930e-2, 1.24266094738807843860e-3,
        2.71155556874348757815e-5, 2.01033439929228813265e-7};
    static const double F[8] = {
        1.0,                      5.99832206555887937690e-1,
        1.36929880922735805310e-1, 1.48753612908506148525e-2,
        7.86869131145613259100e-4, 1.84631831751005468180e-6,
        1.42151175831644588870e-9, 2.04426310338993978564e-15};

    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * poly(A, 8, r) / poly(B, 8, r);
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = poly(C, 8, r) / poly(D, 8, r);
    } else {
        r -= 5.0;
        val = poly(E, 8, r) / poly(F, 8, r);
    }
    return (q < 0.0) ? -val : val;
}

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double normal_logpdf(double x, double mean, double var) {
    if (!(var > 0.0)) throw domain_error("normal_logpdf: variance must be > 0");
    const double d = x - mean;
    return -0.5 * (std::log(2.0 * M_PI * var) + d * d / var);
}

RngStream::RngStream(std::uint64_t seed) : root_(seed), gen_(mix64(seed)) {}

std::uint64_t RngStream::next_u64() { return gen_(); }

double RngStream::uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() { return normal_quantile(uniform()); }

double RngStream::normal(double mean, double sd) {
    return mean + sd * normal();
}

RngStream RngStream::split(std::uint64_t child) const {
    return RngStream(mix64(root_ + 0x9e3779b97f4a7c15ULL * (child + 1)));
}

} // namespace mcem
