#include "mcem/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "accum.hpp"
#include "mcem/errors.hpp"

namespace mcem {

namespace {

double euclid(const Theta& a, const Theta& b, const std::vector<double>& scale) {
    if (a.dim() != b.dim())
        throw config_error("distance: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        double d = a[i] - b[i];
        if (!scale.empty()) d /= scale[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

RateReport rate_estimate(const Trace& trace, const Theta& theta_star,
                         int window) {
    if (window < 3) throw config_error("rate_estimate: window must be >= 3");
    if (trace.empty())
        throw numeric_error("rate_estimate: trace is empty");

    const std::vector<double> no_scale;
    std::vector<double> dist;
    dist.reserve(trace.size());
    for (const auto& rec : trace.records)
        dist.push_back(euclid(rec.theta, theta_star, no_scale));

    if (dist.back() > 1e-6)
        throw numeric_error("rate_estimate: trace has not converged to the "
                            "target (final distance above 1e-6)");

    const double floor = 1e-9;
    std::vector<double> ratios;
    for (std::size_t j = 0; j + 1 < dist.size(); ++j)
        if (dist[j] > floor && dist[j + 1] > floor)
            ratios.push_back(dist[j + 1] / dist[j]);

    if (ratios.size() < static_cast<std::size_t>(window))
        throw numeric_error("rate_estimate: fewer than the requested window of "
                            "iterations sit above the 1e-9 noise floor");

    RateReport rep;
    rep.ratios.assign(ratios.end() - window, ratios.end());
    rep.median_rate = median_of(rep.ratios);
    const double mean = compensated_mean(rep.ratios);
    rep.cv = sample_sd(rep.ratios) / mean;
    return rep;
}

std::vector<std::vector<double>> em_map_jacobian(const Model& model,
                                                 const Theta& theta_star) {
    if (!model.has_em_step())
        throw capability_error("em_map_jacobian: model has no exact EM update");
    theta_star.validate();
    const std::size_t d = theta_star.dim();
    std::vector<std::vector<double>> jac(d, std::vector<double>(d, 0.0));
    for (std::size_t j = 0; j < d; ++j) {
        const double h = 1e-5 * (1.0 + std::fabs(theta_star[j]));
        std::vector<double> vp = theta_star.values(), vm = theta_star.values();
        vp[j] += h;
        vm[j] -= h;
        const Theta tp = model.em_step(theta_star.with_values(vp));
        const Theta tm = model.em_step(theta_star.with_values(vm));
        for (std::size_t i = 0; i < d; ++i)
            jac[i][j] = (tp[i] - tm[i]) / (2.0 * h);
    }
    return jac;
}

namespace {

// Largest root modulus of the monic cubic x^3 + a x^2 + b x + c.
double cubic_radius(double a, double b, double c) {
    // Depress: x = y - a/3, y^3 + p y + q = 0.
    const double p = b - a * a / 3.0;
    const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    const double shift = -a / 3.0;
    const double disc = q * q / 4.0 + p * p * p / 27.0;

    if (disc <= 0.0) {
        // Three real roots (trigonometric form); p <= 0 here.
        const double r = std::sqrt(-p / 3.0);
        double best = 0.0;
        if (r == 0.0) return std::fabs(shift);
        double arg = 3.0 * q / (2.0 * p * r);
        arg = std::clamp(arg, -1.0, 1.0);
        const double phi = std::acos(arg) / 3.0;
        for (int k = 0; k < 3; ++k) {
            const double y = 2.0 * r * std::cos(phi - 2.0 * M_PI * k / 3.0);
            best = std::max(best, std::fabs(y + shift));
        }
        return best;
    }

    // One real root, one complex pair. Stable Cardano for the real root.
    const double sq = std::sqrt(disc);
    const double u = (q <= 0.0) ? std::cbrt(-q / 2.0 + sq)
                                : -std::cbrt(q / 2.0 + sq);
    const double y1 = (u == 0.0) ? 0.0 : u - p / (3.0 * u);
    const double x1 = y1 + shift;
    // Deflate the original monic cubic by (x - x1).
    const double b2 = a + x1;        // quadratic x^2 + b2 x + c2
    const double c2 = b + x1 * b2;
    const double qd = b2 * b2 - 4.0 * c2;
    double pair;
    if (qd >= 0.0) {
        const double r1 = (-b2 + std::sqrt(qd)) / 2.0;
        const double r2 = (-b2 - std::sqrt(qd)) / 2.0;
        pair = std::max(std::fabs(r1), std::fabs(r2));
    } else {
        pair = std::sqrt(c2); // |conjugate pair| = sqrt(product)
    }
    return std::max(std::fabs(x1), pair);
}

} // namespace

double spectral_radius(const std::vector<std::vector<double>>& a) {
    const std::size_t d = a.size();
    if (d == 0 || d > 3)
        throw config_error("spectral_radius: matrix must be 1x1 to 3x3");
    for (const auto& row : a)
        if (row.size() != d)
            throw config_error("spectral_radius: matrix must be square");

    if (d == 1) return std::fabs(a[0][0]);
    if (d == 2) {
        const double tr = a[0][0] + a[1][1];
        const double det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        const double disc = tr * tr - 4.0 * det;
        if (disc >= 0.0) {
            const double s = std::sqrt(disc);
            return std::max(std::fabs((tr + s) / 2.0), std::fabs((tr - s) / 2.0));
        }
        return std::sqrt(det);
    }

    const double tr = a[0][0] + a[1][1] + a[2][2];
    const double m01 = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    const double m02 = a[0][0] * a[2][2] - a[0][2] * a[2][0];
    const double m12 = a[1][1] * a[2][2] - a[1][2] * a[2][1];
    const double det =
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
        a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
        a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    // characteristic: x^3 - tr x^2 + (sum of principal minors) x - det
    return cubic_radius(-tr, m01 + m02 + m12, -det);
}

HitProbResult hit_probability(const Model& model, const Theta& theta0,
                              const Theta& theta_star, std::int64_t m, int t0,
                              double epsilon, int R, RngStream& rng,
                              const std::vector<double>& scale) {
    if (R < 1) throw config_error("hit_probability: R must be >= 1");
    if (t0 < 1) throw config_error("hit_probability: t0 must be >= 1");
    if (!(epsilon > 0.0))
        throw config_error("hit_probability: epsilon must be > 0");
    if (!scale.empty()) {
        if (scale.size() != theta_star.dim())
            throw config_error("hit_probability: scale needs one entry per component");
        for (double s : scale)
            if (!(s > 0.0))
                throw config_error("hit_probability: scale entries must be > 0");
    }
    theta0.validate();
    theta_star.validate();

    int hits = 0;
    for (int r = 0; r < R; ++r) {
        RngStream run_rng = rng.split(static_cast<std::uint64_t>(r));
        Theta cur = theta0;
        for (int t = 1; t <= t0; ++t) {
            cur = model.mcem_step(cur, m, run_rng);
            cur.validate();
            if (euclid(cur, theta_star, scale) < epsilon) {
                ++hits;
                break;
            }
        }
    }

    HitProbResult res;
    res.m = m;
    res.runs = R;
    res.t0 = t0;
    res.epsilon = epsilon;
    res.hits = hits;
    res.fraction = static_cast<double>(hits) / static_cast<double>(R);
    return res;
}

} // namespace mcem
