#include "mcem/glmm.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "accum.hpp"
#include "mcem/errors.hpp"
#include "mcem/gauss_hermite.hpp"
#include "mcem/trace.hpp"

namespace mcem {

namespace {

double log1pexp(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

double expit(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void check_glmm_theta(const Theta& theta) {
    if (theta.dim() != 2)
        throw config_error("glmm: theta must have 2 components (beta, sigma2)");
    theta.validate();
}

} // namespace

PanelDataset PanelDataset::from_columns(std::vector<std::vector<double>> x,
                                        std::vector<std::vector<double>> y) {
    if (x.empty() || x.size() != y.size())
        throw config_error("panel dataset: x and y need the same group layout");
    PanelDataset d;
    d.x_ = std::move(x);
    d.y_ = std::move(y);
    for (std::size_t i = 0; i < d.x_.size(); ++i) {
        if (d.x_[i].empty() || d.x_[i].size() != d.y_[i].size())
            throw config_error("panel dataset: group " + std::to_string(i + 1) +
                               " has mismatched or empty columns");
        Accum c;
        for (std::size_t j = 0; j < d.x_[i].size(); ++j) {
            if (!std::isfinite(d.x_[i][j]))
                throw config_error("panel dataset: covariates must be finite");
            if (d.y_[i][j] != 0.0 && d.y_[i][j] != 1.0)
                throw config_error("panel dataset: responses must be 0 or 1");
            c.add(d.x_[i][j] * d.y_[i][j]);
        }
        d.c_.push_back(c.value());
        d.N_ += static_cast<std::int64_t>(d.x_[i].size());
    }
    Accum t;
    for (double c : d.c_) t.add(c);
    d.T_ = t.value();
    return d;
}

PanelDataset glmm_synthetic(int q, int n, double beta, double sigma2,
                            std::uint64_t seed) {
    if (q < 1 || n < 1)
        throw config_error("glmm_synthetic: q and n must be >= 1");
    if (!(sigma2 > 0.0))
        throw config_error("glmm_synthetic: sigma2 must be > 0");
    RngStream rng(seed);
    const double sd = std::sqrt(sigma2);
    std::vector<std::vector<double>> x(q), y(q);
    for (int i = 0; i < q; ++i) {
        const double u = rng.normal(0.0, sd);
        x[i].reserve(n);
        y[i].reserve(n);
        for (int j = 1; j <= n; ++j) {
            const double xij = static_cast<double>(j) / n;
            const double p = expit(beta * xij + u);
            x[i].push_back(xij);
            y[i].push_back(rng.uniform() < p ? 1.0 : 0.0);
        }
    }
    return PanelDataset::from_columns(std::move(x), std::move(y));
}

PanelDataset load_panel_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(f, line))
        throw io_error("'" + path + "': empty file, expected a header");
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
        line.pop_back();
    if (line != "group,x,y")
        throw io_error("'" + path + "': expected header 'group,x,y'");

    std::vector<std::vector<double>> xs, ys;
    std::map<std::string, std::size_t> index;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
            line.pop_back();
        if (line.empty()) continue;
        auto c1 = line.find(',');
        auto c2 = (c1 == std::string::npos) ? std::string::npos
                                            : line.find(',', c1 + 1);
        if (c2 == std::string::npos)
            throw io_error("'" + path + "' line " + std::to_string(lineno) +
                           ": expected 'group,x,y'");
        const std::string label = line.substr(0, c1);
        const std::string xs_str = line.substr(c1 + 1, c2 - c1 - 1);
        const std::string ys_str = line.substr(c2 + 1);
        char* end = nullptr;
        errno = 0;
        const double xv = std::strtod(xs_str.c_str(), &end);
        if (xs_str.empty() || end != xs_str.c_str() + xs_str.size())
            throw io_error("'" + path + "' line " + std::to_string(lineno) +
                           ": bad x value '" + xs_str + "'");
        double yv;
        if (ys_str == "0")
            yv = 0.0;
        else if (ys_str == "1")
            yv = 1.0;
        else
            throw io_error("'" + path + "' line " + std::to_string(lineno) +
                           ": y must be 0 or 1, got '" + ys_str + "'");
        auto it = index.find(label);
        if (it == index.end()) {
            it = index.emplace(label, xs.size()).first;
            xs.emplace_back();
            ys.emplace_back();
        }
        xs[it->second].push_back(xv);
        ys[it->second].push_back(yv);
    }
    return PanelDataset::from_columns(std::move(xs), std::move(ys));
}

void save_panel_csv(const PanelDataset& data, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open '" + path + "' for writing");
    f << "group,x,y\n";
    for (std::size_t i = 0; i < data.q(); ++i)
        for (std::size_t j = 0; j < data.n(i); ++j)
            f << (i + 1) << ',' << format_double(data.x(i)[j]) << ','
              << static_cast<int>(data.y(i)[j]) << '\n';
    f.flush();
    if (!f) throw io_error("write failed for '" + path + "'");
}

Theta glmm_theta(double beta, double sigma2) {
    return Theta({"beta", "sigma2"}, {beta, sigma2},
                 {Domain::unconstrained, Domain::positive});
}

double glmm_group_g(const PanelDataset& data, std::size_t i, double v,
                    double beta) {
    const auto& x = data.x(i);
    const auto& y = data.y(i);
    Accum acc;
    for (std::size_t j = 0; j < x.size(); ++j)
        acc.add(y[j] * v - log1pexp(beta * x[j] + v));
    return acc.value();
}

double glmm_complete_loglik(const Theta& theta, const double* u,
                            const PanelDataset& data) {
    check_glmm_theta(theta);
    const double beta = theta[0], sigma2 = theta[1];
    Accum acc;
    for (std::size_t i = 0; i < data.q(); ++i) {
        acc.add(beta * data.score_sum(i) + glmm_group_g(data, i, u[i], beta));
        acc.add(-u[i] * u[i] / (2.0 * sigma2));
    }
    acc.add(-0.5 * static_cast<double>(data.q()) * std::log(sigma2));
    return acc.value();
}

std::array<double, 2> glmm_complete_grad(const Theta& theta, const double* u,
                                         const PanelDataset& data) {
    check_glmm_theta(theta);
    const double beta = theta[0], sigma2 = theta[1];
    Accum dbeta, usq;
    for (std::size_t i = 0; i < data.q(); ++i) {
        const auto& x = data.x(i);
        const auto& y = data.y(i);
        for (std::size_t j = 0; j < x.size(); ++j)
            dbeta.add(x[j] * (y[j] - expit(beta * x[j] + u[i])));
        usq.add(u[i] * u[i]);
    }
    const double q = static_cast<double>(data.q());
    return {dbeta.value(),
            -q / (2.0 * sigma2) + usq.value() / (2.0 * sigma2 * sigma2)};
}

double glmm_target_logdensity(const double* u, const Theta& theta,
                              const PanelDataset& data) {
    check_glmm_theta(theta);
    const double beta = theta[0], sigma2 = theta[1];
    Accum acc;
    for (std::size_t i = 0; i < data.q(); ++i) {
        acc.add(glmm_group_g(data, i, u[i], beta));
        acc.add(-u[i] * u[i] / (2.0 * sigma2));
    }
    return acc.value();
}

DrawMatrix glmm_mh_chain(const Theta& theta, const PanelDataset& data,
                         std::int64_t m, std::int64_t burnin,
                         const std::vector<double>& u0, RngStream& rng) {
    check_glmm_theta(theta);
    if (m < 1) throw config_error("glmm_mh_chain: m must be >= 1");
    if (burnin < 0) throw config_error("glmm_mh_chain: burnin must be >= 0");
    const std::size_t q = data.q();
    if (u0.size() != q)
        throw config_error("glmm_mh_chain: u0 must have one entry per group");

    const double beta = theta[0];
    const double sd = std::sqrt(theta[1]);
    std::vector<double> u = u0;

    // beta is fixed over the whole chain, so exp(beta*x_ij) can be hoisted
    // out of the g evaluations: log(1+e^{beta x + v}) = log1p(eb * e^v).
    // Inverse-CDF normals are bounded (|z| < 8.3), so the factored products
    // cannot overflow when the linear predictor stays under ~600; otherwise
    // fall back to the direct form.
    double max_bx = 0.0;
    for (std::size_t i = 0; i < q; ++i)
        for (double xv : data.x(i))
            max_bx = std::max(max_bx, std::fabs(beta * xv));
    const double max_v =
        std::max(8.3 * sd, [&] {
            double mv = 0.0;
            for (double v : u0) mv = std::max(mv, std::fabs(v));
            return mv;
        }());
    const bool fast = max_bx + max_v < 600.0;

    std::vector<std::vector<double>> eb(q);
    std::vector<double> ysum(q);
    for (std::size_t i = 0; i < q; ++i) {
        Accum ys;
        for (double yv : data.y(i)) ys.add(yv);
        ysum[i] = ys.value();
        if (fast) {
            eb[i].reserve(data.n(i));
            for (double xv : data.x(i)) eb[i].push_back(std::exp(beta * xv));
        }
    }
    auto geval = [&](std::size_t i, double v) {
        if (!fast) return glmm_group_g(data, i, v, beta);
        const double ev = std::exp(v);
        Accum acc;
        for (double e : eb[i]) acc.add(std::log1p(e * ev));
        return ysum[i] * v - acc.value();
    };

    std::vector<double> g(q);
    for (std::size_t i = 0; i < q; ++i) g[i] = geval(i, u[i]);

    DrawMatrix draws(m, static_cast<std::int64_t>(q));
    const std::int64_t total = burnin + m;
    for (std::int64_t s = 0; s < total; ++s) {
        for (std::size_t i = 0; i < q; ++i) {
            // The N(0, sigma2) proposal cancels the intercept prior in the
            // ratio, leaving only the response terms.
            const double prop = rng.normal(0.0, sd);
            const double gp = geval(i, prop);
            const double uu = rng.uniform(); // consumed on every proposal
            if (std::log(uu) < gp - g[i]) {
                u[i] = prop;
                g[i] = gp;
            }
        }
        if (s >= burnin) {
            double* row = draws.row(s - burnin);
            for (std::size_t i = 0; i < q; ++i) row[i] = u[i];
        }
    }
    return draws;
}

Theta glmm_mcem_mstep(const DrawMatrix& draws, const PanelDataset& data,
                      double beta_init) {
    if (draws.m < 2)
        throw config_error("glmm M-step: needs at least 2 draws");
    if (draws.q != static_cast<std::int64_t>(data.q()))
        throw config_error("glmm M-step: draw dimension does not match groups");

    Accum usq;
    for (std::int64_t k = 0; k < draws.m; ++k) {
        const double* row = draws.row(k);
        for (std::int64_t i = 0; i < draws.q; ++i) usq.add(row[i] * row[i]);
    }
    const double sigma2_new =
        usq.value() / (static_cast<double>(draws.m) * static_cast<double>(draws.q));
    if (!(sigma2_new > 0.0))
        throw domain_error("glmm M-step: sigma2 update is not positive "
                           "(all intercept draws are zero)");

    // Averaged score in beta: sum_ij x_ij y_ij - (1/m) sum_k sum_ij
    // x_ij expit(beta x_ij + u_ik). Strictly decreasing in beta, so the
    // root is unique whenever any x_ij is nonzero.
    //
    // expit(beta x + u) = 1/(1 + e^{-beta x} e^{-u}); the e^{-u} factors do
    // not depend on beta, so they are computed once for the whole solve.
    // Overflow is impossible while |beta x| + |u| stays under ~600; the
    // fallback handles anything wilder.
    const double m = static_cast<double>(draws.m);
    double max_absx = 0.0, max_absu = 0.0;
    for (std::size_t i = 0; i < data.q(); ++i)
        for (double xv : data.x(i)) max_absx = std::max(max_absx, std::fabs(xv));
    for (const double& v : draws.a) max_absu = std::max(max_absu, std::fabs(v));
    const bool fast = 50.0 * max_absx + max_absu < 600.0;

    // Group-major copy of the draws keeps the hot loop contiguous.
    std::vector<std::vector<double>> eu;
    if (fast) {
        eu.resize(data.q());
        for (std::size_t i = 0; i < data.q(); ++i) {
            eu[i].resize(static_cast<std::size_t>(draws.m));
            for (std::int64_t k = 0; k < draws.m; ++k)
                eu[i][static_cast<std::size_t>(k)] = std::exp(-draws.at(k, i));
        }
    }

    auto score_and_slope = [&](double beta) {
        Accum sc, sl;
        if (fast) {
            for (std::size_t i = 0; i < data.q(); ++i) {
                const auto& x = data.x(i);
                for (std::size_t j = 0; j < x.size(); ++j) {
                    const double ex = std::exp(-beta * x[j]);
                    Accum scj, slj;
                    for (double e : eu[i]) {
                        const double pr = 1.0 / (1.0 + ex * e);
                        scj.add(pr);
                        slj.add(pr * (1.0 - pr));
                    }
                    sc.add(x[j] * scj.value());
                    sl.add(x[j] * x[j] * slj.value());
                }
            }
        } else {
            for (std::int64_t k = 0; k < draws.m; ++k) {
                const double* row = draws.row(k);
                for (std::size_t i = 0; i < data.q(); ++i) {
                    const auto& x = data.x(i);
                    for (std::size_t j = 0; j < x.size(); ++j) {
                        const double pr = expit(beta * x[j] + row[i]);
                        sc.add(x[j] * pr);
                        sl.add(x[j] * x[j] * pr * (1.0 - pr));
                    }
                }
            }
        }
        return std::pair<double, double>(data.score_total() - sc.value() / m,
                                         -sl.value() / m);
    };

    const double lo = -50.0, hi = 50.0;
    double beta = beta_init;
    if (!(beta > lo && beta < hi)) beta = 0.0;
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
        auto [f, df] = score_and_slope(beta);
        if (df == 0.0) break; // flat score; fall through to bisection
        const double step = f / df;
        const double next = beta - step;
        if (!(next > lo && next < hi)) break;
        const bool done = std::fabs(next - beta) <= 1e-10 * (1.0 + std::fabs(beta));
        beta = next;
        if (done) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        double a = lo, b = hi;
        double fa = score_and_slope(a).first;
        double fb = score_and_slope(b).first;
        if (!(fa >= 0.0) || !(fb <= 0.0))
            throw numeric_error("glmm M-step: beta score has no root in [-50, 50]");
        for (int it = 0; it < 200 && (b - a) > 1e-12 * (1.0 + std::fabs(a)); ++it) {
            const double mid = 0.5 * (a + b);
            const double fm = score_and_slope(mid).first;
            if (fm >= 0.0)
                a = mid;
            else
                b = mid;
        }
        beta = 0.5 * (a + b);
    }

    Theta out = glmm_theta(beta, sigma2_new);
    out.validate();
    return out;
}

namespace {

struct GroupMode {
    double vhat; // maximizer of the group's joint log density in v
    double curv; // negated second derivative at vhat (positive)
};

// Newton on ell_i(v) = g_i(v) - v^2/(2 sigma2), strictly concave in v.
// ell' is strictly decreasing and |sum_j (y_j - p_j)| <= n_i, so the
// derivative changes sign inside [-(n_i sigma2 + 1), n_i sigma2 + 1];
// steps that leave the current sign bracket fall back to its midpoint,
// which makes the search immune to Newton overshoot at extreme sigma2.
GroupMode group_mode(const PanelDataset& data, std::size_t i, double beta,
                     double sigma2) {
    const auto& x = data.x(i);
    const auto& y = data.y(i);
    auto derivs = [&](double v) {
        Accum d1a, d2a;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double pr = expit(beta * x[j] + v);
            d1a.add(y[j] - pr);
            d2a.add(pr * (1.0 - pr));
        }
        return std::pair<double, double>(d1a.value() - v / sigma2,
                                         -d2a.value() - 1.0 / sigma2);
    };

    const double bound = static_cast<double>(x.size()) * sigma2 + 1.0;
    double lo = -bound, hi = bound;
    double v = 0.0;
    for (int it = 0; it < 200; ++it) {
        const auto [d1, d2] = derivs(v);
        (d1 > 0.0 ? lo : hi) = v;
        const double step = d1 / d2;
        double next = v - step;
        if (step != 0.0 && !(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const bool done = std::fabs(next - v) <= 1e-12 * (1.0 + std::fabs(next));
        v = next;
        if (done) {
            GroupMode gm;
            gm.vhat = v;
            Accum d2b;
            for (std::size_t j = 0; j < x.size(); ++j) {
                const double pr = expit(beta * x[j] + v);
                d2b.add(pr * (1.0 - pr));
            }
            gm.curv = d2b.value() + 1.0 / sigma2;
            return gm;
        }
    }
    throw numeric_error("quadrature: intercept mode search did not converge");
}

} // namespace

double glmm_loglik_quadrature(const Theta& theta, const PanelDataset& data,
                              int nodes) {
    check_glmm_theta(theta);
    if (nodes < 10)
        throw config_error("glmm_loglik_quadrature: need at least 10 nodes");
    const double beta = theta[0], sigma2 = theta[1];
    const GhRule rule = gauss_hermite(nodes);

    Accum total;
    for (std::size_t i = 0; i < data.q(); ++i) {
        const GroupMode gm = group_mode(data, i, beta, sigma2);
        const double shat = 1.0 / std::sqrt(gm.curv);
        auto ell = [&](double v) {
            return glmm_group_g(data, i, v, beta) + normal_logpdf(v, 0.0, sigma2);
        };
        const double ell_hat = ell(gm.vhat);
        // integral e^{ell(v)} dv with v = vhat + sqrt(2) shat t: weights
        // absorb e^{-t^2}, so the summand carries e^{t^2} explicitly.
        Accum s;
        for (int k = 0; k < nodes; ++k) {
            const double t = rule.nodes[k];
            const double v = gm.vhat + std::sqrt(2.0) * shat * t;
            s.add(rule.weights[k] * std::exp(t * t + ell(v) - ell_hat));
        }
        total.add(beta * data.score_sum(i) + ell_hat +
                  std::log(std::sqrt(2.0) * shat) + std::log(s.value()));
    }
    return total.value();
}

namespace {

// Nelder-Mead on (beta, log sigma2). Plain simplex moves; good enough for
// a smooth two-dimensional surface.
struct NmPoint {
    std::array<double, 2> x;
    double f;
};

} // namespace

Theta glmm_direct_mle(const PanelDataset& data, int nodes) {
    auto negll = [&](const std::array<double, 2>& x) {
        return -glmm_loglik_quadrature(glmm_theta(x[0], std::exp(x[1])), data,
                                       nodes);
    };

    const int max_evals = 10000;
    int evals = 0;
    auto eval = [&](const std::array<double, 2>& x) {
        if (++evals > max_evals)
            throw numeric_error("direct MLE: maximizer exceeded 10000 "
                                "objective evaluations");
        return negll(x);
    };

    std::array<NmPoint, 3> s;
    s[0].x = {0.0, 0.0};
    s[1].x = {0.5, 0.0};
    s[2].x = {0.0, 0.5};
    for (auto& p : s) p.f = eval(p.x);

    auto order = [&]() {
        std::sort(s.begin(), s.end(),
                  [](const NmPoint& a, const NmPoint& b) { return a.f < b.f; });
    };
    auto lerp = [](const std::array<double, 2>& a, const std::array<double, 2>& b,
                   double w) {
        return std::array<double, 2>{a[0] + w * (b[0] - a[0]),
                                     a[1] + w * (b[1] - a[1])};
    };

    while (true) {
        order();
        if (std::max(std::fabs(s[1].f - s[0].f), std::fabs(s[2].f - s[0].f)) <
            1e-8)
            break;
        const std::array<double, 2> cen = {(s[0].x[0] + s[1].x[0]) / 2.0,
                                           (s[0].x[1] + s[1].x[1]) / 2.0};
        NmPoint refl;
        refl.x = lerp(s[2].x, cen, 2.0); // cen + (cen - worst)
        refl.f = eval(refl.x);
        if (refl.f < s[0].f) {
            NmPoint exp_;
            exp_.x = lerp(cen, refl.x, 2.0);
            exp_.f = eval(exp_.x);
            s[2] = (exp_.f < refl.f) ? exp_ : refl;
        } else if (refl.f < s[1].f) {
            s[2] = refl;
        } else {
            NmPoint con;
            if (refl.f < s[2].f) {
                con.x = lerp(cen, refl.x, 0.5); // outside
            } else {
                con.x = lerp(cen, s[2].x, 0.5); // inside
            }
            con.f = eval(con.x);
            if (con.f < std::min(refl.f, s[2].f)) {
                s[2] = con;
            } else {
                for (int i = 1; i < 3; ++i) {
                    s[i].x = lerp(s[0].x, s[i].x, 0.5);
                    s[i].f = eval(s[i].x);
                }
            }
        }
    }
    order();
    return glmm_theta(s[0].x[0], std::exp(s[0].x[1]));
}

std::int64_t GlmmModel::latent_dim() const {
    return static_cast<std::int64_t>(data_.q());
}

double GlmmModel::loglik(const Theta& theta) const {
    return glmm_loglik_quadrature(theta, data_, nodes_);
}

DrawMatrix GlmmModel::sample_posterior(const Theta& theta, std::int64_t m,
                                       RngStream& rng) const {
    const std::vector<double> u0(data_.q(), 0.0);
    return glmm_mh_chain(theta, data_, m, burnin_, u0, rng);
}

Theta GlmmModel::mstep(const DrawMatrix& draws, const Theta& current) const {
    check_glmm_theta(current);
    return glmm_mcem_mstep(draws, data_, current[0]);
}

double GlmmModel::complete_loglik(const Theta& theta, const double* u) const {
    return glmm_complete_loglik(theta, u, data_);
}

} // namespace mcem
