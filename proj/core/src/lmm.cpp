#include "mcem/lmm.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "accum.hpp"
#include "mcem/errors.hpp"
#include "mcem/trace.hpp"

namespace mcem {

GroupedDataset GroupedDataset::from_groups(
    std::vector<std::vector<double>> groups) {
    if (groups.empty())
        throw config_error("grouped dataset: need at least one group");
    GroupedDataset d;
    d.groups_ = std::move(groups);
    for (const auto& g : d.groups_) {
        if (g.empty())
            throw config_error("grouped dataset: groups must be non-empty");
        Accum sum, sum2;
        for (double y : g) {
            if (!std::isfinite(y))
                throw config_error("grouped dataset: responses must be finite");
            sum.add(y);
            sum2.add(y * y);
        }
        d.n_.push_back(static_cast<std::int64_t>(g.size()));
        d.ybar_.push_back(sum.value() / static_cast<double>(g.size()));
        d.ss_.push_back(sum2.value());
        d.N_ += static_cast<std::int64_t>(g.size());
    }
    return d;
}

const GroupedDataset& bulls_data() {
    static const GroupedDataset data = GroupedDataset::from_groups({
        {46, 31, 37, 62, 30},
        {70, 59},
        {52, 44, 57, 40, 67, 64, 70},
        {47, 21, 70, 46, 14},
        {42, 64, 50, 69, 77, 81, 87},
        {35, 68, 59, 38, 57, 76, 57, 29, 60},
    });
    return data;
}

GroupedDataset load_grouped_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(f, line))
        throw io_error("'" + path + "': empty file, expected a header");
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
        line.pop_back();
    if (line != "bull,rate")
        throw io_error("'" + path + "': expected header 'bull,rate'");

    std::vector<std::vector<double>> groups;
    std::map<std::string, std::size_t> index; // label -> group slot
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
            line.pop_back();
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw io_error("'" + path + "' line " + std::to_string(lineno) +
                           ": expected 'bull,rate'");
        std::string label = line.substr(0, comma);
        std::string value = line.substr(comma + 1);
        char* end = nullptr;
        errno = 0;
        double y = std::strtod(value.c_str(), &end);
        if (value.empty() || end != value.c_str() + value.size())
            throw io_error("'" + path + "' line " + std::to_string(lineno) +
                           ": bad rate value '" + value + "'");
        auto it = index.find(label);
        if (it == index.end()) {
            it = index.emplace(label, groups.size()).first;
            groups.emplace_back();
        }
        groups[it->second].push_back(y);
    }
    return GroupedDataset::from_groups(std::move(groups));
}

void save_grouped_csv(const GroupedDataset& data, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open '" + path + "' for writing");
    f << "bull,rate\n";
    for (std::size_t i = 0; i < data.q(); ++i)
        for (double y : data.group(i))
            f << (i + 1) << ',' << format_double(y) << '\n';
    f.flush();
    if (!f) throw io_error("write failed for '" + path + "'");
}

Theta lmm_theta(double mu, double sigma_u2, double sigma_e2) {
    return Theta({"mu", "sigma_u2", "sigma_e2"}, {mu, sigma_u2, sigma_e2},
                 {Domain::unconstrained, Domain::positive, Domain::positive});
}

namespace {

void check_lmm_theta(const Theta& theta) {
    if (theta.dim() != 3)
        throw config_error("lmm: theta must have 3 components (mu, sigma_u2, sigma_e2)");
    theta.validate();
}

} // namespace

PosteriorParams lmm_posterior(const Theta& theta, const GroupedDataset& data) {
    check_lmm_theta(theta);
    const double mu = theta[0], su2 = theta[1], se2 = theta[2];
    PosteriorParams post;
    post.uhat.reserve(data.q());
    post.vhat.reserve(data.q());
    for (std::size_t i = 0; i < data.q(); ++i) {
        const double n = static_cast<double>(data.n(i));
        const double denom = se2 + n * su2;
        post.uhat.push_back((se2 * mu + n * su2 * data.ybar(i)) / denom);
        post.vhat.push_back(su2 * se2 / denom);
    }
    return post;
}

double lmm_loglik(const Theta& theta, const GroupedDataset& data) {
    check_lmm_theta(theta);
    const double mu = theta[0], su2 = theta[1], se2 = theta[2];
    // Marginally, y_i ~ N(mu 1, sigma_e2 I + sigma_u2 J). The rank-one
    // structure gives the determinant sigma_e2^(n-1) (sigma_e2 + n sigma_u2)
    // and an explicit inverse quadratic form.
    Accum ll;
    for (std::size_t i = 0; i < data.q(); ++i) {
        const double n = static_cast<double>(data.n(i));
        const double dev = data.ybar(i) - mu;
        const double ssc =
            data.ss(i) - 2.0 * n * data.ybar(i) * mu + n * mu * mu;
        const double denom = se2 + n * su2;
        const double quad = ssc - su2 * n * n * dev * dev / denom;
        ll.add(-0.5 * n * std::log(2.0 * M_PI));
        ll.add(-0.5 * ((n - 1.0) * std::log(se2) + std::log(denom)));
        ll.add(-0.5 * quad / se2);
    }
    return ll.value();
}

Theta lmm_em_step(const Theta& theta, const GroupedDataset& data) {
    check_lmm_theta(theta);
    const PosteriorParams post = lmm_posterior(theta, data);
    const double q = static_cast<double>(data.q());

    Accum sum_uhat;
    for (double u : post.uhat) sum_uhat.add(u);
    const double mu_new = sum_uhat.value() / q;

    Accum su_acc; // E[(u_i - mu_new)^2 | y] summed over groups
    for (std::size_t i = 0; i < data.q(); ++i) {
        const double d = post.uhat[i] - mu_new;
        su_acc.add(post.vhat[i] + d * d);
    }
    const double su2_new = su_acc.value() / q;

    Accum se_acc; // E[sum_j (y_ij - u_i)^2 | y] summed over groups
    for (std::size_t i = 0; i < data.q(); ++i) {
        const double n = static_cast<double>(data.n(i));
        se_acc.add(data.ss(i) - 2.0 * n * data.ybar(i) * post.uhat[i] +
                   n * (post.vhat[i] + post.uhat[i] * post.uhat[i]));
    }
    const double se2_new = se_acc.value() / static_cast<double>(data.N());

    Theta out = lmm_theta(mu_new, su2_new, se2_new);
    out.validate();
    return out;
}

double lmm_q(const Theta& theta, const Theta& theta_tilde,
             const GroupedDataset& data) {
    check_lmm_theta(theta);
    check_lmm_theta(theta_tilde);
    const PosteriorParams post = lmm_posterior(theta_tilde, data);
    const double mu = theta[0], su2 = theta[1], se2 = theta[2];
    Accum acc;
    for (std::size_t i = 0; i < data.q(); ++i) {
        const double n = static_cast<double>(data.n(i));
        const double uh = post.uhat[i], vh = post.vhat[i];
        // response part: E[sum_j (y_ij - u_i)^2 | y; theta_tilde]
        const double resp =
            data.ss(i) - 2.0 * n * data.ybar(i) * uh + n * (vh + uh * uh);
        acc.add(-0.5 * n * std::log(se2) - 0.5 * resp / se2);
        // intercept part: E[(u_i - mu)^2 | y; theta_tilde]
        const double dev = uh - mu;
        acc.add(-0.5 * std::log(su2) - 0.5 * (vh + dev * dev) / su2);
    }
    return acc.value();
}

GradHess lmm_grad_q_diag(const Theta& theta, const GroupedDataset& data) {
    check_lmm_theta(theta);
    const PosteriorParams post = lmm_posterior(theta, data);
    const double mu = theta[0], su2 = theta[1], se2 = theta[2];
    const double q = static_cast<double>(data.q());
    const double N = static_cast<double>(data.N());

    Accum sAcc, bAcc, aAcc;
    for (std::size_t i = 0; i < data.q(); ++i) {
        const double n = static_cast<double>(data.n(i));
        const double uh = post.uhat[i], vh = post.vhat[i];
        const double dev = uh - mu;
        sAcc.add(dev);
        bAcc.add(vh + dev * dev);
        aAcc.add(data.ss(i) - 2.0 * n * data.ybar(i) * uh + n * (vh + uh * uh));
    }
    const double S = sAcc.value(); // sum (uhat - mu)
    const double B = bAcc.value(); // sum E[(u - mu)^2]
    const double A = aAcc.value(); // sum E[sum_j (y - u)^2]

    GradHess gh;
    gh.grad = {S / su2,
               -q / (2.0 * su2) + B / (2.0 * su2 * su2),
               -N / (2.0 * se2) + A / (2.0 * se2 * se2)};
    gh.hess = {{{-q / su2, -S / (su2 * su2), 0.0},
                {-S / (su2 * su2), q / (2.0 * su2 * su2) - B / (su2 * su2 * su2),
                 0.0},
                {0.0, 0.0,
                 N / (2.0 * se2 * se2) - A / (se2 * se2 * se2)}}};
    return gh;
}

namespace {

// Solve the 3x3 system H s = g by Gaussian elimination with partial
// pivoting. Throws numeric_error when H is singular to working precision.
std::array<double, 3> solve3(std::array<std::array<double, 3>, 3> h,
                             std::array<double, 3> g) {
    double scale = 0.0;
    for (const auto& row : h)
        for (double v : row) scale = std::max(scale, std::fabs(v));
    if (scale == 0.0) throw numeric_error("curvature matrix is singular");

    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(h[r][col]) > std::fabs(h[piv][col])) piv = r;
        if (std::fabs(h[piv][col]) < 1e-14 * scale)
            throw numeric_error("curvature matrix is singular");
        std::swap(h[col], h[piv]);
        std::swap(g[col], g[piv]);
        for (int r = col + 1; r < 3; ++r) {
            const double f = h[r][col] / h[col][col];
            for (int c = col; c < 3; ++c) h[r][c] -= f * h[col][c];
            g[r] -= f * g[col];
        }
    }
    std::array<double, 3> s{};
    for (int r = 2; r >= 0; --r) {
        double v = g[r];
        for (int c = r + 1; c < 3; ++c) v -= h[r][c] * s[c];
        s[r] = v / h[r][r];
    }
    return s;
}

} // namespace

Theta lmm_em_gradient_step(const Theta& theta, const GroupedDataset& data) {
    check_lmm_theta(theta);
    const GradHess gh = lmm_grad_q_diag(theta, data);
    const std::array<double, 3> dir = solve3(gh.hess, gh.grad);

    const double ll_old = lmm_loglik(theta, data);
    double lam = 1.0;
    for (int halvings = 0; halvings <= 30; ++halvings) {
        std::vector<double> v = {theta[0] - lam * dir[0],
                                 theta[1] - lam * dir[1],
                                 theta[2] - lam * dir[2]};
        if (v[1] > 0.0 && v[2] > 0.0) {
            const Theta cand = theta.with_values(v);
            const double ll_new = lmm_loglik(cand, data);
            if (std::isfinite(ll_new) &&
                ll_new >= ll_old - 1e-9 * (1.0 + std::fabs(ll_old)))
                return cand;
        }
        lam *= 0.5;
    }
    throw numeric_error(
        "em_gradient_step: no acceptable step after 30 halvings");
}

DrawMatrix lmm_sample_posterior(const Theta& theta, const GroupedDataset& data,
                                std::int64_t m, RngStream& rng) {
    check_lmm_theta(theta);
    if (m < 1) throw config_error("lmm_sample_posterior: m must be >= 1");
    const PosteriorParams post = lmm_posterior(theta, data);
    const std::int64_t q = static_cast<std::int64_t>(data.q());
    std::vector<double> sd(data.q());
    for (std::size_t i = 0; i < data.q(); ++i) sd[i] = std::sqrt(post.vhat[i]);

    DrawMatrix draws(m, q);
    for (std::int64_t k = 0; k < m; ++k) {
        double* row = draws.row(k);
        for (std::int64_t i = 0; i < q; ++i)
            row[i] = post.uhat[i] + sd[i] * rng.normal();
    }
    return draws;
}

LmmSuffStats lmm_suffstats(const GroupedDataset& data, const double* u) {
    LmmSuffStats s;
    Accum su, su2, cr, wu2;
    for (std::size_t i = 0; i < data.q(); ++i) {
        const double n = static_cast<double>(data.n(i));
        su.add(u[i]);
        su2.add(u[i] * u[i]);
        cr.add(n * data.ybar(i) * u[i]);
        wu2.add(n * u[i] * u[i]);
    }
    s.sum_u = su.value();
    s.sum_u2 = su2.value();
    s.cross = cr.value();
    s.wsum_u2 = wu2.value();
    return s;
}

namespace {

Theta lmm_mstep_impl(const DrawMatrix& draws, const GroupedDataset& data) {
    if (draws.m < 2)
        throw config_error("lmm M-step: needs at least 2 draws");
    if (draws.q != static_cast<std::int64_t>(data.q()))
        throw config_error("lmm M-step: draw dimension does not match groups");
    const double m = static_cast<double>(draws.m);
    const double q = static_cast<double>(data.q());
    const double N = static_cast<double>(data.N());

    Accum total;
    for (std::int64_t k = 0; k < draws.m; ++k) {
        const double* row = draws.row(k);
        for (std::int64_t i = 0; i < draws.q; ++i) total.add(row[i]);
    }
    const double mu_new = total.value() / (m * q);

    // Centering with the new mu keeps the variance update a mean of squares.
    Accum su_acc, se_acc;
    for (std::int64_t k = 0; k < draws.m; ++k) {
        const double* row = draws.row(k);
        for (std::int64_t i = 0; i < draws.q; ++i) {
            const double d = row[i] - mu_new;
            su_acc.add(d * d);
            const double n = static_cast<double>(data.n(i));
            se_acc.add(data.ss(i) - 2.0 * n * data.ybar(i) * row[i] +
                       n * row[i] * row[i]);
        }
    }
    const double su2_new = su_acc.value() / (m * q);
    const double se2_new = se_acc.value() / (m * N);

    Theta out = lmm_theta(mu_new, su2_new, se2_new);
    out.validate();
    return out;
}

} // namespace

Theta lmm_mcem_step(const Theta& theta, const GroupedDataset& data,
                    std::int64_t m, RngStream& rng) {
    if (m < 2) throw config_error("lmm_mcem_step: m must be >= 2");
    DrawMatrix draws = lmm_sample_posterior(theta, data, m, rng);
    return lmm_mstep_impl(draws, data);
}

std::int64_t LmmModel::latent_dim() const {
    return static_cast<std::int64_t>(data_.q());
}

double LmmModel::loglik(const Theta& theta) const {
    return lmm_loglik(theta, data_);
}

Theta LmmModel::em_step(const Theta& theta) const {
    return lmm_em_step(theta, data_);
}

Theta LmmModel::em_gradient_step(const Theta& theta) const {
    return lmm_em_gradient_step(theta, data_);
}

DrawMatrix LmmModel::sample_posterior(const Theta& theta, std::int64_t m,
                                      RngStream& rng) const {
    return lmm_sample_posterior(theta, data_, m, rng);
}

Theta LmmModel::mstep(const DrawMatrix& draws, const Theta&) const {
    return lmm_mstep_impl(draws, data_);
}

double LmmModel::complete_loglik(const Theta& theta, const double* u) const {
    check_lmm_theta(theta);
    const double mu = theta[0], su2 = theta[1], se2 = theta[2];
    Accum acc;
    for (std::size_t i = 0; i < data_.q(); ++i) {
        const double n = static_cast<double>(data_.n(i));
        const double dev = u[i] - mu;
        acc.add(-0.5 * std::log(su2) - 0.5 * dev * dev / su2);
        const double resp =
            data_.ss(i) - 2.0 * n * data_.ybar(i) * u[i] + n * u[i] * u[i];
        acc.add(-0.5 * n * std::log(se2) - 0.5 * resp / se2);
    }
    return acc.value();
}

} // namespace mcem
