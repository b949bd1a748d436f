#include "dktax/estimate.hpp"

#include "dktax/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dktax {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Groups {
    std::vector<std::pair<std::size_t, std::size_t>> spans;  // [begin, end) per id
};

/// Sorts by (id, year), drops non-finite rows and singleton ids.
template <class Obs, class Finite>
Groups prepare(std::vector<Obs>& obs, std::size_t& singletons, Finite finite) {
    std::erase_if(obs, [&](const Obs& o) { return !finite(o); });
    std::sort(obs.begin(), obs.end(), [](const Obs& a, const Obs& b) {
        return a.id != b.id ? a.id < b.id : a.year < b.year;
    });
    for (std::size_t i = 1; i < obs.size(); ++i)
        if (obs[i].id == obs[i - 1].id && obs[i].year == obs[i - 1].year)
            throw InvalidArgument("duplicate (id, year) in estimation sample");

    std::vector<Obs> kept;
    kept.reserve(obs.size());
    Groups g;
    singletons = 0;
    for (std::size_t i = 0; i < obs.size();) {
        std::size_t j = i;
        while (j < obs.size() && obs[j].id == obs[i].id) ++j;
        if (j - i < 2) {
            ++singletons;
        } else {
            const std::size_t b = kept.size();
            kept.insert(kept.end(), obs.begin() + static_cast<std::ptrdiff_t>(i),
                        obs.begin() + static_cast<std::ptrdiff_t>(j));
            g.spans.emplace_back(b, kept.size());
        }
        i = j;
    }
    obs = std::move(kept);
    return g;
}

void demean(MatrixXd& m, const Groups& g) {
    for (const auto& [b, e] : g.spans) {
        const auto n = static_cast<Eigen::Index>(e - b);
        auto block = m.middleRows(static_cast<Eigen::Index>(b), n);
        const Eigen::RowVectorXd mean = block.colwise().sum() / static_cast<double>(n);
        block.rowwise() -= mean;
    }
}

std::vector<int> distinct_years(const auto& obs) {
    std::vector<int> ys;
    for (const auto& o : obs) ys.push_back(o.year);
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    return ys;
}

/// Sum over clusters of s_g s_g' with s_g = X_g' u_g.
MatrixXd cluster_meat(const MatrixXd& x, const VectorXd& u, const Groups& g) {
    const auto k = x.cols();
    MatrixXd meat = MatrixXd::Zero(k, k);
    for (const auto& [b, e] : g.spans) {
        const auto n = static_cast<Eigen::Index>(e - b);
        const VectorXd s = x.middleRows(static_cast<Eigen::Index>(b), n).transpose() *
                           u.segment(static_cast<Eigen::Index>(b), n);
        meat.noalias() += s * s.transpose();
    }
    return meat;
}

void check_clusters(const Groups& g) {
    if (g.spans.size() < 2)
        throw EstimationError("fewer than two clusters with at least two observations");
}

}  // namespace

double cluster_factor(std::size_t clusters, std::size_t n, std::size_t k) {
    if (clusters < 2 || n <= k) throw EstimationError("too few observations for clustered variance");
    const double g = static_cast<double>(clusters);
    const double nn = static_cast<double>(n);
    return g / (g - 1.0) * (nn - 1.0) / (nn - static_cast<double>(k));
}

const EventStudyCoef* EventStudyResult::at(int year) const {
    for (const auto& c : coefs)
        if (c.year == year) return &c;
    return nullptr;
}

EventStudyResult event_study(std::vector<EsObs> obs, int ref_year) {
    EventStudyResult res;
    res.ref_year = ref_year;
    const Groups g =
        prepare(obs, res.n_singletons, [](const EsObs& o) { return std::isfinite(o.y); });
    check_clusters(g);

    const auto years = distinct_years(obs);
    if (!std::binary_search(years.begin(), years.end(), ref_year))
        throw EstimationError("reference year " + std::to_string(ref_year) +
                              " has no observations");
    std::vector<int> cols;
    for (int y : years)
        if (y != ref_year) cols.push_back(y);
    const auto j = static_cast<Eigen::Index>(cols.size());
    if (j == 0) throw EstimationError("event study needs a year besides the reference year");

    const auto n = static_cast<Eigen::Index>(obs.size());
    const Eigen::Index k = 2 * j;
    MatrixXd x = MatrixXd::Zero(n, k + 1);  // last column holds y
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& o = obs[static_cast<std::size_t>(i)];
        const auto it = std::lower_bound(cols.begin(), cols.end(), o.year);
        if (it != cols.end() && *it == o.year) {
            const auto c = static_cast<Eigen::Index>(it - cols.begin());
            x(i, c) = 1.0;
            if (o.treated) x(i, j + c) = 1.0;
        }
        x(i, k) = o.y;
    }
    demean(x, g);
    const MatrixXd xs = x.leftCols(k);
    const VectorXd ys = x.col(k);

    Eigen::ColPivHouseholderQR<MatrixXd> qr(xs);
    qr.setThreshold(1e-10);
    if (qr.rank() < k)
        throw EstimationError("collinear event-study design (rank " + std::to_string(qr.rank()) +
                              " of " + std::to_string(k) + ")");

    const MatrixXd xtx = xs.transpose() * xs;
    const MatrixXd inv = xtx.ldlt().solve(MatrixXd::Identity(k, k));
    const VectorXd beta = inv * (xs.transpose() * ys);
    const VectorXd u = ys - xs * beta;
    const double c = cluster_factor(g.spans.size(), obs.size(), static_cast<std::size_t>(k));
    const MatrixXd v = c * inv * cluster_meat(xs, u, g) * inv;

    res.n_obs = obs.size();
    res.n_clusters = g.spans.size();
    for (Eigen::Index i = 0; i < j; ++i) {
        EventStudyCoef e;
        e.year = cols[static_cast<std::size_t>(i)];
        e.beta = beta(j + i);
        e.se = std::sqrt(std::max(0.0, v(j + i, j + i)));
        e.ci_lo = e.beta - 1.96 * e.se;
        e.ci_hi = e.beta + 1.96 * e.se;
        res.coefs.push_back(e);
    }
    return res;
}

TotResult tot_iv(std::vector<IvObs> obs, int reform_year) {
    TotResult res;
    const Groups g = prepare(obs, res.n_singletons, [](const IvObs& o) {
        return std::isfinite(o.y) && std::isfinite(o.m);
    });
    check_clusters(g);

    const auto years = distinct_years(obs);
    const auto n = static_cast<Eigen::Index>(obs.size());
    const auto jw = static_cast<Eigen::Index>(years.size()) - 1;  // first year is the base
    // Columns: year dummies, then y, D = Post * m, Z = Post * treated.
    MatrixXd m = MatrixXd::Zero(n, jw + 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& o = obs[static_cast<std::size_t>(i)];
        const auto c = static_cast<Eigen::Index>(
            std::lower_bound(years.begin(), years.end(), o.year) - years.begin());
        if (c > 0) m(i, c - 1) = 1.0;
        const double post = o.year >= reform_year ? 1.0 : 0.0;
        m(i, jw) = o.y;
        m(i, jw + 1) = post * o.m;
        m(i, jw + 2) = post * (o.treated ? 1.0 : 0.0);
    }
    demean(m, g);
    if (jw > 0) {
        const MatrixXd w = m.leftCols(jw);
        const MatrixXd rhs = m.rightCols(3);
        const MatrixXd coef = (w.transpose() * w).ldlt().solve(w.transpose() * rhs);
        m.rightCols(3) = rhs - w * coef;
    }
    const VectorXd y = m.col(jw), d = m.col(jw + 1), z = m.col(jw + 2);

    const double zz = z.squaredNorm();
    const double zd = z.dot(d);
    const double scale = std::sqrt(zz * d.squaredNorm());
    if (!(zz > 0.0) || !(std::abs(zd) > 1e-10 * scale) || scale == 0.0)
        throw EstimationError("instrument has no covariance with the endogenous regressor");

    const double zy = z.dot(y);
    res.beta = zy / zd;
    res.first_stage = zd / zz;
    res.reduced_form = zy / zz;

    const double c =
        cluster_factor(g.spans.size(), obs.size(), static_cast<std::size_t>(jw + 1));
    const VectorXd u = y - res.beta * d;
    const VectorXd v = d - res.first_stage * z;
    const VectorXd r = y - res.reduced_form * z;
    double su = 0.0, sv = 0.0, sr = 0.0;
    for (const auto& [b, e] : g.spans) {
        double a1 = 0.0, a2 = 0.0, a3 = 0.0;
        for (std::size_t i = b; i < e; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            a1 += z(ii) * u(ii);
            a2 += z(ii) * v(ii);
            a3 += z(ii) * r(ii);
        }
        su += a1 * a1;
        sv += a2 * a2;
        sr += a3 * a3;
    }
    res.se = std::sqrt(c * su) / std::abs(zd);
    res.first_stage_se = std::sqrt(c * sv) / zz;
    res.reduced_form_se = std::sqrt(c * sr) / zz;
    res.f_stat = res.first_stage_se > 0.0
                     ? std::pow(res.first_stage / res.first_stage_se, 2)
                     : std::numeric_limits<double>::infinity();
    res.n_obs = obs.size();
    res.n_clusters = g.spans.size();
    return res;
}

ElasticityResult elasticity(double beta_tot, double se_tot, double mech_t, double mech_c) {
    const double delta = mech_t - mech_c;
    if (!(std::abs(delta) >= 1e-8))
        throw EstimationError("treated and control mechanical changes coincide");
    ElasticityResult r;
    r.epsilon = beta_tot / delta;
    r.se = se_tot / std::abs(delta);
    r.mech_t = mech_t;
    r.mech_c = mech_c;
    return r;
}

namespace {

std::pair<double, double> mean_sd(std::span<const double> x) {
    if (x.empty()) throw EstimationError("no mechanical changes for an arm");
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    if (x.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace

ElasticityResult elasticity(const TotResult& tot, std::span<const double> mech_t,
                            std::span<const double> mech_c) {
    const auto [mt, st] = mean_sd(mech_t);
    const auto [mc, sc] = mean_sd(mech_c);
    auto r = elasticity(tot.beta, tot.se, mt, mc);
    r.mech_t_sd = st;
    r.mech_c_sd = sc;
    return r;
}

}  // namespace dktax
