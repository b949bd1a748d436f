#pragma once

#include "dktax/estimate.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <random>
#include <vector>

namespace dktax::oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Brute-force oracles: explicit id dummies, full OLS or 2SLS, full sandwich.

struct FullFit {
    VectorXd beta;
    MatrixXd vcov;
    Eigen::Index rank;
    Eigen::Index cols;
};

inline std::vector<EsObs> random_panel(std::mt19937_64& rng, int n_ids, double p_missing) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<EsObs> out;
    for (int id = 0; id < n_ids; ++id) {
        const bool treated = u(rng) < 0.5;
        const double a = z(rng);
        for (int t = kFirstYear; t <= kLastYear; ++t) {
            if (u(rng) < p_missing) continue;
            out.push_back({1000 + 7 * id, t, a + 0.1 * (t - 1986) + z(rng), treated});
        }
    }
    return out;
}

/// Full dummy OLS with id dummies, year dummies (ref omitted) and
/// year x treated; returns the interaction block.
inline FullFit dummy_ols(const std::vector<EsObs>& obs_in, int ref) {
    // Same sample rules as the estimator: drop singletons.
    std::map<PersonId, int> count;
    for (const auto& o : obs_in) ++count[o.id];
    std::vector<EsObs> obs;
    for (const auto& o : obs_in)
        if (count[o.id] >= 2) obs.push_back(o);
    std::map<PersonId, int> idcol;
    std::map<int, int> ycol;
    for (const auto& o : obs) {
        idcol.emplace(o.id, 0);
        if (o.year != ref) ycol.emplace(o.year, 0);
    }
    int c = 0;
    for (auto& [k, v] : idcol) v = c++;
    const int g = c;
    for (auto& [k, v] : ycol) v = c++;
    const int j = static_cast<int>(ycol.size());
    const int p = g + 2 * j;
    const auto n = static_cast<Eigen::Index>(obs.size());
    MatrixXd x = MatrixXd::Zero(n, p);
    VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& o = obs[static_cast<std::size_t>(i)];
        x(i, idcol[o.id]) = 1.0;
        if (o.year != ref) {
            x(i, ycol[o.year]) = 1.0;
            if (o.treated) x(i, ycol[o.year] + j) = 1.0;
        }
        y(i) = o.y;
    }
    FullFit f;
    Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    f.rank = qr.rank();
    f.cols = p;
    if (f.rank < p) return f;
    const MatrixXd inv = (x.transpose() * x).inverse();
    const VectorXd b = inv * x.transpose() * y;
    const VectorXd u = y - x * b;
    MatrixXd meat = MatrixXd::Zero(p, p);
    for (const auto& [id, col] : idcol) {
        VectorXd s = VectorXd::Zero(p);
        for (Eigen::Index i = 0; i < n; ++i)
            if (obs[static_cast<std::size_t>(i)].id == id) s += x.row(i).transpose() * u(i);
        meat += s * s.transpose();
    }
    const double fac = cluster_factor(idcol.size(), obs.size(), static_cast<std::size_t>(2 * j));
    const MatrixXd v = fac * inv * meat * inv;
    f.beta = b.segment(g + j, j);
    f.vcov = v.block(g + j, g + j, j, j);
    return f;
}


inline std::vector<IvObs> random_iv_panel(std::mt19937_64& rng, int n_ids, double p_missing) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<IvObs> out;
    for (int id = 0; id < n_ids; ++id) {
        const bool treated = u(rng) < 0.5;
        const double a = z(rng);
        for (int t = 1984; t <= kLastYear; ++t) {
            if (u(rng) < p_missing) continue;
            const double m = u(rng) < (treated && t >= 1987 ? 0.7 : 0.2) ? 1.0 : 0.0;
            out.push_back({id, t, a + 0.3 * m * (t >= 1987) + z(rng), m, treated});
        }
    }
    return out;
}

struct IvOracle {
    double beta, se;
};

inline IvOracle dummy_2sls(const std::vector<IvObs>& in) {
    std::map<PersonId, int> count;
    for (const auto& o : in) ++count[o.id];
    std::vector<IvObs> obs;
    for (const auto& o : in)
        if (count[o.id] >= 2) obs.push_back(o);
    std::map<PersonId, int> idcol;
    std::map<int, int> ycol;
    for (const auto& o : obs) {
        idcol.emplace(o.id, 0);
        ycol.emplace(o.year, 0);
    }
    int c = 1;  // column 0 is the endogenous regressor / instrument
    for (auto& [k, v] : idcol) v = c++;
    bool first = true;
    for (auto& [k, v] : ycol) {
        v = first ? -1 : c++;
        first = false;
    }
    const auto n = static_cast<Eigen::Index>(obs.size());
    MatrixXd x = MatrixXd::Zero(n, c), zm = MatrixXd::Zero(n, c);
    VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& o = obs[static_cast<std::size_t>(i)];
        const double post = o.year >= 1987;
        x(i, 0) = post * o.m;
        zm(i, 0) = post * o.treated;
        x(i, idcol[o.id]) = zm(i, idcol[o.id]) = 1.0;
        if (ycol[o.year] >= 0) x(i, ycol[o.year]) = zm(i, ycol[o.year]) = 1.0;
        y(i) = o.y;
    }
    const MatrixXd zx_inv = (zm.transpose() * x).inverse();
    const VectorXd b = zx_inv * zm.transpose() * y;
    const VectorXd u = y - x * b;
    MatrixXd meat = MatrixXd::Zero(c, c);
    for (const auto& [id, col] : idcol) {
        VectorXd s = VectorXd::Zero(c);
        for (Eigen::Index i = 0; i < n; ++i)
            if (obs[static_cast<std::size_t>(i)].id == id) s += zm.row(i).transpose() * u(i);
        meat += s * s.transpose();
    }
    const double fac = cluster_factor(idcol.size(), obs.size(), ycol.size());
    const MatrixXd v = fac * zx_inv * meat * zx_inv.transpose();
    return {b(0), std::sqrt(v(0, 0))};
}

}  // namespace dktax::oracle
