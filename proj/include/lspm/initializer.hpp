#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lspm/linalg.hpp"
#include "lspm/log.hpp"
#include "lspm/model.hpp"
#include "lspm/network.hpp"
#include "lspm/shrinkage.hpp"

namespace lspm {

/// Classical (Torgerson) scaling of a distance matrix into p dimensions.
/// Coordinates for non-positive eigenvalues among the leading p are zero.
inline LatentConfig classical_mds(const Matrix& dist, std::size_t p) {
    const std::size_t n = dist.rows();
    if (dist.cols() != n) throw std::invalid_argument("classical_mds: distance matrix is not square");
    if (p < 1 || p >= n) throw std::invalid_argument("classical_mds: need 1 <= p < n");

    Matrix b(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) b(i, j) = -0.5 * dist(i, j) * dist(i, j);
    // double centering: B = J A J
    std::vector<double> row_mean(n, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) row_mean[i] += b(i, j);
        grand += row_mean[i];
        row_mean[i] /= static_cast<double>(n);
    }
    grand /= static_cast<double>(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) b(i, j) += grand - row_mean[i] - row_mean[j];

    const auto eig = jacobi_eigen(b);
    LatentConfig z(n, p);
    for (std::size_t k = 0; k < p; ++k) {
        const double lam = eig.values[k];
        if (!(lam > 0.0)) continue;
        const double s = std::sqrt(lam);
        for (std::size_t i = 0; i < n; ++i) z(i, k) = s * eig.vectors(i, k);
    }
    center_columns(z);
    return z;
}

inline LatentConfig classical_mds(const GeodesicMatrix& d, std::size_t p) { return classical_mds(d.hops, p); }

struct RegressionFit {
    double alpha = 0.0;
    double beta = 1.0;
    int iterations = 0;
    bool converged = false;
    bool fallback = false;
    std::string message;
};

namespace detail {

inline double link_of_mean(double mean, Link link) {
    if (link == Link::Logit) {
        const double m = std::clamp(mean, 1e-6, 1.0 - 1e-6);
        return std::log(m / (1.0 - m));
    }
    return std::log(std::max(mean, 1e-6));
}

}  // namespace detail

/// Maximum-likelihood fit of eta = alpha - beta * d^2 over all ordered pairs
/// by iteratively reweighted least squares. Falls back to
/// (link(mean response), 1) when the fit is degenerate.
inline RegressionFit init_regression(const Network& net, const LatentConfig& z0, Link link) {
    check_link(net, link);
    check_shapes(net, z0);
    const std::size_t n = net.size();
    const auto d2 = pairwise_sq_distances(z0);

    double ysum = 0.0;
    double ymin = 0.0, ymax = 0.0;
    bool first = true;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double y = static_cast<double>(net(i, j));
            ysum += y;
            if (first || y < ymin) ymin = y;
            if (first || y > ymax) ymax = y;
            first = false;
        }
    const double npairs = static_cast<double>(n) * static_cast<double>(n - 1);
    const double ybar = ysum / npairs;

    RegressionFit fit;
    auto fall_back = [&](const std::string& why) {
        fit.alpha = detail::link_of_mean(ybar, link);
        fit.beta = 1.0;
        fit.fallback = true;
        fit.converged = false;
        fit.message = why;
        log::warn("initial regression fell back to (link(mean), 1): " + why);
        return fit;
    };

    if (ymin == ymax) return fall_back("all responses are equal");

    double a = detail::link_of_mean(ybar, link);
    double b = 0.0;
    for (int it = 1; it <= 100; ++it) {
        // weighted least squares on x = (1, -d2)
        double s11 = 0.0, s12 = 0.0, s22 = 0.0, r1 = 0.0, r2 = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double x = -d2(i, j);
                const double eta = clip_eta(a + b * x);
                const double y = static_cast<double>(net(i, j));
                double mu = 0.0, w = 0.0;
                if (link == Link::Logit) {
                    mu = 1.0 / (1.0 + std::exp(-eta));
                    w = mu * (1.0 - mu);
                } else {
                    mu = std::exp(eta);
                    w = mu;
                }
                if (w < 1e-12) w = 1e-12;
                const double work = eta + (y - mu) / w;
                s11 += w;
                s12 += w * x;
                s22 += w * x * x;
                r1 += w * work;
                r2 += w * x * work;
            }
        const double det = s11 * s22 - s12 * s12;
        if (!(std::abs(det) > 1e-12 * std::max(1.0, s11 * s22)))
            return fall_back("singular weighted design (equal distances or separation)");
        const double na = (s22 * r1 - s12 * r2) / det;
        const double nb = (s11 * r2 - s12 * r1) / det;
        if (!std::isfinite(na) || !std::isfinite(nb) || std::abs(na) > 1e3 || std::abs(nb) > 1e3)
            return fall_back("estimates diverged (likely separation)");
        const double change = std::max(std::abs(na - a), std::abs(nb - b));
        a = na;
        b = nb;
        fit.iterations = it;
        if (change < 1e-8) {
            fit.converged = true;
            break;
        }
    }
    if (!fit.converged) return fall_back("no convergence after 100 iterations");
    fit.alpha = a;
    fit.beta = b;
    return fit;
}

struct InitOptions {
    double alpha_inflation = 1.5;
    double jitter_sd = 0.0;
};

struct InitResult {
    ChainState state;
    RegressionFit regression;
};

/// Shrinkage state matching the empirical column precisions of z: delta_1 is
/// the first precision and later strengths are successive ratios clamped at
/// the truncation point.
inline ShrinkageState empirical_shrinkage(const LatentConfig& z, double lower = 1.0) {
    const std::size_t n = z.rows();
    const std::size_t p = z.cols();
    if (n < 2) throw std::invalid_argument("empirical_shrinkage: need at least two rows");
    const auto means = column_means(z);
    std::vector<double> var(p, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < p; ++l) {
            const double d = z(i, l) - means[l];
            var[l] += d * d;
        }
    double largest = 0.0;
    for (auto& v : var) {
        v /= static_cast<double>(n - 1);
        largest = std::max(largest, v);
    }
    const double floor = std::max(largest, 1.0) * 1e-8;
    std::vector<double> delta(p);
    double prev = 0.0;
    for (std::size_t l = 0; l < p; ++l) {
        const double w = 1.0 / std::max(var[l], floor);
        delta[l] = l == 0 ? w : std::max(lower, w / prev);
        prev = l == 0 ? w : prev * delta[l];
    }
    return ShrinkageState(std::move(delta), lower);
}

/// Starting state: scaled MDS of geodesic distances, regression intercept
/// times `alpha_inflation`, optional Gaussian jitter on Z, and empirical
/// shrinkage strengths.
template <class Rng>
InitResult initialize_chain(const Network& net, const Hyperparams& hp, Link link, const InitOptions& opt, Rng& rng) {
    hp.validate(net.size());
    check_link(net, link);
    const auto mds = classical_mds(geodesic_distances(net), static_cast<std::size_t>(hp.p));
    InitResult out;
    out.regression = init_regression(net, mds, link);
    LatentConfig z = mds;
    z *= std::sqrt(std::abs(out.regression.beta));
    if (opt.jitter_sd > 0.0) {
        std::normal_distribution<double> noise(0.0, opt.jitter_sd);
        for (auto& v : z.data()) v += noise(rng);
    }
    out.state.shrink = empirical_shrinkage(z, hp.c2);
    out.state.alpha = out.regression.alpha * opt.alpha_inflation;
    out.state.z = std::move(z);
    out.state.log_lik = log_likelihood(net, out.state.z, {out.state.alpha, link});
    out.state.iteration = 0;
    return out;
}

}  // namespace lspm
