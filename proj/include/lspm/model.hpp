#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "lspm/linalg.hpp"
#include "lspm/network.hpp"
#include "lspm/shrinkage.hpp"

namespace lspm {

/// n x p latent positions, row i is node i.
using LatentConfig = Matrix;

enum class Link { Logit, Log };

inline std::string to_string(Link l) { return l == Link::Logit ? "logit" : "poisson"; }

inline EdgeKind edge_kind_for(Link l) { return l == Link::Logit ? EdgeKind::Binary : EdgeKind::Count; }

struct ModelParams {
    double alpha = 0.0;
    Link link = Link::Logit;
};

/// Linear predictors are clipped to this magnitude before exponentiation.
inline constexpr double kEtaClip = 700.0;

inline double clip_eta(double eta) noexcept {
    return eta > kEtaClip ? kEtaClip : (eta < -kEtaClip ? -kEtaClip : eta);
}

/// log(1 + e^x) without overflow.
inline double log1p_exp(double x) noexcept {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sq_distance(const LatentConfig& z, std::size_t i, std::size_t j) {
    if (i == j) throw std::invalid_argument("sq_distance: i and j must differ");
    const auto a = z.row(i);
    const auto b = z.row(j);
    double s = 0.0;
    for (std::size_t l = 0; l < a.size(); ++l) {
        const double d = a[l] - b[l];
        s += d * d;
    }
    return s;
}

/// Edge probability (logit link) or Poisson rate (log link) at squared
/// distance d2.
inline double edge_mean(double alpha, double d2, Link link) {
    const double eta = clip_eta(alpha - d2);
    if (link == Link::Logit) return 1.0 / (1.0 + std::exp(-eta));
    return std::exp(eta);
}

inline void check_link(const Network& net, Link link) {
    if (edge_kind_for(link) != net.kind())
        throw std::invalid_argument("link " + to_string(link) + " does not match a " + to_string(net.kind()) +
                                    " network");
}

/// Per-network constants for the likelihood: symmetric per-pair response
/// totals y_ij + y_ji and the constant sum of log(y!).
///
/// The likelihood runs over ordered pairs i != j; since the squared distance
/// is symmetric, each unordered pair contributes
/// eta * (y_ij + y_ji) - 2 * b(eta), where b is log(1 + e^eta) or e^eta.
class PairData {
  public:
    PairData() = default;
    PairData(const Network& net, Link link) : n_(net.size()), link_(link), ysum_(n_ * n_, 0.0) {
        check_link(net, link);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) {
                if (i == j) continue;
                const double y = static_cast<double>(net(i, j));
                ysum_[i * n_ + j] = static_cast<double>(net(i, j) + net(j, i));
                total_y_ += y;
                if (link == Link::Log) log_fact_ += std::lgamma(y + 1.0);
            }
    }

    std::size_t size() const noexcept { return n_; }
    Link link() const noexcept { return link_; }
    double ysum(std::size_t i, std::size_t j) const noexcept { return ysum_[i * n_ + j]; }
    const double* ysum_row(std::size_t i) const noexcept { return ysum_.data() + i * n_; }
    /// Sum of y over ordered pairs.
    double total_y() const noexcept { return total_y_; }
    /// Sum of log(y!) over ordered pairs (zero for the logit link).
    double log_factorial_sum() const noexcept { return log_fact_; }
    double ordered_pairs() const noexcept { return static_cast<double>(n_) * static_cast<double>(n_ - 1); }

    /// Contribution of the unordered pair with response total `ys` at linear
    /// predictor `eta` (both ordered directions, without the log(y!) term).
    double pair_term(double eta, double ys) const noexcept {
        eta = clip_eta(eta);
        if (link_ == Link::Logit) return eta * ys - 2.0 * log1p_exp(eta);
        return eta * ys - 2.0 * std::exp(eta);
    }

  private:
    std::size_t n_ = 0;
    Link link_ = Link::Logit;
    std::vector<double> ysum_;
    double total_y_ = 0.0;
    double log_fact_ = 0.0;
};

/// Log-likelihood from a precomputed squared-distance matrix (n x n).
/// Pairs are summed row-major over i < j.
inline double log_likelihood_from_d2(const PairData& data, const Matrix& d2, double alpha) {
    const std::size_t n = data.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* ys = data.ysum_row(i);
        for (std::size_t j = i + 1; j < n; ++j) s += data.pair_term(alpha - d2(i, j), ys[j]);
    }
    return s - data.log_factorial_sum();
}

inline Matrix pairwise_sq_distances(const LatentConfig& z) {
    const std::size_t n = z.rows();
    Matrix d2(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = sq_distance(z, i, j);
            d2(i, j) = v;
            d2(j, i) = v;
        }
    return d2;
}

inline void check_shapes(const Network& net, const LatentConfig& z) {
    if (z.rows() != net.size())
        throw std::invalid_argument("latent configuration has " + std::to_string(z.rows()) +
                                    " rows for a network of " + std::to_string(net.size()) + " nodes");
}

inline double log_likelihood(const PairData& data, const LatentConfig& z, double alpha) {
    return log_likelihood_from_d2(data, pairwise_sq_distances(z), alpha);
}

/// Log-likelihood summed over ordered pairs i != j.
inline double log_likelihood(const Network& net, const LatentConfig& z, const ModelParams& params) {
    check_shapes(net, z);
    return log_likelihood(PairData(net, params.link), z, params.alpha);
}

/// Gaussian log prior of Z given the precisions, without the normalizing
/// constant: -sum_i sum_l omega_l z_il^2 / 2.
inline double log_prior_z(const LatentConfig& z, const std::vector<double>& omega) {
    if (omega.size() != z.cols()) throw std::invalid_argument("precision count does not match latent dimensions");
    double s = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const auto r = z.row(i);
        for (std::size_t l = 0; l < r.size(); ++l) s += omega[l] * r[l] * r[l];
    }
    return -0.5 * s;
}

/// Log full conditional of Z up to an additive constant.
inline double log_full_conditional_z(const Network& net, const LatentConfig& z, const ModelParams& params,
                                     const ShrinkageState& shrink) {
    return log_likelihood(net, z, params) + log_prior_z(z, shrink.omega());
}

/// Full sampler state. `log_lik` caches log_likelihood(net, z, alpha).
struct ChainState {
    LatentConfig z;
    double alpha = 0.0;
    ShrinkageState shrink;
    double log_lik = 0.0;
    long iteration = 0;
};

struct GammaParams {
    double shape = 1.0;
    double rate = 1.0;
    double lower = 0.0;  // left truncation point, 0 when untruncated
};

namespace detail {
/// sum_i z_il^2 for every column l.
inline std::vector<double> column_sq_sums(const LatentConfig& z) {
    std::vector<double> s(z.cols(), 0.0);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const auto r = z.row(i);
        for (std::size_t l = 0; l < r.size(); ++l) s[l] += r[l] * r[l];
    }
    return s;
}
}  // namespace detail

/// Full conditional of the first shrinkage strength: a gamma with
/// shape np/2 + a1 and rate b1 + 1/2 sum_i sum_l (prod_{m=2..l} delta_m) z_il^2.
inline GammaParams delta1_conditional_params(const LatentConfig& z, const std::vector<double>& delta,
                                             const Hyperparams& hp) {
    if (delta.size() != z.cols()) throw std::invalid_argument("delta length does not match latent dimensions");
    const auto sq = detail::column_sq_sums(z);
    double partial = 1.0;
    double quad = 0.0;
    for (std::size_t l = 0; l < sq.size(); ++l) {
        if (l > 0) partial *= delta[l];
        quad += partial * sq[l];
    }
    const double np = static_cast<double>(z.rows() * z.cols());
    return {np / 2.0 + hp.a1, hp.b1 + 0.5 * quad, 0.0};
}

/// Full conditional of shrinkage strength `h` (1-based, 2 <= h <= p): a gamma
/// truncated below at c2 with shape n(p-h+1)/2 + a2 and rate
/// b2 + 1/2 sum_i sum_{l>=h} (prod_{m<=l, m!=h} delta_m) z_il^2.
inline GammaParams deltah_conditional_params(int h, const LatentConfig& z, const std::vector<double>& delta,
                                             const Hyperparams& hp) {
    const int p = static_cast<int>(z.cols());
    if (delta.size() != z.cols()) throw std::invalid_argument("delta length does not match latent dimensions");
    if (h < 2 || h > p) throw std::out_of_range("dimension index h must lie in [2, p]");
    const auto sq = detail::column_sq_sums(z);
    double partial = 1.0;
    for (int m = 1; m < h; ++m) partial *= delta[m - 1];
    double quad = 0.0;
    for (int l = h; l <= p; ++l) {
        if (l > h) partial *= delta[l - 1];
        quad += partial * sq[l - 1];
    }
    const double n = static_cast<double>(z.rows());
    return {n * (p - h + 1) / 2.0 + hp.a2, hp.b2 + 0.5 * quad, hp.c2};
}

}  // namespace lspm
