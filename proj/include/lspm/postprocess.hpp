#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lspm/linalg.hpp"
#include "lspm/model.hpp"
#include "lspm/sampler.hpp"

namespace lspm {

/// Orthogonal transform plus translation mapping a configuration onto a
/// reference: aligned = (Z - mean(Z)) * rotation + shift.
struct ProcrustesTransform {
    Matrix rotation;
    std::vector<double> source_mean;
    std::vector<double> shift;

    LatentConfig apply(const LatentConfig& z) const {
        LatentConfig c = z;
        for (std::size_t i = 0; i < c.rows(); ++i)
            for (std::size_t l = 0; l < c.cols(); ++l) c(i, l) -= source_mean[l];
        LatentConfig out = c * rotation;
        for (std::size_t i = 0; i < out.rows(); ++i)
            for (std::size_t l = 0; l < out.cols(); ++l) out(i, l) += shift[l];
        return out;
    }
};

/// Rotation/reflection and translation minimizing ||T(z) - reference||_F.
inline ProcrustesTransform procrustes_fit(const LatentConfig& z, const LatentConfig& reference) {
    if (z.rows() != reference.rows() || z.cols() != reference.cols())
        throw std::invalid_argument("procrustes: configuration shapes differ");
    LatentConfig a = z;
    LatentConfig b = reference;
    ProcrustesTransform t;
    t.source_mean = center_columns(a);
    t.shift = center_columns(b);
    const auto svd = jacobi_svd(a.transpose() * b);
    t.rotation = svd.u * svd.v.transpose();
    return t;
}

inline LatentConfig procrustes_align(const LatentConfig& z, const LatentConfig& reference) {
    return procrustes_fit(z, reference).apply(z);
}

/// Copy of the trace with every Z draw aligned to `reference`.
inline ChainTrace procrustes_align(const ChainTrace& trace, const LatentConfig& reference) {
    ChainTrace out = trace;
    for (auto& z : out.z) z = procrustes_align(z, reference);
    return out;
}

/// Reference shared by several chains: the burn-in configuration with the
/// highest log-likelihood across all of them.
inline const LatentConfig& global_reference(const std::vector<ChainTrace>& traces) {
    if (traces.empty()) throw std::invalid_argument("global_reference: no traces");
    std::size_t best = 0;
    for (std::size_t k = 1; k < traces.size(); ++k)
        if (traces[k].reference_log_lik > traces[best].reference_log_lik) best = k;
    return traces[best].reference;
}

inline std::vector<ChainTrace> align_chains(const std::vector<ChainTrace>& traces) {
    const LatentConfig ref = global_reference(traces);
    std::vector<ChainTrace> out;
    out.reserve(traces.size());
    for (const auto& t : traces) out.push_back(procrustes_align(t, ref));
    return out;
}

/// Procrustes correlation in [0, 1]: the square root of one minus the
/// residual sum of squares of the best similarity fit of A to B, relative to
/// the centered sum of squares of B. Narrower configurations are padded with
/// zero columns.
inline double procrustes_correlation(const LatentConfig& a_in, const LatentConfig& b_in) {
    if (a_in.rows() != b_in.rows()) throw std::invalid_argument("procrustes_correlation: row counts differ");
    const std::size_t p = std::max(a_in.cols(), b_in.cols());
    LatentConfig a = resize_columns(a_in, p);
    LatentConfig b = resize_columns(b_in, p);
    center_columns(a);
    center_columns(b);
    const double na = frobenius_norm_sq(a);
    const double nb = frobenius_norm_sq(b);
    const double tiny = 1e-300;
    if (!(na > tiny) || !(nb > tiny))
        throw std::invalid_argument("procrustes_correlation: configuration has zero spread");
    const auto svd = jacobi_svd(a.transpose() * b);
    double trace = 0.0;
    for (double s : svd.sigma) trace += s;
    return std::clamp(trace / std::sqrt(na * nb), 0.0, 1.0);
}

/// Sample quantile with linear interpolation between order statistics
/// (the common "type 7" definition).
inline double quantile(std::vector<double> x, double prob) {
    if (x.empty()) throw std::invalid_argument("quantile: empty sample");
    if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("quantile: probability outside [0, 1]");
    std::sort(x.begin(), x.end());
    const double h = (static_cast<double>(x.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

struct ParamSummary {
    double mean = 0.0;
    double median = 0.0;
    double lower = 0.0;  // 2.5% quantile
    double upper = 0.0;  // 97.5% quantile
    double width() const noexcept { return upper - lower; }
};

inline ParamSummary summarize(const std::vector<double>& x) {
    if (x.empty()) throw std::invalid_argument("summarize: empty sample");
    ParamSummary s;
    double sum = 0.0;
    for (double v : x) sum += v;
    s.mean = sum / static_cast<double>(x.size());
    s.median = quantile(x, 0.5);
    s.lower = quantile(x, 0.025);
    s.upper = quantile(x, 0.975);
    return s;
}

struct PosteriorSummary {
    std::size_t draws = 0;
    ParamSummary alpha;
    std::vector<ParamSummary> delta;
    std::vector<ParamSummary> variance;  // 1 / omega_l
    LatentConfig z_mean;                 // empty when no Z draws were stored
};

/// Pooled summaries over all draws of all traces. Z draws should already be
/// aligned to a common reference.
inline PosteriorSummary posterior_summary(const std::vector<ChainTrace>& traces) {
    PosteriorSummary out;
    std::vector<double> alpha;
    std::vector<std::vector<double>> delta, var;
    std::size_t z_count = 0;
    for (const auto& t : traces) {
        for (std::size_t k = 0; k < t.size(); ++k) {
            alpha.push_back(t.alpha[k]);
            const auto& d = t.delta[k];
            const auto& w = t.omega[k];
            if (delta.empty()) {
                delta.resize(d.size());
                var.resize(w.size());
            }
            if (d.size() != delta.size()) throw std::invalid_argument("posterior_summary: traces differ in p");
            for (std::size_t h = 0; h < d.size(); ++h) {
                delta[h].push_back(d[h]);
                var[h].push_back(1.0 / w[h]);
            }
        }
        for (const auto& z : t.z) {
            if (out.z_mean.empty()) out.z_mean = Matrix(z.rows(), z.cols());
            out.z_mean += z;
            ++z_count;
        }
    }
    if (alpha.empty()) throw std::invalid_argument("posterior_summary: no draws");
    out.draws = alpha.size();
    out.alpha = summarize(alpha);
    for (const auto& d : delta) out.delta.push_back(summarize(d));
    for (const auto& v : var) out.variance.push_back(summarize(v));
    if (z_count) out.z_mean *= 1.0 / static_cast<double>(z_count);
    return out;
}

struct EffectiveDimension {
    int dims = 0;             // effective dimension, or p when at_truncation
    bool at_truncation = false;
    int flagged = 0;          // first non-effective dimension (1-based), 0 if none
    std::string report;
};

/// Flags the first dimension h >= 2 whose strength jumps: the posterior mean
/// of delta_h exceeds jump_factor times max(1, mean of delta_{h-1}) and its
/// 95% interval is wider than width_factor times that of delta_{h-1}. The
/// floor of 1 on the baseline is the truncation point of delta_h for h >= 2.
inline EffectiveDimension effective_dimensions(const std::vector<ParamSummary>& delta, double jump_factor = 2.0,
                                               double width_factor = 2.0) {
    const int p = static_cast<int>(delta.size());
    if (p < 2) throw std::invalid_argument("effective_dimensions: need at least two dimensions");
    EffectiveDimension out;
    for (int h = 2; h <= p; ++h) {
        const auto& prev = delta[h - 2];
        const auto& cur = delta[h - 1];
        if (cur.mean > jump_factor * std::max(1.0, prev.mean) && cur.width() > width_factor * prev.width()) {
            out.dims = h - 1;
            out.flagged = h;
            out.report = "effective dimension " + std::to_string(h - 1) + " (shrinkage strength jumps at dimension " +
                         std::to_string(h) + ")";
            return out;
        }
    }
    out.dims = p;
    out.at_truncation = true;
    out.report = ">= " + std::to_string(p) + " (raise truncation level)";
    return out;
}

/// Potential scale reduction factor of equal-length chains.
inline double gelman_rubin(const std::vector<std::vector<double>>& chains) {
    const std::size_t m = chains.size();
    if (m < 2) throw std::invalid_argument("gelman_rubin: need at least two chains");
    const std::size_t n = chains.front().size();
    if (n < 10) throw std::invalid_argument("gelman_rubin: chains need at least 10 draws");
    for (const auto& c : chains)
        if (c.size() != n) throw std::invalid_argument("gelman_rubin: chains differ in length");
    std::vector<double> means(m, 0.0);
    double w = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        for (double v : chains[j]) means[j] += v;
        means[j] /= static_cast<double>(n);
        double s2 = 0.0;
        for (double v : chains[j]) s2 += (v - means[j]) * (v - means[j]);
        w += s2 / static_cast<double>(n - 1);
    }
    w /= static_cast<double>(m);
    double grand = 0.0;
    for (double mu : means) grand += mu;
    grand /= static_cast<double>(m);
    double b = 0.0;
    for (double mu : means) b += (mu - grand) * (mu - grand);
    b *= static_cast<double>(n) / static_cast<double>(m - 1);
    if (!(w > 0.0)) throw std::invalid_argument("gelman_rubin: zero within-chain variance");
    const double nn = static_cast<double>(n);
    const double v_hat = (nn - 1.0) / nn * w + b / nn;
    return std::sqrt(v_hat / w);
}

using TraceSelector = std::function<double(const ChainTrace&, std::size_t)>;

inline double gelman_rubin(const std::vector<ChainTrace>& traces, const TraceSelector& select) {
    std::vector<std::vector<double>> chains;
    for (const auto& t : traces) {
        std::vector<double> c(t.size());
        for (std::size_t k = 0; k < t.size(); ++k) c[k] = select(t, k);
        chains.push_back(std::move(c));
    }
    return gelman_rubin(chains);
}

inline TraceSelector select_alpha() {
    return [](const ChainTrace& t, std::size_t k) { return t.alpha[k]; };
}
inline TraceSelector select_delta(std::size_t h) {
    return [h](const ChainTrace& t, std::size_t k) { return t.delta[k].at(h); };
}
inline TraceSelector select_omega(std::size_t l) {
    return [l](const ChainTrace& t, std::size_t k) { return t.omega[k].at(l); };
}

/// Sample autocorrelation at lags 0..max_lag.
inline std::vector<double> autocorrelation(const std::vector<double>& x, std::size_t max_lag) {
    const std::size_t n = x.size();
    if (n <= max_lag) throw std::invalid_argument("autocorrelation: series shorter than max_lag + 1");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double c0 = 0.0;
    for (double v : x) c0 += (v - mean) * (v - mean);
    if (!(c0 > 0.0)) throw std::invalid_argument("autocorrelation: constant series");
    std::vector<double> acf(max_lag + 1);
    for (std::size_t k = 0; k <= max_lag; ++k) {
        double c = 0.0;
        for (std::size_t t = 0; t + k < n; ++t) c += (x[t] - mean) * (x[t + k] - mean);
        acf[k] = c / c0;
    }
    return acf;
}

}  // namespace lspm
