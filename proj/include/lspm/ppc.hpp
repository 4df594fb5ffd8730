#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "lspm/model.hpp"
#include "lspm/network.hpp"
#include "lspm/postprocess.hpp"
#include "lspm/sampler.hpp"

namespace lspm {

/// Generator for replicate `index` derived from a master seed; independent of
/// how many other replicates are drawn or in which order.
inline Rng stream_rng(std::uint64_t master, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

namespace detail {
template <class R>
Network::value_type draw_edge(double mean, Link link, R& rng) {
    if (link == Link::Logit) {
        std::bernoulli_distribution b(mean);
        return b(rng) ? 1 : 0;
    }
    std::poisson_distribution<Network::value_type> pois(mean);
    return pois(rng);
}
}  // namespace detail

/// Draws a network from the model at (z, alpha). Directed networks get an
/// independent draw per ordered pair; undirected ones one draw per pair i < j.
template <class R>
Network replicate_network(const LatentConfig& z, double alpha, Link link, bool directed, R& rng) {
    const std::size_t n = z.rows();
    Network out(n, edge_kind_for(link), directed);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = directed ? 0 : i + 1; j < n; ++j) {
            if (i == j) continue;
            const auto y = detail::draw_edge(edge_mean(alpha, sq_distance(z, i, j), link), link, rng);
            if (y) out.set(i, j, y);
        }
    return out;
}

namespace detail {
inline void check_pair(const Network& a, const Network& b, bool binary) {
    if (a.size() != b.size()) throw std::invalid_argument("networks differ in size");
    const auto want = binary ? EdgeKind::Binary : EdgeKind::Count;
    if (a.kind() != want || b.kind() != want)
        throw std::invalid_argument(std::string("metric requires ") + (binary ? "binary" : "count") + " networks");
}
}  // namespace detail

struct Confusion {
    long tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Confusion counts over ordered pairs i != j, treating `obs` as truth.
inline Confusion confusion(const Network& obs, const Network& rep) {
    detail::check_pair(obs, rep, true);
    Confusion c;
    for (std::size_t i = 0; i < obs.size(); ++i)
        for (std::size_t j = 0; j < obs.size(); ++j) {
            if (i == j) continue;
            const bool o = obs(i, j) != 0, r = rep(i, j) != 0;
            if (o && r) ++c.tp;
            else if (!o && r) ++c.fp;
            else if (o && !r) ++c.fn;
            else ++c.tn;
        }
    return c;
}

struct AccuracyF1 {
    double accuracy = 0.0;
    double f1 = 0.0;
};

inline AccuracyF1 accuracy_f1(const Network& obs, const Network& rep) {
    const auto c = confusion(obs, rep);
    const double total = static_cast<double>(c.tp + c.fp + c.fn + c.tn);
    AccuracyF1 out;
    out.accuracy = total > 0 ? static_cast<double>(c.tp + c.tn) / total : 0.0;
    const double prec = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    const double rec = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    out.f1 = prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    return out;
}

/// Fraction of ordered pairs whose edge indicators differ.
inline double hamming(const Network& obs, const Network& rep) {
    detail::check_pair(obs, rep, true);
    const std::size_t n = obs.size();
    long diff = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && (obs(i, j) != 0) != (rep(i, j) != 0)) ++diff;
    return static_cast<double>(diff) / (static_cast<double>(n) * static_cast<double>(n - 1));
}

/// Frequencies of off-diagonal values 0..max_count, with one final overflow
/// bucket for larger values.
inline std::vector<long> count_frequency_table(const Network& net, int max_count = 10) {
    if (max_count < 0) throw std::invalid_argument("count_frequency_table: negative max_count");
    std::vector<long> freq(static_cast<std::size_t>(max_count) + 2, 0);
    for (std::size_t i = 0; i < net.size(); ++i)
        for (std::size_t j = 0; j < net.size(); ++j) {
            if (i == j) continue;
            const auto v = net(i, j);
            ++freq[v > max_count ? freq.size() - 1 : static_cast<std::size_t>(v)];
        }
    return freq;
}

inline double mean_absolute_difference(const Network& obs, const Network& rep) {
    detail::check_pair(obs, rep, false);
    const std::size_t n = obs.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) s += std::abs(static_cast<double>(obs(i, j) - rep(i, j)));
    return s / (static_cast<double>(n) * static_cast<double>(n - 1));
}

/// Deviance-based pseudo R^2 of fitted rates against the intercept-only fit.
/// Returns nullopt when all observed counts are equal (zero null deviance).
/// A zero rate is allowed only where the observed count is zero.
inline std::optional<double> pseudo_r2(const Network& obs, const Matrix& lambda_hat) {
    if (obs.kind() != EdgeKind::Count) throw std::invalid_argument("pseudo_r2 requires a count network");
    const std::size_t n = obs.size();
    if (lambda_hat.rows() != n || lambda_hat.cols() != n) throw std::invalid_argument("pseudo_r2: rate matrix shape");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) total += static_cast<double>(obs(i, j));
    const double ybar = total / (static_cast<double>(n) * static_cast<double>(n - 1));
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double y = static_cast<double>(obs(i, j));
            const double lam = lambda_hat(i, j);
            if (!(lam >= 0.0) || (y > 0.0 && !(lam > 0.0)))
                throw std::invalid_argument("pseudo_r2: rates must be positive where counts are");
            if (y > 0.0) {
                num += y * std::log(lam / ybar);
                den += y * std::log(y / ybar);
            }
            num += ybar - lam;
        }
    if (!(den > 0.0)) return std::nullopt;
    return num / den;
}

/// Ratios of Euclidean pairwise distances, estimate over truth, for i < j.
inline std::vector<double> distance_ratio_distribution(const LatentConfig& z_hat, const LatentConfig& z_true) {
    if (z_hat.rows() != z_true.rows()) throw std::invalid_argument("distance ratios: row counts differ");
    const std::size_t n = z_hat.rows();
    std::vector<double> out;
    out.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double t = std::sqrt(sq_distance(z_true, i, j));
            if (!(t > 0.0)) throw std::invalid_argument("distance ratios: zero true distance");
            out.push_back(std::sqrt(sq_distance(z_hat, i, j)) / t);
        }
    return out;
}

struct ReplicateRecord {
    std::size_t chain = 0;
    std::size_t draw = 0;
    // binary networks
    double density = 0.0;
    double transitivity = 0.0;
    double accuracy = 0.0;
    double f1 = 0.0;
    double hamming = 0.0;
    // count networks
    std::vector<long> count_freq;
    double mad = 0.0;
};

struct Band {
    double mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    bool contains(double x) const noexcept { return x >= lower && x <= upper; }
};

inline Band band_of(const std::vector<double>& x) {
    if (x.empty()) return {};
    const auto s = summarize(x);
    return {s.mean, s.lower, s.upper};
}

struct PpcReport {
    Link link = Link::Logit;
    std::size_t n_replicates = 0;
    std::uint64_t seed = 0;
    int max_count = 10;
    double observed_density = 0.0;
    double observed_transitivity = 0.0;
    std::vector<long> observed_count_freq;
    std::vector<ReplicateRecord> replicates;

    // aggregates over replicates (binary)
    Band density, transitivity, accuracy, f1, hamming;
    // aggregates over replicates (count)
    Band mad;
    std::vector<Band> count_freq;
    std::optional<double> pseudo_r2;

    std::vector<double> distance_ratios;  // filled only when truth is supplied
    Band distance_ratio;
};

struct PpcOptions {
    std::size_t n_replicates = 30;
    std::uint64_t seed = 1;
    int max_count = 10;
    const LatentConfig* truth = nullptr;
};

/// Posterior mean of the edge means over every stored draw.
inline Matrix posterior_mean_rates(const std::vector<ChainTrace>& traces, Link link) {
    Matrix out;
    std::size_t count = 0;
    for (const auto& t : traces)
        for (std::size_t k = 0; k < t.z.size(); ++k) {
            const auto& z = t.z[k];
            if (out.empty()) out = Matrix(z.rows(), z.rows());
            for (std::size_t i = 0; i < z.rows(); ++i)
                for (std::size_t j = 0; j < z.rows(); ++j)
                    if (i != j) out(i, j) += edge_mean(t.alpha[k], sq_distance(z, i, j), link);
            ++count;
        }
    if (!count) throw std::invalid_argument("posterior_mean_rates: traces hold no Z draws");
    out *= 1.0 / static_cast<double>(count);
    return out;
}

/// Posterior predictive checks: draws states uniformly from the pooled
/// traces, simulates a replicate for each and scores it against `net`.
inline PpcReport run_ppc(const std::vector<ChainTrace>& traces, const Network& net, Link link,
                         const PpcOptions& opt) {
    check_link(net, link);
    PpcReport rep;
    rep.link = link;
    rep.n_replicates = opt.n_replicates;
    rep.seed = opt.seed;
    rep.max_count = opt.max_count;
    const bool binary = link == Link::Logit;
    if (binary) {
        rep.observed_density = density(net);
        rep.observed_transitivity = transitivity(net);
    } else {
        rep.observed_count_freq = count_frequency_table(net, opt.max_count);
    }

    std::vector<std::pair<std::size_t, std::size_t>> pool;
    for (std::size_t c = 0; c < traces.size(); ++c)
        for (std::size_t k = 0; k < traces[c].z.size(); ++k) pool.emplace_back(c, k);
    if (pool.empty()) throw std::invalid_argument("run_ppc: traces hold no Z draws");
    if (opt.n_replicates == 0) return rep;

    Rng picker = stream_rng(opt.seed, 0);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::vector<double> dens, trans, acc, f1s, ham, mads;
    std::vector<std::vector<double>> freq(static_cast<std::size_t>(opt.max_count) + 2);
    for (std::size_t r = 0; r < opt.n_replicates; ++r) {
        const auto [c, k] = pool[pick(picker)];
        Rng rng = stream_rng(opt.seed, r + 1);
        const auto sim = replicate_network(traces[c].z[k], traces[c].alpha[k], link, net.directed(), rng);
        ReplicateRecord rec;
        rec.chain = c;
        rec.draw = k;
        if (binary) {
            rec.density = density(sim);
            rec.transitivity = transitivity(sim);
            const auto af = accuracy_f1(net, sim);
            rec.accuracy = af.accuracy;
            rec.f1 = af.f1;
            rec.hamming = hamming(net, sim);
            dens.push_back(rec.density);
            trans.push_back(rec.transitivity);
            acc.push_back(rec.accuracy);
            f1s.push_back(rec.f1);
            ham.push_back(rec.hamming);
        } else {
            rec.count_freq = count_frequency_table(sim, opt.max_count);
            rec.mad = mean_absolute_difference(net, sim);
            for (std::size_t b = 0; b < freq.size(); ++b) freq[b].push_back(static_cast<double>(rec.count_freq[b]));
            mads.push_back(rec.mad);
        }
        rep.replicates.push_back(std::move(rec));
    }
    if (binary) {
        rep.density = band_of(dens);
        rep.transitivity = band_of(trans);
        rep.accuracy = band_of(acc);
        rep.f1 = band_of(f1s);
        rep.hamming = band_of(ham);
    } else {
        rep.mad = band_of(mads);
        for (const auto& f : freq) rep.count_freq.push_back(band_of(f));
        rep.pseudo_r2 = pseudo_r2(net, posterior_mean_rates(traces, link));
    }
    if (opt.truth) {
        const auto summary = posterior_summary(traces);
        rep.distance_ratios = distance_ratio_distribution(summary.z_mean, *opt.truth);
        rep.distance_ratio = band_of(rep.distance_ratios);
    }
    return rep;
}

}  // namespace lspm
