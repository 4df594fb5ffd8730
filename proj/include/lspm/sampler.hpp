#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "lspm/initializer.hpp"
#include "lspm/log.hpp"
#include "lspm/model.hpp"
#include "lspm/network.hpp"
#include "lspm/shrinkage.hpp"

namespace lspm {

using Rng = std::mt19937_64;

enum class ZUpdate { WholeMatrix, PerNode };

inline std::string to_string(ZUpdate u) { return u == ZUpdate::WholeMatrix ? "whole" : "pernode"; }

struct SamplerConfig {
    long total_iters = 500000;
    long burn_in = 50000;
    long thin = 2000;
    double step_z = 0.03;     // k: Z proposal covariance is k * Omega^{-1}
    double step_alpha = 1.0;  // multiplies the informed proposal variance
    ZUpdate z_update = ZUpdate::PerNode;
    std::uint64_t seed = 1;
    double alpha_inflation = 1.5;
    double init_jitter_sd = 0.0;
    bool store_z = true;

    void validate() const {
        auto fail = [](const std::string& m) { throw std::invalid_argument("sampler config: " + m); };
        if (total_iters < 1) fail("total iterations must be positive");
        if (burn_in < 0 || burn_in >= total_iters) fail("burn-in must lie in [0, iterations)");
        if (thin < 1) fail("thin must be at least 1");
        if (!(step_z >= 0.01 && step_z <= 10.0)) fail("step_z must lie in [0.01, 10]");
        if (!(step_alpha >= 0.01 && step_alpha <= 10.0)) fail("step_alpha must lie in [0.01, 10]");
        if (!(alpha_inflation > 0.0)) fail("alpha inflation must be positive");
        if (!(init_jitter_sd >= 0.0)) fail("jitter sd must be non-negative");
    }
};

/// Thinned post-burn-in draws plus move statistics for one chain.
struct ChainTrace {
    std::vector<long> iters;
    std::vector<double> alpha;
    std::vector<std::vector<double>> delta;
    std::vector<std::vector<double>> omega;
    std::vector<double> log_lik;
    std::vector<LatentConfig> z;  // empty when store_z is off

    LatentConfig reference;  // highest log-likelihood configuration seen during burn-in
    double reference_log_lik = 0.0;

    long z_proposals = 0;
    long z_accepts = 0;
    long alpha_proposals = 0;
    long alpha_accepts = 0;
    long eta_clips = 0;
    std::uint64_t seed = 0;
    RegressionFit regression;

    std::size_t size() const noexcept { return alpha.size(); }
    double z_acceptance() const noexcept {
        return z_proposals ? static_cast<double>(z_accepts) / static_cast<double>(z_proposals) : 0.0;
    }
    double alpha_acceptance() const noexcept {
        return alpha_proposals ? static_cast<double>(alpha_accepts) / static_cast<double>(alpha_proposals) : 0.0;
    }
};

/// Raised when the chain produces a non-finite quantity.
class SamplerDiverged : public std::runtime_error {
  public:
    SamplerDiverged(long iteration, const std::string& what, std::string dump)
        : std::runtime_error("sampler diverged at iteration " + std::to_string(iteration) + ": " + what),
          iteration_(iteration), dump_(std::move(dump)) {}
    long iteration() const noexcept { return iteration_; }
    /// Text dump of the last finite state.
    const std::string& state_dump() const noexcept { return dump_; }

  private:
    long iteration_;
    std::string dump_;
};

inline std::string dump_state(const ChainState& s) {
    std::ostringstream os;
    os.precision(17);
    os << "iteration " << s.iteration << "\nalpha " << s.alpha << "\nlog_lik " << s.log_lik << "\ndelta";
    for (double d : s.shrink.delta()) os << ' ' << d;
    os << "\nZ\n";
    for (std::size_t i = 0; i < s.z.rows(); ++i) {
        for (std::size_t l = 0; l < s.z.cols(); ++l) os << (l ? "," : "") << s.z(i, l);
        os << '\n';
    }
    return os.str();
}

struct AlphaProposal {
    double mean = 0.0;
    double variance = 1.0;
};

namespace detail {

struct AlphaPass {
    double log_lik = 0.0;
    double sum_mean = 0.0;    // sum over ordered pairs of q_ij or lambda_ij
    double sum_weight = 0.0;  // sum over ordered pairs of q(1-q) or lambda
    long clips = 0;
};

/// One sweep over unordered pairs at intercept `alpha`, optionally storing
/// the per-pair likelihood terms in `terms`.
inline AlphaPass alpha_pass(const PairData& data, const Matrix& d2, double alpha, Matrix* terms) {
    const std::size_t n = data.size();
    AlphaPass out;
    double ll = 0.0, sm = 0.0, sw = 0.0;
    const bool logit = data.link() == Link::Logit;
    for (std::size_t i = 0; i < n; ++i) {
        const double* ys = data.ysum_row(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double raw = alpha - d2(i, j);
            if (raw > kEtaClip || raw < -kEtaClip) ++out.clips;
            const double eta = clip_eta(raw);
            double t;
            if (logit) {
                const double q = 1.0 / (1.0 + std::exp(-eta));
                sm += q;
                sw += q * (1.0 - q);
                t = eta * ys[j] - 2.0 * log1p_exp(eta);
            } else {
                const double lam = std::exp(eta);
                sm += lam;
                sw += lam;
                t = eta * ys[j] - 2.0 * lam;
            }
            ll += t;
            if (terms) {
                (*terms)(i, j) = t;
                (*terms)(j, i) = t;
            }
        }
    }
    out.log_lik = ll - data.log_factorial_sum();
    out.sum_mean = 2.0 * sm;
    out.sum_weight = 2.0 * sw;
    return out;
}

inline AlphaProposal proposal_from_pass(const AlphaPass& pass, const PairData& data, double alpha,
                                        const Hyperparams& hp, double step_alpha) {
    const double curvature = pass.sum_weight + 1.0 / hp.sigma2_alpha;
    const double score = data.total_y() - pass.sum_mean + (hp.mu_alpha - alpha) / hp.sigma2_alpha;
    const double newton_var = 1.0 / curvature;
    return {alpha + newton_var * score, step_alpha * newton_var};
}

inline double normal_logpdf(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * d * d / var;
}

}  // namespace detail

/// Second-order (Newton) approximation of the alpha full conditional at
/// `alpha`: the mean is one Newton step from alpha, and the variance is the
/// inverse curvature times step_alpha.
inline AlphaProposal informed_alpha_proposal(const PairData& data, const LatentConfig& z, double alpha,
                                             const Hyperparams& hp, double step_alpha = 1.0) {
    const auto d2 = pairwise_sq_distances(z);
    const auto pass = detail::alpha_pass(data, d2, alpha, nullptr);
    return detail::proposal_from_pass(pass, data, alpha, hp, step_alpha);
}

/// Random-walk proposal for Z: every entry (or only row `node` when
/// node < n) is perturbed by sqrt(k / omega_l) * N(0, 1).
template <class R>
LatentConfig propose_z(const LatentConfig& z, const ShrinkageState& shrink, double step_z, R& rng,
                       std::size_t node = static_cast<std::size_t>(-1)) {
    std::normal_distribution<double> norm(0.0, 1.0);
    LatentConfig out = z;
    const std::size_t p = z.cols();
    std::vector<double> sd(p);
    for (std::size_t l = 0; l < p; ++l) sd[l] = std::sqrt(step_z / shrink.omega(l));
    auto perturb = [&](std::size_t i) {
        for (std::size_t l = 0; l < p; ++l) out(i, l) += sd[l] * norm(rng);
    };
    if (node < z.rows())
        perturb(node);
    else
        for (std::size_t i = 0; i < z.rows(); ++i) perturb(i);
    return out;
}

/// Metropolis-within-Gibbs sampler for one chain. Owns the chain state plus
/// cached squared distances and per-pair likelihood terms.
class Sampler {
  public:
    Sampler(const Network& net, Hyperparams hp, SamplerConfig cfg, Link link, ChainState init)
        : data_(net, link), hp_(hp), cfg_(cfg), state_(std::move(init)) {
        hp_.validate();
        cfg_.validate();
        check_shapes(net, state_.z);
        if (state_.z.cols() != static_cast<std::size_t>(hp_.p) || state_.shrink.dims() != state_.z.cols())
            throw std::invalid_argument("initial state does not have p latent dimensions");
        resync();
    }

    const ChainState& state() const noexcept { return state_; }
    const SamplerConfig& config() const noexcept { return cfg_; }
    const Hyperparams& hyperparams() const noexcept { return hp_; }
    const PairData& data() const noexcept { return data_; }
    const Matrix& sq_distances() const noexcept { return d2_; }

    long z_proposals() const noexcept { return z_prop_; }
    long z_accepts() const noexcept { return z_acc_; }
    long alpha_proposals() const noexcept { return a_prop_; }
    long alpha_accepts() const noexcept { return a_acc_; }
    long eta_clips() const noexcept { return clips_; }

    /// Replaces the observed network (same size and link) keeping the state.
    void set_network(const Network& net) {
        if (net.size() != data_.size()) throw std::invalid_argument("set_network: size mismatch");
        data_ = PairData(net, data_.link());
        resync();
    }

    /// Overwrites the state (for example with a prior draw).
    void set_state(ChainState s) {
        if (s.z.rows() != state_.z.rows() || s.z.cols() != state_.z.cols())
            throw std::invalid_argument("set_state: shape mismatch");
        state_ = std::move(s);
        resync();
    }

    /// Recomputes distances, pair terms and the log-likelihood from scratch.
    /// Returns the absolute difference from the previously cached value.
    double resync() {
        const double before = state_.log_lik;
        d2_ = pairwise_sq_distances(state_.z);
        terms_ = Matrix(d2_.rows(), d2_.cols());
        const auto pass = detail::alpha_pass(data_, d2_, state_.alpha, &terms_);
        state_.log_lik = pass.log_lik;
        return std::abs(before - pass.log_lik);
    }

    template <class R>
    void z_move(R& rng) {
        if (cfg_.z_update == ZUpdate::WholeMatrix)
            z_move_whole(rng);
        else
            for (std::size_t i = 0; i < state_.z.rows(); ++i) z_move_node(i, rng);
    }

    template <class R>
    void alpha_move(R& rng) {
        const double a0 = state_.alpha;
        const auto cur = detail::alpha_pass(data_, d2_, a0, nullptr);
        clips_ += cur.clips;
        const auto fwd = detail::proposal_from_pass(cur, data_, a0, hp_, cfg_.step_alpha);
        std::normal_distribution<double> norm(0.0, 1.0);
        const double a1 = fwd.mean + std::sqrt(fwd.variance) * norm(rng);
        if (!std::isfinite(a1)) diverged("non-finite alpha proposal");

        Matrix cand_terms(d2_.rows(), d2_.cols());
        const auto nxt = detail::alpha_pass(data_, d2_, a1, &cand_terms);
        if (!std::isfinite(nxt.log_lik)) diverged("non-finite log-likelihood at proposed alpha");
        const auto rev = detail::proposal_from_pass(nxt, data_, a1, hp_, cfg_.step_alpha);

        const double log_target0 = cur.log_lik - 0.5 * (a0 - hp_.mu_alpha) * (a0 - hp_.mu_alpha) / hp_.sigma2_alpha;
        const double log_target1 = nxt.log_lik - 0.5 * (a1 - hp_.mu_alpha) * (a1 - hp_.mu_alpha) / hp_.sigma2_alpha;
        const double log_ratio = log_target1 - log_target0 + detail::normal_logpdf(a0, rev.mean, rev.variance) -
                                 detail::normal_logpdf(a1, fwd.mean, fwd.variance);
        ++a_prop_;
        if (accept(log_ratio, rng)) {
            ++a_acc_;
            state_.alpha = a1;
            state_.log_lik = nxt.log_lik;
            terms_ = std::move(cand_terms);
        }
    }

    template <class R>
    void delta_update(R& rng) {
        const auto g1 = delta1_conditional_params(state_.z, state_.shrink.delta(), hp_);
        state_.shrink.set_delta(0, sample_truncated_gamma(g1.shape, g1.rate, 0.0, rng));
        for (int h = 2; h <= hp_.p; ++h) {
            const auto g = deltah_conditional_params(h, state_.z, state_.shrink.delta(), hp_);
            state_.shrink.set_delta(static_cast<std::size_t>(h - 1),
                                    sample_truncated_gamma(g.shape, g.rate, g.lower, rng));
        }
    }

    /// One full iteration: Z, then alpha, then the shrinkage strengths.
    template <class R>
    void step(R& rng) {
        ++state_.iteration;
        z_move(rng);
        alpha_move(rng);
        delta_update(rng);
        if (state_.iteration % 1000 == 0) {
            const double cached = state_.log_lik;
            const double diff = resync();
            if (diff > 1e-8 * std::max(1.0, std::abs(cached)))
                log::warn("cached log-likelihood drifted by " + std::to_string(diff) + " at iteration " +
                          std::to_string(state_.iteration));
        }
    }

  private:
    template <class R>
    bool accept(double log_ratio, R& rng) {
        if (log_ratio >= 0.0) return true;
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        return std::log(unif(rng)) < log_ratio;
    }

    [[noreturn]] void diverged(const std::string& what) const {
        throw SamplerDiverged(state_.iteration, what, dump_state(state_));
    }

    template <class R>
    void z_move_whole(R& rng) {
        const std::size_t n = state_.z.rows();
        auto cand = propose_z(state_.z, state_.shrink, cfg_.step_z, rng);
        Matrix cd2(n, n), cterms(n, n);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* ys = data_.ysum_row(i);
            for (std::size_t j = i + 1; j < n; ++j) {
                const double v = sq_distance(cand, i, j);
                const double t = data_.pair_term(state_.alpha - v, ys[j]);
                cd2(i, j) = cd2(j, i) = v;
                cterms(i, j) = cterms(j, i) = t;
                sum += t;
            }
        }
        const double new_ll = sum - data_.log_factorial_sum();
        if (!std::isfinite(new_ll)) diverged("non-finite log-likelihood for proposed Z");
        const auto& omega = state_.shrink.omega();
        const double log_ratio = new_ll - state_.log_lik + log_prior_z(cand, omega) - log_prior_z(state_.z, omega);
        ++z_prop_;
        if (accept(log_ratio, rng)) {
            ++z_acc_;
            state_.z = std::move(cand);
            d2_ = std::move(cd2);
            terms_ = std::move(cterms);
            state_.log_lik = new_ll;
        }
    }

    template <class R>
    void z_move_node(std::size_t i, R& rng) {
        const std::size_t n = state_.z.rows();
        const std::size_t p = state_.z.cols();
        std::normal_distribution<double> norm(0.0, 1.0);
        const auto& omega = state_.shrink.omega();
        row_.resize(p);
        auto cur = state_.z.row(i);
        double prior_delta = 0.0;
        for (std::size_t l = 0; l < p; ++l) {
            row_[l] = cur[l] + std::sqrt(cfg_.step_z / omega[l]) * norm(rng);
            prior_delta -= 0.5 * omega[l] * (row_[l] * row_[l] - cur[l] * cur[l]);
        }
        d2_row_.resize(n);
        term_row_.resize(n);
        const double* ys = data_.ysum_row(i);
        double delta_ll = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const auto zj = state_.z.row(j);
            double v = 0.0;
            for (std::size_t l = 0; l < p; ++l) {
                const double d = row_[l] - zj[l];
                v += d * d;
            }
            const double t = data_.pair_term(state_.alpha - v, ys[j]);
            d2_row_[j] = v;
            term_row_[j] = t;
            delta_ll += t - terms_(i, j);
        }
        if (!std::isfinite(delta_ll)) diverged("non-finite log-likelihood for proposed row " + std::to_string(i));
        ++z_prop_;
        if (accept(delta_ll + prior_delta, rng)) {
            ++z_acc_;
            for (std::size_t l = 0; l < p; ++l) cur[l] = row_[l];
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                d2_(i, j) = d2_(j, i) = d2_row_[j];
                terms_(i, j) = terms_(j, i) = term_row_[j];
            }
            state_.log_lik += delta_ll;
        }
    }

    PairData data_;
    Hyperparams hp_;
    SamplerConfig cfg_;
    ChainState state_;
    Matrix d2_;
    Matrix terms_;
    std::vector<double> row_, d2_row_, term_row_;
    long z_prop_ = 0, z_acc_ = 0, a_prop_ = 0, a_acc_ = 0, clips_ = 0;
};

/// Runs a chain from a given starting state with generator `rng`.
inline ChainTrace run_chain_from(const Network& net, const Hyperparams& hp, const SamplerConfig& cfg, Link link,
                                 ChainState init, Rng& rng) {
    Sampler s(net, hp, cfg, link, std::move(init));
    ChainTrace tr;
    tr.seed = cfg.seed;
    tr.reference = s.state().z;
    tr.reference_log_lik = s.state().log_lik;
    const long kept = (cfg.total_iters - cfg.burn_in) / cfg.thin;
    tr.iters.reserve(kept);
    tr.alpha.reserve(kept);
    for (long it = 1; it <= cfg.total_iters; ++it) {
        s.step(rng);
        const auto& st = s.state();
        if (it <= cfg.burn_in) {
            if (st.log_lik > tr.reference_log_lik) {
                tr.reference = st.z;
                tr.reference_log_lik = st.log_lik;
            }
            continue;
        }
        if ((it - cfg.burn_in) % cfg.thin != 0) continue;
        tr.iters.push_back(it);
        tr.alpha.push_back(st.alpha);
        tr.delta.push_back(st.shrink.delta());
        tr.omega.push_back(st.shrink.omega());
        tr.log_lik.push_back(st.log_lik);
        if (cfg.store_z) tr.z.push_back(st.z);
    }
    tr.z_proposals = s.z_proposals();
    tr.z_accepts = s.z_accepts();
    tr.alpha_proposals = s.alpha_proposals();
    tr.alpha_accepts = s.alpha_accepts();
    tr.eta_clips = s.eta_clips();
    return tr;
}

/// Initializes from the data and runs one chain seeded with cfg.seed.
inline ChainTrace run_chain(const Network& net, const Hyperparams& hp, const SamplerConfig& cfg, Link link) {
    cfg.validate();
    Rng rng(cfg.seed);
    auto init = initialize_chain(net, hp, link, {cfg.alpha_inflation, cfg.init_jitter_sd}, rng);
    auto tr = run_chain_from(net, hp, cfg, link, std::move(init.state), rng);
    tr.regression = init.regression;
    return tr;
}

/// Independent chains with seeds cfg.seed + k, run on up to `threads`
/// worker threads. Results are ordered by chain index and do not depend on
/// the thread count.
inline std::vector<ChainTrace> run_chains(const Network& net, const Hyperparams& hp, const SamplerConfig& cfg,
                                          Link link, int n_chains, int threads = 1) {
    if (n_chains < 1) throw std::invalid_argument("run_chains: need at least one chain");
    std::vector<ChainTrace> out(static_cast<std::size_t>(n_chains));
    std::vector<std::exception_ptr> errors(out.size());
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int k = next++; k < n_chains; k = next++) {
            try {
                SamplerConfig c = cfg;
                c.seed = cfg.seed + static_cast<std::uint64_t>(k);
                out[static_cast<std::size_t>(k)] = run_chain(net, hp, c, link);
            } catch (...) {
                errors[static_cast<std::size_t>(k)] = std::current_exception();
            }
        }
    };
    const int workers = std::max(1, std::min(threads, n_chains));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (std::size_t k = 0; k < errors.size(); ++k) {
        if (!errors[k]) continue;
        try {
            std::rethrow_exception(errors[k]);
        } catch (const std::exception& e) {
            throw std::runtime_error("chain " + std::to_string(k) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace lspm
