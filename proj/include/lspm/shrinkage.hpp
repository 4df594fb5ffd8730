#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

namespace lspm {

/// Prior hyperparameters and the truncation level.
struct Hyperparams {
    double a1 = 1.1;            // shape of the first shrinkage strength's gamma prior
    double b1 = 1.0;            // rate of the same
    double a2 = 2.0;            // shape for strengths h > 1
    double b2 = 1.0;            // rate for strengths h > 1
    double c2 = 1.0;            // left truncation point for strengths h > 1
    double mu_alpha = 0.0;
    double sigma2_alpha = 9.0;
    int p = 5;                  // truncation level (number of fitted dimensions)

    /// Throws std::invalid_argument on an invalid combination. With `n > 0`
    /// also enforces p < n/2.
    void validate(std::size_t n = 0) const {
        auto fail = [](const std::string& m) { throw std::invalid_argument("hyperparameters: " + m); };
        if (!(a1 > 1.0)) fail("a1 must exceed 1");
        if (!(a2 > 0.0)) fail("a2 must be positive");
        if (!(b1 > 0.0) || !(b2 > 0.0)) fail("b1 and b2 must be positive");
        if (!(c2 > 0.0)) fail("c2 must be positive");
        if (!(sigma2_alpha > 0.0)) fail("sigma2_alpha must be positive");
        if (!std::isfinite(mu_alpha)) fail("mu_alpha must be finite");
        if (p < 1) fail("p must be at least 1");
        if (n > 0 && 2 * static_cast<std::size_t>(p) >= n)
            fail("truncation level p=" + std::to_string(p) + " must be below n/2 (n=" + std::to_string(n) + ")");
    }
};

/// Shrinkage strengths and the precisions they induce (cumulative products).
///
/// Strengths after the first are kept at or above the truncation point, so
/// precisions never decrease after the first dimension.
class ShrinkageState {
  public:
    ShrinkageState() = default;
    explicit ShrinkageState(std::vector<double> delta, double lower = 1.0)
        : delta_(std::move(delta)), omega_(delta_.size()), lower_(lower) {
        if (delta_.empty()) throw std::invalid_argument("shrinkage state needs at least one dimension");
        for (std::size_t h = 0; h < delta_.size(); ++h) check(h, delta_[h]);
        recompute_from(0);
    }

    std::size_t dims() const noexcept { return delta_.size(); }
    const std::vector<double>& delta() const noexcept { return delta_; }
    const std::vector<double>& omega() const noexcept { return omega_; }
    double delta(std::size_t h) const { return delta_.at(h); }
    double omega(std::size_t l) const { return omega_.at(l); }
    double lower() const noexcept { return lower_; }

    void set_delta(std::size_t h, double value) {
        check(h, value);
        delta_[h] = value;
        recompute_from(h);
    }

    friend bool operator==(const ShrinkageState&, const ShrinkageState&) = default;

  private:
    void check(std::size_t h, double v) const {
        if (!std::isfinite(v) || !(v > 0.0))
            throw std::invalid_argument("shrinkage strength must be positive and finite");
        if (h > 0 && v < lower_)
            throw std::invalid_argument("shrinkage strength for dimension " + std::to_string(h + 1) +
                                        " is below the truncation point");
    }
    void recompute_from(std::size_t h) {
        double w = h == 0 ? 1.0 : omega_[h - 1];
        for (std::size_t l = h; l < delta_.size(); ++l) {
            w *= delta_[l];
            omega_[l] = w;
        }
    }

    std::vector<double> delta_;
    std::vector<double> omega_;
    double lower_ = 1.0;
};

namespace detail {

/// Gamma(shape, rate) restricted to x >= lower, sampled by rejection from a
/// shifted exponential. Valid when lower sits past the mode (or shape <= 1),
/// which is the deep-tail regime where inversion loses precision.
template <class Rng>
double gamma_tail_rejection(double shape, double rate, double lower, Rng& rng) {
    const double lambda = shape <= 1.0 ? rate : rate - (shape - 1.0) / lower;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::exponential_distribution<double> expo(lambda);
    for (;;) {
        const double x = lower + expo(rng);
        const double log_accept = (shape - 1.0) * std::log(x / lower) - (rate - lambda) * (x - lower);
        if (std::log(1.0 - unif(rng)) <= log_accept) return x;
    }
}

}  // namespace detail

/// Draws from Gamma(shape, rate) conditioned on x >= lower by inverting the
/// CDF on [F(lower), 1). When F(lower) > 1 - 1e-12 the inversion has no
/// precision left and a tail rejection sampler is used instead.
template <class Rng>
double sample_truncated_gamma(double shape, double rate, double lower, Rng& rng) {
    if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate))
        throw std::invalid_argument("truncated gamma: shape and rate must be positive");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (!(lower > 0.0)) {
        std::gamma_distribution<double> g(shape, 1.0 / rate);
        return g(rng);
    }
    const double x0 = rate * lower;
    const double cdf_lower = boost::math::gamma_p(shape, x0);
    if (cdf_lower > 1.0 - 1e-12) {
        if (shape <= 1.0 || lower > (shape - 1.0) / rate)
            return detail::gamma_tail_rejection(shape, rate, lower, rng);
        std::gamma_distribution<double> g(shape, 1.0 / rate);
        for (;;) {
            const double x = g(rng);
            if (x >= lower) return x;
        }
    }
    const double u = unif(rng);
    double x = 0.0;
    if (cdf_lower < 0.5) {
        // u' ~ Uniform[F(lower), 1)
        const double up = cdf_lower + (1.0 - cdf_lower) * u;
        x = boost::math::gamma_p_inv(shape, up) / rate;
    } else {
        // Same inversion through the upper tail, which keeps precision near 1.
        const double q_lower = boost::math::gamma_q(shape, x0);
        const double v = q_lower * (1.0 - u);  // in (0, Q(lower)]
        x = boost::math::gamma_q_inv(shape, v) / rate;
    }
    return x < lower ? lower : x;
}

/// Adaptive Gauss-Kronrod (7/15) quadrature on a finite interval.
inline double integrate_gk15(const std::function<double(double)>& f, double a, double b, double rel_tol,
                             int max_depth = 60) {
    static constexpr double xgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                      0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                      0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                      0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
    static constexpr double wgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                      0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                      0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                      0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
    static constexpr double wg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                     0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

    auto rule = [&](double lo, double hi, double& err) {
        const double c = 0.5 * (lo + hi);
        const double h = 0.5 * (hi - lo);
        const double fc = f(c);
        double k = fc * wgk[7];
        double g = fc * wg[3];
        for (int j = 0; j < 7; ++j) {
            const double dx = h * xgk[j];
            const double f1 = f(c - dx);
            const double f2 = f(c + dx);
            k += wgk[j] * (f1 + f2);
            if (j % 2 == 1) g += wg[j / 2] * (f1 + f2);
        }
        err = std::abs((k - g) * h);
        return k * h;
    };

    std::function<double(double, double, double, double, double, int)> recurse =
        [&](double lo, double hi, double whole, double err, double tol, int depth) -> double {
        if (err <= tol || depth >= max_depth) return whole;
        const double mid = 0.5 * (lo + hi);
        double el = 0.0, er = 0.0;
        const double left = rule(lo, mid, el);
        const double right = rule(mid, hi, er);
        return recurse(lo, mid, left, el, 0.5 * tol, depth + 1) + recurse(mid, hi, right, er, 0.5 * tol, depth + 1);
    };

    double err = 0.0;
    const double first = rule(a, b, err);
    const double tol = rel_tol * std::max(std::abs(first), std::numeric_limits<double>::min());
    return recurse(a, b, first, err, tol, 0);
}

/// Upper incomplete gamma function at x = 1, valid for any real s (the
/// integral starts at 1, so it converges for s <= 0 as well).
inline double upper_incomplete_gamma_at_one(double s) {
    auto integrand = [s](double u) {
        // t = 1 + u / (1 - u) maps [0, 1) onto [1, inf)
        const double om = 1.0 - u;
        const double t = 1.0 + u / om;
        return std::exp((s - 1.0) * std::log(t) - t) / (om * om);
    };
    // Split at the integrand's peak so the adaptive rule sees a smooth bump.
    const double peak_t = std::max(1.0, s - 1.0);
    const double peak_u = (peak_t - 1.0) / peak_t;
    double total = 0.0;
    if (peak_u > 0.0) total += integrate_gk15(integrand, 0.0, peak_u, 1e-13);
    total += integrate_gk15(integrand, peak_u, 1.0, 1e-13);
    return total;
}

/// Gamma(a2 - 1, 1) / Gamma(a2, 1): the prior mean of 1/delta_h for h > 1,
/// which is also the per-dimension decay of the expected squared distance.
inline double incomplete_gamma_ratio(double a2) {
    if (!(a2 > 0.0)) throw std::invalid_argument("incomplete_gamma_ratio: a2 must be positive");
    return upper_incomplete_gamma_at_one(a2 - 1.0) / upper_incomplete_gamma_at_one(a2);
}

/// Prior expected squared distance between two nodes within dimension `ell`
/// (1-based).
inline double expected_sq_distance_dim(int ell, const Hyperparams& hp) {
    if (!(hp.a1 > 1.0)) throw std::invalid_argument("expected distance diverges for a1 <= 1");
    if (ell < 1) throw std::invalid_argument("dimension index starts at 1");
    const double r = incomplete_gamma_ratio(hp.a2);
    return 2.0 * (hp.b1 / (hp.a1 - 1.0)) * std::pow(r, ell - 1);
}

/// Prior expected squared distance summed over dimensions 1..hp.p.
inline double expected_sq_distance_total(const Hyperparams& hp) {
    if (!(hp.a1 > 1.0)) throw std::invalid_argument("expected distance diverges for a1 <= 1");
    if (hp.p < 1) throw std::invalid_argument("p must be at least 1");
    const double r = incomplete_gamma_ratio(hp.a2);
    return 2.0 * (hp.b1 / (hp.a1 - 1.0)) * (1.0 - std::pow(r, hp.p)) / (1.0 - r);
}

/// Limit of expected_sq_distance_total as p grows without bound.
inline double expected_sq_distance_limit(const Hyperparams& hp) {
    if (!(hp.a1 > 1.0)) throw std::invalid_argument("expected distance diverges for a1 <= 1");
    const double r = incomplete_gamma_ratio(hp.a2);
    return 2.0 * (hp.b1 / (hp.a1 - 1.0)) / (1.0 - r);
}

}  // namespace lspm
