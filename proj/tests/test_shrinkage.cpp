#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "lspm/shrinkage.hpp"

using namespace lspm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Gamma(shape, rate) conditioned on x >= lower by plain rejection.
double rejection_draw(double shape, double rate, double lower, std::mt19937_64& rng) {
    std::gamma_distribution<double> g(shape, 1.0 / rate);
    for (;;) {
        const double x = g(rng);
        if (x >= lower) return x;
    }
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    return d;
}

// Upper incomplete gamma at x = 1 from Boost for s > 0, extended to s <= 0
// with Gamma(s, 1) = (Gamma(s + 1, 1) - e^{-1}) / s.
double upper_gamma_oracle(double s) {
    if (s > 0.0) return boost::math::tgamma(s, 1.0);
    return (upper_gamma_oracle(s + 1.0) - std::exp(-1.0)) / s;
}

}  // namespace

TEST_CASE("hyperparameter validation") {
    Hyperparams hp;
    CHECK_NOTHROW(hp.validate());
    CHECK_NOTHROW(hp.validate(11));
    CHECK_THROWS_AS(hp.validate(10), std::invalid_argument);  // p = 5 is not below 10/2
    hp.a1 = 1.0;
    CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
    hp = Hyperparams{};
    hp.sigma2_alpha = 0.0;
    CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
}

TEST_CASE("shrinkage state keeps omega as cumulative products") {
    ShrinkageState s({0.5, 1.1, 2.0});
    CHECK(s.omega(0) == 0.5);
    CHECK(s.omega(1) == 0.5 * 1.1);
    CHECK(s.omega(2) == 0.5 * 1.1 * 2.0);
    s.set_delta(1, 3.0);
    CHECK(s.omega(1) == 0.5 * 3.0);
    CHECK(s.omega(2) == 0.5 * 3.0 * 2.0);
    s.set_delta(0, 0.25);
    CHECK(s.omega(2) == 0.25 * 3.0 * 2.0);
    CHECK_THROWS_AS(s.set_delta(2, 0.9), std::invalid_argument);
    CHECK_THROWS_AS(s.set_delta(0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(ShrinkageState({1.0, 0.5}), std::invalid_argument);
}

TEST_CASE("truncated gamma draws respect the bound") {
    std::mt19937_64 rng(1);
    for (auto [a, b] : {std::pair{0.3, 2.0}, {2.0, 1.0}, {10.0, 0.5}, {60.0, 80.0}, {3.0, 200.0}})
        for (int k = 0; k < 2000; ++k) CHECK(sample_truncated_gamma(a, b, 1.0, rng) >= 1.0);
    CHECK_THROWS_AS(sample_truncated_gamma(0.0, 1.0, 1.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_truncated_gamma(1.0, -1.0, 1.0, rng), std::invalid_argument);
}

TEST_CASE("untruncated gamma mean") {
    std::mt19937_64 rng(2);
    double s = 0.0;
    const int n = 1000000;
    for (int k = 0; k < n; ++k) s += sample_truncated_gamma(2.0, 1.0, 0.0, rng);
    CHECK_THAT(s / n, WithinAbs(2.0, 0.01));
}

TEST_CASE("truncated gamma mean agrees with the rejection oracle") {
    std::mt19937_64 rng(3), oracle_rng(4);
    const int n = 1000000;
    double s = 0.0, o = 0.0, o2 = 0.0;
    for (int k = 0; k < n; ++k) {
        s += sample_truncated_gamma(2.0, 1.0, 1.0, rng);
        const double x = rejection_draw(2.0, 1.0, 1.0, oracle_rng);
        o += x;
        o2 += x * x;
    }
    const double om = o / n;
    const double se = std::sqrt((o2 / n - om * om) / n) * std::sqrt(2.0);
    CHECK(std::abs(s / n - om) < 3.0 * se);
}

TEST_CASE("truncated gamma passes two-sample KS against rejection") {
    const int n = 20000;
    const double crit = 1.628 * std::sqrt(2.0 / n);  // alpha = 0.01
    std::mt19937_64 rng(5), oracle_rng(6);
    for (auto [a, b] : {std::pair{2.0, 1.0}, {0.5, 1.0}, {10.0, 2.0}, {50.0, 1.0}, {3.0, 5.0}}) {
        std::vector<double> x(n), y(n);
        for (int k = 0; k < n; ++k) {
            x[k] = sample_truncated_gamma(a, b, 1.0, rng);
            y[k] = rejection_draw(a, b, 1.0, oracle_rng);
        }
        INFO("shape " << a << " rate " << b);
        CHECK(ks_two_sample(x, y) < crit);
    }
}

TEST_CASE("deep-tail truncated gamma matches the exact conditional CDF") {
    // F(lower) is within 1e-12 of one here, so the tail sampler is used.
    const double a = 5.0, b = 40.0, lower = 1.0;
    REQUIRE(boost::math::gamma_q(a, b * lower) < 1e-12);
    std::mt19937_64 rng(7);
    const int n = 20000;
    std::vector<double> x(n);
    for (auto& v : x) v = sample_truncated_gamma(a, b, lower, rng);
    std::sort(x.begin(), x.end());
    const double q0 = boost::math::gamma_q(a, b * lower);
    double d = 0.0;
    for (int k = 0; k < n; ++k) {
        const double f = 1.0 - boost::math::gamma_q(a, b * x[k]) / q0;
        d = std::max({d, std::abs(f - static_cast<double>(k) / n), std::abs(f - static_cast<double>(k + 1) / n)});
    }
    CHECK(d < 1.628 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("upper incomplete gamma quadrature matches Boost") {
    for (double s : {3.0, 2.0, 1.5, 1.0, 0.5, 0.1, -0.5, -0.9, -1.0 + 1e-3}) {
        INFO("s = " << s);
        CHECK_THAT(upper_incomplete_gamma_at_one(s), WithinRel(upper_gamma_oracle(s), 1e-10));
    }
    CHECK_THAT(upper_incomplete_gamma_at_one(1.0), WithinRel(std::exp(-1.0), 1e-12));
}

TEST_CASE("incomplete gamma ratio") {
    CHECK_THAT(incomplete_gamma_ratio(2.0), WithinAbs(0.5, 1e-12));
    CHECK_THAT(incomplete_gamma_ratio(1e-8), WithinAbs(0.68, 0.005));
    CHECK(incomplete_gamma_ratio(6.0) < incomplete_gamma_ratio(2.0));
    double prev = 1.0;
    for (double a2 : {0.01, 0.5, 1.0, 2.0, 4.0, 8.0}) {
        const double r = incomplete_gamma_ratio(a2);
        CHECK(r < prev);
        CHECK(r > 0.0);
        prev = r;
    }
    CHECK_THROWS_AS(incomplete_gamma_ratio(0.0), std::invalid_argument);
}

TEST_CASE("expected squared distances in closed form") {
    Hyperparams hp;  // a1 = 1.1, b1 = 1, a2 = 2
    CHECK_THAT(expected_sq_distance_dim(1, hp), WithinAbs(20.0, 1e-9));
    CHECK_THAT(expected_sq_distance_dim(2, hp), WithinAbs(10.0, 1e-9));
    hp.p = 1;
    CHECK_THAT(expected_sq_distance_total(hp), WithinAbs(expected_sq_distance_dim(1, hp), 1e-12));
    hp.p = 2;
    CHECK_THAT(expected_sq_distance_total(hp), WithinAbs(30.0, 1e-9));
    CHECK_THAT(expected_sq_distance_limit(hp), WithinAbs(40.0, 1e-9));
    for (double a2 : {0.5, 2.0, 5.0}) {
        hp.a2 = a2;
        for (int p = 1; p <= 8; ++p) {
            hp.p = p;
            double sum = 0.0;
            for (int l = 1; l <= p; ++l) sum += expected_sq_distance_dim(l, hp);
            CHECK_THAT(expected_sq_distance_total(hp), WithinRel(sum, 1e-12));
            if (p > 1) CHECK(expected_sq_distance_dim(p, hp) < expected_sq_distance_dim(p - 1, hp));
        }
    }
    Hyperparams lo, hi;
    lo.a2 = 2.0;
    hi.a2 = 6.0;
    for (int l = 2; l <= 4; ++l) CHECK(expected_sq_distance_dim(l, hi) < expected_sq_distance_dim(l, lo));
    Hyperparams bad;
    bad.a1 = 0.9;
    CHECK_THROWS_AS(expected_sq_distance_dim(1, bad), std::invalid_argument);
    CHECK_THROWS_AS(expected_sq_distance_total(bad), std::invalid_argument);
}

TEST_CASE("expected squared distance agrees with prior predictive Monte Carlo") {
    // a1 = 4 gives 1/delta_1 a finite variance so the Monte Carlo mean settles.
    Hyperparams hp;
    hp.a1 = 4.0;
    hp.b1 = 2.0;
    hp.a2 = 3.0;
    std::mt19937_64 rng(8);
    std::gamma_distribution<double> d1(hp.a1, 1.0 / hp.b1);
    std::normal_distribution<double> norm;
    const int n = 1000000;
    double sums[3] = {0, 0, 0};
    for (int k = 0; k < n; ++k) {
        double omega = d1(rng);
        for (int l = 0; l < 3; ++l) {
            if (l > 0) omega *= sample_truncated_gamma(hp.a2, hp.b2, hp.c2, rng);
            const double diff = (norm(rng) - norm(rng)) / std::sqrt(omega);
            sums[l] += diff * diff;
        }
    }
    for (int l = 0; l < 3; ++l) {
        INFO("dimension " << l + 1);
        CHECK_THAT(sums[l] / n, WithinRel(expected_sq_distance_dim(l + 1, hp), 0.02));
    }
}

TEST_CASE("adaptive quadrature integrates smooth functions") {
    CHECK_THAT(integrate_gk15([](double x) { return std::sin(x); }, 0.0, 3.141592653589793, 1e-13),
               WithinRel(2.0, 1e-12));
    CHECK_THAT(integrate_gk15([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, 1e-10),
               WithinRel(2.0, 1e-8));
}
