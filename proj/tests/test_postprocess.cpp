#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "lspm/postprocess.hpp"

using namespace lspm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Matrix random_config(std::size_t n, std::size_t p, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> g(0.0, sd);
    Matrix z(n, p);
    for (auto& v : z.data()) v = g(rng);
    return z;
}

Matrix rotation2(double theta) {
    Matrix r(2, 2);
    r(0, 0) = std::cos(theta);
    r(0, 1) = -std::sin(theta);
    r(1, 0) = std::sin(theta);
    r(1, 1) = std::cos(theta);
    return r;
}

Matrix translate(Matrix z, const std::vector<double>& t) {
    for (std::size_t i = 0; i < z.rows(); ++i)
        for (std::size_t l = 0; l < z.cols(); ++l) z(i, l) += t[l];
    return z;
}

double dist_sq(const Matrix& a, const Matrix& b) { return frobenius_norm_sq(a - b); }

ParamSummary band(double mean, double width) { return {mean, mean, mean - width / 2, mean + width / 2}; }

// Quantile by explicit order statistics, written independently of the library.
double order_stat_quantile(std::vector<double> x, double p) {
    std::sort(x.begin(), x.end());
    const double pos = p * (x.size() - 1);
    const std::size_t k = static_cast<std::size_t>(pos);
    if (k + 1 >= x.size()) return x.back();
    const double frac = pos - k;
    return (1 - frac) * x[k] + frac * x[k + 1];
}

ChainTrace trace_of(const std::vector<double>& alpha, std::size_t p = 2) {
    ChainTrace t;
    for (std::size_t k = 0; k < alpha.size(); ++k) {
        t.iters.push_back(static_cast<long>(k + 1));
        t.alpha.push_back(alpha[k]);
        t.delta.push_back(std::vector<double>(p, 1.0 + 0.1 * k));
        std::vector<double> w(p);
        double c = 1.0;
        for (std::size_t l = 0; l < p; ++l) w[l] = (c *= t.delta.back()[l]);
        t.omega.push_back(w);
        t.log_lik.push_back(-1.0);
    }
    return t;
}

}  // namespace

TEST_CASE("aligning a configuration to itself is the identity") {
    std::mt19937_64 rng(1);
    const auto z = random_config(12, 3, rng);
    const auto t = procrustes_fit(z, z);
    const auto r = t.rotation - Matrix::identity(3);
    CHECK(frobenius_norm_sq(r) < 1e-24);
    CHECK(dist_sq(t.apply(z), z) < 1e-24);
}

TEST_CASE("alignment undoes a known rotation, reflection and translation") {
    std::mt19937_64 rng(2);
    const auto ref = random_config(20, 2, rng);
    const auto moved = translate(ref * rotation2(0.7), {3.0, -2.0});
    CHECK(dist_sq(procrustes_align(moved, ref), ref) < 1e-20);

    Matrix flip = Matrix::identity(2);
    flip(1, 1) = -1.0;
    const auto reflected = translate(ref * flip, {-1.0, 0.5});
    CHECK(dist_sq(procrustes_align(reflected, ref), ref) < 1e-20);
    CHECK_THROWS_AS(procrustes_fit(ref, Matrix(20, 3)), std::invalid_argument);
}

TEST_CASE("alignment never increases the distance to the reference") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        const auto ref = random_config(15, 3, rng);
        const auto noisy = ref * jacobi_svd(random_config(3, 3, rng)).u + random_config(15, 3, rng, 0.3 + rep * 0.05);
        CHECK(dist_sq(procrustes_align(noisy, ref), ref) <= dist_sq(noisy, ref) + 1e-12);
    }
}

TEST_CASE("trace alignment maps every draw to the reference frame") {
    std::mt19937_64 rng(4);
    const auto ref = random_config(10, 2, rng);
    auto t = trace_of({0.1, 0.2, 0.3});
    for (double th : {0.3, 1.2, 2.5}) t.z.push_back(translate(ref * rotation2(th), {th, -th}));
    t.reference = ref;
    t.reference_log_lik = 1.0;
    auto other = t;
    other.reference = ref * rotation2(0.4);
    other.reference_log_lik = 0.0;
    const auto aligned = align_chains({other, t});
    CHECK(global_reference({other, t}) == t.reference);
    for (const auto& tr : aligned)
        for (const auto& z : tr.z) CHECK(dist_sq(z, ref) < 1e-20);
}

TEST_CASE("Procrustes correlation") {
    std::mt19937_64 rng(5);
    const auto b = random_config(30, 2, rng);
    CHECK_THAT(procrustes_correlation(b, b), WithinAbs(1.0, 1e-10));
    for (double th : {0.1, 1.0, 2.0, 4.0})
        CHECK_THAT(procrustes_correlation(translate(b * rotation2(th), {5.0, -7.0}), b), WithinAbs(1.0, 1e-10));
    const auto q = jacobi_svd(random_config(4, 4, rng)).u;
    const auto c = random_config(25, 4, rng);
    CHECK_THAT(procrustes_correlation(c * q, c), WithinAbs(1.0, 1e-10));

    // A narrower configuration is padded with zero columns.
    Matrix wide(30, 3);
    for (std::size_t i = 0; i < 30; ++i)
        for (std::size_t l = 0; l < 2; ++l) wide(i, l) = b(i, l);
    CHECK_THAT(procrustes_correlation(wide, b), WithinAbs(1.0, 1e-10));

    CHECK_THROWS_AS(procrustes_correlation(Matrix(30, 2, 1.0), b), std::invalid_argument);
    CHECK_THROWS_AS(procrustes_correlation(random_config(29, 2, rng), b), std::invalid_argument);
}

TEST_CASE("Procrustes correlation of independent noise is small") {
    std::mt19937_64 rng(6);
    int below = 0;
    for (int rep = 0; rep < 100; ++rep)
        if (procrustes_correlation(random_config(100, 2, rng), random_config(100, 2, rng)) < 0.5) ++below;
    CHECK(below == 100);
}

TEST_CASE("Procrustes correlation agrees with the residual form") {
    // sqrt(1 - min residual / total) where the residual is minimized over
    // rotation, translation and an isotropic scale of A.
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        auto a = random_config(20, 3, rng);
        auto b = a * jacobi_svd(random_config(3, 3, rng)).u + random_config(20, 3, rng, 0.8);
        center_columns(a);
        center_columns(b);
        const auto t = procrustes_fit(a, b);
        const auto ar = a * t.rotation;
        double num = 0.0;
        for (std::size_t k = 0; k < ar.data().size(); ++k) num += ar.data()[k] * b.data()[k];
        const double scale = num / frobenius_norm_sq(ar);
        Matrix fitted = ar;
        fitted *= scale;
        const double resid = dist_sq(fitted, b);
        const double expected = std::sqrt(1.0 - resid / frobenius_norm_sq(b));
        CHECK_THAT(procrustes_correlation(a, b), WithinAbs(expected, 1e-10));
    }
}

TEST_CASE("quantiles and summaries") {
    CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
    CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.5) == 2.5);
    CHECK_THROWS_AS(quantile({}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(quantile({1.0}, 1.5), std::invalid_argument);

    const auto c = summarize(std::vector<double>(17, 4.25));
    CHECK(c.mean == 4.25);
    CHECK(c.width() == 0.0);
    CHECK(summarize({1.0, 3.0}).mean == 2.0);

    std::mt19937_64 rng(8);
    std::gamma_distribution<double> g(2.0, 1.5);
    std::vector<double> x(1001);
    for (auto& v : x) v = g(rng);
    const auto s = summarize(x);
    CHECK_THAT(s.median, WithinAbs(order_stat_quantile(x, 0.5), 1e-12));
    CHECK_THAT(s.lower, WithinAbs(order_stat_quantile(x, 0.025), 1e-12));
    CHECK_THAT(s.upper, WithinAbs(order_stat_quantile(x, 0.975), 1e-12));
}

TEST_CASE("posterior summary pools traces") {
    auto a = trace_of({1.0, 3.0});
    auto b = trace_of({5.0, 7.0});
    a.z = {Matrix(3, 2, 1.0), Matrix(3, 2, 3.0)};
    b.z = {Matrix(3, 2, 5.0), Matrix(3, 2, 7.0)};
    const auto s = posterior_summary({a, b});
    CHECK(s.draws == 4);
    CHECK(s.alpha.mean == 4.0);
    CHECK(s.z_mean == Matrix(3, 2, 4.0));
    REQUIRE(s.delta.size() == 2);
    CHECK_THAT(s.delta[0].mean, WithinAbs(1.05, 1e-12));
    CHECK_THAT(s.variance[1].mean, WithinAbs((1 / 1.0 + 1 / 1.21 + 1 / 1.0 + 1 / 1.21) / 4, 1e-12));
    CHECK_THROWS_AS(posterior_summary({ChainTrace{}}), std::invalid_argument);
}

TEST_CASE("effective dimension from shrinkage-strength jumps") {
    const auto two = effective_dimensions(
        {band(0.5, 0.3), band(1.1, 0.5), band(9.0, 8.0), band(3.0, 3.0), band(2.5, 2.0)});
    CHECK(two.dims == 2);
    CHECK(two.flagged == 3);
    CHECK_FALSE(two.at_truncation);

    const auto gentle = effective_dimensions(
        {band(0.5, 0.3), band(1.1, 0.4), band(1.2, 0.4), band(1.3, 0.5), band(1.35, 0.5)});
    CHECK(gentle.at_truncation);
    CHECK(gentle.report.find(">= 5") != std::string::npos);

    CHECK(effective_dimensions({band(0.5, 0.2), band(50.0, 40.0)}).dims == 1);
    CHECK_THROWS_AS(effective_dimensions({band(0.5, 0.2)}), std::invalid_argument);

    // A jump in the mean without a wider interval is not flagged.
    CHECK(effective_dimensions({band(0.5, 0.3), band(1.1, 0.5), band(9.0, 0.6)}).at_truncation);

    // Appending fully shrunk dimensions leaves the answer unchanged.
    const auto extended = effective_dimensions({band(0.5, 0.3), band(1.1, 0.5), band(9.0, 8.0), band(3.0, 3.0),
                                                band(2.5, 2.0), band(1e6, 1e7), band(1e6, 1e7)});
    CHECK(extended.dims == 2);
}

TEST_CASE("Gelman-Rubin diagnostic") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    std::vector<double> stream(20000);
    for (auto& v : stream) v = g(rng);
    const std::vector<std::vector<double>> split{{stream.begin(), stream.begin() + 10000},
                                                 {stream.begin() + 10000, stream.end()}};
    const double r = gelman_rubin(split);
    CHECK(r >= 0.99);
    CHECK(r <= 1.02);

    std::vector<double> a(500), b(500);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = 100.0 + g(rng);
    CHECK(gelman_rubin({a, b}) > 5.0);

    CHECK_THROWS_AS(gelman_rubin({a}), std::invalid_argument);
    CHECK_THROWS_AS(gelman_rubin({a, std::vector<double>(499, 0.0)}), std::invalid_argument);
    CHECK_THROWS_AS(gelman_rubin({std::vector<double>(5, 0.0), std::vector<double>(5, 1.0)}), std::invalid_argument);

    // Two shifted ramps: W is the variance of 1..10, B = n * 50 from means 5.5 and 15.5.
    const std::vector<double> c1{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, c2{11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
    const double w = 110.0 / 12.0;  // sample variance of 1..10
    const double bb = 10.0 * 50.0;
    CHECK_THAT(gelman_rubin({c1, c2}), WithinRel(std::sqrt((0.9 * w + bb / 10.0) / w), 1e-12));

    std::vector<ChainTrace> traces{trace_of(std::vector<double>(split[0].begin(), split[0].begin() + 100)),
                                   trace_of(std::vector<double>(split[1].begin(), split[1].begin() + 100))};
    CHECK_THAT(gelman_rubin(traces, select_alpha()),
               WithinRel(gelman_rubin({traces[0].alpha, traces[1].alpha}), 1e-15));
}

TEST_CASE("autocorrelation") {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> g;
    const std::size_t n = 20000;
    std::vector<double> white(n), ar(n);
    for (auto& v : white) v = g(rng);
    ar[0] = g(rng);
    for (std::size_t t = 1; t < n; ++t) ar[t] = 0.9 * ar[t - 1] + g(rng);
    const auto aw = autocorrelation(white, 10);
    CHECK(aw[0] == 1.0);
    for (std::size_t k = 1; k <= 10; ++k) CHECK(std::abs(aw[k]) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK_THAT(autocorrelation(ar, 1)[1], WithinAbs(0.9, 0.05));
    CHECK_THROWS_AS(autocorrelation(std::vector<double>(5, 1.0), 2), std::invalid_argument);
    CHECK_THROWS_AS(autocorrelation(white, n), std::invalid_argument);
}
