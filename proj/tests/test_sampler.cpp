#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "lspm/sampler.hpp"
#include "lspm/simulate.hpp"

using namespace lspm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Network random_net(std::size_t n, Link link, std::mt19937_64& rng, double p = 0.3) {
    Network g(n, edge_kind_for(link), false);
    std::bernoulli_distribution b(p);
    std::poisson_distribution<int> pois(2.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) g.set(i, j, link == Link::Logit ? b(rng) : pois(rng));
    return g;
}

ChainState make_state(std::size_t n, std::vector<double> delta, double alpha) {
    ChainState s;
    s.z = LatentConfig(n, delta.size());
    s.shrink = ShrinkageState(std::move(delta));
    s.alpha = alpha;
    return s;
}

SamplerConfig short_config(long total, long burn, long thin, std::uint64_t seed = 1) {
    SamplerConfig c;
    c.total_iters = total;
    c.burn_in = burn;
    c.thin = thin;
    c.seed = seed;
    return c;
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

// Log full conditional of alpha evaluated through the model likelihood.
double log_alpha_conditional(const Network& net, const LatentConfig& z, double a, Link link, const Hyperparams& hp) {
    return log_likelihood(net, z, {a, link}) - 0.5 * (a - hp.mu_alpha) * (a - hp.mu_alpha) / hp.sigma2_alpha;
}

}  // namespace

TEST_CASE("sampler configuration is validated") {
    CHECK_NOTHROW(SamplerConfig{}.validate());
    auto c = short_config(10, 10, 1);
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = short_config(10, 2, 0);
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = short_config(10, 2, 1);
    c.step_z = 0.001;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.step_z = 1.0;
    c.step_alpha = 11.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("Z proposal collapses onto the current state as k vanishes") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    LatentConfig z(6, 3);
    for (auto& v : z.data()) v = g(rng);
    const ShrinkageState s({0.5, 1.5, 2.0});
    const auto cand = propose_z(z, s, 1e-12, rng);
    for (std::size_t k = 0; k < z.data().size(); ++k) CHECK_THAT(cand.data()[k], WithinAbs(z.data()[k], 1e-5));
}

TEST_CASE("Z proposal spread matches k / omega") {
    std::mt19937_64 rng(2);
    LatentConfig z(1, 3, 0.3);
    const ShrinkageState s({0.5, 2.0, 1.5});
    const double k = 0.7;
    const int draws = 100000;
    std::vector<double> ss(3, 0.0);
    for (int r = 0; r < draws; ++r) {
        const auto c = propose_z(z, s, k, rng);
        for (std::size_t l = 0; l < 3; ++l) ss[l] += (c(0, l) - z(0, l)) * (c(0, l) - z(0, l));
    }
    for (std::size_t l = 0; l < 3; ++l) CHECK_THAT(ss[l] / draws, WithinRel(k / s.omega(l), 0.02));
}

TEST_CASE("per-node proposal perturbs a single row") {
    std::mt19937_64 rng(3);
    LatentConfig z(5, 2, 1.0);
    const auto c = propose_z(z, ShrinkageState({1.0, 1.0}), 1.0, rng, 2);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t l = 0; l < 2; ++l) {
            if (i == 2)
                CHECK(c(i, l) != z(i, l));
            else
                CHECK(c(i, l) == z(i, l));
        }
}

TEST_CASE("Z moves that wreck the likelihood are rejected") {
    Network full(8, EdgeKind::Binary, false);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = i + 1; j < 8; ++j) full.set(i, j, 1);
    Hyperparams hp;
    hp.p = 2;
    auto cfg = short_config(10, 0, 1);
    cfg.step_z = 10.0;
    cfg.z_update = ZUpdate::WholeMatrix;
    Sampler s(full, hp, cfg, Link::Logit, make_state(8, {1e-8, 1.0}, 3.0));
    Rng rng(4);
    for (int t = 0; t < 10000; ++t) s.z_move(rng);
    CHECK(s.z_proposals() == 10000);
    CHECK(s.z_accepts() == 0);
}

TEST_CASE("informed proposal has zero drift at the Poisson score root") {
    std::mt19937_64 rng(5);
    const auto net = random_net(12, Link::Log, rng);
    const PairData data(net, Link::Log);
    const LatentConfig z(12, 2);  // all distances zero
    const double alpha = std::log(data.total_y() / data.ordered_pairs());
    Hyperparams hp;
    hp.mu_alpha = alpha;
    const auto prop = informed_alpha_proposal(data, z, alpha, hp);
    CHECK_THAT(prop.mean, WithinAbs(alpha, 1e-12));
    hp.sigma2_alpha = 1e12;
    const auto flat = informed_alpha_proposal(data, z, alpha, hp);
    CHECK_THAT(flat.variance, WithinRel(1.0 / (data.ordered_pairs() * std::exp(alpha)), 1e-9));
    const auto scaled = informed_alpha_proposal(data, z, alpha, hp, 2.5);
    CHECK_THAT(scaled.variance, WithinRel(2.5 * flat.variance, 1e-14));
}

TEST_CASE("informed proposal is the Newton step of the alpha conditional") {
    // First derivative by a central difference with h = 1e-5, second by a
    // five-point stencil with a wider step to keep rounding error small.
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(0.0, 0.6);
    Hyperparams hp;
    for (Link link : {Link::Logit, Link::Log}) {
        const auto net = random_net(10, link, rng);
        LatentConfig z(10, 2);
        for (auto& v : z.data()) v = g(rng);
        const double a = 0.4;
        auto f = [&](double x) { return log_alpha_conditional(net, z, x, link, hp); };
        const double h1 = 1e-5, h2 = 1e-3;
        const double d1 = (f(a + h1) - f(a - h1)) / (2.0 * h1);
        const double d2 = (-f(a + 2 * h2) + 16 * f(a + h2) - 30 * f(a) + 16 * f(a - h2) - f(a - 2 * h2)) / (12 * h2 * h2);
        const auto prop = informed_alpha_proposal(PairData(net, link), z, a, hp);
        INFO("link " << to_string(link));
        CHECK_THAT(prop.variance, WithinAbs(-1.0 / d2, 1e-6));
        CHECK_THAT(prop.mean, WithinAbs(a - d1 / d2, 1e-6));
    }
}

TEST_CASE("alpha moves are almost always accepted when the target is nearly Gaussian") {
    std::mt19937_64 rng(7);
    const auto net = random_net(60, Link::Log, rng);
    Hyperparams hp;
    hp.p = 2;
    Sampler s(net, hp, short_config(10, 0, 1), Link::Log, make_state(60, {1.0, 1.0}, 0.5));
    Rng r(8);
    for (int t = 0; t < 2000; ++t) s.alpha_move(r);
    CHECK(static_cast<double>(s.alpha_accepts()) / s.alpha_proposals() > 0.9);
    CHECK_THAT(s.state().alpha, WithinAbs(std::log(2.0), 0.1));
}

TEST_CASE("delta update at Z = 0 draws from the prior-shaped gamma") {
    Network empty(6, EdgeKind::Binary, false);
    Hyperparams hp;
    hp.p = 3;
    Sampler s(empty, hp, short_config(10, 0, 1), Link::Logit, make_state(6, {1.0, 1.0, 1.0}, 0.0));
    Rng r(9);
    std::mt19937_64 oracle(10);
    std::gamma_distribution<double> direct(6 * 3 / 2.0 + hp.a1, 1.0 / hp.b1);
    const int draws = 20000;
    std::vector<double> got(draws), ref(draws);
    for (int t = 0; t < draws; ++t) {
        s.delta_update(r);
        got[t] = s.state().shrink.delta(0);
        ref[t] = direct(oracle);
        for (std::size_t h = 1; h < 3; ++h) CHECK(s.state().shrink.delta(h) >= 1.0);
        for (double w : s.state().shrink.omega()) CHECK(w > 0.0);
    }
    CHECK(ks_two_sample(got, ref) < 1.628 * std::sqrt(2.0 / draws));
}

TEST_CASE("trace length follows burn-in and thinning") {
    std::mt19937_64 rng(11);
    const auto net = random_net(12, Link::Logit, rng);
    Hyperparams hp;
    hp.p = 2;
    CHECK(run_chain(net, hp, short_config(25, 20, 5), Link::Logit).size() == 1);
    const auto tr = run_chain(net, hp, short_config(107, 10, 7), Link::Logit);
    CHECK(tr.size() == (107 - 10) / 7);
    CHECK(tr.iters.front() == 17);
    CHECK(tr.z.size() == tr.size());
    CHECK(tr.z_acceptance() >= 0.0);
    CHECK(tr.z_acceptance() <= 1.0);
    auto nz = short_config(50, 10, 10);
    nz.store_z = false;
    CHECK(run_chain(net, hp, nz, Link::Logit).z.empty());
}

TEST_CASE("reference configuration is the best burn-in state") {
    std::mt19937_64 rng(12);
    const auto net = random_net(15, Link::Logit, rng);
    Hyperparams hp;
    hp.p = 2;
    const auto cfg = short_config(300, 200, 10);
    const auto tr = run_chain(net, hp, cfg, Link::Logit);
    Rng r(cfg.seed);
    const auto init = initialize_chain(net, hp, Link::Logit, InitOptions{}, r);
    CHECK(tr.reference.rows() == 15);
    CHECK(tr.reference_log_lik >= init.state.log_lik);
    for (double ll : tr.log_lik) CHECK(std::isfinite(ll));
}

TEST_CASE("Z acceptance on a simulated 50-node network with default steps") {
    Rng rng(13);
    const auto setting = study_preset(1, "n50").settings.at(0);
    const auto sim = simulate_network(setting.n, setting.delta, setting.alpha, setting.link, rng);
    Hyperparams hp;
    hp.p = setting.fit_p.at(0);
    SamplerConfig cfg;
    cfg.total_iters = 20000;
    cfg.burn_in = 5000;
    cfg.thin = 100;
    const auto tr = run_chain(sim.net, hp, cfg, setting.link);
    CHECK(tr.z_acceptance() >= 0.1);
    CHECK(tr.z_acceptance() <= 0.6);
}

TEST_CASE("chains are deterministic for a seed") {
    std::mt19937_64 rng(14);
    const auto net = random_net(20, Link::Logit, rng);
    Hyperparams hp;
    hp.p = 3;
    for (ZUpdate mode : {ZUpdate::WholeMatrix, ZUpdate::PerNode}) {
        auto cfg = short_config(400, 100, 10, 77);
        cfg.z_update = mode;
        cfg.step_z = mode == ZUpdate::WholeMatrix ? 0.01 : 0.05;
        const auto a = run_chain(net, hp, cfg, Link::Logit);
        const auto b = run_chain(net, hp, cfg, Link::Logit);
        CHECK(a.alpha == b.alpha);
        CHECK(a.delta == b.delta);
        CHECK(a.log_lik == b.log_lik);
        CHECK(a.z == b.z);
        cfg.seed = 78;
        CHECK_FALSE(run_chain(net, hp, cfg, Link::Logit).alpha == a.alpha);
    }
}

TEST_CASE("multiple chains are seeded per index and independent of thread count") {
    std::mt19937_64 rng(15);
    const auto net = random_net(16, Link::Logit, rng);
    Hyperparams hp;
    hp.p = 2;
    auto cfg = short_config(200, 50, 10, 5);
    cfg.init_jitter_sd = 0.5;
    const auto one = run_chains(net, hp, cfg, Link::Logit, 1);
    CHECK(one.at(0).alpha == run_chain(net, hp, cfg, Link::Logit).alpha);

    const auto serial = run_chains(net, hp, cfg, Link::Logit, 4, 1);
    const auto parallel = run_chains(net, hp, cfg, Link::Logit, 4, 3);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(serial[k].alpha == parallel[k].alpha);
        CHECK(serial[k].z == parallel[k].z);
        CHECK(serial[k].seed == 5 + k);
        auto single = cfg;
        single.seed = 5 + k;
        CHECK(serial[k].log_lik == run_chain(net, hp, single, Link::Logit).log_lik);
    }
    CHECK_FALSE(serial[0].alpha == serial[1].alpha);
    CHECK_THROWS_AS(run_chains(net, hp, cfg, Link::Logit, 0), std::invalid_argument);
}

TEST_CASE("a non-finite state aborts with a state dump") {
    std::mt19937_64 rng(16);
    const auto net = random_net(10, Link::Logit, rng);
    Hyperparams hp;
    hp.p = 2;
    Sampler s(net, hp, short_config(10, 0, 1), Link::Logit, make_state(10, {1.0, 1.0}, 0.0));
    auto bad = s.state();
    bad.alpha = std::nan("");
    s.set_state(bad);
    Rng r(17);
    try {
        s.step(r);
        FAIL("expected SamplerDiverged");
    } catch (const SamplerDiverged& e) {
        CHECK(e.iteration() == 1);
        CHECK(e.state_dump().find("alpha") != std::string::npos);
    }
}

TEST_CASE("cached log-likelihood tracks a full recomputation") {
    std::mt19937_64 rng(18);
    for (Link link : {Link::Logit, Link::Log}) {
        const auto net = random_net(14, link, rng);
        Hyperparams hp;
        hp.p = 3;
        for (ZUpdate mode : {ZUpdate::WholeMatrix, ZUpdate::PerNode}) {
            auto cfg = short_config(10, 0, 1);
            cfg.z_update = mode;
            cfg.step_z = 0.05;
            Rng r(19);
            auto init = initialize_chain(net, hp, link, InitOptions{}, r);
            Sampler s(net, hp, cfg, link, init.state);
            for (int t = 0; t < 300; ++t) {
                s.step(r);
                const double fresh = log_likelihood(net, s.state().z, {s.state().alpha, link});
                CHECK_THAT(s.state().log_lik, WithinAbs(fresh, 1e-8 * std::max(1.0, std::abs(fresh))));
            }
            CHECK(s.z_accepts() > 0);
            CHECK(s.alpha_accepts() > 0);
        }
    }
}
