#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lspm/model.hpp"
#include "lspm/network.hpp"
#include "lspm/ppc.hpp"
#include "lspm/shrinkage.hpp"

namespace lspm {

struct SimulatedNetwork {
    Network net;
    LatentConfig z;
    std::vector<double> delta;
    std::vector<double> omega;
    double alpha = 0.0;
    Link link = Link::Logit;
};

/// Draws latent positions z_il ~ N(0, 1/omega_l) with omega the cumulative
/// products of `delta`, then edges from the model. Undirected networks use
/// one draw per pair i < j.
template <class R>
SimulatedNetwork simulate_network(std::size_t n, const std::vector<double>& delta, double alpha, Link link, R& rng,
                                  bool directed = false) {
    if (n < 2) throw std::invalid_argument("simulate_network: need at least two nodes");
    if (!std::isfinite(alpha)) throw std::invalid_argument("simulate_network: alpha must be finite");
    const ShrinkageState shrink(delta, 1.0);  // validates delta_1 > 0, delta_h >= 1
    SimulatedNetwork out;
    out.delta = shrink.delta();
    out.omega = shrink.omega();
    out.alpha = alpha;
    out.link = link;
    const std::size_t p = delta.size();
    out.z = LatentConfig(n, p);
    std::normal_distribution<double> norm(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < p; ++l) out.z(i, l) = norm(rng) / std::sqrt(out.omega[l]);
    out.net = replicate_network(out.z, alpha, link, directed, rng);
    return out;
}

struct MeanVariance {
    double mean = 0.0;
    double variance = 0.0;
};

/// Sample mean and (n - 1)-denominator variance of the off-diagonal counts.
inline MeanVariance overdispersion_stats(const Network& net) {
    if (net.kind() != EdgeKind::Count) throw std::invalid_argument("overdispersion_stats requires a count network");
    const std::size_t n = net.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) sum += static_cast<double>(net(i, j));
    const double m = static_cast<double>(n) * static_cast<double>(n - 1);
    MeanVariance out;
    out.mean = sum / m;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) {
                const double d = static_cast<double>(net(i, j)) - out.mean;
                ss += d * d;
            }
    out.variance = m > 1 ? ss / (m - 1.0) : 0.0;
    return out;
}

/// One cell of a simulation-study grid.
struct StudySetting {
    std::string label;
    std::size_t n = 0;
    std::vector<double> delta;
    double alpha = 0.0;
    Link link = Link::Logit;
    std::vector<int> fit_p;
    long total_iters = 500000;
    long burn_in = 50000;
    long thin = 2000;
    int replicates = 30;
};

struct StudyPreset {
    int id = 0;
    std::string variant;
    std::vector<StudySetting> settings;
};

/// Sample size used for the overdispersion study, whose network size is not
/// fixed by the design.
inline constexpr std::size_t kStudy4Nodes = 100;

/// Parameter grids of the four simulation studies.
///
/// Variants: study 1 takes "" or "binary" (all sizes, binary), "count" (all
/// sizes, counts) or "n20", "n50", "n100", "n200"; study 2 takes "" /
/// "binary" or "count"; study 3 takes "" or "alpha<value>" for one grid
/// point; study 4 takes "" or one of "low", "moderate", "high".
inline StudyPreset study_preset(int id, const std::string& variant = "") {
    StudyPreset out{id, variant, {}};
    auto unknown = [&] { return std::invalid_argument("study " + std::to_string(id) + ": unknown variant '" + variant + "'"); };
    switch (id) {
        case 1: {
            Link link = Link::Logit;
            std::string only;
            if (variant == "count") link = Link::Log;
            else if (!variant.empty() && variant != "binary") only = variant;
            for (std::size_t n : {20u, 50u, 100u, 200u}) {
                StudySetting s;
                s.label = "n" + std::to_string(n) + (link == Link::Logit ? "-binary" : "-count");
                s.n = n;
                s.delta = {0.5, 1.1};
                s.alpha = 3.0;
                s.link = link;
                s.fit_p = {5};
                s.burn_in = link == Link::Log ? 350000 : (n <= 50 ? 50000 : 200000);
                if (only.empty() || only == "n" + std::to_string(n)) out.settings.push_back(s);
            }
            if (out.settings.empty()) throw unknown();
            break;
        }
        case 2: {
            if (!variant.empty() && variant != "binary" && variant != "count") throw unknown();
            StudySetting s;
            s.link = variant == "count" ? Link::Log : Link::Logit;
            s.label = s.link == Link::Logit ? "binary" : "count";
            s.n = 100;
            s.delta = {0.5, 1.1, 1.05, 1.15};
            s.alpha = 6.0;
            s.fit_p = {3, 4, 8};
            s.burn_in = s.link == Link::Logit ? 50000 : 350000;
            out.settings.push_back(s);
            break;
        }
        case 3: {
            for (double a : {0.0, 1.0, 5.0, 10.0, 20.0, 30.0}) {
                StudySetting s;
                s.label = "alpha" + std::to_string(static_cast<int>(a));
                s.n = 50;
                s.delta = {0.5, 1.1, 1.05};
                s.alpha = a;
                s.fit_p = {5};
                s.burn_in = 50000;
                s.thin = 3500;
                if (variant.empty() || variant == s.label) out.settings.push_back(s);
            }
            if (out.settings.empty()) throw unknown();
            break;
        }
        case 4: {
            const std::vector<std::pair<std::string, std::pair<double, std::vector<double>>>> grid = {
                {"low", {0.5, {1.5, 1.5}}}, {"moderate", {1.5, {0.5, 1.5}}}, {"high", {5.0, {0.1, 1.5}}}};
            for (const auto& [label, params] : grid) {
                StudySetting s;
                s.label = label;
                s.n = kStudy4Nodes;
                s.alpha = params.first;
                s.delta = params.second;
                s.link = Link::Log;
                s.fit_p = {5};
                s.burn_in = 350000;
                if (variant.empty() || variant == label) out.settings.push_back(s);
            }
            if (out.settings.empty()) throw unknown();
            break;
        }
        default:
            throw std::invalid_argument("unknown study id " + std::to_string(id) + " (expected 1-4)");
    }
    return out;
}

}  // namespace lspm
