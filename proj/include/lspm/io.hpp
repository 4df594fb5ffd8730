#pragma once

// CSV trace files and JSON records for configurations, truths, summaries and
// predictive-check reports.

#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "lspm/linalg.hpp"
#include "lspm/model.hpp"
#include "lspm/network.hpp"
#include "lspm/postprocess.hpp"
#include "lspm/ppc.hpp"
#include "lspm/sampler.hpp"
#include "lspm/shrinkage.hpp"
#include "lspm/simulate.hpp"

namespace lspm {

using json = nlohmann::ordered_json;

/// Text that round-trips the double exactly.
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline Link parse_link(const std::string& s) {
    if (s == "logit" || s == "binary") return Link::Logit;
    if (s == "poisson" || s == "log" || s == "count") return Link::Log;
    throw std::invalid_argument("unknown model '" + s + "' (expected logit or poisson)");
}

inline ZUpdate parse_z_update(const std::string& s) {
    if (s == "whole") return ZUpdate::WholeMatrix;
    if (s == "pernode") return ZUpdate::PerNode;
    throw std::invalid_argument("unknown z-update mode '" + s + "' (expected whole or pernode)");
}

inline FileFormat parse_format(const std::string& s) {
    if (s == "auto") return FileFormat::Auto;
    if (s == "edgelist") return FileFormat::EdgeList;
    if (s == "dense") return FileFormat::Dense;
    throw std::invalid_argument("unknown network format '" + s + "' (expected auto, edgelist or dense)");
}

inline std::string to_string(FileFormat f) {
    switch (f) {
        case FileFormat::Auto: return "auto";
        case FileFormat::EdgeList: return "edgelist";
        case FileFormat::Dense: return "dense";
    }
    return "auto";
}

// ---------------------------------------------------------------- traces

inline void write_trace_csv(std::ostream& out, const ChainTrace& t) {
    const std::size_t p = t.size() ? t.delta.front().size() : 0;
    out << "iter,alpha";
    for (std::size_t h = 1; h <= p; ++h) out << ",delta_" << h;
    for (std::size_t h = 1; h <= p; ++h) out << ",omega_" << h;
    out << ",loglik\n";
    for (std::size_t k = 0; k < t.size(); ++k) {
        out << t.iters[k] << ',' << fmt_double(t.alpha[k]);
        for (double d : t.delta[k]) out << ',' << fmt_double(d);
        for (double w : t.omega[k]) out << ',' << fmt_double(w);
        out << ',' << fmt_double(t.log_lik[k]) << '\n';
    }
}

inline void write_z_draws_csv(std::ostream& out, const ChainTrace& t) {
    const std::size_t p = t.z.empty() ? 0 : t.z.front().cols();
    out << "iter,node";
    for (std::size_t l = 1; l <= p; ++l) out << ",z_" << l;
    out << '\n';
    for (std::size_t k = 0; k < t.z.size(); ++k)
        for (std::size_t i = 0; i < t.z[k].rows(); ++i) {
            out << t.iters[k] << ',' << i + 1;
            for (std::size_t l = 0; l < p; ++l) out << ',' << fmt_double(t.z[k](i, l));
            out << '\n';
        }
}

inline void write_config_csv(std::ostream& out, const LatentConfig& z) {
    out << "node";
    for (std::size_t l = 1; l <= z.cols(); ++l) out << ",z_" << l;
    out << '\n';
    for (std::size_t i = 0; i < z.rows(); ++i) {
        out << i + 1;
        for (std::size_t l = 0; l < z.cols(); ++l) out << ',' << fmt_double(z(i, l));
        out << '\n';
    }
}

namespace detail {

inline std::vector<std::vector<double>> read_numeric_csv(std::istream& in, std::vector<std::string>* header) {
    std::string line;
    std::vector<std::vector<double>> rows;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (first) {
            first = false;
            if (header) *header = cells;
            continue;
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(c, &used);
            } catch (const std::logic_error&) {
                used = 0;
            }
            if (used == 0 || used != c.size()) throw std::runtime_error("malformed number '" + c + "'");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return in;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

}  // namespace detail

/// Reads a trace CSV written by write_trace_csv (Z draws are not included).
inline ChainTrace read_trace_csv(std::istream& in) {
    std::vector<std::string> header;
    const auto rows = detail::read_numeric_csv(in, &header);
    if (header.size() < 4 || (header.size() - 3) % 2 != 0) throw std::runtime_error("trace CSV: bad header");
    const std::size_t p = (header.size() - 3) / 2;
    ChainTrace t;
    for (const auto& r : rows) {
        if (r.size() != header.size()) throw std::runtime_error("trace CSV: ragged row");
        t.iters.push_back(static_cast<long>(r[0]));
        t.alpha.push_back(r[1]);
        t.delta.emplace_back(r.begin() + 2, r.begin() + 2 + static_cast<long>(p));
        t.omega.emplace_back(r.begin() + 2 + static_cast<long>(p), r.begin() + 2 + 2 * static_cast<long>(p));
        t.log_lik.push_back(r.back());
    }
    return t;
}

/// Reads Z draws (iter,node,z_1..z_p) grouped by iteration.
inline std::vector<LatentConfig> read_z_draws_csv(std::istream& in, std::size_t n) {
    std::vector<std::string> header;
    const auto rows = detail::read_numeric_csv(in, &header);
    if (header.size() < 3) throw std::runtime_error("Z draws CSV: bad header");
    const std::size_t p = header.size() - 2;
    if (n == 0 || rows.size() % n != 0) throw std::runtime_error("Z draws CSV: row count is not a multiple of n");
    std::vector<LatentConfig> out(rows.size() / n, LatentConfig(n, p));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto node = static_cast<std::size_t>(rows[r][1]) - 1;
        if (node != r % n) throw std::runtime_error("Z draws CSV: unexpected node order");
        for (std::size_t l = 0; l < p; ++l) out[r / n](node, l) = rows[r][2 + l];
    }
    return out;
}

inline LatentConfig read_config_csv(std::istream& in) {
    std::vector<std::string> header;
    const auto rows = detail::read_numeric_csv(in, &header);
    if (header.size() < 2) throw std::runtime_error("configuration CSV: bad header");
    LatentConfig z(rows.size(), header.size() - 1);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t l = 0; l + 1 < header.size(); ++l) z(i, l) = rows[i].at(l + 1);
    return z;
}

// ---------------------------------------------------------------- JSON

inline json matrix_to_json(const Matrix& m) {
    json a = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        a.push_back(std::move(row));
    }
    return a;
}

inline Matrix matrix_from_json(const json& a) {
    const std::size_t rows = a.size();
    const std::size_t cols = rows ? a.at(0).size() : 0;
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (a.at(i).size() != cols) throw std::runtime_error("ragged matrix in JSON");
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = a.at(i).at(j).get<double>();
    }
    return m;
}

inline json to_json(const Hyperparams& hp) {
    return json{{"a1", hp.a1},           {"b1", hp.b1}, {"a2", hp.a2},
                {"b2", hp.b2},           {"c2", hp.c2}, {"mu_alpha", hp.mu_alpha},
                {"sigma2_alpha", hp.sigma2_alpha}, {"p", hp.p}};
}

/// Overwrites the fields present in `j`.
inline void merge_from_json(const json& j, Hyperparams& hp) {
    if (j.contains("a1")) hp.a1 = j["a1"].get<double>();
    if (j.contains("b1")) hp.b1 = j["b1"].get<double>();
    if (j.contains("a2")) hp.a2 = j["a2"].get<double>();
    if (j.contains("b2")) hp.b2 = j["b2"].get<double>();
    if (j.contains("c2")) hp.c2 = j["c2"].get<double>();
    if (j.contains("mu_alpha")) hp.mu_alpha = j["mu_alpha"].get<double>();
    if (j.contains("sigma2_alpha")) hp.sigma2_alpha = j["sigma2_alpha"].get<double>();
    if (j.contains("p")) hp.p = j["p"].get<int>();
}

inline json to_json(const SamplerConfig& c) {
    return json{{"iters", c.total_iters},
                {"burnin", c.burn_in},
                {"thin", c.thin},
                {"step_z", c.step_z},
                {"step_alpha", c.step_alpha},
                {"z_update", to_string(c.z_update)},
                {"seed", c.seed},
                {"alpha_inflation", c.alpha_inflation},
                {"init_jitter_sd", c.init_jitter_sd}};
}

inline void merge_from_json(const json& j, SamplerConfig& c) {
    if (j.contains("iters")) c.total_iters = j["iters"].get<long>();
    if (j.contains("burnin")) c.burn_in = j["burnin"].get<long>();
    if (j.contains("thin")) c.thin = j["thin"].get<long>();
    if (j.contains("step_z")) c.step_z = j["step_z"].get<double>();
    if (j.contains("step_alpha")) c.step_alpha = j["step_alpha"].get<double>();
    if (j.contains("z_update")) c.z_update = parse_z_update(j["z_update"].get<std::string>());
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("alpha_inflation")) c.alpha_inflation = j["alpha_inflation"].get<double>();
    if (j.contains("init_jitter_sd")) c.init_jitter_sd = j["init_jitter_sd"].get<double>();
}

inline json to_json(const ParamSummary& s) {
    return json{{"mean", s.mean}, {"median", s.median}, {"q025", s.lower}, {"q975", s.upper}};
}

inline json to_json(const Band& b) { return json{{"mean", b.mean}, {"q025", b.lower}, {"q975", b.upper}}; }

/// Truth sidecar for a simulated network.
inline json truth_to_json(const SimulatedNetwork& sim, std::uint64_t seed, std::uint64_t stream) {
    return json{{"n", sim.net.size()},
                {"p_star", sim.delta.size()},
                {"model", to_string(sim.link)},
                {"directed", sim.net.directed()},
                {"alpha", sim.alpha},
                {"delta", sim.delta},
                {"omega", sim.omega},
                {"seed", seed},
                {"stream", stream},
                {"density", density(sim.net)},
                {"Z", matrix_to_json(sim.z)}};
}

struct Truth {
    double alpha = 0.0;
    std::vector<double> delta;
    std::vector<double> omega;
    LatentConfig z;
};

inline Truth truth_from_json(const json& j) {
    Truth t;
    t.alpha = j.at("alpha").get<double>();
    t.delta = j.at("delta").get<std::vector<double>>();
    t.omega = j.at("omega").get<std::vector<double>>();
    t.z = matrix_from_json(j.at("Z"));
    return t;
}

inline json read_json_file(const std::string& path) {
    auto in = detail::open_in(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

inline void write_json_file(const std::string& path, const json& j) {
    auto out = detail::open_out(path);
    out << j.dump(2) << '\n';
}

inline json ppc_to_json(const PpcReport& r) {
    json j{{"model", to_string(r.link)}, {"replicates", r.n_replicates}, {"seed", r.seed}};
    if (r.link == Link::Logit) {
        j["observed"] = {{"density", r.observed_density}, {"transitivity", r.observed_transitivity}};
        j["aggregate"] = {{"density", to_json(r.density)},
                          {"transitivity", to_json(r.transitivity)},
                          {"accuracy", to_json(r.accuracy)},
                          {"f1", to_json(r.f1)},
                          {"hamming", to_json(r.hamming)}};
        j["observed_density_in_band"] = r.n_replicates > 0 && r.density.contains(r.observed_density);
    } else {
        j["max_count"] = r.max_count;
        j["observed"] = {{"count_frequencies", r.observed_count_freq}};
        json freq = json::array();
        for (const auto& b : r.count_freq) freq.push_back(to_json(b));
        j["aggregate"] = {{"mean_absolute_difference", to_json(r.mad)}, {"count_frequencies", freq}};
        j["pseudo_r2"] = r.pseudo_r2 ? json(*r.pseudo_r2) : json(nullptr);
    }
    if (!r.distance_ratios.empty()) j["distance_ratio"] = to_json(r.distance_ratio);
    return j;
}

inline void write_ppc_metrics_csv(std::ostream& out, const PpcReport& r) {
    if (r.link == Link::Logit) {
        out << "replicate,chain,draw,density,transitivity,accuracy,f1,hamming\n";
        for (std::size_t k = 0; k < r.replicates.size(); ++k) {
            const auto& x = r.replicates[k];
            out << k + 1 << ',' << x.chain << ',' << x.draw << ',' << fmt_double(x.density) << ','
                << fmt_double(x.transitivity) << ',' << fmt_double(x.accuracy) << ',' << fmt_double(x.f1) << ','
                << fmt_double(x.hamming) << '\n';
        }
        return;
    }
    out << "replicate,chain,draw,mad";
    for (int c = 0; c <= r.max_count; ++c) out << ",freq_" << c;
    out << ",freq_over\n";
    for (std::size_t k = 0; k < r.replicates.size(); ++k) {
        const auto& x = r.replicates[k];
        out << k + 1 << ',' << x.chain << ',' << x.draw << ',' << fmt_double(x.mad);
        for (long f : x.count_freq) out << ',' << f;
        out << '\n';
    }
}

}  // namespace lspm
