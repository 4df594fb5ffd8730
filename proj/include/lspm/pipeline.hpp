#pragma once

// End-to-end steps shared by the command-line tool: fitting into a run
// directory, reading it back, diagnostics, predictive checks and the
// simulation-study runner.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "lspm/io.hpp"
#include "lspm/log.hpp"
#include "lspm/postprocess.hpp"
#include "lspm/ppc.hpp"
#include "lspm/sampler.hpp"
#include "lspm/simulate.hpp"

namespace lspm {

inline constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;

/// Everything that determines a fit's output.
struct FitConfig {
    std::string input;
    LoadOptions load;
    Link link = Link::Logit;
    Hyperparams hp;
    SamplerConfig sampler;
    int chains = 1;
};

inline json to_json(const FitConfig& c) {
    return json{{"input", c.input},
                {"model", to_string(c.link)},
                {"directed", c.load.directed},
                {"format", to_string(c.load.format)},
                {"index_base", c.load.index_base},
                {"nodes", c.load.nodes},
                {"chains", c.chains},
                {"prior", to_json(c.hp)},
                {"sampler", to_json(c.sampler)}};
}

/// Overwrites the fields present in `j`. Accepts either a bare config object
/// or a run manifest holding one under "config".
inline void merge_from_json(const json& in, FitConfig& c) {
    const json& j = in.contains("config") ? in["config"] : in;
    if (j.contains("input")) c.input = j["input"].get<std::string>();
    if (j.contains("model")) c.link = parse_link(j["model"].get<std::string>());
    c.load.kind = edge_kind_for(c.link);
    if (j.contains("directed")) c.load.directed = j["directed"].get<bool>();
    if (j.contains("format")) c.load.format = parse_format(j["format"].get<std::string>());
    if (j.contains("index_base")) c.load.index_base = j["index_base"].get<int>();
    if (j.contains("nodes")) c.load.nodes = j["nodes"].get<std::size_t>();
    if (j.contains("chains")) c.chains = j["chains"].get<int>();
    if (j.contains("prior")) merge_from_json(j["prior"], c.hp);
    if (j.contains("sampler")) merge_from_json(j["sampler"], c.sampler);
}

/// FNV-1a digest of a file's bytes, as 16 hex digits.
inline std::string file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize k = 0; k < in.gcount(); ++k) {
            h ^= static_cast<unsigned char>(buf[k]);
            h *= 0x100000001b3ULL;
        }
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

inline Network load_input(const FitConfig& c) {
    LoadOptions opt = c.load;
    opt.kind = edge_kind_for(c.link);
    return load_network(c.input, opt);
}

inline std::string chain_file(const fs::path& dir, const std::string& stem, std::size_t k) {
    return (dir / (stem + "_" + std::to_string(k + 1) + ".csv")).string();
}

/// Runs every chain of the fit and writes traces, Z draws, references and
/// manifest.json into `out_dir`.
inline std::vector<ChainTrace> fit_to_dir(const FitConfig& cfg, const Network& net, const fs::path& out_dir,
                                          int threads = 1) {
    cfg.hp.validate(net.size());
    cfg.sampler.validate();
    fs::create_directories(out_dir);
    const auto start = std::chrono::steady_clock::now();
    auto traces = run_chains(net, cfg.hp, cfg.sampler, cfg.link, cfg.chains, threads);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    json chains = json::array();
    for (std::size_t k = 0; k < traces.size(); ++k) {
        const auto& t = traces[k];
        {
            auto out = detail::open_out(chain_file(out_dir, "chain", k));
            write_trace_csv(out, t);
        }
        {
            auto out = detail::open_out(chain_file(out_dir, "z_draws", k));
            write_z_draws_csv(out, t);
        }
        {
            auto out = detail::open_out(chain_file(out_dir, "reference", k));
            write_config_csv(out, t.reference);
        }
        chains.push_back(json{{"index", k + 1},
                              {"seed", t.seed},
                              {"draws", t.size()},
                              {"z_acceptance", t.z_acceptance()},
                              {"alpha_acceptance", t.alpha_acceptance()},
                              {"reference_loglik", t.reference_log_lik},
                              {"eta_clips", t.eta_clips},
                              {"init_regression",
                               {{"alpha", t.regression.alpha},
                                {"beta", t.regression.beta},
                                {"iterations", t.regression.iterations},
                                {"fallback", t.regression.fallback},
                                {"message", t.regression.message}}}});
    }
    json manifest{{"tool", "lspm"},
                  {"version", kVersion},
                  {"command", "fit"},
                  {"config", to_json(cfg)},
                  {"n", net.size()},
                  {"input_checksum", file_checksum(cfg.input)},
                  {"threads", threads},
                  {"chains", chains},
                  {"timings", {{"wall_seconds", wall}}}};
    write_json_file((out_dir / "manifest.json").string(), manifest);
    return traces;
}

struct FitRun {
    FitConfig config;
    json manifest;
    std::size_t n = 0;
    std::vector<ChainTrace> traces;
};

/// Reads a directory written by fit_to_dir.
inline FitRun load_fit_dir(const fs::path& dir) {
    FitRun run;
    run.manifest = read_json_file((dir / "manifest.json").string());
    merge_from_json(run.manifest, run.config);
    run.n = run.manifest.at("n").get<std::size_t>();
    const auto& chains = run.manifest.at("chains");
    for (std::size_t k = 0; k < chains.size(); ++k) {
        auto in = detail::open_in(chain_file(dir, "chain", k));
        ChainTrace t = read_trace_csv(in);
        auto zin = detail::open_in(chain_file(dir, "z_draws", k));
        t.z = read_z_draws_csv(zin, run.n);
        if (t.z.size() != t.size()) throw std::runtime_error("chain " + std::to_string(k + 1) + ": Z draw count");
        auto rin = detail::open_in(chain_file(dir, "reference", k));
        t.reference = read_config_csv(rin);
        const auto& c = chains[k];
        t.reference_log_lik = c.at("reference_loglik").get<double>();
        t.seed = c.at("seed").get<std::uint64_t>();
        run.traces.push_back(std::move(t));
    }
    if (run.traces.empty()) throw std::runtime_error("fit directory holds no chains");
    return run;
}

struct DiagnoseOptions {
    double jump_factor = 2.0;
    double width_factor = 2.0;
    std::size_t max_lag = 20;
    const Truth* truth = nullptr;
};

struct Diagnosis {
    PosteriorSummary summary;
    EffectiveDimension effective;
    std::vector<ChainTrace> aligned;
    json report;
};

/// Aligns the chains to a common reference and summarizes them.
inline Diagnosis diagnose(const std::vector<ChainTrace>& traces, const DiagnoseOptions& opt) {
    Diagnosis d;
    d.aligned = align_chains(traces);
    d.summary = posterior_summary(d.aligned);
    const std::size_t p = d.summary.delta.size();
    json& r = d.report;
    r["draws"] = d.summary.draws;
    r["chains"] = traces.size();
    r["alpha"] = to_json(d.summary.alpha);
    json delta = json::array(), var = json::array();
    for (const auto& s : d.summary.delta) delta.push_back(to_json(s));
    for (const auto& s : d.summary.variance) var.push_back(to_json(s));
    r["delta"] = delta;
    r["variance"] = var;
    if (p >= 2) {
        d.effective = effective_dimensions(d.summary.delta, opt.jump_factor, opt.width_factor);
        r["effective_dimension"] = {{"dims", d.effective.dims},
                                    {"at_truncation", d.effective.at_truncation},
                                    {"flagged_dimension", d.effective.flagged},
                                    {"jump_factor", opt.jump_factor},
                                    {"width_factor", opt.width_factor},
                                    {"report", d.effective.report}};
    }
    bool equal = traces.size() >= 2;
    for (const auto& t : traces) equal = equal && t.size() == traces.front().size();
    if (equal && traces.front().size() >= 10) {
        json gr;
        auto safe = [&](const TraceSelector& sel) -> json {
            try {
                return gelman_rubin(traces, sel);
            } catch (const std::invalid_argument&) {
                return nullptr;
            }
        };
        gr["alpha"] = safe(select_alpha());
        for (std::size_t h = 0; h < p; ++h) gr["delta_" + std::to_string(h + 1)] = safe(select_delta(h));
        r["gelman_rubin"] = gr;
    }
    json acc = json::array();
    json acf = json::array();
    for (const auto& t : traces) {
        acc.push_back({{"z", t.z_acceptance()}, {"alpha", t.alpha_acceptance()}});
        try {
            acf.push_back(autocorrelation(t.alpha, std::min(opt.max_lag, t.size() ? t.size() - 1 : 0)));
        } catch (const std::invalid_argument&) {
            acf.push_back(nullptr);
        }
    }
    r["acceptance"] = acc;
    r["alpha_autocorrelation"] = acf;
    if (!d.summary.z_mean.empty()) r["z_mean"] = matrix_to_json(d.summary.z_mean);
    if (opt.truth) {
        const auto& tz = opt.truth->z;
        json t{{"alpha", opt.truth->alpha}, {"delta", opt.truth->delta}};
        if (!d.summary.z_mean.empty() && tz.rows() == d.summary.z_mean.rows()) {
            const auto lead = resize_columns(d.summary.z_mean, std::min(tz.cols(), d.summary.z_mean.cols()));
            t["procrustes_correlation"] = procrustes_correlation(lead, tz);
            t["procrustes_correlation_all_dims"] = procrustes_correlation(d.summary.z_mean, tz);
        }
        r["truth"] = t;
    }
    return d;
}

inline void write_aligned_z_csv(std::ostream& out, const std::vector<ChainTrace>& aligned) {
    const std::size_t p = aligned.empty() || aligned.front().z.empty() ? 0 : aligned.front().z.front().cols();
    out << "chain,iter,node";
    for (std::size_t l = 1; l <= p; ++l) out << ",z_" << l;
    out << '\n';
    for (std::size_t c = 0; c < aligned.size(); ++c)
        for (std::size_t k = 0; k < aligned[c].z.size(); ++k)
            for (std::size_t i = 0; i < aligned[c].z[k].rows(); ++i) {
                out << c + 1 << ',' << aligned[c].iters[k] << ',' << i + 1;
                for (std::size_t l = 0; l < p; ++l) out << ',' << fmt_double(aligned[c].z[k](i, l));
                out << '\n';
            }
}

// ------------------------------------------------------------ study runner

enum class StudyScale { Desk, Paper };

struct StudyOptions {
    int id = 1;
    std::string variant;
    StudyScale scale = StudyScale::Desk;
    std::uint64_t seed = 1;
    int threads = 1;
    double step_z = 0.03;
    double step_alpha = 1.0;
    ZUpdate z_update = ZUpdate::PerNode;
    int networks = 0;        // 0: scale default
    long iters = 0;          // 0: scale default
    long burn_in = -1;       // negative: scale default
    long thin = 0;           // 0: scale default
    std::size_t ppc_replicates = 0;  // 0: scale default
};

/// Desk-scale defaults: 50,000 iterations, 10,000 burn-in, thin 50, five
/// simulated networks per setting and ten predictive replicates per fit.
struct ScaleDefaults {
    long iters, burn_in, thin;
    int networks;
    std::size_t ppc_replicates;
};

inline ScaleDefaults scale_defaults(StudyScale s, const StudySetting& setting) {
    if (s == StudyScale::Desk) return {50000, 10000, 50, 5, 10};
    return {setting.total_iters, setting.burn_in, setting.thin, setting.replicates, 30};
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct StudyRow {
    std::string setting;
    int network = 0;
    std::size_t n = 0;
    Link link = Link::Logit;
    int fit_p = 0;
    double alpha_true = 0.0;
    double observed_density = 0.0;
    double alpha_mean = 0.0;
    std::vector<double> delta_mean;
    std::vector<double> variance_mean;
    int effective_dims = 0;
    bool at_truncation = false;
    double procrustes = 0.0;
    double z_acceptance = 0.0;
    double alpha_acceptance = 0.0;
    double ppc_stat = 0.0;  // replicate-band coverage of the observed density (binary) or pseudo R^2 (count)
};

/// Simulates, fits, diagnoses and checks every cell of a study grid.
/// Rows come back in grid order regardless of the thread count.
inline std::vector<StudyRow> run_study(const StudyOptions& opt) {
    const auto preset = study_preset(opt.id, opt.variant);
    struct Job {
        std::size_t setting;
        int network;
        int fit_p;
    };
    std::vector<Job> jobs;
    for (std::size_t s = 0; s < preset.settings.size(); ++s) {
        const auto& st = preset.settings[s];
        const auto d = scale_defaults(opt.scale, st);
        const int nets = opt.networks > 0 ? opt.networks : d.networks;
        for (int r = 0; r < nets; ++r)
            for (int p : st.fit_p) jobs.push_back({s, r, p});
    }
    std::vector<StudyRow> rows(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
            try {
                const auto& job = jobs[j];
                const auto& st = preset.settings[job.setting];
                const auto d = scale_defaults(opt.scale, st);
                const std::uint64_t stream = job.setting * 100000 + static_cast<std::uint64_t>(job.network);
                Rng sim_rng = stream_rng(opt.seed, stream);
                const auto sim = simulate_network(st.n, st.delta, st.alpha, st.link, sim_rng);

                Hyperparams hp;
                hp.p = job.fit_p;
                SamplerConfig sc;
                sc.total_iters = opt.iters > 0 ? opt.iters : d.iters;
                sc.burn_in = opt.burn_in >= 0 ? opt.burn_in : d.burn_in;
                sc.thin = opt.thin > 0 ? opt.thin : d.thin;
                sc.step_z = opt.step_z;
                sc.step_alpha = opt.step_alpha;
                sc.z_update = opt.z_update;
                sc.seed = mix_seed(opt.seed, stream * 16 + static_cast<std::uint64_t>(job.fit_p));
                const auto trace = run_chain(sim.net, hp, sc, st.link);

                Truth truth{sim.alpha, sim.delta, sim.omega, sim.z};
                DiagnoseOptions dopt;
                dopt.truth = &truth;
                const auto diag = diagnose({trace}, dopt);

                PpcOptions popt;
                popt.n_replicates = opt.ppc_replicates > 0 ? opt.ppc_replicates : d.ppc_replicates;
                popt.seed = sc.seed;
                const auto ppc = run_ppc(diag.aligned, sim.net, st.link, popt);

                StudyRow& row = rows[j];
                row.setting = st.label;
                row.network = job.network + 1;
                row.n = st.n;
                row.link = st.link;
                row.fit_p = job.fit_p;
                row.alpha_true = st.alpha;
                row.observed_density = density(sim.net);
                row.alpha_mean = diag.summary.alpha.mean;
                for (const auto& s : diag.summary.delta) row.delta_mean.push_back(s.mean);
                for (const auto& s : diag.summary.variance) row.variance_mean.push_back(s.mean);
                row.effective_dims = diag.effective.dims;
                row.at_truncation = diag.effective.at_truncation;
                row.procrustes = diag.report["truth"].value("procrustes_correlation", 0.0);
                row.z_acceptance = trace.z_acceptance();
                row.alpha_acceptance = trace.alpha_acceptance();
                if (st.link == Link::Logit)
                    row.ppc_stat = ppc.density.contains(ppc.observed_density) ? 1.0 : 0.0;
                else
                    row.ppc_stat = ppc.pseudo_r2.value_or(0.0);
                log::info("study " + std::to_string(opt.id) + " " + st.label + " network " +
                          std::to_string(row.network) + " p=" + std::to_string(job.fit_p) + " done");
            } catch (...) {
                errors[j] = std::current_exception();
            }
        }
    };
    const int workers = std::max(1, std::min<int>(opt.threads, static_cast<int>(jobs.size())));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return rows;
}

inline void write_study_csv(std::ostream& out, const std::vector<StudyRow>& rows) {
    std::size_t pmax = 0;
    for (const auto& r : rows) pmax = std::max(pmax, r.delta_mean.size());
    out << "setting,network,n,model,fit_p,alpha_true,observed_density,alpha_mean";
    for (std::size_t h = 1; h <= pmax; ++h) out << ",delta_" << h << "_mean";
    for (std::size_t h = 1; h <= pmax; ++h) out << ",variance_" << h << "_mean";
    out << ",effective_dims,at_truncation,procrustes_correlation,z_acceptance,alpha_acceptance,ppc_stat\n";
    for (const auto& r : rows) {
        out << r.setting << ',' << r.network << ',' << r.n << ',' << to_string(r.link) << ',' << r.fit_p << ','
            << fmt_double(r.alpha_true) << ',' << fmt_double(r.observed_density) << ',' << fmt_double(r.alpha_mean);
        for (std::size_t h = 0; h < pmax; ++h)
            out << ',' << (h < r.delta_mean.size() ? fmt_double(r.delta_mean[h]) : "");
        for (std::size_t h = 0; h < pmax; ++h)
            out << ',' << (h < r.variance_mean.size() ? fmt_double(r.variance_mean[h]) : "");
        out << ',' << r.effective_dims << ',' << (r.at_truncation ? 1 : 0) << ',' << fmt_double(r.procrustes) << ','
            << fmt_double(r.z_acceptance) << ',' << fmt_double(r.alpha_acceptance) << ',' << fmt_double(r.ppc_stat)
            << '\n';
    }
}

}  // namespace lspm
