// lspm: simulate networks, fit latent shrinkage position models, and
// summarize or check the fits.

#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "lspm/lspm.hpp"

namespace {

using namespace lspm;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    int study = 0;
    std::string variant;
    std::uint64_t seed = 1;
    std::string out_dir;
    int replicates = 0;
    std::size_t n = 0;
    std::vector<double> delta;
    double alpha = 0.0;
    std::string model = "logit";
    bool directed = false;
};

int run_simulate(const SimulateArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir(a.out_dir);
    fs::create_directories(dir);
    json files = json::array();
    auto emit = [&](const std::string& stem, const SimulatedNetwork& sim, std::uint64_t stream) {
        const auto net_path = dir / (stem + ".csv");
        const auto truth_path = dir / (stem + ".truth.json");
        save_network(net_path.string(), sim.net, FileFormat::Dense);
        write_json_file(truth_path.string(), truth_to_json(sim, a.seed, stream));
        files.push_back({{"network", net_path.filename().string()}, {"truth", truth_path.filename().string()}});
    };

    json settings = json::array();
    if (a.study > 0) {
        const auto preset = study_preset(a.study, a.variant);
        for (std::size_t s = 0; s < preset.settings.size(); ++s) {
            const auto& st = preset.settings[s];
            const int reps = a.replicates > 0 ? a.replicates : st.replicates;
            for (int r = 0; r < reps; ++r) {
                const std::uint64_t stream = s * 100000 + static_cast<std::uint64_t>(r);
                Rng rng = stream_rng(a.seed, stream);
                emit(st.label + "_net" + std::to_string(r + 1), simulate_network(st.n, st.delta, st.alpha, st.link, rng),
                     stream);
            }
            settings.push_back({{"label", st.label},
                                {"n", st.n},
                                {"delta", st.delta},
                                {"alpha", st.alpha},
                                {"model", to_string(st.link)},
                                {"fit_p", st.fit_p},
                                {"replicates", reps}});
        }
    } else {
        if (a.n < 2) throw UsageError("simulate: give --study or a custom --n (>= 2) with --delta");
        if (a.delta.empty()) throw UsageError("simulate: --delta is required with --n");
        const int reps = a.replicates > 0 ? a.replicates : 1;
        const Link link = parse_link(a.model);
        for (int r = 0; r < reps; ++r) {
            Rng rng = stream_rng(a.seed, static_cast<std::uint64_t>(r));
            emit("custom_net" + std::to_string(r + 1), simulate_network(a.n, a.delta, a.alpha, link, rng, a.directed),
                 static_cast<std::uint64_t>(r));
        }
        settings.push_back({{"label", "custom"},
                            {"n", a.n},
                            {"delta", a.delta},
                            {"alpha", a.alpha},
                            {"model", to_string(link)},
                            {"directed", a.directed},
                            {"replicates", reps}});
    }
    json manifest{{"tool", "lspm"},
                  {"version", kVersion},
                  {"command", "simulate"},
                  {"config", {{"study", a.study}, {"variant", a.variant}, {"seed", a.seed}}},
                  {"settings", settings},
                  {"files", files},
                  {"timings", {{"wall_seconds", seconds_since(t0)}}}};
    write_json_file((dir / "manifest.json").string(), manifest);
    log::info("wrote " + std::to_string(files.size()) + " networks to " + dir.string());
    return 0;
}

// ---------------------------------------------------------------- fit

int run_fit(FitConfig cfg, const std::string& out_dir, int threads) {
    if (cfg.input.empty()) throw UsageError("fit: --input is required (directly or through --config)");
    cfg.input = fs::absolute(cfg.input).lexically_normal().string();
    cfg.load.kind = edge_kind_for(cfg.link);
    const Network net = load_input(cfg);
    if (2 * static_cast<std::size_t>(std::max(cfg.hp.p, 0)) >= net.size())
        throw UsageError("fit: truncation level p=" + std::to_string(cfg.hp.p) + " must be below n/2 (n=" +
                         std::to_string(net.size()) + ")");
    try {
        cfg.hp.validate(net.size());
        cfg.sampler.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (cfg.chains < 1) throw UsageError("fit: --chains must be at least 1");
    const auto traces = fit_to_dir(cfg, net, out_dir, threads);
    for (std::size_t k = 0; k < traces.size(); ++k)
        log::info("chain " + std::to_string(k + 1) + ": Z acceptance " + std::to_string(traces[k].z_acceptance()) +
                  ", alpha acceptance " + std::to_string(traces[k].alpha_acceptance()));
    return 0;
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseArgs {
    std::string fit_dir;
    std::string out_dir;
    std::string truth;
    double jump = 2.0;
    double width = 2.0;
    std::size_t max_lag = 20;
};

int run_diagnose(const DiagnoseArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto run = load_fit_dir(a.fit_dir);
    DiagnoseOptions opt;
    opt.jump_factor = a.jump;
    opt.width_factor = a.width;
    opt.max_lag = a.max_lag;
    Truth truth;
    if (!a.truth.empty()) {
        truth = truth_from_json(read_json_file(a.truth));
        opt.truth = &truth;
    }
    const auto d = diagnose(run.traces, opt);
    const fs::path out = a.out_dir.empty() ? fs::path(a.fit_dir) : fs::path(a.out_dir);
    fs::create_directories(out);
    write_json_file((out / "summary.json").string(), d.report);
    {
        auto f = detail::open_out((out / "aligned_Z.csv").string());
        write_aligned_z_csv(f, d.aligned);
    }
    json manifest{{"tool", "lspm"},
                  {"version", kVersion},
                  {"command", "diagnose"},
                  {"config",
                   {{"fit_dir", a.fit_dir},
                    {"truth", a.truth},
                    {"jump_factor", a.jump},
                    {"width_factor", a.width},
                    {"max_lag", a.max_lag}}},
                  {"fit_config", to_json(run.config)},
                  {"timings", {{"wall_seconds", seconds_since(t0)}}}};
    write_json_file((out / "diagnose_manifest.json").string(), manifest);
    std::cout << "effective dimension: " << (d.summary.delta.size() >= 2 ? d.effective.report : "n/a (p = 1)")
              << '\n';
    return 0;
}

// ---------------------------------------------------------------- ppc

struct PpcArgs {
    std::string fit_dir;
    std::string out_dir;
    std::string truth;
    std::size_t replicates = 30;
    std::uint64_t seed = 1;
    int max_count = 10;
};

int run_ppc_cmd(const PpcArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto run = load_fit_dir(a.fit_dir);
    const Network net = load_input(run.config);
    if (net.size() != run.n) throw std::runtime_error("ppc: input network no longer matches the fit");
    const auto aligned = align_chains(run.traces);
    PpcOptions opt;
    opt.n_replicates = a.replicates;
    opt.seed = a.seed;
    opt.max_count = a.max_count;
    Truth truth;
    if (!a.truth.empty()) {
        truth = truth_from_json(read_json_file(a.truth));
        opt.truth = &truth.z;
    }
    const auto report = run_ppc(aligned, net, run.config.link, opt);
    const fs::path out = a.out_dir.empty() ? fs::path(a.fit_dir) : fs::path(a.out_dir);
    fs::create_directories(out);
    write_json_file((out / "ppc_report.json").string(), ppc_to_json(report));
    {
        auto f = detail::open_out((out / "ppc_metrics.csv").string());
        write_ppc_metrics_csv(f, report);
    }
    json manifest{{"tool", "lspm"},
                  {"version", kVersion},
                  {"command", "ppc"},
                  {"config",
                   {{"fit_dir", a.fit_dir},
                    {"truth", a.truth},
                    {"replicates", a.replicates},
                    {"seed", a.seed},
                    {"max_count", a.max_count}}},
                  {"fit_config", to_json(run.config)},
                  {"timings", {{"wall_seconds", seconds_since(t0)}}}};
    write_json_file((out / "ppc_manifest.json").string(), manifest);
    return 0;
}

// ---------------------------------------------------------------- study

int run_study_cmd(StudyOptions opt, const std::string& scale, const std::string& z_update,
                  const std::string& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    if (scale == "desk") opt.scale = StudyScale::Desk;
    else if (scale == "paper") opt.scale = StudyScale::Paper;
    else throw UsageError("study: --scale must be desk or paper");
    opt.z_update = parse_z_update(z_update);
    const auto rows = run_study(opt);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    const auto csv = dir / ("study" + std::to_string(opt.id) + "_results.csv");
    {
        auto f = detail::open_out(csv.string());
        write_study_csv(f, rows);
    }
    json manifest{{"tool", "lspm"},
                  {"version", kVersion},
                  {"command", "study"},
                  {"config",
                   {{"study", opt.id},
                    {"variant", opt.variant},
                    {"scale", scale},
                    {"seed", opt.seed},
                    {"step_z", opt.step_z},
                    {"step_alpha", opt.step_alpha},
                    {"z_update", z_update},
                    {"networks", opt.networks},
                    {"iters", opt.iters},
                    {"burnin", opt.burn_in},
                    {"thin", opt.thin},
                    {"ppc_replicates", opt.ppc_replicates}}},
                  {"threads", opt.threads},
                  {"rows", rows.size()},
                  {"results", csv.filename().string()},
                  {"timings", {{"wall_seconds", seconds_since(t0)}}}};
    write_json_file((dir / ("study" + std::to_string(opt.id) + "_manifest.json")).string(), manifest);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latent shrinkage position models for network data"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    // simulate
    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Simulate networks from a study preset or custom parameters");
    c_sim->add_option("--study", sim.study, "Study preset 1-4")->check(CLI::Range(1, 4));
    c_sim->add_option("--variant", sim.variant, "Preset variant (for example n100, count, alpha5, high)");
    c_sim->add_option("--seed", sim.seed, "Master seed");
    c_sim->add_option("--out-dir", sim.out_dir, "Output directory")->required();
    c_sim->add_option("--replicates", sim.replicates, "Networks per setting (default: preset value, or 1)");
    c_sim->add_option("--n", sim.n, "Custom: number of nodes");
    c_sim->add_option("--delta", sim.delta, "Custom: shrinkage strengths")->delimiter(',');
    c_sim->add_option("--alpha", sim.alpha, "Custom: intercept");
    c_sim->add_option("--model", sim.model, "Custom: logit or poisson");
    c_sim->add_flag("--directed", sim.directed, "Custom: draw each ordered pair independently");

    // fit
    FitConfig fit;
    std::string fit_out, fit_config, fit_model = "logit", fit_zmode = "pernode", fit_format = "auto";
    int fit_threads = 1;
    auto* c_fit = app.add_subcommand("fit", "Fit the model by MCMC");
    auto* o_input = c_fit->add_option("--input", fit.input, "Network CSV (edge list or dense matrix)");
    auto* o_model = c_fit->add_option("--model", fit_model, "logit (binary) or poisson (counts)");
    auto* o_dims = c_fit->add_option("--dims", fit.hp.p, "Truncation level p");
    auto* o_iters = c_fit->add_option("--iters", fit.sampler.total_iters, "Total iterations");
    auto* o_burn = c_fit->add_option("--burnin", fit.sampler.burn_in, "Burn-in iterations");
    auto* o_thin = c_fit->add_option("--thin", fit.sampler.thin, "Thinning interval");
    auto* o_chains = c_fit->add_option("--chains", fit.chains, "Number of chains");
    auto* o_seed = c_fit->add_option("--seed", fit.sampler.seed, "Seed of the first chain");
    auto* o_stepz = c_fit->add_option("--step-z", fit.sampler.step_z, "Z proposal step factor");
    auto* o_stepa = c_fit->add_option("--step-alpha", fit.sampler.step_alpha, "alpha proposal variance factor");
    auto* o_zmode = c_fit->add_option("--z-update", fit_zmode, "whole or pernode");
    auto* o_infl = c_fit->add_option("--alpha-inflation", fit.sampler.alpha_inflation, "Initial alpha multiplier");
    auto* o_jit = c_fit->add_option("--init-jitter-sd", fit.sampler.init_jitter_sd, "Initial Z jitter sd");
    auto* o_dir = c_fit->add_flag("--directed", fit.load.directed, "Treat the network as directed");
    auto* o_fmt = c_fit->add_option("--format", fit_format, "auto, edgelist or dense");
    auto* o_base = c_fit->add_option("--index-base", fit.load.index_base, "Edge-list node index base (0 or 1)");
    auto* o_nodes = c_fit->add_option("--nodes", fit.load.nodes, "Edge lists: number of nodes (0: infer)");
    c_fit->add_option("--config", fit_config, "JSON config or earlier manifest; flags override it");
    c_fit->add_option("--out-dir", fit_out, "Output directory")->required();
    c_fit->add_option("--threads", fit_threads, "Worker threads for chains")->check(CLI::PositiveNumber);

    // diagnose
    DiagnoseArgs diag;
    auto* c_diag = app.add_subcommand("diagnose", "Posterior summaries, effective dimension and convergence");
    c_diag->add_option("--fit-dir", diag.fit_dir, "Directory written by fit")->required();
    c_diag->add_option("--out-dir", diag.out_dir, "Output directory (default: the fit directory)");
    c_diag->add_option("--truth", diag.truth, "Truth sidecar from simulate");
    c_diag->add_option("--jump-factor", diag.jump, "Mean jump threshold for delta");
    c_diag->add_option("--width-factor", diag.width, "Interval width threshold for delta");
    c_diag->add_option("--max-lag", diag.max_lag, "Largest autocorrelation lag");

    // ppc
    PpcArgs ppc;
    auto* c_ppc = app.add_subcommand("ppc", "Posterior predictive checks");
    c_ppc->add_option("--fit-dir", ppc.fit_dir, "Directory written by fit")->required();
    c_ppc->add_option("--out-dir", ppc.out_dir, "Output directory (default: the fit directory)");
    c_ppc->add_option("--replicates", ppc.replicates, "Replicate networks");
    c_ppc->add_option("--seed", ppc.seed, "Seed");
    c_ppc->add_option("--max-count", ppc.max_count, "Largest count with its own frequency bucket");
    c_ppc->add_option("--truth", ppc.truth, "Truth sidecar from simulate (adds distance ratios)");

    // study
    StudyOptions st;
    std::string st_scale = "desk", st_zmode = "pernode", st_out;
    auto* c_st = app.add_subcommand("study", "Run a simulation study end to end");
    c_st->add_option("--study", st.id, "Study 1-4")->required()->check(CLI::Range(1, 4));
    c_st->add_option("--variant", st.variant, "Preset variant");
    c_st->add_option("--scale", st_scale, "desk or paper");
    c_st->add_option("--seed", st.seed, "Master seed");
    c_st->add_option("--threads", st.threads, "Worker threads")->check(CLI::PositiveNumber);
    c_st->add_option("--networks", st.networks, "Networks per setting (0: scale default)");
    c_st->add_option("--iters", st.iters, "Iterations (0: scale default)");
    c_st->add_option("--burnin", st.burn_in, "Burn-in (negative: scale default)");
    c_st->add_option("--thin", st.thin, "Thinning (0: scale default)");
    c_st->add_option("--step-z", st.step_z, "Z proposal step factor");
    c_st->add_option("--step-alpha", st.step_alpha, "alpha proposal variance factor");
    c_st->add_option("--z-update", st_zmode, "whole or pernode");
    c_st->add_option("--ppc-replicates", st.ppc_replicates, "Replicates per fit (0: scale default)");
    c_st->add_option("--out-dir", st_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (c_sim->parsed()) return run_simulate(sim);
        if (c_fit->parsed()) {
            FitConfig cfg;
            if (!fit_config.empty()) merge_from_json(read_json_file(fit_config), cfg);
            auto given = [](CLI::Option* o) { return o->count() > 0; };
            if (given(o_input)) cfg.input = fit.input;
            if (given(o_model) || fit_config.empty()) cfg.link = parse_link(fit_model);
            if (given(o_dims)) cfg.hp.p = fit.hp.p;
            if (given(o_iters)) cfg.sampler.total_iters = fit.sampler.total_iters;
            if (given(o_burn)) cfg.sampler.burn_in = fit.sampler.burn_in;
            if (given(o_thin)) cfg.sampler.thin = fit.sampler.thin;
            if (given(o_chains)) cfg.chains = fit.chains;
            if (given(o_seed)) cfg.sampler.seed = fit.sampler.seed;
            if (given(o_stepz)) cfg.sampler.step_z = fit.sampler.step_z;
            if (given(o_stepa)) cfg.sampler.step_alpha = fit.sampler.step_alpha;
            if (given(o_zmode)) cfg.sampler.z_update = parse_z_update(fit_zmode);
            if (given(o_infl)) cfg.sampler.alpha_inflation = fit.sampler.alpha_inflation;
            if (given(o_jit)) cfg.sampler.init_jitter_sd = fit.sampler.init_jitter_sd;
            if (given(o_dir)) cfg.load.directed = fit.load.directed;
            if (given(o_fmt)) cfg.load.format = parse_format(fit_format);
            if (given(o_base)) cfg.load.index_base = fit.load.index_base;
            if (given(o_nodes)) cfg.load.nodes = fit.load.nodes;
            return run_fit(cfg, fit_out, fit_threads);
        }
        if (c_diag->parsed()) return run_diagnose(diag);
        if (c_ppc->parsed()) return run_ppc_cmd(ppc);
        if (c_st->parsed()) return run_study_cmd(st, st_scale, st_zmode, st_out);
    } catch (const UsageError& e) {
        std::cerr << "lspm: " << e.what() << '\n';
        return 1;
    } catch (const SamplerDiverged& e) {
        std::cerr << "lspm: " << e.what() << "\nlast finite state:\n" << e.state_dump();
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "lspm: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
