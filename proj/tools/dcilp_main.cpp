#include "dcilp/graph.hpp"
#include "dcilp/io.hpp"
#include "dcilp/ilp.hpp"
#include "dcilp/pipeline.hpp"
#include "dcilp/rng.hpp"

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

namespace {

using dcilp::pipeline::RunConfig;

struct ConfigCli {
    std::string config_path;
    std::optional<int> d, k, n, n_over_d, workers, pool_k, lambda1_count, max_rounds;
    std::optional<std::string> model, noise, scale_mode, policy, scheme, out_dir, data_file,
        truth_file, learner;
    std::optional<double> lambda1_min, lambda1_max, penalty, rho, rho_big, time_budget;
    std::optional<bool> criterion_max, with_baseline, dump_locals;
    std::vector<std::uint64_t> seeds;
};

void add_config_flags(CLI::App* cmd, ConfigCli& cli) {
    cmd->add_option("--config", cli.config_path, "JSON config file; flags override its fields");
    cmd->add_option("--model", cli.model, "graph model: ER or SF");
    cmd->add_option("--d", cli.d, "variable count");
    cmd->add_option("--k", cli.k, "mean-degree parameter");
    cmd->add_option("--n", cli.n, "sample count (overrides --n-over-d)");
    cmd->add_option("--n-over-d", cli.n_over_d, "samples per variable");
    cmd->add_option("--noise", cli.noise, "noise kind: gaussian, gumbel, uniform");
    cmd->add_option("--scale-mode", cli.scale_mode, "EV or NV noise scales");
    cmd->add_option("--lambda1-min", cli.lambda1_min, "grid lower end");
    cmd->add_option("--lambda1-max", cli.lambda1_max,
                    "grid upper end (omit in config as \"auto\" for the percentile rule)");
    cmd->add_option("--lambda1-count", cli.lambda1_count, "grid size");
    cmd->add_flag("--criterion-max{true}", cli.criterion_max,
                  "select the criterion maximizer instead of the minimizer");
    cmd->add_option("--penalty", cli.penalty, "BIC edge penalty multiplier");
    cmd->add_option("--learner", cli.learner, "local learner: bic or bic_ev");
    cmd->add_option("--policy", cli.policy, "phase-2 schedule: uniform or size_ordered");
    cmd->add_option("--rho", cli.rho, "batch fraction for batched local learning");
    cmd->add_option("--rho-big", cli.rho_big, "fraction of largest subproblems batched");
    cmd->add_option("--workers", cli.workers, "phase-2 worker count");
    cmd->add_option("--scheme", cli.scheme, "merge weighting: LP1..LP4");
    cmd->add_option("--pool-k", cli.pool_k, "solution pool capacity");
    cmd->add_option("--time-budget", cli.time_budget, "solver budget per model, seconds");
    cmd->add_option("--max-rounds", cli.max_rounds, "cycle repair round limit");
    cmd->add_option("--seeds", cli.seeds, "seed list");
    cmd->add_option("--out", cli.out_dir, "output directory");
    cmd->add_flag("--with-baseline{true}", cli.with_baseline,
                  "also run the built-in learner on all variables");
    cmd->add_flag("--no-dump-locals{false}", cli.dump_locals, "skip local_<i>.edges artifacts");
    cmd->add_option("--data", cli.data_file, "run on an existing CSV instead of synthesizing");
    cmd->add_option("--truth", cli.truth_file, "ground-truth edge list for metrics");
}

RunConfig resolve_config(const ConfigCli& cli) {
    RunConfig cfg;
    if (!cli.config_path.empty())
        cfg = dcilp::pipeline::config_from_json(dcilp::read_file(cli.config_path));
    if (cli.model) cfg.model = dcilp::graph_model_from_string(*cli.model);
    if (cli.d) cfg.d = *cli.d;
    if (cli.k) cfg.k = *cli.k;
    if (cli.n) cfg.n = *cli.n;
    if (cli.n_over_d) cfg.n_over_d = *cli.n_over_d;
    if (cli.noise) cfg.noise = dcilp::noise_kind_from_string(*cli.noise);
    if (cli.scale_mode) cfg.scale_mode = dcilp::noise_scale_mode_from_string(*cli.scale_mode);
    if (cli.lambda1_min) cfg.lambda1_min = *cli.lambda1_min;
    if (cli.lambda1_max) cfg.lambda1_max = *cli.lambda1_max;
    if (cli.lambda1_count) cfg.lambda1_count = *cli.lambda1_count;
    if (cli.criterion_max) cfg.criterion_max = *cli.criterion_max;
    if (cli.penalty) cfg.penalty = *cli.penalty;
    if (cli.learner) cfg.learner = *cli.learner;
    if (cli.policy) cfg.policy = dcilp::phase2::schedule_policy_from_string(*cli.policy);
    if (cli.rho) cfg.rho = *cli.rho;
    if (cli.rho_big) cfg.rho_big = *cli.rho_big;
    if (cli.workers) cfg.workers = *cli.workers;
    if (cli.scheme) cfg.scheme = dcilp::phase3::weight_scheme_from_string(*cli.scheme);
    if (cli.pool_k) cfg.pool_k = *cli.pool_k;
    if (cli.time_budget) cfg.time_budget_s = *cli.time_budget;
    if (cli.max_rounds) cfg.max_rounds = *cli.max_rounds;
    if (!cli.seeds.empty()) cfg.seeds = cli.seeds;
    if (cli.out_dir) cfg.out_dir = *cli.out_dir;
    if (cli.with_baseline) cfg.with_baseline = *cli.with_baseline;
    if (cli.dump_locals) cfg.dump_locals = *cli.dump_locals;
    if (cli.data_file) cfg.data_file = *cli.data_file;
    if (cli.truth_file) cfg.truth_file = *cli.truth_file;
    return cfg;
}

int cmd_gen(const RunConfig& cfg) {
    using namespace dcilp;
    const std::uint64_t seed = cfg.seeds.empty() ? 1 : cfg.seeds.front();
    ensure_dir(cfg.out_dir);
    CausalGraph truth = gen_dag(cfg.d, cfg.model, cfg.k, seed);
    SemSpec spec = assign_weights(truth, derive_stream(seed, 1), cfg.noise, cfg.scale_mode);
    Dataset data = sample(spec, cfg.sample_count(), derive_stream(seed, 2));
    save_csv(data, cfg.out_dir + "/data.csv");
    save_edge_list(truth, cfg.out_dir + "/truth.edges");
    save_edge_list(spec.graph, cfg.out_dir + "/weights.edges");
    nlohmann::json side;
    side["n"] = data.n;
    side["d"] = data.d;
    side["seed"] = seed;
    side["noise_kind"] = to_string(cfg.noise);
    side["model"] = to_string(cfg.model);
    side["k"] = cfg.k;
    write_file(cfg.out_dir + "/data.json", side.dump(2) + "\n");
    std::cout << "wrote " << cfg.out_dir << "/data.csv (" << data.n << "x" << data.d << ")\n";
    return 0;
}

int cmd_run(const RunConfig& cfg) {
    const std::uint64_t seed = cfg.seeds.empty() ? 1 : cfg.seeds.front();
    const auto report = dcilp::pipeline::run_dcilp(cfg, seed);
    if (!report.ok) {
        std::cerr << "run failed in " << report.failed_phase << ": " << report.error << "\n";
        return report.exit_code;
    }
    std::cout << "run " << report.run_dir << "\n";
    if (report.final_metrics)
        std::cout << "final: " << dcilp::metrics_to_json(*report.final_metrics) << "\n";
    if (report.naive_metrics)
        std::cout << "naive: " << dcilp::metrics_to_json(*report.naive_metrics) << "\n";
    if (report.baseline_metrics)
        std::cout << "baseline: " << dcilp::metrics_to_json(*report.baseline_metrics)
                  << "\n";
    std::cout << "dagness " << report.dagness_value << (report.dag_ok ? " (dag)" : " (NOT a dag)")
              << ", rounds " << report.repair_rounds << "\n";
    return report.exit_code;
}

int cmd_bench(const RunConfig& cfg) {
    const auto bench = dcilp::pipeline::run_benchmark(cfg);
    int exit_code = 0;
    for (const auto& r : bench.reports) {
        std::cout << "seed " << r.seed << ": "
                  << (r.ok ? "ok" : "failed in " + r.failed_phase);
        if (r.final_metrics)
            std::cout << " shd=" << r.final_metrics->shd
                      << " fdr=" << r.final_metrics->fdr;
        std::cout << "\n";
        exit_code = std::max(exit_code, r.exit_code);
    }
    std::cout << "summary: " << bench.summary_csv_path << "\n";
    return exit_code;
}

int cmd_metrics(const std::string& estimate_path, const std::string& truth_path) {
    using namespace dcilp;
    const CausalGraph estimate = load_edge_list(estimate_path);
    const CausalGraph truth = load_edge_list(truth_path);
    const MetricsReport m = metrics(estimate, truth);
    std::cout << metrics_to_json(m) << "\n";
    return 0;
}

int cmd_export_lp(const RunConfig& cfg, const std::string& out_path) {
    using namespace dcilp;
    const std::uint64_t seed = cfg.seeds.empty() ? 1 : cfg.seeds.front();
    Dataset data;
    if (!cfg.data_file.empty()) {
        data = load_csv(cfg.data_file);
    } else {
        CausalGraph truth = gen_dag(cfg.d, cfg.model, cfg.k, seed);
        SemSpec spec = assign_weights(truth, derive_stream(seed, 1), cfg.noise, cfg.scale_mode);
        data = sample(spec, cfg.sample_count(), derive_stream(seed, 2));
    }
    phase1::Lambda1Grid grid{cfg.lambda1_min, cfg.lambda1_max, cfg.lambda1_count};
    const auto p1 = phase1::select_lambda1(data, grid, cfg.criterion_max);
    phase2::Phase2Options p2opts;
    p2opts.policy = cfg.policy;
    p2opts.rho = cfg.rho;
    p2opts.rho_big = cfg.rho_big;
    p2opts.workers = cfg.workers;
    p2opts.learn.penalty = cfg.penalty;
    const auto locals = phase2::run_phase2(data, p1.blankets, p2opts);
    const auto weighted =
        phase3::apply_weighting(phase3::naive_merge(locals, data.d), cfg.scheme);
    const auto build = phase3::build_ilp(weighted, p1.blankets);
    const std::string text = ilp::export_lp(build.model);
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
    } else {
        write_file(out_path, text);
        std::cout << "wrote " << out_path << " (" << build.model.num_vars() << " vars, "
                  << build.model.rows.size() << " rows)\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"divide-and-conquer causal discovery with ILP reconciliation"};
    app.require_subcommand(1);

    ConfigCli gen_cli, run_cli, bench_cli, lp_cli;
    std::string metrics_estimate, metrics_truth, lp_out;

    auto* gen = app.add_subcommand("gen", "synthesize a benchmark dataset");
    add_config_flags(gen, gen_cli);
    auto* run = app.add_subcommand("run", "single pipeline run");
    add_config_flags(run, run_cli);
    auto* bench = app.add_subcommand("bench", "multi-seed benchmark with summary CSV");
    add_config_flags(bench, bench_cli);
    auto* met = app.add_subcommand("metrics", "compare two edge-list graphs");
    met->add_option("--estimate", metrics_estimate, "estimated graph")->required();
    met->add_option("--truth", metrics_truth, "ground-truth graph")->required();
    auto* lp = app.add_subcommand("export-lp", "build and export the phase-3 model only");
    add_config_flags(lp, lp_cli);
    lp->add_option("--lp-out", lp_out, "output path ('-' for stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen(resolve_config(gen_cli));
        if (run->parsed()) return cmd_run(resolve_config(run_cli));
        if (bench->parsed()) return cmd_bench(resolve_config(bench_cli));
        if (met->parsed()) return cmd_metrics(metrics_estimate, metrics_truth);
        if (lp->parsed()) return cmd_export_lp(resolve_config(lp_cli), lp_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
