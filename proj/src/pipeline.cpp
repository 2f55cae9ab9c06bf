#include "dcilp/pipeline.hpp"

#include "dcilp/io.hpp"
#include "dcilp/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dcilp::pipeline {

using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string run_id(const RunConfig& cfg, std::uint64_t seed) {
    std::ostringstream ss;
    std::string model = to_string(cfg.model);
    std::transform(model.begin(), model.end(), model.begin(), ::tolower);
    ss << model << cfg.k << "_d" << cfg.d << "_n" << cfg.sample_count() << "_"
       << to_string(cfg.noise) << "_" << (cfg.scale_mode == NoiseScaleMode::EV ? "ev" : "nv")
       << "_s" << seed;
    return ss.str();
}

}  // namespace

RunConfig config_from_json(const std::string& text) {
    const json j = json::parse(text);
    RunConfig cfg;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const json& v = it.value();
        if (key == "model") cfg.model = graph_model_from_string(v.get<std::string>());
        else if (key == "d") cfg.d = v.get<int>();
        else if (key == "k") cfg.k = v.get<int>();
        else if (key == "n") cfg.n = v.get<int>();
        else if (key == "n_over_d") cfg.n_over_d = v.get<int>();
        else if (key == "noise") cfg.noise = noise_kind_from_string(v.get<std::string>());
        else if (key == "scale_mode")
            cfg.scale_mode = noise_scale_mode_from_string(v.get<std::string>());
        else if (key == "lambda1_min") cfg.lambda1_min = v.get<double>();
        else if (key == "lambda1_max") {
            if (v.is_string() && v.get<std::string>() == "auto") cfg.lambda1_max.reset();
            else cfg.lambda1_max = v.get<double>();
        }
        else if (key == "lambda1_count") cfg.lambda1_count = v.get<int>();
        else if (key == "criterion_max") cfg.criterion_max = v.get<bool>();
        else if (key == "penalty") cfg.penalty = v.get<double>();
        else if (key == "learner") {
            cfg.learner = v.get<std::string>();
            if (cfg.learner != "bic" && cfg.learner != "bic_ev")
                throw std::invalid_argument("config: learner must be bic or bic_ev");
        }
        else if (key == "policy")
            cfg.policy = phase2::schedule_policy_from_string(v.get<std::string>());
        else if (key == "rho") cfg.rho = v.get<double>();
        else if (key == "rho_big") cfg.rho_big = v.get<double>();
        else if (key == "workers") cfg.workers = v.get<int>();
        else if (key == "scheme") cfg.scheme = phase3::weight_scheme_from_string(v.get<std::string>());
        else if (key == "pool_k") cfg.pool_k = v.get<int>();
        else if (key == "time_budget_s") cfg.time_budget_s = v.get<double>();
        else if (key == "max_rounds") cfg.max_rounds = v.get<int>();
        else if (key == "seeds") cfg.seeds = v.get<std::vector<std::uint64_t>>();
        else if (key == "out_dir") cfg.out_dir = v.get<std::string>();
        else if (key == "with_baseline") cfg.with_baseline = v.get<bool>();
        else if (key == "dump_locals") cfg.dump_locals = v.get<bool>();
        else if (key == "data_file") cfg.data_file = v.get<std::string>();
        else if (key == "truth_file") cfg.truth_file = v.get<std::string>();
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    return cfg;
}

std::string config_to_json(const RunConfig& cfg) {
    json j;
    j["model"] = to_string(cfg.model);
    j["d"] = cfg.d;
    j["k"] = cfg.k;
    j["n"] = cfg.n;
    j["n_over_d"] = cfg.n_over_d;
    j["noise"] = to_string(cfg.noise);
    j["scale_mode"] = to_string(cfg.scale_mode);
    j["lambda1_min"] = cfg.lambda1_min;
    if (cfg.lambda1_max) j["lambda1_max"] = *cfg.lambda1_max;
    else j["lambda1_max"] = "auto";
    j["lambda1_count"] = cfg.lambda1_count;
    j["criterion_max"] = cfg.criterion_max;
    j["penalty"] = cfg.penalty;
    j["learner"] = cfg.learner;
    j["policy"] = phase2::to_string(cfg.policy);
    j["rho"] = cfg.rho;
    j["rho_big"] = cfg.rho_big;
    j["workers"] = cfg.workers;
    j["scheme"] = phase3::to_string(cfg.scheme);
    j["pool_k"] = cfg.pool_k;
    j["time_budget_s"] = cfg.time_budget_s;
    j["max_rounds"] = cfg.max_rounds;
    j["seeds"] = cfg.seeds;
    j["out_dir"] = cfg.out_dir;
    j["with_baseline"] = cfg.with_baseline;
    j["dump_locals"] = cfg.dump_locals;
    j["data_file"] = cfg.data_file;
    j["truth_file"] = cfg.truth_file;
    return j.dump(2) + "\n";
}

namespace {

CausalGraph graph_from_matrix(const Eigen::MatrixXd& m) {
    CausalGraph g(static_cast<int>(m.rows()));
    g.adj = m;
    g.adj.diagonal().setZero();
    return g;
}

json metrics_json_obj(const MetricsReport& m) {
    json j;
    j["tpr"] = m.tpr;
    j["fdr"] = m.fdr;
    j["fpr"] = m.fpr;
    j["shd"] = m.shd;
    j["nnz"] = m.edge_count;
    return j;
}

}  // namespace

RunReport run_dcilp(const RunConfig& cfg, std::uint64_t seed) {
    RunReport report;
    report.seed = seed;
    const std::string dir = cfg.out_dir + "/" + run_id(cfg, seed);
    report.run_dir = dir;
    ensure_dir(dir);
    write_file(dir + "/config.json", config_to_json(cfg));

    const auto t_total = std::chrono::steady_clock::now();
    std::string phase = "gen";
    try {
        // ---- data ----
        auto t0 = std::chrono::steady_clock::now();
        Dataset data;
        std::optional<CausalGraph> truth;
        if (!cfg.data_file.empty()) {
            data = load_csv(cfg.data_file);
            data.seed = seed;
            if (!cfg.truth_file.empty()) truth = load_edge_list(cfg.truth_file);
        } else {
            CausalGraph dag = gen_dag(cfg.d, cfg.model, cfg.k, seed);
            SemSpec spec = assign_weights(dag, derive_stream(seed, 1), cfg.noise, cfg.scale_mode);
            data = sample(spec, cfg.sample_count(), derive_stream(seed, 2));
            truth = std::move(dag);
        }
        if (truth && truth->d != data.d)
            throw std::runtime_error("truth/data dimension mismatch");
        save_csv(data, dir + "/data.csv");
        {
            json side;
            side["n"] = data.n;
            side["d"] = data.d;
            side["seed"] = seed;
            side["noise_kind"] = to_string(cfg.noise);
            side["model"] = to_string(cfg.model);
            side["k"] = cfg.k;
            write_file(dir + "/data.json", side.dump(2) + "\n");
        }
        if (truth) save_edge_list(*truth, dir + "/truth.edges");
        report.times.gen_s = seconds_since(t0);

        // ---- phase 1: blankets ----
        phase = "phase1";
        t0 = std::chrono::steady_clock::now();
        phase1::Lambda1Grid grid{cfg.lambda1_min, cfg.lambda1_max, cfg.lambda1_count};
        const phase1::Phase1Result p1 = phase1::select_lambda1(data, grid, cfg.criterion_max);
        report.selected_lambda1 = p1.estimate.lambda1;
        report.selected_lambda1_index = p1.selected_index;
        write_file(dir + "/mbs.json", phase1::mbs_to_json(p1.blankets));
        write_file(dir + "/lambda_grid.csv", phase1::diagnostics_to_csv(p1.diagnostics));
        report.times.phase1_s = seconds_since(t0);

        // ---- phase 2: local learning ----
        phase = "phase2";
        t0 = std::chrono::steady_clock::now();
        phase2::Phase2Options p2opts;
        p2opts.policy = cfg.policy;
        p2opts.rho = cfg.rho;
        p2opts.rho_big = cfg.rho_big;
        p2opts.workers = cfg.workers;
        p2opts.learn.penalty = cfg.penalty;
        p2opts.learn.equal_variance = cfg.learner == "bic_ev";
        const auto locals = phase2::run_phase2(data, p1.blankets, p2opts);
        for (const auto& local : locals) {
            if (!local.diagnostic.empty()) ++report.failed_subproblems;
            if (cfg.dump_locals) {
                CausalGraph lg(data.d);
                for (auto& [s, t] : local.edges) lg.adj(s, t) = 1.0;
                save_edge_list(lg, dir + "/local_" + std::to_string(local.center) + ".edges");
            }
        }
        report.times.phase2_s = seconds_since(t0);

        // ---- phase 3: reconcile ----
        phase = "phase3";
        t0 = std::chrono::steady_clock::now();
        const phase3::MergedGraph raw = phase3::naive_merge(locals, data.d);
        const phase3::ConflictReport conflicts = phase3::classify_conflicts(locals, data.d);
        report.conflict_counts[0] = conflicts.none;
        report.conflict_counts[1] = conflicts.type1_addition;
        report.conflict_counts[2] = conflicts.type2_acute;
        report.conflict_counts[3] = conflicts.type3_undirected;
        write_file(dir + "/conflicts.json", phase3::conflicts_to_json(conflicts) + "\n");
        const phase3::MergedGraph weighted = phase3::apply_weighting(raw, cfg.scheme);
        {
            CausalGraph mg(data.d);
            mg.adj = weighted.b_hat;
            save_edge_list(mg, dir + "/merged.edges");
        }
        const phase3::IlpBuild build = phase3::build_ilp(weighted, p1.blankets);
        write_file(dir + "/model.lp", ilp::export_lp(build.model));
        const phase3::RepairResult repair =
            phase3::cycle_repair(build, cfg.pool_k, cfg.time_budget_s, cfg.max_rounds);
        report.dagness_value = repair.dagness_value;
        report.dag_ok = repair.is_dag;
        report.non_dag_warning = repair.non_dag_warning;
        report.repair_rounds = repair.rounds;
        report.solver_nodes = repair.nodes;
        report.solver_propagations = repair.propagations;
        report.final_edges = repair.graph.nnz();
        save_edge_list(repair.graph, dir + "/solution.edges");
        report.times.phase3_s = seconds_since(t0);

        // ---- metrics ----
        if (truth) {
            report.final_metrics = metrics(repair.graph, *truth);
            report.naive_metrics = metrics(binarize(graph_from_matrix(raw.b_hat)), *truth);
            if (cfg.with_baseline) {
                phase2::Subproblem full;
                full.center = 0;
                full.scope.resize(data.d);
                for (int i = 0; i < data.d; ++i) full.scope[i] = i;
                full.data_view = data.values;
                phase2::BicLearnOptions lopts;
                lopts.penalty = cfg.penalty;
                lopts.equal_variance = cfg.learner == "bic_ev";
                const Eigen::MatrixXd base = phase2::greedy_bic_learn(full, lopts);
                const CausalGraph base_graph = graph_from_matrix(base);
                save_edge_list(base_graph, dir + "/baseline.edges");
                report.baseline_metrics = metrics(base_graph, *truth);
            }
        }
        report.ok = true;
        report.exit_code = repair.status == ilp::SolveStatus::optimal ? 0 : 2;
    } catch (const std::exception& e) {
        report.ok = false;
        report.failed_phase = phase;
        report.error = e.what();
        report.exit_code = 1;
    }
    report.times.total_s = seconds_since(t_total);

    // report.json carries only deterministic fields; wall times go to timings.csv
    json rj;
    rj["seed"] = report.seed;
    rj["ok"] = report.ok;
    rj["failed_phase"] = report.failed_phase;
    rj["error"] = report.error;
    rj["exit_code"] = report.exit_code;
    if (report.final_metrics) rj["metrics_final"] = metrics_json_obj(*report.final_metrics);
    if (report.naive_metrics) rj["metrics_naive"] = metrics_json_obj(*report.naive_metrics);
    if (report.baseline_metrics)
        rj["metrics_baseline"] = metrics_json_obj(*report.baseline_metrics);
    rj["conflicts"] = {{"none", report.conflict_counts[0]},
                       {"type1_addition", report.conflict_counts[1]},
                       {"type2_acute", report.conflict_counts[2]},
                       {"type3_undirected", report.conflict_counts[3]}};
    rj["dagness"] = report.dagness_value;
    rj["is_dag"] = report.dag_ok;
    rj["non_dag_warning"] = report.non_dag_warning;
    rj["repair_rounds"] = report.repair_rounds;
    rj["solver"] = {{"nodes", report.solver_nodes},
                    {"propagations", report.solver_propagations}};
    rj["lambda1"] = {{"selected_index", report.selected_lambda1_index},
                     {"value", report.selected_lambda1}};
    rj["phase2"] = {{"learner", cfg.learner},
                    {"policy", phase2::to_string(cfg.policy)},
                    {"workers", cfg.workers},
                    {"penalty", cfg.penalty},
                    {"rho", cfg.rho},
                    {"rho_big", cfg.rho_big},
                    {"failed_subproblems", report.failed_subproblems}};
    rj["edges"] = report.final_edges;
    write_file(dir + "/report.json", rj.dump(2) + "\n");

    // single-run summary row, same columns as a bench row
    std::ostringstream summary;
    summary << "seed,status,tpr,fdr,fpr,shd,nnz,tpr_naive,fdr_naive,shd_naive,dagness,is_dag,"
               "rounds,solver_nodes,warning\n";
    summary << report.seed << "," << (report.ok ? "ok" : ("failed:" + report.failed_phase));
    if (report.ok && report.final_metrics) {
        const auto& m = *report.final_metrics;
        const auto& nm = *report.naive_metrics;
        summary << "," << fmt_double(m.tpr) << "," << fmt_double(m.fdr) << ","
                << fmt_double(m.fpr) << "," << m.shd << "," << m.edge_count << ","
                << fmt_double(nm.tpr) << "," << fmt_double(nm.fdr) << "," << nm.shd << ","
                << fmt_double(report.dagness_value) << "," << (report.dag_ok ? 1 : 0) << ","
                << report.repair_rounds << "," << report.solver_nodes << ","
                << (report.non_dag_warning ? "non_dag" : "");
    } else {
        for (int b = 0; b < 13; ++b) summary << ",";
    }
    summary << "\n";
    write_file(dir + "/summary.csv", summary.str());

    std::ostringstream timings;
    timings << "phase,seconds\n";
    timings << "gen," << report.times.gen_s << "\n";
    timings << "phase1," << report.times.phase1_s << "\n";
    timings << "phase2," << report.times.phase2_s << "\n";
    timings << "phase3," << report.times.phase3_s << "\n";
    timings << "total," << report.times.total_s << "\n";
    write_file(dir + "/timings.csv", timings.str());
    return report;
}

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    if (n == 0) return 0.0;
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Tukey hinges
double iqr_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    if (n < 2) return 0.0;
    const size_t half = n / 2;
    std::vector<double> lower(v.begin(), v.begin() + half);
    std::vector<double> upper(v.begin() + (n - half), v.end());
    return median_of(upper) - median_of(lower);
}

}  // namespace

BenchResult run_benchmark(const RunConfig& cfg) {
    if (cfg.seeds.size() < 3)
        throw std::invalid_argument("run_benchmark: need at least 3 seeds");
    BenchResult bench;
    bench.bench_dir = cfg.out_dir;
    ensure_dir(cfg.out_dir);

    for (const auto seed : cfg.seeds) bench.reports.push_back(run_dcilp(cfg, seed));

    const bool with_base = cfg.with_baseline;
    std::ostringstream csv;
    csv << "seed,status,tpr,fdr,fpr,shd,nnz,tpr_naive,fdr_naive,shd_naive";
    if (with_base) csv << ",tpr_base,fdr_base,shd_base";
    csv << ",dagness,is_dag,rounds,solver_nodes,warning\n";

    struct Cols {
        std::vector<double> tpr, fdr, fpr, shd, nnz, tpr_n, fdr_n, shd_n, tpr_b, fdr_b, shd_b,
            dagness, rounds, nodes;
    } cols;
    int failed = 0;

    for (const auto& r : bench.reports) {
        csv << r.seed << "," << (r.ok ? "ok" : ("failed:" + r.failed_phase));
        if (r.ok && r.final_metrics) {
            const auto& m = *r.final_metrics;
            const auto& nm = *r.naive_metrics;
            csv << "," << fmt_double(m.tpr) << "," << fmt_double(m.fdr) << ","
                << fmt_double(m.fpr) << "," << m.shd << "," << m.edge_count;
            csv << "," << fmt_double(nm.tpr) << "," << fmt_double(nm.fdr) << "," << nm.shd;
            if (with_base) {
                if (r.baseline_metrics) {
                    const auto& bm = *r.baseline_metrics;
                    csv << "," << fmt_double(bm.tpr) << "," << fmt_double(bm.fdr) << ","
                        << bm.shd;
                } else {
                    csv << ",,,";
                }
            }
            csv << "," << fmt_double(r.dagness_value) << "," << (r.dag_ok ? 1 : 0) << ","
                << r.repair_rounds << "," << r.solver_nodes << ","
                << (r.non_dag_warning ? "non_dag" : "") << "\n";
            cols.tpr.push_back(m.tpr);
            cols.fdr.push_back(m.fdr);
            cols.fpr.push_back(m.fpr);
            cols.shd.push_back(m.shd);
            cols.nnz.push_back(m.edge_count);
            cols.tpr_n.push_back(nm.tpr);
            cols.fdr_n.push_back(nm.fdr);
            cols.shd_n.push_back(nm.shd);
            if (r.baseline_metrics) {
                cols.tpr_b.push_back(r.baseline_metrics->tpr);
                cols.fdr_b.push_back(r.baseline_metrics->fdr);
                cols.shd_b.push_back(r.baseline_metrics->shd);
            }
            cols.dagness.push_back(r.dagness_value);
            cols.rounds.push_back(r.repair_rounds);
            cols.nodes.push_back(static_cast<double>(r.solver_nodes));
        } else {
            failed += !r.ok;
            const int blanks = with_base ? 16 : 13;
            for (int b = 0; b < blanks; ++b) csv << ",";
            csv << "\n";
        }
    }

    auto stat_row = [&](const std::string& name, auto f) {
        csv << name << ",";
        csv << "," << fmt_double(f(cols.tpr)) << "," << fmt_double(f(cols.fdr)) << ","
            << fmt_double(f(cols.fpr)) << "," << fmt_double(f(cols.shd)) << ","
            << fmt_double(f(cols.nnz));
        csv << "," << fmt_double(f(cols.tpr_n)) << "," << fmt_double(f(cols.fdr_n)) << ","
            << fmt_double(f(cols.shd_n));
        if (with_base)
            csv << "," << fmt_double(f(cols.tpr_b)) << "," << fmt_double(f(cols.fdr_b)) << ","
                << fmt_double(f(cols.shd_b));
        csv << "," << fmt_double(f(cols.dagness)) << ",," << fmt_double(f(cols.rounds)) << ","
            << fmt_double(f(cols.nodes)) << ","
            << (failed > 0 ? "partial(" + std::to_string(failed) + ")" : "") << "\n";
    };
    stat_row("median", median_of);
    stat_row("iqr", iqr_of);

    bench.summary_csv_path = cfg.out_dir + "/summary.csv";
    write_file(bench.summary_csv_path, csv.str());

    // naive-merge comparison deltas
    std::ostringstream cmp;
    cmp << "seed,fdr_delta,tpr_delta,shd_delta\n";
    std::vector<double> fdr_d, tpr_d, shd_d;
    for (const auto& r : bench.reports) {
        if (!r.ok || !r.final_metrics) continue;
        const NaiveDeltas deltas = compare_naive(r);
        cmp << r.seed << "," << fmt_double(deltas.fdr_delta) << ","
            << fmt_double(deltas.tpr_delta) << "," << deltas.shd_delta << "\n";
        fdr_d.push_back(deltas.fdr_delta);
        tpr_d.push_back(deltas.tpr_delta);
        shd_d.push_back(deltas.shd_delta);
    }
    cmp << "median," << fmt_double(median_of(fdr_d)) << "," << fmt_double(median_of(tpr_d))
        << "," << fmt_double(median_of(shd_d)) << "\n";
    write_file(cfg.out_dir + "/compare.csv", cmp.str());

    // volatile per-seed timings
    std::ostringstream times;
    times << "seed,gen_s,phase1_s,phase2_s,phase3_s,total_s\n";
    for (const auto& r : bench.reports)
        times << r.seed << "," << r.times.gen_s << "," << r.times.phase1_s << ","
              << r.times.phase2_s << "," << r.times.phase3_s << "," << r.times.total_s << "\n";
    write_file(cfg.out_dir + "/timings.csv", times.str());
    return bench;
}

NaiveDeltas compare_naive(const RunReport& report) {
    if (!report.final_metrics || !report.naive_metrics)
        throw std::invalid_argument("compare_naive: report lacks metric sets");
    NaiveDeltas d;
    d.fdr_delta = report.naive_metrics->fdr - report.final_metrics->fdr;
    d.tpr_delta = report.naive_metrics->tpr - report.final_metrics->tpr;
    d.shd_delta = report.naive_metrics->shd - report.final_metrics->shd;
    return d;
}

}  // namespace dcilp::pipeline
