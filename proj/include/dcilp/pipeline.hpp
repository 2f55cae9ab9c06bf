#pragma once

#include "dcilp/graph.hpp"
#include "dcilp/phase1.hpp"
#include "dcilp/phase2.hpp"
#include "dcilp/phase3.hpp"
#include "dcilp/synth.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dcilp::pipeline {

struct RunConfig {
    // synthetic benchmark
    GraphModel model = GraphModel::ER;
    int d = 50;
    int k = 1;
    int n = 0;          // 0: use n_over_d * d
    int n_over_d = 10;
    NoiseKind noise = NoiseKind::gaussian;
    NoiseScaleMode scale_mode = NoiseScaleMode::EV;
    // phase 1
    double lambda1_min = 0.05;
    std::optional<double> lambda1_max = 0.3;  // unset: percentile rule
    int lambda1_count = 20;
    bool criterion_max = false;  // flip the criterion selection direction
    // phase 2
    std::string learner = "bic_ev";  // "bic_ev" (equal-variance, directed) or "bic" (CPDAG output)
    double penalty = 1.0;
    phase2::SchedulePolicy policy = phase2::SchedulePolicy::uniform;
    double rho = 0.3;
    double rho_big = 0.05;
    int workers = 1;
    // phase 3
    phase3::WeightScheme scheme = phase3::WeightScheme::LP3;
    int pool_k = 16;
    double time_budget_s = 300.0;
    int max_rounds = 50;
    // run control
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::string out_dir = "out";
    bool with_baseline = false;
    bool dump_locals = true;
    // external inputs (optional; otherwise data is synthesized per config)
    std::string data_file;
    std::string truth_file;

    int sample_count() const { return n > 0 ? n : n_over_d * d; }
};

// strict parse: unknown keys are rejected
RunConfig config_from_json(const std::string& text);
std::string config_to_json(const RunConfig& cfg);

struct PhaseTimes {
    double gen_s = 0.0;
    double phase1_s = 0.0;
    double phase2_s = 0.0;
    double phase3_s = 0.0;
    double total_s = 0.0;
};

struct RunReport {
    std::uint64_t seed = 0;
    std::string run_dir;
    bool ok = false;
    std::string failed_phase;  // empty on success
    std::string error;
    int exit_code = 1;

    std::optional<MetricsReport> final_metrics;
    std::optional<MetricsReport> naive_metrics;
    std::optional<MetricsReport> baseline_metrics;
    int conflict_counts[4] = {0, 0, 0, 0};  // none, type1, type2, type3
    double dagness_value = 0.0;
    bool dag_ok = false;
    bool non_dag_warning = false;
    long solver_nodes = 0;
    long solver_propagations = 0;
    int repair_rounds = 0;
    double selected_lambda1 = 0.0;
    int selected_lambda1_index = -1;
    int final_edges = 0;
    int failed_subproblems = 0;

    PhaseTimes times;  // wall clock; written only to the volatile timings.csv
};

// One full pass: blanket estimation, parallel local learning, merge,
// reconciliation ILP with cycle repair, metrics and artifact persistence.
RunReport run_dcilp(const RunConfig& cfg, std::uint64_t seed);

struct BenchResult {
    std::vector<RunReport> reports;
    std::string bench_dir;
    std::string summary_csv_path;
};

// Multi-seed harness; summary.csv has one row per seed plus median and IQR
// rows over the completed seeds. Requires at least 3 seeds.
BenchResult run_benchmark(const RunConfig& cfg);

struct NaiveDeltas {
    double fdr_delta = 0.0;  // FDR(naive) - FDR(ilp)
    double tpr_delta = 0.0;  // TPR(naive) - TPR(ilp)
    int shd_delta = 0;       // SHD(naive) - SHD(ilp)
};

NaiveDeltas compare_naive(const RunReport& report);

}  // namespace dcilp::pipeline
