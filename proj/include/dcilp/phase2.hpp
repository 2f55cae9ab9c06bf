#pragma once

#include "dcilp/phase1.hpp"
#include "dcilp/synth.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace dcilp::phase2 {

struct Subproblem {
    int center = -1;              // global variable index
    std::vector<int> scope;       // sorted global indices, includes center
    Eigen::MatrixXd data_view;    // n x |scope|, columns in scope order
};

Subproblem extract_subproblem(const Dataset& data, const phase1::MarkovBlankets& mbs, int i);

// Local adjacency restricted to the center's row and column, in global
// coordinates. Undirected center edges keep both symmetric entries.
struct LocalResult {
    int center = -1;
    std::vector<std::pair<int, int>> edges;  // (src, dst), src == center or dst == center
    std::string diagnostic;                  // nonempty when the subproblem failed

    Eigen::MatrixXd to_dense(int d) const;
};

struct BicLearnOptions {
    double penalty = 1.0;   // multiplier on the (ln n)/2 per-edge BIC penalty
    double ridge = 1e-8;    // diagonal regularizer for singular regressions
    bool equal_variance = false;  // fit one shared noise variance (see below)
    std::vector<double>* score_trace = nullptr;  // accepted-move scores, for tests
};

// Hill climbing over DAGs on the scope with add/delete/reverse moves, scored
// by the decomposable Gaussian BIC
//   score(G) = sum_j [ -(n/2) ln(RSS_j / n) ] - penalty * (ln n / 2) * #edges.
// Ties prefer delete > reverse > add, then the lowest (src, dst). The local
// optimum is returned as its CPDAG: compelled edges stay directed, reversible
// edges become symmetric pairs.
//
// With equal_variance the noise variance is pooled across nodes,
//   score(G) = -(n p / 2) ln( sum_j RSS_j / (n p) ) - penalty (ln n / 2) #edges,
// which identifies edge directions for equal-variance SEM data, so the
// learned DAG is emitted as-is (fully directed).
Eigen::MatrixXd greedy_bic_learn(const Subproblem& sub, const BicLearnOptions& opts = {});

// v-structure orientation plus Meek closure; exposed for tests.
Eigen::MatrixXd dag_to_cpdag(const Eigen::MatrixXd& dag);

LocalResult restrict_to_center(const Eigen::MatrixXd& local_adj, const Subproblem& sub);

using Learner = std::function<Eigen::MatrixXd(const Subproblem&)>;

// Iterative local learning for large blankets: consume batches of
// ceil(rho * |mb|) variables, relearn on batch + current parent/children set,
// keep the center's neighbors after each pass (the latest pass wins).
LocalResult batch_local_learn(const Dataset& data, int center, const std::vector<int>& mb,
                              double rho, const Learner& learner);

enum class SchedulePolicy { uniform, size_ordered };

const char* to_string(SchedulePolicy p);
SchedulePolicy schedule_policy_from_string(const std::string& s);

struct Phase2Options {
    SchedulePolicy policy = SchedulePolicy::uniform;
    double rho = 0.3;       // batch size fraction inside batch_local_learn
    double rho_big = 0.05;  // fraction of largest-blanket subproblems routed to batching
    int workers = 1;
    BicLearnOptions learn;
};

// Solves all d subproblems on a fixed-size worker pool. Results land in a
// slot array indexed by center, so the output is identical for any worker
// count. A failing subproblem yields an empty LocalResult with a diagnostic.
std::vector<LocalResult> run_phase2(const Dataset& data, const phase1::MarkovBlankets& mbs,
                                    const Phase2Options& opts = {});

}  // namespace dcilp::phase2
