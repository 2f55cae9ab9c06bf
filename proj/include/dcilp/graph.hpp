#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dcilp {

// Weighted directed graph over d variables. adj(i, j) != 0 encodes the edge
// i -> j; an undirected edge is stored as the symmetric pair
// adj(i, j) = adj(j, i) = 1. The diagonal is always zero.
struct CausalGraph {
    int d = 0;
    Eigen::MatrixXd adj;
    std::vector<std::string> labels;  // optional; empty or size d

    CausalGraph() = default;
    explicit CausalGraph(int d_) : d(d_), adj(Eigen::MatrixXd::Zero(d_, d_)) {}

    bool has_edge(int i, int j) const { return adj(i, j) != 0.0; }
    void set_edge(int i, int j, double w = 1.0) { adj(i, j) = w; }

    // number of nonzero off-diagonal entries (an undirected pair counts 2)
    int nnz() const;

    // directed entries (i, j) with adj(i, j) != 0, row-major order
    std::vector<std::pair<int, int>> edges() const;
};

// Kahn topological order (lowest index first among ready nodes);
// nullopt when the nonzero pattern contains a directed cycle.
std::optional<std::vector<int>> topological_order(const CausalGraph& g);

bool is_dag(const CausalGraph& g);

// h(B) = tr(exp(B .* B)); equals d exactly iff the graph is a DAG and
// exceeds d otherwise. Computed by scaling-and-squaring with a truncated
// series; absolute tolerance around 1e-9 for the graph sizes handled here.
double dagness(const CausalGraph& g);

struct MetricsReport {
    double tpr = 0.0;
    double fdr = 0.0;
    double fpr = 0.0;
    int shd = 0;
    int edge_count = 0;  // predicted edges, an undirected edge counts once
};

// Structural accuracy of a binary estimate against a strict-DAG truth.
//
// The estimate is decomposed into directed edges and undirected pairs
// (symmetric nonzeros). A directed estimate edge matching the true edge is a
// true positive; matching the reverse is a reversed edge (R). An undirected
// estimate edge over a true edge of either orientation counts as one
// reversed edge and no true positive (strict CPDAG convention). Extra (E)
// and missing (M) counts compare skeletons. Then
//   TPR = TP/T, FDR = (R+FP)/P, FPR = (R+FP)/F, SHD = E + M + R,
// with T the true edge count, P the predicted edge count and
// F = d(d-1)/2 - T. Empty denominators yield tpr=1, fdr=0, fpr=0.
MetricsReport metrics(const CausalGraph& estimate, const CausalGraph& truth);

// MB(i) = parents(i) U children(i) U spouses(i) of a strict DAG.
std::vector<std::vector<int>> true_markov_blankets(const CausalGraph& dag);

// Edge-list text format: "# d <d>" header, then one "src dst weight" triple
// per line, 0-indexed; '#' starts a comment.
std::string to_edge_list(const CausalGraph& g);
CausalGraph parse_edge_list(const std::string& text);
void save_edge_list(const CausalGraph& g, const std::string& path);
CausalGraph load_edge_list(const std::string& path);

// binarized copy: nonzero -> 1
CausalGraph binarize(const CausalGraph& g);

// flat JSON object with keys tpr, fdr, fpr, shd, nnz
std::string metrics_to_json(const MetricsReport& m);

}  // namespace dcilp
