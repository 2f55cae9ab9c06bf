#pragma once

#include "dcilp/graph.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dcilp {

enum class GraphModel { ER, SF };
enum class NoiseKind { gaussian, gumbel, uniform };
enum class NoiseScaleMode { EV, NV };  // equal / non-equal noise variance

const char* to_string(GraphModel m);
const char* to_string(NoiseKind k);
const char* to_string(NoiseScaleMode m);
GraphModel graph_model_from_string(const std::string& s);
NoiseKind noise_kind_from_string(const std::string& s);
NoiseScaleMode noise_scale_mode_from_string(const std::string& s);

// Linear SEM: X_j = sum_i beta_ij X_i + eps_j with graph.adj(i, j) = beta_ij.
struct SemSpec {
    CausalGraph graph;  // strict DAG, weighted
    NoiseKind noise_kind = NoiseKind::gaussian;
    std::vector<double> noise_scales;  // per-variable noise std deviations
};

struct Dataset {
    int n = 0;
    int d = 0;
    Eigen::MatrixXd values;  // n x d
    std::uint64_t seed = 0;
};

// Random strict DAG. ER-k: lower-triangular pairs under a random permutation,
// each kept with probability 2k/(d-1), so k*d edges in expectation. SF-k:
// complete DAG on the first k nodes, then preferential attachment with k
// out-edges per new node; labels are randomly permuted afterwards.
CausalGraph gen_dag(int d, GraphModel model, int k, std::uint64_t seed);

// Edge weights Unif([-2,-0.5] U [0.5,2]). NV mode draws per-variable noise
// scales from Unif([0.5,2]); EV uses 1 everywhere.
SemSpec assign_weights(const CausalGraph& g, std::uint64_t seed,
                       NoiseKind kind = NoiseKind::gaussian,
                       NoiseScaleMode mode = NoiseScaleMode::EV);

// n i.i.d. rows by ancestral (topological) propagation. Gumbel and uniform
// noises are centered and scaled to the requested standard deviation. The
// noise block of row r comes from substream (seed, r), so identical seeds
// give bit-identical datasets regardless of evaluation order.
Dataset sample(const SemSpec& spec, int n, std::uint64_t seed);

// closed-form covariance (I - B)^-T D (I - B)^-1 with D = diag(scale^2)
Eigen::MatrixXd implied_covariance(const SemSpec& spec);

std::string to_csv(const Dataset& data);
Dataset parse_csv(const std::string& text);
void save_csv(const Dataset& data, const std::string& path);
Dataset load_csv(const std::string& path);

}  // namespace dcilp
