#include "dcilp/synth.hpp"

#include "dcilp/io.hpp"
#include "dcilp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dcilp {

namespace {
constexpr double kEulerGamma = 0.57721566490153286;
}

const char* to_string(GraphModel m) { return m == GraphModel::ER ? "ER" : "SF"; }
const char* to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::gaussian: return "gaussian";
        case NoiseKind::gumbel: return "gumbel";
        default: return "uniform";
    }
}
const char* to_string(NoiseScaleMode m) { return m == NoiseScaleMode::EV ? "EV" : "NV"; }

GraphModel graph_model_from_string(const std::string& s) {
    if (s == "ER" || s == "er") return GraphModel::ER;
    if (s == "SF" || s == "sf") return GraphModel::SF;
    throw std::invalid_argument("unknown graph model: " + s);
}

NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "gaussian") return NoiseKind::gaussian;
    if (s == "gumbel") return NoiseKind::gumbel;
    if (s == "uniform") return NoiseKind::uniform;
    throw std::invalid_argument("unknown noise kind: " + s);
}

NoiseScaleMode noise_scale_mode_from_string(const std::string& s) {
    if (s == "EV" || s == "ev") return NoiseScaleMode::EV;
    if (s == "NV" || s == "nv") return NoiseScaleMode::NV;
    throw std::invalid_argument("unknown noise scale mode: " + s);
}

namespace {

CausalGraph gen_er(int d, int k, Rng& rng) {
    const double max_edges = static_cast<double>(d) * (d - 1) / 2.0;
    if (static_cast<double>(k) * d > max_edges)
        throw std::invalid_argument("gen_dag: k*d exceeds the maximum edge count");
    const double p = 2.0 * k / (d - 1);

    std::vector<int> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = d - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.uniform_int(i + 1));
        std::swap(perm[i], perm[j]);
    }
    CausalGraph g(d);
    for (int a = 0; a < d; ++a)
        for (int b = a + 1; b < d; ++b)
            if (rng.bernoulli(p)) g.adj(perm[a], perm[b]) = 1.0;
    return g;
}

CausalGraph gen_sf(int d, int k, Rng& rng) {
    if (k >= d)
        throw std::invalid_argument("gen_dag: SF requires k < d");
    CausalGraph g(d);
    // seed component: complete DAG on the first k nodes
    for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b) g.adj(a, b) = 1.0;

    // degree + 1 weighting so isolated seed nodes stay reachable
    std::vector<int> degree(d, 0);
    for (int a = 0; a < k; ++a) degree[a] = k - 1;

    for (int t = k; t < d; ++t) {
        std::vector<int> chosen;
        while (static_cast<int>(chosen.size()) < k) {
            long long total = 0;
            for (int u = 0; u < t; ++u) total += degree[u] + 1;
            long long ticket = static_cast<long long>(rng.uniform_int(static_cast<std::uint64_t>(total)));
            int pick = -1;
            for (int u = 0; u < t; ++u) {
                ticket -= degree[u] + 1;
                if (ticket < 0) {
                    pick = u;
                    break;
                }
            }
            if (std::find(chosen.begin(), chosen.end(), pick) != chosen.end()) continue;
            chosen.push_back(pick);
        }
        for (int u : chosen) {
            g.adj(t, u) = 1.0;  // k out-edges from the new node
            ++degree[u];
        }
        degree[t] += k;
    }

    // random relabeling
    std::vector<int> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = d - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.uniform_int(i + 1));
        std::swap(perm[i], perm[j]);
    }
    CausalGraph out(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (g.adj(i, j) != 0.0) out.adj(perm[i], perm[j]) = 1.0;
    return out;
}

}  // namespace

CausalGraph gen_dag(int d, GraphModel model, int k, std::uint64_t seed) {
    if (d < 1) throw std::invalid_argument("gen_dag: d must be >= 1");
    if (k < 1) throw std::invalid_argument("gen_dag: k must be >= 1");
    if (d == 1) return CausalGraph(1);
    Rng rng(derive_stream(seed, 0x6461675fULL));
    return model == GraphModel::ER ? gen_er(d, k, rng) : gen_sf(d, k, rng);
}

SemSpec assign_weights(const CausalGraph& g, std::uint64_t seed, NoiseKind kind,
                       NoiseScaleMode mode) {
    if (!is_dag(g)) throw std::invalid_argument("assign_weights: graph must be a DAG");
    SemSpec spec;
    spec.graph = CausalGraph(g.d);
    spec.noise_kind = kind;

    Rng wrng(derive_stream(seed, 0x77656967ULL));
    for (int i = 0; i < g.d; ++i) {
        for (int j = 0; j < g.d; ++j) {
            if (i == j || g.adj(i, j) == 0.0) continue;
            const double mag = wrng.uniform(0.5, 2.0);
            const double sign = wrng.bernoulli(0.5) ? 1.0 : -1.0;
            spec.graph.adj(i, j) = sign * mag;
        }
    }

    spec.noise_scales.assign(g.d, 1.0);
    if (mode == NoiseScaleMode::NV) {
        Rng srng(derive_stream(seed, 0x7363616cULL));
        for (int i = 0; i < g.d; ++i) spec.noise_scales[i] = srng.uniform(0.5, 2.0);
    }
    return spec;
}

namespace {

double draw_noise(Rng& rng, NoiseKind kind, double scale) {
    switch (kind) {
        case NoiseKind::gaussian:
            return scale * rng.normal();
        case NoiseKind::gumbel:
            // centered, scaled to std dev `scale`
            return (rng.gumbel() - kEulerGamma) * (scale / (M_PI / std::sqrt(6.0)));
        default:
            // U[-a, a] with a = scale * sqrt(3)
            return rng.uniform(-scale * std::sqrt(3.0), scale * std::sqrt(3.0));
    }
}

}  // namespace

Dataset sample(const SemSpec& spec, int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
    const int d = spec.graph.d;
    if (static_cast<int>(spec.noise_scales.size()) != d)
        throw std::invalid_argument("sample: noise_scales size mismatch");
    for (double s : spec.noise_scales)
        if (!(s >= 0.0)) throw std::invalid_argument("sample: negative noise scale");

    const auto order = topological_order(spec.graph);
    if (!order) throw std::invalid_argument("sample: graph contains a cycle");

    // parent lists in topological elimination order
    std::vector<std::vector<std::pair<int, double>>> parents(d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i)
            if (i != j && spec.graph.adj(i, j) != 0.0)
                parents[j].emplace_back(i, spec.graph.adj(i, j));

    Dataset data;
    data.n = n;
    data.d = d;
    data.seed = seed;
    data.values.resize(n, d);

    std::vector<double> noise(d);
    for (int r = 0; r < n; ++r) {
        Rng rng(derive_stream(seed, static_cast<std::uint64_t>(r)));
        for (int j = 0; j < d; ++j) noise[j] = draw_noise(rng, spec.noise_kind, spec.noise_scales[j]);
        for (int j : *order) {
            double v = noise[j];
            for (auto& [p, beta] : parents[j]) v += beta * data.values(r, p);
            data.values(r, j) = v;
        }
    }
    return data;
}

Eigen::MatrixXd implied_covariance(const SemSpec& spec) {
    const int d = spec.graph.d;
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(d, d) - spec.graph.adj;
    Eigen::MatrixXd dmat = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < d; ++i) dmat(i, i) = spec.noise_scales[i] * spec.noise_scales[i];
    Eigen::MatrixXd ainv_t = a.transpose().fullPivLu().solve(Eigen::MatrixXd::Identity(d, d));
    return ainv_t * dmat * ainv_t.transpose();
}

std::string to_csv(const Dataset& data) {
    std::ostringstream ss;
    for (int r = 0; r < data.n; ++r) {
        for (int c = 0; c < data.d; ++c) {
            if (c) ss << ",";
            ss << fmt_double(data.values(r, c));
        }
        ss << "\n";
    }
    return ss.str();
}

Dataset parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && rows.back().size() != row.size())
            throw std::runtime_error("csv: ragged rows");
        rows.push_back(std::move(row));
    }
    Dataset data;
    data.n = static_cast<int>(rows.size());
    data.d = rows.empty() ? 0 : static_cast<int>(rows[0].size());
    data.values.resize(data.n, data.d);
    for (int r = 0; r < data.n; ++r)
        for (int c = 0; c < data.d; ++c) data.values(r, c) = rows[r][c];
    return data;
}

void save_csv(const Dataset& data, const std::string& path) { write_file(path, to_csv(data)); }

Dataset load_csv(const std::string& path) { return parse_csv(read_file(path)); }

}  // namespace dcilp
