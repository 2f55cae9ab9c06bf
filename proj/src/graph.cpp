#include "dcilp/graph.hpp"

#include "dcilp/io.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dcilp {

int CausalGraph::nnz() const {
    int count = 0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j && adj(i, j) != 0.0) ++count;
    return count;
}

std::vector<std::pair<int, int>> CausalGraph::edges() const {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j && adj(i, j) != 0.0) out.emplace_back(i, j);
    return out;
}

std::optional<std::vector<int>> topological_order(const CausalGraph& g) {
    const int d = g.d;
    std::vector<int> indegree(d, 0);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j && g.adj(i, j) != 0.0) ++indegree[j];

    std::vector<int> order;
    order.reserve(d);
    std::vector<int> ready;
    for (int i = d - 1; i >= 0; --i)
        if (indegree[i] == 0) ready.push_back(i);  // pop_back gives lowest index first

    while (!ready.empty()) {
        std::sort(ready.rbegin(), ready.rend());
        int u = ready.back();
        ready.pop_back();
        order.push_back(u);
        for (int j = 0; j < d; ++j) {
            if (j != u && g.adj(u, j) != 0.0) {
                if (--indegree[j] == 0) ready.push_back(j);
            }
        }
    }
    if (static_cast<int>(order.size()) != d) return std::nullopt;
    return order;
}

bool is_dag(const CausalGraph& g) { return topological_order(g).has_value(); }

namespace {

double trace_exp(const Eigen::MatrixXd& m) {
    const int d = static_cast<int>(m.rows());
    if (d == 0) return 0.0;

    // scale so the series converges fast, then square back
    double norm = 0.0;
    for (int i = 0; i < d; ++i) norm = std::max(norm, m.row(i).cwiseAbs().sum());
    int squarings = 0;
    while (norm > 1.0 && squarings < 60) {
        norm /= 2.0;
        ++squarings;
    }
    const Eigen::MatrixXd a = m / std::pow(2.0, squarings);

    Eigen::MatrixXd result = Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(d, d);
    for (int k = 1; k <= 80; ++k) {
        term = (term * a) / static_cast<double>(k);
        result += term;
        if (term.cwiseAbs().maxCoeff() < 1e-18 * std::max(1.0, result.cwiseAbs().maxCoeff())) break;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result.trace();
}

}  // namespace

double dagness(const CausalGraph& g) {
    return trace_exp(g.adj.cwiseProduct(g.adj));
}

MetricsReport metrics(const CausalGraph& estimate, const CausalGraph& truth) {
    if (estimate.d != truth.d)
        throw std::invalid_argument("metrics: dimension mismatch");
    if (!is_dag(truth))
        throw std::invalid_argument("metrics: truth graph is not a DAG");
    const int d = truth.d;

    int tp = 0, rev = 0, fp = 0, p = 0;
    int skel_extra = 0, skel_missing = 0;
    int t = 0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j && truth.adj(i, j) != 0.0) ++t;

    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            const bool est_ij = estimate.adj(i, j) != 0.0;
            const bool est_ji = estimate.adj(j, i) != 0.0;
            const bool tru_ij = truth.adj(i, j) != 0.0;
            const bool tru_ji = truth.adj(j, i) != 0.0;
            const bool est_any = est_ij || est_ji;
            const bool tru_any = tru_ij || tru_ji;
            if (est_any && !tru_any) ++skel_extra;
            if (!est_any && tru_any) ++skel_missing;
            if (!est_any) continue;
            ++p;
            if (est_ij && est_ji) {
                // undirected estimate edge: one reversal if the skeleton is
                // right, a false positive otherwise
                if (tru_any) ++rev; else ++fp;
            } else {
                const bool fwd = est_ij;  // which direction is asserted
                const bool hit = fwd ? tru_ij : tru_ji;
                const bool rhit = fwd ? tru_ji : tru_ij;
                if (hit) ++tp;
                else if (rhit) ++rev;
                else ++fp;
            }
        }
    }

    MetricsReport rep;
    rep.edge_count = p;
    rep.shd = skel_extra + skel_missing + rev;
    rep.tpr = (t > 0) ? static_cast<double>(tp) / t : 1.0;
    rep.fdr = (p > 0) ? static_cast<double>(rev + fp) / p : 0.0;
    const long long f = static_cast<long long>(d) * (d - 1) / 2 - t;
    rep.fpr = (f > 0) ? static_cast<double>(rev + fp) / static_cast<double>(f) : 0.0;
    return rep;
}

std::vector<std::vector<int>> true_markov_blankets(const CausalGraph& dag) {
    const int d = dag.d;
    std::vector<std::set<int>> mb(d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            if (i == j) continue;
            if (dag.adj(i, j) != 0.0 || dag.adj(j, i) != 0.0) {
                mb[i].insert(j);
                mb[j].insert(i);
            }
        }
    }
    // spouses: co-parents of a common child
    for (int k = 0; k < d; ++k) {
        std::vector<int> parents;
        for (int i = 0; i < d; ++i)
            if (i != k && dag.adj(i, k) != 0.0) parents.push_back(i);
        for (size_t a = 0; a < parents.size(); ++a)
            for (size_t b = a + 1; b < parents.size(); ++b) {
                mb[parents[a]].insert(parents[b]);
                mb[parents[b]].insert(parents[a]);
            }
    }
    std::vector<std::vector<int>> out(d);
    for (int i = 0; i < d; ++i) out[i].assign(mb[i].begin(), mb[i].end());
    return out;
}

std::string to_edge_list(const CausalGraph& g) {
    std::ostringstream ss;
    ss << "# d " << g.d << "\n";
    for (int i = 0; i < g.d; ++i)
        for (int j = 0; j < g.d; ++j)
            if (i != j && g.adj(i, j) != 0.0)
                ss << i << " " << j << " " << fmt_double(g.adj(i, j)) << "\n";
    return ss.str();
}

CausalGraph parse_edge_list(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int d = -1;
    std::vector<std::tuple<int, int, double>> triples;
    int max_index = -1;
    while (std::getline(in, line)) {
        // strip comments, but honor the "# d <n>" header
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            std::istringstream hs(line.substr(hash + 1));
            std::string tag;
            int val;
            if (hs >> tag >> val && tag == "d") d = val;
            line = line.substr(0, hash);
        }
        std::istringstream ls(line);
        int src, dst;
        double w;
        if (ls >> src >> dst >> w) {
            if (src < 0 || dst < 0) throw std::runtime_error("edge list: negative index");
            triples.emplace_back(src, dst, w);
            max_index = std::max(max_index, std::max(src, dst));
        }
    }
    if (d < 0) d = max_index + 1;
    if (max_index >= d) throw std::runtime_error("edge list: index exceeds declared d");
    CausalGraph g(std::max(d, 0));
    for (auto& [s, t, w] : triples) {
        if (s == t) throw std::runtime_error("edge list: self loop");
        g.adj(s, t) = w;
    }
    return g;
}

void save_edge_list(const CausalGraph& g, const std::string& path) {
    write_file(path, to_edge_list(g));
}

CausalGraph load_edge_list(const std::string& path) {
    return parse_edge_list(read_file(path));
}

std::string metrics_to_json(const MetricsReport& m) {
    std::ostringstream ss;
    ss << "{\"tpr\": " << fmt_double(m.tpr) << ", \"fdr\": " << fmt_double(m.fdr)
       << ", \"fpr\": " << fmt_double(m.fpr) << ", \"shd\": " << m.shd
       << ", \"nnz\": " << m.edge_count << "}";
    return ss.str();
}

CausalGraph binarize(const CausalGraph& g) {
    CausalGraph out(g.d);
    for (int i = 0; i < g.d; ++i)
        for (int j = 0; j < g.d; ++j)
            if (i != j && g.adj(i, j) != 0.0) out.adj(i, j) = 1.0;
    return out;
}

}  // namespace dcilp
