#pragma once

// Independent reference implementations used as test oracles. These must not
// share code paths with the library routines they check.

#include "dcilp/graph.hpp"
#include "dcilp/ilp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

namespace oracle {

// trace of exp(M) by a plain truncated power series (>= 30 terms)
inline double trace_exp_series(const Eigen::MatrixXd& m, int terms = 40) {
    const int d = static_cast<int>(m.rows());
    Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(d, d);
    for (int k = 1; k <= terms; ++k) {
        term = (term * m) / static_cast<double>(k);
        sum += term;
    }
    return sum.trace();
}

// acyclicity by DFS three-coloring (independent of the library's Kahn sort)
inline bool acyclic_ref(const Eigen::MatrixXd& adj) {
    const int d = static_cast<int>(adj.rows());
    std::vector<int> color(d, 0);
    std::vector<std::pair<int, int>> stack;
    for (int s = 0; s < d; ++s) {
        if (color[s]) continue;
        stack.push_back({s, 0});
        color[s] = 1;
        while (!stack.empty()) {
            auto& [u, next] = stack.back();
            bool descended = false;
            for (int v = next; v < d; ++v) {
                if (v == u || adj(u, v) == 0.0) continue;
                next = v + 1;
                if (color[v] == 1) return false;
                if (color[v] == 0) {
                    color[v] = 1;
                    stack.push_back({v, 0});
                    descended = true;
                    break;
                }
            }
            if (!descended) {
                color[u] = 2;
                stack.pop_back();
            }
        }
    }
    return true;
}

// every off-diagonal 0/1 digraph on d nodes (use d <= 4)
inline std::vector<Eigen::MatrixXd> all_digraphs(int d) {
    const int cells = d * (d - 1);
    std::vector<Eigen::MatrixXd> out;
    out.reserve(1u << cells);
    for (std::uint32_t bits = 0; bits < (1u << cells); ++bits) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
        int c = 0;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (i != j) m(i, j) = (bits >> c++) & 1u;
        out.push_back(std::move(m));
    }
    return out;
}

inline std::vector<Eigen::MatrixXd> all_dags(int d) {
    std::vector<Eigen::MatrixXd> out;
    for (auto& m : all_digraphs(d))
        if (acyclic_ref(m)) out.push_back(m);
    return out;
}

// d-separation via the moralized ancestral graph
inline bool d_separated(const dcilp::CausalGraph& g, int x, int y, const std::vector<int>& z) {
    const int d = g.d;
    std::vector<char> in_z(d, 0);
    for (int v : z) in_z[v] = 1;
    if (x == y || in_z[x] || in_z[y]) return false;

    // ancestors of {x, y} union z
    std::vector<char> anc(d, 0);
    std::vector<int> stack{x, y};
    for (int v : z) stack.push_back(v);
    for (int v : stack) anc[v] = 1;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int p = 0; p < d; ++p) {
            if (p != u && g.adj(p, u) != 0.0 && !anc[p]) {
                anc[p] = 1;
                stack.push_back(p);
            }
        }
    }

    // moralize the ancestral subgraph
    std::vector<std::vector<char>> und(d, std::vector<char>(d, 0));
    for (int i = 0; i < d; ++i) {
        if (!anc[i]) continue;
        for (int j = 0; j < d; ++j) {
            if (i == j || !anc[j]) continue;
            if (g.adj(i, j) != 0.0) und[i][j] = und[j][i] = 1;
        }
    }
    for (int k = 0; k < d; ++k) {
        if (!anc[k]) continue;
        std::vector<int> parents;
        for (int p = 0; p < d; ++p)
            if (p != k && anc[p] && g.adj(p, k) != 0.0) parents.push_back(p);
        for (size_t a = 0; a < parents.size(); ++a)
            for (size_t b = a + 1; b < parents.size(); ++b)
                und[parents[a]][parents[b]] = und[parents[b]][parents[a]] = 1;
    }

    // x-y connectivity avoiding z
    std::vector<char> seen(d, 0);
    stack.assign(1, x);
    seen[x] = 1;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int v = 0; v < d; ++v) {
            if (!und[u][v] || seen[v] || in_z[v]) continue;
            if (v == y) return false;
            seen[v] = 1;
            stack.push_back(v);
        }
    }
    return true;
}

// pairwise-Markov blanket: j is in MB(i) iff i and j are d-connected given
// everything else
inline std::vector<int> mb_from_dsep(const dcilp::CausalGraph& g, int i) {
    std::vector<int> mb;
    for (int j = 0; j < g.d; ++j) {
        if (j == i) continue;
        std::vector<int> rest;
        for (int v = 0; v < g.d; ++v)
            if (v != i && v != j) rest.push_back(v);
        if (!d_separated(g, i, j, rest)) mb.push_back(j);
    }
    return mb;
}

// exhaustive 0/1 enumeration of a small model
struct BruteResult {
    bool feasible = false;
    double optimum = 0.0;
    std::vector<std::vector<std::uint8_t>> optimal;  // capped
};

inline BruteResult brute_force(const dcilp::ilp::IlpModel& model, size_t cap = 1u << 20) {
    const int n = model.num_vars();
    BruteResult res;
    for (std::uint64_t bits = 0; bits < (1ull << n); ++bits) {
        std::vector<std::uint8_t> asg(n);
        bool ok = true;
        for (int v = 0; v < n; ++v) {
            asg[v] = (bits >> v) & 1ull;
            if (model.fixed[v] >= 0 && asg[v] != model.fixed[v]) ok = false;
        }
        if (!ok) continue;
        for (const auto& row : model.rows) {
            long lhs = 0;
            for (auto& [v, c] : row.terms) lhs += static_cast<long>(c) * asg[v];
            if (row.sense == dcilp::ilp::Sense::le && lhs > row.rhs) ok = false;
            if (row.sense == dcilp::ilp::Sense::ge && lhs < row.rhs) ok = false;
            if (row.sense == dcilp::ilp::Sense::eq && lhs != row.rhs) ok = false;
            if (!ok) break;
        }
        if (!ok) continue;
        double obj = 0.0;
        for (int v = 0; v < n; ++v) obj += model.objective[v] * asg[v];
        if (!res.feasible || obj > res.optimum + 1e-9) {
            res.feasible = true;
            res.optimum = obj;
            res.optimal.clear();
            res.optimal.push_back(asg);
        } else if (std::abs(obj - res.optimum) <= 1e-9 && res.optimal.size() < cap) {
            res.optimal.push_back(asg);
        }
    }
    return res;
}

// RSS of regressing column y on columns xs, by plain Gaussian elimination
// (no Eigen solvers involved)
inline double rss_ref(const Eigen::MatrixXd& data, int y, const std::vector<int>& xs) {
    const int n = static_cast<int>(data.rows());
    const int k = static_cast<int>(xs.size());
    std::vector<double> mean(data.cols(), 0.0);
    for (int c = 0; c < data.cols(); ++c) mean[c] = data.col(c).mean();
    if (k == 0) {
        double s = 0.0;
        for (int r = 0; r < n; ++r) s += (data(r, y) - mean[y]) * (data(r, y) - mean[y]);
        return s;
    }
    // normal equations
    std::vector<std::vector<double>> a(k, std::vector<double>(k + 1, 0.0));
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j)
            for (int r = 0; r < n; ++r)
                a[i][j] += (data(r, xs[i]) - mean[xs[i]]) * (data(r, xs[j]) - mean[xs[j]]);
        for (int r = 0; r < n; ++r)
            a[i][k] += (data(r, xs[i]) - mean[xs[i]]) * (data(r, y) - mean[y]);
    }
    for (int col = 0; col < k; ++col) {  // partial pivoting
        int piv = col;
        for (int r = col + 1; r < k; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[piv], a[col]);
        if (std::abs(a[col][col]) < 1e-12) a[col][col] += 1e-8;
        for (int r = 0; r < k; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (int c = col; c <= k; ++c) a[r][c] -= f * a[col][c];
        }
    }
    std::vector<double> beta(k);
    for (int i = 0; i < k; ++i) beta[i] = a[i][k] / a[i][i];
    double s = 0.0;
    for (int r = 0; r < n; ++r) {
        double pred = 0.0;
        for (int i = 0; i < k; ++i) pred += beta[i] * (data(r, xs[i]) - mean[xs[i]]);
        const double e = (data(r, y) - mean[y]) - pred;
        s += e * e;
    }
    return s;
}

// decomposable Gaussian BIC of a DAG, built on rss_ref
inline double bic_ref(const Eigen::MatrixXd& data, const Eigen::MatrixXd& dag, double penalty) {
    const int p = static_cast<int>(dag.rows());
    const double n = static_cast<double>(data.rows());
    double total = 0.0;
    for (int j = 0; j < p; ++j) {
        std::vector<int> parents;
        for (int i = 0; i < p; ++i)
            if (i != j && dag(i, j) != 0.0) parents.push_back(i);
        const double rss = rss_ref(data, j, parents);
        total += -0.5 * n * std::log(std::max(rss / n, 1e-12)) -
                 penalty * 0.5 * std::log(n) * parents.size();
    }
    return total;
}

// CPDAG by equivalence-class enumeration: all DAGs sharing skeleton and
// v-structures, orientation kept only where the whole class agrees
inline Eigen::MatrixXd cpdag_by_enumeration(const Eigen::MatrixXd& dag) {
    const int p = static_cast<int>(dag.rows());
    auto skeleton = [&](const Eigen::MatrixXd& m) {
        std::set<std::pair<int, int>> s;
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                if (m(i, j) != 0.0) s.insert({std::min(i, j), std::max(i, j)});
        return s;
    };
    auto vstructs = [&](const Eigen::MatrixXd& m) {
        std::set<std::tuple<int, int, int>> s;
        for (int k = 0; k < p; ++k)
            for (int i = 0; i < p; ++i)
                for (int j = i + 1; j < p; ++j) {
                    if (i == k || j == k) continue;
                    if (m(i, k) != 0.0 && m(j, k) != 0.0 && m(i, j) == 0.0 && m(j, i) == 0.0)
                        s.insert({i, j, k});
                }
        return s;
    };
    const auto skel = skeleton(dag);
    const auto vs = vstructs(dag);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p, p);
    for (auto& m : all_dags(p)) {
        if (skeleton(m) != skel || vstructs(m) != vs) continue;
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                if (m(i, j) != 0.0) out(i, j) = 1.0;
    }
    return out;  // class union: compelled edges single, reversible symmetric
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace oracle
