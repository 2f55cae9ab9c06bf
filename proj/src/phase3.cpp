#include "dcilp/phase3.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <stdexcept>

namespace dcilp::phase3 {

const char* to_string(WeightScheme s) {
    switch (s) {
        case WeightScheme::LP1: return "LP1";
        case WeightScheme::LP2: return "LP2";
        case WeightScheme::LP3: return "LP3";
        default: return "LP4";
    }
}

WeightScheme weight_scheme_from_string(const std::string& s) {
    if (s == "LP1" || s == "lp1") return WeightScheme::LP1;
    if (s == "LP2" || s == "lp2") return WeightScheme::LP2;
    if (s == "LP3" || s == "lp3") return WeightScheme::LP3;
    if (s == "LP4" || s == "lp4") return WeightScheme::LP4;
    throw std::invalid_argument("unknown weighting scheme: " + s);
}

MergedGraph naive_merge(const std::vector<phase2::LocalResult>& locals, int d) {
    MergedGraph merged;
    merged.d = d;
    merged.b_hat = Eigen::MatrixXd::Zero(d, d);
    for (const auto& local : locals) {
        for (auto& [s, t] : local.edges) {
            if (s < 0 || s >= d || t < 0 || t >= d || s == t)
                throw std::invalid_argument("naive_merge: edge index out of range");
            if (s != local.center && t != local.center)
                throw std::invalid_argument("naive_merge: local edge outside the center cross");
            merged.b_hat(s, t) += 1.0;
        }
    }
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (merged.b_hat(i, j) > 2.0)
                throw std::invalid_argument(
                    "naive_merge: entry above 2 signals a violated center restriction");
    return merged;
}

ConflictType classify_pair(int raw_ij, int raw_ji) {
    if (raw_ij > raw_ji) std::swap(raw_ij, raw_ji);  // status is symmetric
    if (raw_ij == 0 && raw_ji == 0) return ConflictType::none;
    if (raw_ij == 0 && raw_ji == 2) return ConflictType::none;
    if (raw_ij == 2 && raw_ji == 2) return ConflictType::none;
    if (raw_ij == 0 && raw_ji == 1) return ConflictType::type1_addition;
    if (raw_ij == 1 && raw_ji == 1) return ConflictType::type2_acute;
    if (raw_ij == 1 && raw_ji == 2) return ConflictType::type3_undirected;
    throw std::invalid_argument("classify_pair: raw entries must lie in {0,1,2}");
}

ConflictReport classify_conflicts(const std::vector<phase2::LocalResult>& locals, int d) {
    const MergedGraph raw = naive_merge(locals, d);
    ConflictReport report;
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            const auto type = classify_pair(static_cast<int>(raw.b_hat(i, j)),
                                            static_cast<int>(raw.b_hat(j, i)));
            switch (type) {
                case ConflictType::none: ++report.none; break;
                case ConflictType::type1_addition: ++report.type1_addition; break;
                case ConflictType::type2_acute: ++report.type2_acute; break;
                case ConflictType::type3_undirected: ++report.type3_undirected; break;
            }
            if (type != ConflictType::none) report.pairs.push_back({{i, j}, type});
        }
    }
    return report;
}

std::string conflicts_to_json(const ConflictReport& report) {
    std::ostringstream ss;
    ss << "{\"none\": " << report.none << ", \"type1_addition\": " << report.type1_addition
       << ", \"type2_acute\": " << report.type2_acute
       << ", \"type3_undirected\": " << report.type3_undirected << "}";
    return ss.str();
}

namespace {

std::pair<double, double> weight_pair(int ij, int ji, WeightScheme scheme) {
    auto indicator = [](int v) { return v > 0 ? 1.0 : 0.0; };
    switch (scheme) {
        case WeightScheme::LP1:
            return {indicator(ij), indicator(ji)};
        case WeightScheme::LP2:
            return {static_cast<double>(ij), static_cast<double>(ji)};
        case WeightScheme::LP3:
            if (ij == 2 && ji == 1) return {2.0, 0.0};
            if (ij == 1 && ji == 2) return {0.0, 2.0};
            return {static_cast<double>(ij), static_cast<double>(ji)};
        default: {  // LP4
            if (ij == 0 && ji == 1) return {0.0, 0.5};
            if (ij == 1 && ji == 0) return {0.5, 0.0};
            if (ij == 1 && ji == 1) return {0.5, 0.5};
            if (ij == 2 && ji == 1) return {2.0 / 3.0, 0.0};
            if (ij == 1 && ji == 2) return {0.0, 2.0 / 3.0};
            return {indicator(ij), indicator(ji)};  // agreement pairs
        }
    }
}

}  // namespace

MergedGraph apply_weighting(const MergedGraph& raw, WeightScheme scheme) {
    MergedGraph out;
    out.d = raw.d;
    out.b_hat = Eigen::MatrixXd::Zero(raw.d, raw.d);
    out.weighted = true;
    out.scheme = scheme;
    for (int i = 0; i < raw.d; ++i) {
        for (int j = i + 1; j < raw.d; ++j) {
            const int ij = static_cast<int>(raw.b_hat(i, j));
            const int ji = static_cast<int>(raw.b_hat(j, i));
            if (ij < 0 || ij > 2 || ji < 0 || ji > 2)
                throw std::invalid_argument("apply_weighting: raw entries must lie in {0,1,2}");
            const auto [wij, wji] = weight_pair(ij, ji, scheme);
            out.b_hat(i, j) = wij;
            out.b_hat(j, i) = wji;
        }
    }
    return out;
}

IlpBuild build_ilp(const MergedGraph& weighted, const phase1::MarkovBlankets& mbs) {
    const int d = weighted.d;
    if (mbs.d() != d) throw std::invalid_argument("build_ilp: dimension mismatch");
    const Eigen::MatrixXd& w = weighted.b_hat;

    IlpBuild build;
    build.d = d;
    auto mutual = [&](int i, int j) { return mbs.contains(i, j) && mbs.contains(j, i); };

    // variables: B_ij, B_ji, S_ij per mutual-blanket pair, then V_ijk triples
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            if (!mutual(i, j)) continue;
            pairs.emplace_back(i, j);
            std::ostringstream bij, bji, sij;
            bij << "B_" << i << "_" << j;
            bji << "B_" << j << "_" << i;
            sij << "S_" << i << "_" << j;
            build.b_var[{i, j}] = build.model.add_var(bij.str(), w(i, j));
            build.b_var[{j, i}] = build.model.add_var(bji.str(), w(j, i));
            build.s_var[{i, j}] = build.model.add_var(sij.str(), 0.0);
        }
    }
    // V_ijk is fixed to zero when the merge lacks support for i->k or j->k;
    // such variables are simply not created, and the v-structure cap below is
    // emitted with the zero substituted
    for (auto& [i, j] : pairs) {
        for (int k = 0; k < d; ++k) {
            if (k == i || k == j) continue;
            if (!mutual(i, k) || !mutual(j, k)) continue;
            if (w(i, k) == 0.0 || w(j, k) == 0.0) continue;
            std::ostringstream name;
            name << "V_" << i << "_" << j << "_" << k;
            build.v_var[{i, j, k}] = build.model.add_var(name.str(), 0.0);
        }
    }

    // support fixings
    for (auto& [i, j] : pairs) {
        if (w(i, j) == 0.0 && w(j, i) == 0.0) {
            build.model.fix(build.b_var[{i, j}], 0);
            build.model.fix(build.b_var[{j, i}], 0);
        }
        bool has_v = false;
        for (int k = 0; k < d && !has_v; ++k)
            has_v = build.v_var.count({i, j, k}) > 0;
        if (!has_v) build.model.fix(build.s_var[{i, j}], 0);
    }

    int row_id = 0;
    auto next_name = [&row_id]() { return "c" + std::to_string(++row_id); };

    // blanket cover: B_ij + B_ji + S_ij >= 1, dropped when all three are fixed off
    for (auto& [i, j] : pairs) {
        const int bij = build.b_var[{i, j}], bji = build.b_var[{j, i}], sij = build.s_var[{i, j}];
        const bool dead = build.model.fixed[bij] == 0 && build.model.fixed[bji] == 0 &&
                          build.model.fixed[sij] == 0;
        if (dead) {
            build.dropped_pairs.emplace_back(i, j);
            continue;
        }
        build.model.add_row(next_name(), {{bij, 1}, {bji, 1}, {sij, 1}}, ilp::Sense::ge, 1);
    }
    // 2-cycle exclusion
    for (auto& [i, j] : pairs)
        build.model.add_row(next_name(), {{build.b_var[{i, j}], 1}, {build.b_var[{j, i}], 1}},
                            ilp::Sense::le, 1);
    // v-structure linking per created V variable
    for (auto& [key, vv] : build.v_var) {
        const auto [i, j, k] = key;
        const int bik = build.b_var[{i, k}], bjk = build.b_var[{j, k}];
        const int sij = build.s_var[{i, j}];
        build.model.add_row(next_name(), {{vv, 1}, {bik, -1}}, ilp::Sense::le, 0);
        build.model.add_row(next_name(), {{vv, 1}, {bjk, -1}}, ilp::Sense::le, 0);
        build.model.add_row(next_name(), {{bik, 1}, {bjk, 1}, {vv, -1}}, ilp::Sense::le, 1);
        build.model.add_row(next_name(), {{vv, 1}, {sij, -1}}, ilp::Sense::le, 0);
    }
    // spouse support: S_ij <= sum_k V_ijk over surviving triples
    for (auto& [i, j] : pairs) {
        std::vector<std::pair<int, int>> terms{{build.s_var[{i, j}], 1}};
        for (int k = 0; k < d; ++k) {
            auto it = build.v_var.find({i, j, k});
            if (it != build.v_var.end()) terms.emplace_back(it->second, -1);
        }
        if (terms.size() > 1)
            build.model.add_row(next_name(), std::move(terms), ilp::Sense::le, 0);
    }
    return build;
}

std::vector<phase2::LocalResult> locals_from_truth(const CausalGraph& truth) {
    std::vector<phase2::LocalResult> locals(truth.d);
    for (int c = 0; c < truth.d; ++c) {
        locals[c].center = c;
        for (int v = 0; v < truth.d; ++v) {
            if (v == c) continue;
            if (truth.adj(v, c) != 0.0) locals[c].edges.emplace_back(v, c);
            if (truth.adj(c, v) != 0.0) locals[c].edges.emplace_back(c, v);
        }
    }
    return locals;
}

std::vector<std::uint8_t> truth_assignment(const IlpBuild& build, const CausalGraph& truth) {
    std::vector<std::uint8_t> asg(build.model.num_vars(), 0);
    for (auto& [pair, var] : build.b_var)
        asg[var] = truth.adj(pair.first, pair.second) != 0.0 ? 1 : 0;
    // V follows the constraint truth table: both cause edges present
    for (auto& [key, var] : build.v_var) {
        const auto [i, j, k] = key;
        asg[var] = (truth.adj(i, k) != 0.0 && truth.adj(j, k) != 0.0) ? 1 : 0;
    }
    for (auto& [pair, var] : build.s_var) {
        const auto [i, j] = pair;
        std::uint8_t s = 0;
        for (int k = 0; k < build.d && !s; ++k) {
            auto it = build.v_var.find({i, j, k});
            if (it != build.v_var.end() && asg[it->second]) s = 1;
        }
        asg[var] = s;
    }
    return asg;
}

bool ground_truth_feasibility(const CausalGraph& truth, const phase1::MarkovBlankets& mbs_true) {
    if (!is_dag(truth)) throw std::invalid_argument("ground_truth_feasibility: truth not a DAG");
    const auto locals = locals_from_truth(truth);
    const MergedGraph raw = naive_merge(locals, truth.d);
    const MergedGraph weighted = apply_weighting(raw, WeightScheme::LP3);
    const IlpBuild build = build_ilp(weighted, mbs_true);
    const auto asg = truth_assignment(build, truth);
    return ilp::verify(build.model, asg).ok;
}

CausalGraph solution_to_graph(const IlpBuild& build, const std::vector<std::uint8_t>& assignment) {
    CausalGraph g(build.d);
    for (auto& [pair, var] : build.b_var)
        if (assignment[var]) g.adj(pair.first, pair.second) = 1.0;
    return g;
}

CausalGraph select_solution(const IlpBuild& build, const ilp::SolutionPool& pool) {
    if (pool.solutions.empty()) throw std::invalid_argument("select_solution: empty pool");
    int best = -1;
    double best_h = 0.0;
    int best_edges = 0;
    std::vector<std::pair<int, int>> best_edge_list;
    for (size_t s = 0; s < pool.solutions.size(); ++s) {
        const CausalGraph g = solution_to_graph(build, pool.solutions[s]);
        const double h = dagness(g);
        const auto edge_list = g.edges();
        const int edges = static_cast<int>(edge_list.size());
        bool take = best < 0;
        if (!take) {
            if (h < best_h - 1e-9) take = true;
            else if (h <= best_h + 1e-9) {
                if (edges < best_edges) take = true;
                else if (edges == best_edges && edge_list < best_edge_list) take = true;
            }
        }
        if (take) {
            best = static_cast<int>(s);
            best_h = h;
            best_edges = edges;
            best_edge_list = edge_list;
        }
    }
    return solution_to_graph(build, pool.solutions[best]);
}

std::vector<int> find_directed_cycle(const CausalGraph& g) {
    const int d = g.d;
    std::vector<int> best;
    for (int s = 0; s < d; ++s) {
        // shortest path back to s via BFS
        std::vector<int> parent(d, -1), dist(d, -1);
        std::deque<int> queue{s};
        dist[s] = 0;
        int closer = -1;
        while (!queue.empty() && closer < 0) {
            const int u = queue.front();
            queue.pop_front();
            for (int v = 0; v < d; ++v) {
                if (u == v || g.adj(u, v) == 0.0) continue;
                if (v == s) {
                    closer = u;
                    break;
                }
                if (dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if (closer >= 0) {
            std::vector<int> cycle;
            for (int u = closer; u != -1; u = parent[u]) cycle.push_back(u);
            std::reverse(cycle.begin(), cycle.end());  // starts at s, ends at closer
            if (best.empty() || cycle.size() < best.size()) best = cycle;
            if (!best.empty()) return best;  // first found wins
        }
    }
    return best;
}

namespace {

// The cover rows are consistent under true blankets (the truth assignment
// satisfies them) but estimated blankets can force contradictory spouse
// chains, making the whole model infeasible. Recover by dropping a minimal-ish
// set of cover rows: repeatedly binary-search the first row that is essential
// to some conflict, remove it, and retry. Returns the dropped pairs.
std::vector<std::pair<int, int>> relax_covers(ilp::IlpModel& model, const IlpBuild& build,
                                              double budget) {
    std::vector<int> s_var_to_pair(model.num_vars(), -1);
    std::vector<std::pair<int, int>> pair_of;
    for (auto& [pair, var] : build.s_var) {
        s_var_to_pair[var] = static_cast<int>(pair_of.size());
        pair_of.push_back(pair);
    }
    auto cover_pair = [&](const ilp::Constraint& row) -> int {
        if (row.sense != ilp::Sense::ge) return -1;
        for (auto& [v, c] : row.terms)
            if (s_var_to_pair[v] >= 0) return s_var_to_pair[v];
        return -1;
    };
    auto feasible_without = [&](const std::vector<char>& removed) {
        ilp::IlpModel probe = model;
        probe.rows.clear();
        for (size_t r = 0; r < model.rows.size(); ++r)
            if (!removed[r]) probe.rows.push_back(model.rows[r]);
        return ilp::solve(probe, 1, budget).status != ilp::SolveStatus::infeasible;
    };

    std::vector<int> cover_rows;
    for (size_t r = 0; r < model.rows.size(); ++r)
        if (cover_pair(model.rows[r]) >= 0) cover_rows.push_back(static_cast<int>(r));

    std::vector<char> dropped(model.rows.size(), 0);
    std::vector<std::pair<int, int>> dropped_pairs;
    while (!feasible_without(dropped)) {
        std::vector<int> active;
        for (int r : cover_rows)
            if (!dropped[r]) active.push_back(r);
        if (active.empty()) break;  // cannot happen: the coverless model is feasible
        // smallest prefix of dropped cover rows that restores feasibility
        int lo = 1, hi = static_cast<int>(active.size());
        while (lo < hi) {
            const int mid = (lo + hi) / 2;
            std::vector<char> probe = dropped;
            for (int t = 0; t < mid; ++t) probe[active[t]] = 1;
            if (feasible_without(probe)) hi = mid;
            else lo = mid + 1;
        }
        const int essential = active[lo - 1];  // last row of the minimal prefix
        dropped[essential] = 1;
        dropped_pairs.push_back(pair_of[cover_pair(model.rows[essential])]);
    }
    std::vector<ilp::Constraint> kept;
    for (size_t r = 0; r < model.rows.size(); ++r)
        if (!dropped[r]) kept.push_back(std::move(model.rows[r]));
    model.rows = std::move(kept);
    return dropped_pairs;
}

}  // namespace

RepairResult cycle_repair(const IlpBuild& build, int pool_capacity, double time_budget_s,
                          int max_rounds) {
    if (max_rounds < 1) throw std::invalid_argument("cycle_repair: max_rounds must be >= 1");
    IlpBuild working = build;

    RepairResult result;
    bool have_solution = false;
    int cut_id = 0;

    for (int round = 1; round <= max_rounds; ++round) {
        ilp::SolutionPool pool = ilp::solve(working.model, pool_capacity, time_budget_s);
        if (pool.status == ilp::SolveStatus::infeasible) {
            const auto relaxed = relax_covers(working.model, working, time_budget_s);
            result.relaxed_pairs.insert(result.relaxed_pairs.end(), relaxed.begin(),
                                        relaxed.end());
            pool = ilp::solve(working.model, pool_capacity, time_budget_s);
        }
        result.rounds = round;
        result.status = pool.status;
        result.nodes += pool.stats.nodes;
        result.propagations += pool.stats.propagations;
        result.wall_ms += pool.stats.wall_ms;
        if (pool.solutions.empty()) break;  // out of budget

        for (const auto& s : pool.solutions) {
            const auto check = ilp::verify(working.model, s);
            if (!check.ok)
                throw std::logic_error("cycle_repair: solver returned an assignment violating " +
                                       check.violated.front());
        }
        const CausalGraph g = select_solution(working, pool);
        const double h = dagness(g);
        if (!have_solution || h < result.dagness_value - 1e-12) {
            result.graph = g;
            result.dagness_value = h;
            result.is_dag = is_dag(g);
            have_solution = true;
        }
        if (result.is_dag) return result;

        const std::vector<int> cycle = find_directed_cycle(g);
        std::vector<std::pair<int, int>> terms;
        for (size_t t = 0; t < cycle.size(); ++t) {
            const int u = cycle[t], v = cycle[(t + 1) % cycle.size()];
            terms.emplace_back(working.b_var.at({u, v}), 1);
        }
        working.model.add_row("cyc" + std::to_string(++cut_id), std::move(terms), ilp::Sense::le,
                              static_cast<int>(cycle.size()) - 1);
    }
    if (!have_solution) {
        result.graph = CausalGraph(build.d);
        result.dagness_value = dagness(result.graph);
        result.is_dag = true;
    }
    result.non_dag_warning = !result.is_dag || result.status != ilp::SolveStatus::optimal;
    return result;
}

}  // namespace dcilp::phase3
