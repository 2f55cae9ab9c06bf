#include "dcilp/ilp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace dcilp::ilp {

namespace {

constexpr double kEps = 1e-9;

// rows normalized to <= form; '=' becomes two rows
struct NormRow {
    std::vector<std::pair<int, int>> terms;
    int rhs = 0;
    long minact = 0;  // activity lower bound given current partial assignment
};

struct Search {
    int n = 0;
    std::vector<double> obj;
    std::vector<NormRow> rows;
    std::vector<std::vector<std::pair<int, int>>> var_rows;  // var -> (row, coef)
    std::vector<std::int8_t> val;                            // -1 unfixed
    std::vector<int> trail;
    std::vector<char> in_work;
    std::vector<int> work;
    SolverStats stats;
    std::chrono::steady_clock::time_point deadline;
    bool out_of_time = false;

    bool time_ok() {
        if (out_of_time) return false;
        if ((stats.nodes & 1023) == 0 &&
            std::chrono::steady_clock::now() > deadline)
            out_of_time = true;
        return !out_of_time;
    }

    void assign(int v, std::int8_t value) {
        val[v] = value;
        trail.push_back(v);
        for (auto& [r, c] : var_rows[v])
            rows[r].minact += static_cast<long>(c) * value - std::min(c, 0);
    }

    void undo(size_t mark) {
        while (trail.size() > mark) {
            const int v = trail.back();
            trail.pop_back();
            for (auto& [r, c] : var_rows[v])
                rows[r].minact -= static_cast<long>(c) * val[v] - std::min(c, 0);
            val[v] = -1;
        }
    }

    void enqueue_rows_of(int v) {
        for (auto& [r, c] : var_rows[v]) {
            if (!in_work[r]) {
                in_work[r] = 1;
                work.push_back(r);
            }
        }
    }

    // bound propagation to a fixpoint; false on conflict
    bool propagate() {
        while (!work.empty()) {
            const int r = work.back();
            work.pop_back();
            in_work[r] = 0;
            NormRow& row = rows[r];
            if (row.minact > row.rhs) {
                for (int w : work) in_work[w] = 0;
                work.clear();
                return false;
            }
            for (auto& [v, c] : row.terms) {
                if (val[v] >= 0) continue;
                if (row.minact + std::abs(c) > row.rhs) {
                    const std::int8_t forced = c > 0 ? 0 : 1;
                    ++stats.propagations;
                    assign(v, forced);
                    enqueue_rows_of(v);
                }
            }
        }
        return true;
    }

    bool row_inert(const NormRow& row) const {
        long maxact = 0;
        for (auto& [v, c] : row.terms)
            maxact += val[v] >= 0 ? static_cast<long>(c) * val[v] : std::max(c, 0);
        return maxact <= row.rhs;
    }
};

struct DsuFind {
    std::vector<int> parent;
    explicit DsuFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
    void merge(int a, int b) { parent[find(a)] = find(b); }
};

// disjoint "choose at most r of these" groups used to sharpen the bound
struct BoundGroups {
    std::vector<int> group_of;   // -1: ungrouped
    std::vector<int> cap;        // per group: how many members may be 1
    std::vector<std::vector<double>> scratch;
    std::vector<long> stamp;
    long tick = 0;
};

struct CompSearch {
    CompSearch(Search& search, const std::vector<int>& comp_vars, BoundGroups& bound_groups,
               const std::vector<char>& branch_pref)
        : s(search), vars(comp_vars), groups(bound_groups), branch_first(branch_pref) {}

    Search& s;
    const std::vector<int>& vars;  // component variables, ascending
    BoundGroups& groups;
    const std::vector<char>& branch_first;  // vars in capped multi-choice rows
    double incumbent = -std::numeric_limits<double>::infinity();
    std::vector<std::int8_t> best;
    // enumeration phase
    bool enumerating = false;
    double target = 0.0;
    int capacity = 0;
    std::vector<std::vector<std::int8_t>> pool;
    mutable std::vector<int> touched;

    // admissible bound: fixed objective, plus positive coefficients of
    // ungrouped unfixed variables, plus per group the sum of its cap largest
    // positive unfixed coefficients
    double fixed_obj_and_bound(int& branch_var) const {
        double bound = 0.0;
        double best_mag = -1.0;
        int best_pref = -1;
        branch_var = -1;
        ++groups.tick;
        touched.clear();
        for (int v : vars) {
            if (s.val[v] >= 0) {
                bound += s.obj[v] * s.val[v];
                continue;
            }
            const double mag = std::abs(s.obj[v]);
            const int pref = branch_first[v];
            if (pref > best_pref || (pref == best_pref && mag > best_mag)) {
                best_pref = pref;
                best_mag = mag;
                branch_var = v;
            }
            const double pos = std::max(s.obj[v], 0.0);
            const int grp = groups.group_of[v];
            if (grp < 0) {
                bound += pos;
            } else if (pos > 0.0) {
                if (groups.stamp[grp] != groups.tick) {
                    groups.stamp[grp] = groups.tick;
                    groups.scratch[grp].clear();
                    touched.push_back(grp);
                }
                groups.scratch[grp].push_back(pos);
            }
        }
        for (int grp : touched) {
            auto& vals = groups.scratch[grp];
            const int take = groups.cap[grp];
            if (static_cast<int>(vals.size()) > take) {
                std::partial_sort(vals.begin(), vals.begin() + take, vals.end(),
                                  std::greater<double>());
                for (int t = 0; t < take; ++t) bound += vals[t];
            } else {
                for (double v : vals) bound += v;
            }
        }
        return bound;
    }

    std::vector<std::int8_t> snapshot() const {
        std::vector<std::int8_t> out;
        out.reserve(vars.size());
        for (int v : vars) out.push_back(s.val[v]);
        return out;
    }

    void dfs() {
        if (!s.time_ok()) return;
        ++s.stats.nodes;
        int branch_var = -1;
        const double bound = fixed_obj_and_bound(branch_var);
        if (enumerating) {
            if (static_cast<int>(pool.size()) >= capacity) return;
            if (bound < target - kEps) return;
        } else if (bound <= incumbent + kEps) {
            return;
        }
        if (branch_var < 0) {
            // complete assignment; feasibility held by assign/propagate
            if (enumerating) {
                if (bound >= target - kEps) pool.push_back(snapshot());
            } else if (bound > incumbent) {
                incumbent = bound;
                best = snapshot();
                s.stats.incumbent_trace.push_back(bound);
            }
            return;
        }
        const std::int8_t first = s.obj[branch_var] > 0.0 ? 1 : 0;
        for (int pass = 0; pass < 2; ++pass) {
            const std::int8_t value = pass == 0 ? first : static_cast<std::int8_t>(1 - first);
            const size_t mark = s.trail.size();
            s.assign(branch_var, value);
            s.enqueue_rows_of(branch_var);
            if (s.propagate()) dfs();
            s.undo(mark);
            if (s.out_of_time) return;
        }
    }
};

}  // namespace

SolutionPool solve(const IlpModel& model, int pool_capacity, double time_budget_s) {
    if (pool_capacity < 1) throw std::invalid_argument("solve: pool_capacity must be >= 1");
    const int n = model.num_vars();

    Search s;
    s.n = n;
    s.obj = model.objective;
    s.val.assign(n, -1);
    s.var_rows.assign(n, {});
    for (const auto& row : model.rows) {
        auto push = [&](int sign, int rhs_sign) {
            NormRow nr;
            nr.rhs = rhs_sign * row.rhs;
            for (auto& [v, c] : row.terms) nr.terms.emplace_back(v, sign * c);
            for (auto& [v, c] : nr.terms) nr.minact += std::min(c, 0);
            const int idx = static_cast<int>(s.rows.size());
            for (auto& [v, c] : nr.terms) s.var_rows[v].emplace_back(idx, c);
            s.rows.push_back(std::move(nr));
        };
        if (row.sense == Sense::le) push(1, 1);
        else if (row.sense == Sense::ge) push(-1, -1);
        else { push(1, 1); push(-1, -1); }
    }
    s.in_work.assign(s.rows.size(), 0);
    s.deadline = std::chrono::steady_clock::now() +
                 std::chrono::microseconds(static_cast<long long>(time_budget_s * 1e6));

    const auto t0 = std::chrono::steady_clock::now();
    auto finish = [&](SolutionPool pool) {
        pool.stats.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        return pool;
    };

    SolutionPool out;
    out.stats = SolverStats{};

    // root fixings, then propagation
    bool root_ok = true;
    for (int v = 0; v < n && root_ok; ++v) {
        if (model.fixed[v] >= 0) {
            s.assign(v, model.fixed[v]);
            s.enqueue_rows_of(v);
        }
    }
    for (int r = 0; r < static_cast<int>(s.rows.size()); ++r) {
        if (!s.in_work[r]) {
            s.in_work[r] = 1;
            s.work.push_back(r);
        }
    }
    if (!s.propagate()) {
        out.status = SolveStatus::infeasible;
        out.stats = s.stats;
        return finish(out);
    }
    for (int v = 0; v < n; ++v)
        if (s.val[v] >= 0 && model.fixed[v] < 0)
            s.stats.root_fixings.emplace_back(v, s.val[v]);

    // bound groups from unit-coefficient rows: "at most r of these are 1";
    // rows are claimed greedily by how much they tighten the root bound
    BoundGroups groups;
    groups.group_of.assign(n, -1);
    {
        struct Candidate {
            double benefit;
            int order;
            std::vector<int> members;
            int cap;
        };
        std::vector<Candidate> cands;
        for (size_t r = 0; r < s.rows.size(); ++r) {
            const NormRow& row = s.rows[r];
            bool unit = true;
            for (auto& [v, c] : row.terms) unit = unit && c == 1;
            if (!unit) continue;
            std::vector<int> members;
            int cap = row.rhs;
            for (auto& [v, c] : row.terms) {
                if (s.val[v] < 0) members.push_back(v);
                else cap -= s.val[v];
            }
            if (members.size() < 2 || cap < 1 || cap >= static_cast<int>(members.size()))
                continue;
            std::vector<double> pos;
            for (int v : members) pos.push_back(std::max(s.obj[v], 0.0));
            std::sort(pos.begin(), pos.end(), std::greater<double>());
            double benefit = 0.0;
            for (size_t t = cap; t < pos.size(); ++t) benefit += pos[t];
            if (benefit <= 0.0) continue;
            cands.push_back({benefit, static_cast<int>(r), std::move(members), cap});
        }
        std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
            return a.benefit != b.benefit ? a.benefit > b.benefit : a.order < b.order;
        });
        for (const auto& cand : cands) {
            bool fresh = true;
            for (int v : cand.members) fresh = fresh && groups.group_of[v] < 0;
            if (!fresh) continue;
            const int id = static_cast<int>(groups.cap.size());
            for (int v : cand.members) groups.group_of[v] = id;
            groups.cap.push_back(cand.cap);
        }
        groups.scratch.assign(groups.cap.size(), {});
        groups.stamp.assign(groups.cap.size(), 0);
    }

    // resolve capped multi-choice rows (e.g. cycle cuts) before plateau
    // variables, otherwise proving optimality wanders equal-bound subtrees
    std::vector<char> branch_first(n, 0);
    for (const auto& row : s.rows) {
        if (row.rhs < 2) continue;
        bool unit = true;
        int unfixed = 0;
        for (auto& [v, c] : row.terms) {
            unit = unit && c == 1;
            unfixed += s.val[v] < 0;
        }
        if (!unit || row.rhs >= unfixed) continue;
        for (auto& [v, c] : row.terms)
            if (s.val[v] < 0) branch_first[v] = 1;
    }

    // independent components over the still-active rows
    DsuFind dsu(n);
    for (const auto& row : s.rows) {
        if (s.row_inert(row)) continue;
        int first = -1;
        for (auto& [v, c] : row.terms) {
            if (s.val[v] >= 0) continue;
            if (first < 0) first = v;
            else dsu.merge(first, v);
        }
    }
    std::vector<std::vector<int>> comps;
    {
        std::vector<int> root_to_comp(n, -1);
        for (int v = 0; v < n; ++v) {
            if (s.val[v] >= 0) continue;
            const int r = dsu.find(v);
            if (root_to_comp[r] < 0) {
                root_to_comp[r] = static_cast<int>(comps.size());
                comps.emplace_back();
            }
            comps[root_to_comp[r]].push_back(v);
        }
    }

    std::vector<std::vector<std::vector<std::int8_t>>> comp_pools(comps.size());
    std::vector<double> comp_opt(comps.size(), 0.0);
    bool infeasible = false;

    const bool debug_comps = std::getenv("DCILP_ILP_DEBUG") != nullptr;
    for (size_t c = 0; c < comps.size() && !infeasible; ++c) {
        CompSearch cs(s, comps[c], groups, branch_first);
        const long nodes_before = s.stats.nodes;
        cs.dfs();
        if (debug_comps && s.stats.nodes - nodes_before > 10000)
            std::fprintf(stderr, "[ilp] comp %zu size %zu phaseA nodes %ld\n", c,
                         comps[c].size(), s.stats.nodes - nodes_before);
        s.stats.incumbent_trace.push_back(std::numeric_limits<double>::quiet_NaN());
        if (cs.best.empty() && !s.out_of_time) {
            infeasible = true;
            break;
        }
        if (cs.best.empty()) break;  // out of time before any leaf
        comp_opt[c] = cs.incumbent;

        cs.enumerating = true;
        cs.target = cs.incumbent;
        cs.capacity = pool_capacity;
        if (!s.out_of_time) cs.dfs();
        comp_pools[c] = cs.pool.empty() ? std::vector<std::vector<std::int8_t>>{cs.best}
                                        : std::move(cs.pool);
    }

    out.stats = s.stats;
    out.stats.proven = !s.out_of_time;
    if (infeasible) {
        out.status = SolveStatus::infeasible;
        return finish(out);
    }
    for (const auto& p : comp_pools) {
        if (p.empty()) {  // budget ran out with nothing usable
            out.status = SolveStatus::budget_exceeded;
            return finish(out);
        }
    }

    // cross product of component pools, odometer order, capped at capacity
    std::vector<std::uint8_t> base(n, 0);
    for (int v = 0; v < n; ++v)
        if (s.val[v] >= 0) base[v] = static_cast<std::uint8_t>(s.val[v]);
    std::vector<size_t> idx(comps.size(), 0);
    while (static_cast<int>(out.solutions.size()) < pool_capacity) {
        std::vector<std::uint8_t> full = base;
        for (size_t c = 0; c < comps.size(); ++c)
            for (size_t k = 0; k < comps[c].size(); ++k)
                full[comps[c][k]] = static_cast<std::uint8_t>(comp_pools[c][idx[c]][k]);
        out.solutions.push_back(std::move(full));
        // advance odometer, last component fastest
        int pos = static_cast<int>(comps.size()) - 1;
        while (pos >= 0) {
            if (++idx[pos] < comp_pools[pos].size()) break;
            idx[pos] = 0;
            --pos;
        }
        if (pos < 0) break;
    }

    double obj_value = 0.0;
    for (int v = 0; v < n; ++v) obj_value += model.objective[v] * out.solutions.front()[v];
    out.objective_value = obj_value;
    out.status = s.out_of_time ? SolveStatus::budget_exceeded : SolveStatus::optimal;
    return finish(out);
}

}  // namespace dcilp::ilp
