#include "dcilp/phase2.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <unordered_map>

namespace dcilp::phase2 {

const char* to_string(SchedulePolicy p) {
    return p == SchedulePolicy::uniform ? "uniform" : "size_ordered";
}

SchedulePolicy schedule_policy_from_string(const std::string& s) {
    if (s == "uniform") return SchedulePolicy::uniform;
    if (s == "size_ordered") return SchedulePolicy::size_ordered;
    throw std::invalid_argument("unknown schedule policy: " + s);
}

Subproblem extract_subproblem(const Dataset& data, const phase1::MarkovBlankets& mbs, int i) {
    if (i < 0 || i >= mbs.d()) throw std::out_of_range("extract_subproblem: bad index");
    Subproblem sub;
    sub.center = i;
    sub.scope = mbs.scope(i);
    sub.data_view.resize(data.n, static_cast<int>(sub.scope.size()));
    for (size_t c = 0; c < sub.scope.size(); ++c)
        sub.data_view.col(static_cast<int>(c)) = data.values.col(sub.scope[c]);
    return sub;
}

Eigen::MatrixXd LocalResult::to_dense(int d) const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
    for (auto& [s, t] : edges) m(s, t) = 1.0;
    return m;
}

namespace {

struct ScoreKey {
    int target;
    std::vector<std::uint64_t> mask;
    bool operator==(const ScoreKey&) const = default;
};

struct ScoreKeyHash {
    size_t operator()(const ScoreKey& k) const {
        std::uint64_t h = 1469598103934665603ULL ^ static_cast<std::uint64_t>(k.target);
        for (auto w : k.mask) {
            h ^= w;
            h *= 1099511628211ULL;
        }
        return static_cast<size_t>(h);
    }
};

class BicScorer {
public:
    BicScorer(const Eigen::MatrixXd& view, double penalty, double ridge)
        : p_(static_cast<int>(view.cols())),
          n_(static_cast<double>(view.rows())),
          penalty_(penalty),
          ridge_(ridge) {
        Eigen::MatrixXd centered = view.rowwise() - view.colwise().mean();
        gram_ = centered.transpose() * centered;
        words_ = (p_ + 63) / 64;
    }

    double rss(int target, const std::vector<int>& parents) {
        ScoreKey key{target, std::vector<std::uint64_t>(words_, 0)};
        for (int v : parents) key.mask[v / 64] |= 1ULL << (v % 64);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;

        double value;
        if (parents.empty()) {
            value = gram_(target, target);
        } else {
            const int k = static_cast<int>(parents.size());
            Eigen::MatrixXd spp(k, k);
            Eigen::VectorXd sjp(k);
            for (int a = 0; a < k; ++a) {
                sjp(a) = gram_(parents[a], target);
                for (int b = 0; b < k; ++b) spp(a, b) = gram_(parents[a], parents[b]);
            }
            Eigen::LLT<Eigen::MatrixXd> llt(spp);
            if (llt.info() != Eigen::Success) {
                spp.diagonal().array() += ridge_;
                llt.compute(spp);
                if (llt.info() != Eigen::Success)
                    throw std::runtime_error("bic: singular regression despite ridge");
            }
            value = gram_(target, target) - sjp.dot(llt.solve(sjp));
        }
        cache_.emplace(std::move(key), value);
        return value;
    }

    // per-node Gaussian BIC term
    double local(int target, const std::vector<int>& parents) {
        const double sigma2 = std::max(rss(target, parents) / n_, 1e-12);
        return -0.5 * n_ * std::log(sigma2) - edge_penalty() * parents.size();
    }

    double edge_penalty() const { return penalty_ * 0.5 * std::log(n_); }
    double n() const { return n_; }

private:
    int p_;
    double n_;
    double penalty_;
    double ridge_;
    int words_;
    Eigen::MatrixXd gram_;
    std::unordered_map<ScoreKey, double, ScoreKeyHash> cache_;
};

constexpr double kMoveTol = 1e-9;

struct HillState {
    int p;
    std::vector<std::vector<char>> dir;      // dir[x][y]: edge x -> y
    std::vector<std::vector<int>> parents;   // sorted
    std::vector<double> node_score;

    explicit HillState(int p_) : p(p_), dir(p_, std::vector<char>(p_, 0)), parents(p_) {}

    std::vector<int> with_parent(int y, int x) const {
        std::vector<int> out = parents[y];
        out.insert(std::lower_bound(out.begin(), out.end(), x), x);
        return out;
    }
    std::vector<int> without_parent(int y, int x) const {
        std::vector<int> out = parents[y];
        out.erase(std::find(out.begin(), out.end(), x));
        return out;
    }
};

std::vector<std::vector<char>> reachability(const HillState& st) {
    std::vector<std::vector<char>> reach(st.p, std::vector<char>(st.p, 0));
    std::vector<int> stack;
    for (int s = 0; s < st.p; ++s) {
        stack.assign(1, s);
        reach[s][s] = 1;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (int v = 0; v < st.p; ++v) {
                if (st.dir[u][v] && !reach[s][v]) {
                    reach[s][v] = 1;
                    stack.push_back(v);
                }
            }
        }
    }
    return reach;
}

// path x ~> y that does not use the direct edge (x, y)
bool path_avoiding_edge(const HillState& st, int x, int y) {
    std::vector<char> seen(st.p, 0);
    std::vector<int> stack{x};
    seen[x] = 1;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int v = 0; v < st.p; ++v) {
            if (!st.dir[u][v] || seen[v]) continue;
            if (u == x && v == y) continue;
            if (v == y) return true;
            seen[v] = 1;
            stack.push_back(v);
        }
    }
    return false;
}

enum MoveKind { kDelete = 0, kReverse = 1, kAdd = 2 };

struct Move {
    bool found = false;
    double delta = 0.0;
    int kind = 0;
    int x = -1, y = -1;
};

void consider(Move& best, double delta, int kind, int x, int y) {
    if (delta <= kMoveTol) return;
    if (!best.found || delta > best.delta + kMoveTol) {
        best = Move{true, delta, kind, x, y};
        return;
    }
    if (delta >= best.delta - kMoveTol) {  // tie: delete > reverse > add, then lex
        if (std::tuple(kind, x, y) < std::tuple(best.kind, best.x, best.y))
            best = Move{true, delta, kind, x, y};
    }
}

// Hill climbing over DAGs. The per-node score is the decomposable Gaussian
// BIC; with equal_variance a single shared noise variance is fit instead,
// which makes the linear-Gaussian SEM identifiable and lets the score orient
// edges (no equivalence classes, so no CPDAG step afterwards).
Eigen::MatrixXd hill_climb_dag(BicScorer& scorer, int p, bool equal_variance,
                               std::vector<double>* trace) {
    HillState st(p);
    std::vector<double> node_rss(p);
    double total_rss = 0.0;
    int edges = 0;
    const double n = scorer.n();

    auto ev_score = [&](double rss_sum, int edge_count) {
        const double sigma2 = std::max(rss_sum / (n * p), 1e-12);
        return -0.5 * n * p * std::log(sigma2) - scorer.edge_penalty() * edge_count;
    };

    st.node_score.resize(p);
    for (int j = 0; j < p; ++j) {
        node_rss[j] = scorer.rss(j, {});
        total_rss += node_rss[j];
        st.node_score[j] = scorer.local(j, {});
    }
    double total = 0.0;
    if (equal_variance) {
        total = ev_score(total_rss, 0);
    } else {
        for (int j = 0; j < p; ++j) total += st.node_score[j];
    }
    if (trace) trace->push_back(total);

    const long max_moves = 50L * p * p + 100;
    for (long iter = 0; iter < max_moves; ++iter) {
        const auto reach = reachability(st);
        Move best;

        auto delta_one = [&](int y, const std::vector<int>& new_parents, int edge_delta) {
            if (equal_variance)
                return ev_score(total_rss - node_rss[y] + scorer.rss(y, new_parents),
                                edges + edge_delta) -
                       total;
            return scorer.local(y, new_parents) - st.node_score[y];
        };
        auto delta_two = [&](int y, const std::vector<int>& py, int x,
                             const std::vector<int>& px) {
            if (equal_variance)
                return ev_score(total_rss - node_rss[y] + scorer.rss(y, py) - node_rss[x] +
                                    scorer.rss(x, px),
                                edges) -
                       total;
            return scorer.local(y, py) - st.node_score[y] + scorer.local(x, px) -
                   st.node_score[x];
        };

        for (int x = 0; x < p; ++x) {
            for (int y = 0; y < p; ++y) {
                if (!st.dir[x][y]) continue;
                consider(best, delta_one(y, st.without_parent(y, x), -1), kDelete, x, y);
                if (!path_avoiding_edge(st, x, y))
                    consider(best,
                             delta_two(y, st.without_parent(y, x), x, st.with_parent(x, y)),
                             kReverse, x, y);
            }
        }
        for (int x = 0; x < p; ++x) {
            for (int y = 0; y < p; ++y) {
                if (x == y || st.dir[x][y] || st.dir[y][x]) continue;
                if (reach[y][x]) continue;  // adding x -> y would close a cycle
                consider(best, delta_one(y, st.with_parent(y, x), +1), kAdd, x, y);
            }
        }
        if (!best.found) break;

        const int x = best.x, y = best.y;
        auto refresh = [&](int node) {
            total_rss += scorer.rss(node, st.parents[node]) - node_rss[node];
            node_rss[node] = scorer.rss(node, st.parents[node]);
            st.node_score[node] = scorer.local(node, st.parents[node]);
        };
        switch (best.kind) {
            case kDelete:
                st.parents[y] = st.without_parent(y, x);
                st.dir[x][y] = 0;
                --edges;
                refresh(y);
                break;
            case kReverse:
                st.parents[y] = st.without_parent(y, x);
                st.parents[x] = st.with_parent(x, y);
                st.dir[x][y] = 0;
                st.dir[y][x] = 1;
                refresh(y);
                refresh(x);
                break;
            default:
                st.parents[y] = st.with_parent(y, x);
                st.dir[x][y] = 1;
                ++edges;
                refresh(y);
                break;
        }
        if (equal_variance) {
            total = ev_score(total_rss, edges);
        } else {
            total = 0.0;
            for (int j = 0; j < p; ++j) total += st.node_score[j];
        }
        if (trace) trace->push_back(total);
    }

    Eigen::MatrixXd dag = Eigen::MatrixXd::Zero(p, p);
    for (int x = 0; x < p; ++x)
        for (int y = 0; y < p; ++y)
            if (st.dir[x][y]) dag(x, y) = 1.0;
    return dag;
}

}  // namespace

Eigen::MatrixXd dag_to_cpdag(const Eigen::MatrixXd& dag) {
    const int p = static_cast<int>(dag.rows());
    std::vector<std::vector<char>> adjacent(p, std::vector<char>(p, 0));
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            if (i != j && (dag(i, j) != 0.0 || dag(j, i) != 0.0))
                adjacent[i][j] = adjacent[j][i] = 1;

    std::vector<std::vector<char>> directed(p, std::vector<char>(p, 0));
    std::vector<std::vector<char>> undirected = adjacent;

    auto orient = [&](int a, int b) {
        directed[a][b] = 1;
        undirected[a][b] = undirected[b][a] = 0;
    };

    // v-structures i -> k <- j with i, j non-adjacent are compelled
    for (int k = 0; k < p; ++k) {
        std::vector<int> par;
        for (int i = 0; i < p; ++i)
            if (i != k && dag(i, k) != 0.0) par.push_back(i);
        for (size_t a = 0; a < par.size(); ++a)
            for (size_t b = a + 1; b < par.size(); ++b)
                if (!adjacent[par[a]][par[b]]) {
                    orient(par[a], k);
                    orient(par[b], k);
                }
    }

    // Meek rules R1-R3 to a fixpoint
    bool changed = true;
    while (changed) {
        changed = false;
        for (int a = 0; a < p; ++a) {
            for (int b = 0; b < p; ++b) {
                if (!undirected[a][b]) continue;
                bool fire = false;
                for (int c = 0; c < p && !fire; ++c) {
                    if (c == a || c == b) continue;
                    if (directed[c][a] && !adjacent[c][b]) fire = true;          // R1
                    else if (directed[a][c] && directed[c][b]) fire = true;      // R2
                }
                if (!fire) {  // R3
                    for (int c = 0; c < p && !fire; ++c) {
                        if (c == a || c == b || !undirected[a][c] || !directed[c][b]) continue;
                        for (int e = c + 1; e < p && !fire; ++e) {
                            if (e == a || e == b || !undirected[a][e] || !directed[e][b]) continue;
                            if (!adjacent[c][e]) fire = true;
                        }
                    }
                }
                if (fire) {
                    orient(a, b);
                    changed = true;
                }
            }
        }
    }

    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < p; ++j) {
            if (directed[i][j]) out(i, j) = 1.0;
            if (undirected[i][j]) out(i, j) = 1.0;  // symmetric pair
        }
    }
    return out;
}

Eigen::MatrixXd greedy_bic_learn(const Subproblem& sub, const BicLearnOptions& opts) {
    const int p = static_cast<int>(sub.scope.size());
    if (p == 1) return Eigen::MatrixXd::Zero(1, 1);
    if (static_cast<int>(sub.data_view.rows()) < p + 2)
        throw std::invalid_argument("greedy_bic_learn: need n >= |scope| + 2");
    BicScorer scorer(sub.data_view, opts.penalty, opts.ridge);
    const Eigen::MatrixXd dag = hill_climb_dag(scorer, p, opts.equal_variance, opts.score_trace);
    // the equal-variance score identifies orientations, so its DAG is final
    return opts.equal_variance ? dag : dag_to_cpdag(dag);
}

LocalResult restrict_to_center(const Eigen::MatrixXd& local_adj, const Subproblem& sub) {
    const int p = static_cast<int>(sub.scope.size());
    LocalResult res;
    res.center = sub.center;
    for (int s = 0; s < p; ++s) {
        for (int t = 0; t < p; ++t) {
            if (s == t || local_adj(s, t) == 0.0) continue;
            const int gs = sub.scope[s], gt = sub.scope[t];
            if (gs == sub.center || gt == sub.center) res.edges.emplace_back(gs, gt);
        }
    }
    return res;
}

LocalResult batch_local_learn(const Dataset& data, int center, const std::vector<int>& mb,
                              double rho, const Learner& learner) {
    if (!(rho > 0.0 && rho <= 1.0))
        throw std::invalid_argument("batch_local_learn: rho must lie in (0,1]");
    LocalResult res;
    res.center = center;
    if (mb.empty()) return res;

    std::vector<int> pending = mb;
    std::sort(pending.begin(), pending.end());
    const int batch = std::max<int>(1, static_cast<int>(std::ceil(rho * mb.size())));

    std::vector<int> pc;  // current parent-children set of the center
    std::vector<int> final_parents, final_children;
    while (!pending.empty()) {
        const int take = std::min<int>(batch, static_cast<int>(pending.size()));
        std::vector<int> scope(pending.begin(), pending.begin() + take);
        pending.erase(pending.begin(), pending.begin() + take);
        scope.insert(scope.end(), pc.begin(), pc.end());
        scope.push_back(center);
        std::sort(scope.begin(), scope.end());
        scope.erase(std::unique(scope.begin(), scope.end()), scope.end());

        Subproblem sub;
        sub.center = center;
        sub.scope = scope;
        sub.data_view.resize(data.n, static_cast<int>(scope.size()));
        for (size_t c = 0; c < scope.size(); ++c)
            sub.data_view.col(static_cast<int>(c)) = data.values.col(scope[c]);

        const Eigen::MatrixXd adj = learner(sub);
        const int ci = static_cast<int>(
            std::lower_bound(scope.begin(), scope.end(), center) - scope.begin());
        final_parents.clear();
        final_children.clear();
        for (size_t r = 0; r < scope.size(); ++r) {
            if (static_cast<int>(r) == ci) continue;
            if (adj(static_cast<int>(r), ci) != 0.0) final_parents.push_back(scope[r]);
            if (adj(ci, static_cast<int>(r)) != 0.0) final_children.push_back(scope[r]);
        }
        pc = final_parents;
        pc.insert(pc.end(), final_children.begin(), final_children.end());
        std::sort(pc.begin(), pc.end());
        pc.erase(std::unique(pc.begin(), pc.end()), pc.end());
    }

    for (int v : final_parents) res.edges.emplace_back(v, center);
    for (int v : final_children) res.edges.emplace_back(center, v);
    std::sort(res.edges.begin(), res.edges.end());
    return res;
}

std::vector<LocalResult> run_phase2(const Dataset& data, const phase1::MarkovBlankets& mbs,
                                    const Phase2Options& opts) {
    const int d = mbs.d();
    if (d != data.d) throw std::invalid_argument("run_phase2: blanket/data dimension mismatch");
    if (opts.workers < 1) throw std::invalid_argument("run_phase2: workers must be >= 1");

    std::vector<int> order(d);
    std::vector<char> use_batch(d, 0);
    for (int i = 0; i < d; ++i) order[i] = i;
    if (opts.policy == SchedulePolicy::size_ordered) {
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return mbs.sets[a].size() != mbs.sets[b].size()
                       ? mbs.sets[a].size() > mbs.sets[b].size()
                       : a < b;
        });
        const int big = static_cast<int>(std::ceil(opts.rho_big * d));
        for (int t = 0; t < std::min(big, d); ++t)
            if (!mbs.sets[order[t]].empty()) use_batch[order[t]] = 1;
    }

    BicLearnOptions learn_opts = opts.learn;
    learn_opts.score_trace = nullptr;  // traces are not shareable across workers
    Learner learner = [learn_opts](const Subproblem& sub) {
        return greedy_bic_learn(sub, learn_opts);
    };

    std::vector<LocalResult> results(d);
    std::atomic<int> next{0};
    auto worker_fn = [&]() {
        while (true) {
            const int tix = next.fetch_add(1);
            if (tix >= d) break;
            const int center = order[tix];
            LocalResult res;
            try {
                if (use_batch[center]) {
                    res = batch_local_learn(data, center, mbs.sets[center], opts.rho, learner);
                } else {
                    const Subproblem sub = extract_subproblem(data, mbs, center);
                    res = restrict_to_center(learner(sub), sub);
                }
            } catch (const std::exception& e) {
                res = LocalResult{};
                res.center = center;
                res.diagnostic = e.what();
            }
            results[center] = std::move(res);
        }
    };

    const int workers = std::min(opts.workers, std::max(1, d));
    if (workers == 1) {
        worker_fn();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn);
        for (auto& th : pool) th.join();
    }
    return results;
}

}  // namespace dcilp::phase2
