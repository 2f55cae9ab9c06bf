#include "dcilp/phase1.hpp"

#include "dcilp/rng.hpp"
#include "dcilp/synth.hpp"
#include "oracle_utils.hpp"

#include <cmath>

#include "doctest.h"

using namespace dcilp;
using namespace dcilp::phase1;

namespace {

Dataset gaussian_fixture(const std::vector<std::pair<int, int>>& edges, int d, int n,
                         std::uint64_t seed) {
    SemSpec spec;
    spec.graph = CausalGraph(d);
    for (auto& [s, t] : edges) spec.graph.adj(s, t) = 1.0;
    spec.noise_scales.assign(d, 1.0);
    return sample(spec, n, seed);
}

}  // namespace

TEST_CASE("empirical precision of near-identity covariance") {
    // independent unit-variance variables: Sigma = Theta = I
    const auto data = gaussian_fixture({}, 5, 100000, 4);
    const auto est = empirical_precision(data);
    CHECK_FALSE(est.rank_deficient);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            CHECK(std::abs(est.theta_hat(i, j) - (i == j ? 1.0 : 0.0)) < 0.05);
}

TEST_CASE("empirical precision of a single column is the reciprocal variance") {
    SemSpec spec;
    spec.graph = CausalGraph(1);
    spec.noise_scales = {2.0};
    const auto data = sample(spec, 200000, 8);
    const auto est = empirical_precision(data);
    CHECK(est.theta_hat(0, 0) == doctest::Approx(0.25).epsilon(0.02));
}

TEST_CASE("n < d data gives a symmetric pseudo-inverse of matching rank") {
    const auto data = gaussian_fixture({}, 12, 6, 5);
    const auto est = empirical_precision(data);
    CHECK(est.rank_deficient);
    CHECK(est.rank <= 6);
    CHECK((est.theta_hat - est.theta_hat.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(est.theta_hat);
    int nonzero = 0;
    for (int i = 0; i < 12; ++i) nonzero += std::abs(eig.eigenvalues()(i)) > 1e-8;
    CHECK(nonzero <= 6);
}

TEST_CASE("threshold rule") {
    Eigen::MatrixXd theta(3, 3);
    theta << 2.0, 0.9, 0.2,
             0.9, 2.0, 0.05,
             0.2, 0.05, 2.0;
    SUBCASE("keeps entries above lambda * max") {
        const auto prec = threshold(theta, 0.1);  // cut = 0.09
        CHECK(prec.support == std::vector<std::pair<int, int>>{{0, 1}, {0, 2}});
        CHECK(prec.theta(1, 2) == 0.0);
        CHECK(prec.theta(0, 0) == 2.0);  // diagonal untouched
    }
    SUBCASE("lambda near 1 keeps only the max pair") {
        const auto prec = threshold(theta, 0.999);
        CHECK(prec.support == std::vector<std::pair<int, int>>{{0, 1}});
    }
    SUBCASE("equal off-diagonals all survive any lambda < 1") {
        Eigen::MatrixXd eq = Eigen::MatrixXd::Constant(3, 3, 0.4);
        eq.diagonal().setConstant(1.0);
        CHECK(threshold(eq, 0.97).support.size() == 3);
    }
    SUBCASE("lambda outside (0,1) rejected") {
        CHECK_THROWS_AS((void)threshold(theta, 0.0), std::invalid_argument);
        CHECK_THROWS_AS((void)threshold(theta, 1.0), std::invalid_argument);
    }
}

TEST_CASE("threshold support is monotone in lambda") {
    Rng rng(41);
    for (int rep = 0; rep < 10; ++rep) {
        const int d = 8;
        Eigen::MatrixXd theta(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j <= i; ++j)
                theta(i, j) = theta(j, i) = rng.uniform(-1.0, 1.0);
        const auto lo = threshold(theta, 0.2);
        const auto hi = threshold(theta, 0.6);
        for (auto& pair : hi.support)
            CHECK(std::find(lo.support.begin(), lo.support.end(), pair) != lo.support.end());
    }
}

TEST_CASE("criterion closed forms") {
    SUBCASE("identity pair gives d") {
        PrecisionEstimate prec;
        prec.theta = Eigen::MatrixXd::Identity(3, 3);
        const auto c = criterion(Eigen::MatrixXd::Identity(3, 3), prec);
        REQUIRE(c.has_value());
        CHECK(*c == doctest::Approx(3.0).epsilon(1e-12));
    }
    SUBCASE("scaled identity") {
        PrecisionEstimate prec;
        prec.theta = 2.0 * Eigen::MatrixXd::Identity(2, 2);
        const auto c = criterion(Eigen::MatrixXd::Identity(2, 2), prec);
        REQUIRE(c.has_value());
        CHECK(*c == doctest::Approx(4.0 - 2.0 * std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("negative determinant is infeasible") {
        PrecisionEstimate prec;
        prec.theta = Eigen::MatrixXd::Identity(2, 2);
        prec.theta(1, 1) = -1.0;
        CHECK_FALSE(criterion(Eigen::MatrixXd::Identity(2, 2), prec).has_value());
    }
    SUBCASE("singular matrix is infeasible") {
        PrecisionEstimate prec;
        prec.theta = Eigen::MatrixXd::Zero(2, 2);
        CHECK_FALSE(criterion(Eigen::MatrixXd::Identity(2, 2), prec).has_value());
    }
}

TEST_CASE("select_lambda1 on the collider fixture") {
    // 0 -> 2 <- 1, unit weights and noise
    const auto data = gaussian_fixture({{0, 2}, {1, 2}}, 3, 10000, 6);
    const auto res = select_lambda1(data);
    CHECK(res.blankets.sets[0] == std::vector<int>{1, 2});
    CHECK(res.blankets.sets[1] == std::vector<int>{0, 2});
    CHECK(res.blankets.sets[2] == std::vector<int>{0, 1});
    // matches the d-separation oracle on the true DAG
    CausalGraph g(3);
    g.adj(0, 2) = g.adj(1, 2) = 1.0;
    for (int i = 0; i < 3; ++i) CHECK(res.blankets.sets[i] == oracle::mb_from_dsep(g, i));
}

TEST_CASE("select_lambda1 on the chain fixture") {
    const auto data = gaussian_fixture({{0, 1}, {1, 2}}, 3, 10000, 7);
    const auto res = select_lambda1(data);
    CHECK(res.blankets.sets[0] == std::vector<int>{1});
    CHECK(res.blankets.sets[1] == std::vector<int>{0, 2});
    CHECK(res.blankets.sets[2] == std::vector<int>{1});
}

TEST_CASE("independent variables yield nearly empty blankets") {
    // The threshold rule keeps at least the max-magnitude pair for any
    // lambda < 1, so fully empty blankets are unreachable; with the
    // percentile-derived grid end and the argmax convention the selected
    // support must stay within the 98th-percentile tail.
    const int d = 20;
    const auto data = gaussian_fixture({}, d, 50 * d, 8);
    Lambda1Grid grid;
    grid.max.reset();  // derive from the percentile rule
    const auto res = select_lambda1(data, grid, /*select_max=*/true);
    const int pairs = d * (d - 1) / 2;
    CHECK(static_cast<int>(res.estimate.support.size()) <= pairs * 4 / 100 + 1);
    int empty = 0;
    for (const auto& mb : res.blankets.sets) empty += mb.empty();
    CHECK(empty >= d / 2);
}

TEST_CASE("markov blanket symmetry is structural") {
    const auto g = gen_dag(15, GraphModel::ER, 2, 9);
    const auto spec = assign_weights(g, 9);
    const auto data = sample(spec, 1500, 10);
    const auto res = select_lambda1(data);
    for (int i = 0; i < 15; ++i)
        for (int j : res.blankets.sets[i]) CHECK(res.blankets.contains(j, i));
}

TEST_CASE("selection lands near the support-distance optimum on fixtures") {
    // On the collider/chain fixtures every feasible grid point keeps the true
    // support, so the Hamming-optimal grid point set is a prefix; both
    // conventions must select within 2 grid steps of some optimal point.
    for (int fixture = 0; fixture < 2; ++fixture) {
        const auto edges = fixture == 0
                               ? std::vector<std::pair<int, int>>{{0, 2}, {1, 2}}
                               : std::vector<std::pair<int, int>>{{0, 1}, {1, 2}};
        CausalGraph g(3);
        for (auto& [s, t] : edges) g.adj(s, t) = 1.0;
        const auto data = gaussian_fixture(edges, 3, 10000, 11 + fixture);

        const auto cov = empirical_precision(data);
        // oracle support from d-separation blankets
        std::vector<std::pair<int, int>> true_support;
        for (int i = 0; i < 3; ++i)
            for (int j : oracle::mb_from_dsep(g, i))
                if (i < j) true_support.emplace_back(i, j);

        Lambda1Grid grid;
        std::vector<int> hamming(grid.count, 0);
        int best_h = -1;
        for (int t = 0; t < grid.count; ++t) {
            const double lam = grid.min + (*grid.max - grid.min) * t / (grid.count - 1);
            const auto prec = threshold(cov.theta_hat, lam);
            int dist = 0;
            for (int i = 0; i < 3; ++i)
                for (int j = i + 1; j < 3; ++j) {
                    const bool est = std::find(prec.support.begin(), prec.support.end(),
                                               std::pair(i, j)) != prec.support.end();
                    const bool tru = std::find(true_support.begin(), true_support.end(),
                                               std::pair(i, j)) != true_support.end();
                    dist += est != tru;
                }
            hamming[t] = dist;
            if (best_h < 0 || dist < hamming[best_h]) best_h = t;
        }
        for (bool select_max : {false, true}) {
            const auto res = select_lambda1(data, grid, select_max);
            bool near_optimal = false;
            for (int t = 0; t < grid.count; ++t)
                if (hamming[t] == hamming[best_h] && std::abs(t - res.selected_index) <= 2)
                    near_optimal = true;
            CHECK(near_optimal);
        }
    }
}

TEST_CASE("blanket recovery quality on ER1 (d=20, n=50d)") {
    std::vector<double> f1s;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto g = gen_dag(20, GraphModel::ER, 1, seed);
        const auto spec = assign_weights(g, derive_stream(seed, 1));
        const auto data = sample(spec, 1000, derive_stream(seed, 2));
        const auto res = select_lambda1(data);
        const auto truth = true_markov_blankets(g);
        int tp = 0, fp = 0, fn = 0;
        for (int i = 0; i < 20; ++i)
            for (int j = i + 1; j < 20; ++j) {
                const bool est = res.blankets.contains(i, j);
                const bool tru =
                    std::binary_search(truth[i].begin(), truth[i].end(), j);
                if (est && tru) ++tp;
                else if (est) ++fp;
                else if (tru) ++fn;
            }
        f1s.push_back(2.0 * tp / std::max(1, 2 * tp + fp + fn));
    }
    CHECK(oracle::median(f1s) >= 0.95);
}

TEST_CASE("all-infeasible grid raises with a diagnostic") {
    // constant columns give a singular covariance whose thresholded
    // pseudo-inverse never has positive determinant
    Dataset data;
    data.n = 50;
    data.d = 3;
    data.values = Eigen::MatrixXd::Zero(50, 3);
    for (int r = 0; r < 50; ++r) data.values(r, 0) = r;  // rank 1
    data.values.col(1) = data.values.col(0);
    data.values.col(2) = data.values.col(0);
    CHECK_THROWS_WITH_AS((void)select_lambda1(data), doctest::Contains("infeasible"),
                         std::runtime_error);
}

TEST_CASE("blanket json round trip and diagnostics csv shape") {
    MarkovBlankets mbs;
    mbs.sets = {{1, 2}, {0}, {0}};
    const auto text = mbs_to_json(mbs);
    const auto back = mbs_from_json(text);
    CHECK(back.sets == mbs.sets);

    std::vector<GridPoint> points{{0.05, 12.5, 4}, {0.1, std::nullopt, 2}};
    const auto csv = diagnostics_to_csv(points);
    CHECK(csv == "lambda1,criterion,support_size\n0.05,12.5,4\n0.1,inf,2\n");
}

TEST_CASE("malformed blanket json is rejected gracefully") {
    CHECK_THROWS(mbs_from_json("{\"5\": [0]}"));  // index beyond the object size
    CHECK_THROWS(mbs_from_json("not json"));
}
