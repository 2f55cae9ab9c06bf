#pragma once

#include "dcilp/synth.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dcilp::phase1 {

struct CovarianceEstimate {
    Eigen::MatrixXd c_hat;      // empirical covariance (1/n)(X-Xbar)'(X-Xbar)
    Eigen::MatrixXd theta_hat;  // its pseudo-inverse
    bool rank_deficient = false;
    int rank = 0;
};

// Pseudo-inverse via symmetric eigendecomposition; eigenvalues below
// 1e-10 * lambda_max are treated as zero. Exact inverse when c_hat is PD.
CovarianceEstimate empirical_precision(const Dataset& data);

struct PrecisionEstimate {
    Eigen::MatrixXd theta;  // thresholded matrix, diagonal untouched
    double lambda1 = 0.0;
    std::vector<std::pair<int, int>> support;  // surviving off-diagonal pairs, i < j
};

// Zero off-diagonal entries with |theta_ij| <= lambda1 * max_offdiag|theta|.
PrecisionEstimate threshold(const Eigen::MatrixXd& theta, double lambda1);

// trace(C * Theta) - log det(Theta); nullopt when Theta is not positive
// definite (infeasible grid point).
std::optional<double> criterion(const Eigen::MatrixXd& c_hat, const PrecisionEstimate& prec);

struct MarkovBlankets {
    std::vector<std::vector<int>> sets;  // MB(i), sorted, i excluded

    int d() const { return static_cast<int>(sets.size()); }
    bool contains(int i, int j) const;
    std::vector<int> scope(int i) const;  // S_i = MB(i) U {i}, sorted
};

MarkovBlankets blankets_from_support(const Eigen::MatrixXd& theta_thresholded);

struct Lambda1Grid {
    double min = 0.05;
    std::optional<double> max = 0.3;  // unset: 98th-percentile rule
    int count = 20;
};

// lambda1_max = |theta_off(tau)| / max|theta_off| with tau the index of the
// given percentile of off-diagonal magnitudes.
double derive_lambda1_max(const Eigen::MatrixXd& theta, double percentile = 0.98);

struct GridPoint {
    double lambda1 = 0.0;
    std::optional<double> criterion;  // nullopt = infeasible
    int support_size = 0;
};

struct Phase1Result {
    PrecisionEstimate estimate;
    MarkovBlankets blankets;
    std::vector<GridPoint> diagnostics;
    int selected_index = -1;
    bool rank_deficient = false;
};

// Evaluates the criterion on `count` equidistant grid values and picks the
// feasible minimizer (select_max flips the convention, see README). Throws
// when every grid point is infeasible.
Phase1Result select_lambda1(const Dataset& data, const Lambda1Grid& grid = {},
                            bool select_max = false);

std::string mbs_to_json(const MarkovBlankets& mbs);
MarkovBlankets mbs_from_json(const std::string& text);
std::string diagnostics_to_csv(const std::vector<GridPoint>& points);

}  // namespace dcilp::phase1
