#include "dcilp/phase1.hpp"

#include "dcilp/io.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dcilp::phase1 {

CovarianceEstimate empirical_precision(const Dataset& data) {
    if (data.n < 2) throw std::invalid_argument("empirical_precision: need n >= 2");
    const int d = data.d;

    Eigen::RowVectorXd mean = data.values.colwise().mean();
    Eigen::MatrixXd centered = data.values.rowwise() - mean;
    CovarianceEstimate est;
    est.c_hat = (centered.transpose() * centered) / static_cast<double>(data.n);
    {
        const Eigen::MatrixXd t = est.c_hat.transpose();
        est.c_hat = 0.5 * (est.c_hat + t);
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(est.c_hat);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("empirical_precision: eigendecomposition failed");
    const Eigen::VectorXd& vals = eig.eigenvalues();
    const double cutoff = 1e-10 * std::max(0.0, vals.maxCoeff());

    Eigen::VectorXd inv = Eigen::VectorXd::Zero(d);
    est.rank = 0;
    for (int i = 0; i < d; ++i) {
        if (vals(i) > cutoff && vals(i) > 0.0) {
            inv(i) = 1.0 / vals(i);
            ++est.rank;
        }
    }
    est.rank_deficient = est.rank < d;
    est.theta_hat = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
    {
        const Eigen::MatrixXd t = est.theta_hat.transpose();
        est.theta_hat = 0.5 * (est.theta_hat + t);
    }
    return est;
}

PrecisionEstimate threshold(const Eigen::MatrixXd& theta, double lambda1) {
    if (!(lambda1 > 0.0 && lambda1 < 1.0))
        throw std::invalid_argument("threshold: lambda1 must lie in (0,1)");
    const int d = static_cast<int>(theta.rows());

    double max_off = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j) max_off = std::max(max_off, std::abs(theta(i, j)));

    PrecisionEstimate out;
    out.lambda1 = lambda1;
    out.theta = theta;
    const double cut = lambda1 * max_off;
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            if (i == j) continue;
            if (std::abs(theta(i, j)) <= cut) out.theta(i, j) = 0.0;
        }
    }
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j)
            if (out.theta(i, j) != 0.0) out.support.emplace_back(i, j);
    return out;
}

std::optional<double> criterion(const Eigen::MatrixXd& c_hat, const PrecisionEstimate& prec) {
    // feasible iff det > 0 (domain of the log); log-space to avoid overflow
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(prec.theta);
    const Eigen::MatrixXd& lumat = lu.matrixLU();
    double sign = lu.permutationP().determinant();  // +1 or -1
    double logabs = 0.0;
    for (int i = 0; i < lumat.rows(); ++i) {
        const double u = lumat(i, i);
        if (u == 0.0) return std::nullopt;
        if (u < 0.0) sign = -sign;
        logabs += std::log(std::abs(u));
    }
    if (sign <= 0.0) return std::nullopt;
    const double tr = (c_hat.cwiseProduct(prec.theta)).sum();
    return tr - logabs;
}

bool MarkovBlankets::contains(int i, int j) const {
    const auto& s = sets[i];
    return std::binary_search(s.begin(), s.end(), j);
}

std::vector<int> MarkovBlankets::scope(int i) const {
    std::vector<int> sc = sets[i];
    sc.insert(std::lower_bound(sc.begin(), sc.end(), i), i);
    return sc;
}

MarkovBlankets blankets_from_support(const Eigen::MatrixXd& theta_thresholded) {
    const int d = static_cast<int>(theta_thresholded.rows());
    MarkovBlankets mbs;
    mbs.sets.assign(d, {});
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j && theta_thresholded(i, j) != 0.0) mbs.sets[i].push_back(j);
    return mbs;
}

double derive_lambda1_max(const Eigen::MatrixXd& theta, double percentile) {
    const int d = static_cast<int>(theta.rows());
    std::vector<double> mags;
    mags.reserve(static_cast<size_t>(d) * (d - 1) / 2);
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) mags.push_back(std::abs(theta(i, j)));
    if (mags.empty()) return 0.5;
    std::sort(mags.begin(), mags.end());
    const double max_off = mags.back();
    if (max_off <= 0.0) return 0.5;
    const auto idx = static_cast<size_t>(std::llround(percentile * (mags.size() - 1)));
    double v = mags[idx] / max_off;
    return std::clamp(v, 1e-3, 1.0 - 1e-6);
}

Phase1Result select_lambda1(const Dataset& data, const Lambda1Grid& grid, bool select_max) {
    if (grid.count < 1) throw std::invalid_argument("select_lambda1: empty grid");
    if (!(grid.min > 0.0)) throw std::invalid_argument("select_lambda1: grid.min must be > 0");

    const CovarianceEstimate cov = empirical_precision(data);
    const double lo = grid.min;
    const double hi = grid.max ? *grid.max : derive_lambda1_max(cov.theta_hat);
    if (!(hi < 1.0)) throw std::invalid_argument("select_lambda1: grid.max must be < 1");
    if (hi < lo) throw std::invalid_argument("select_lambda1: grid.max below grid.min");

    Phase1Result result;
    result.rank_deficient = cov.rank_deficient;
    std::vector<PrecisionEstimate> estimates;
    estimates.reserve(grid.count);
    for (int t = 0; t < grid.count; ++t) {
        const double lam =
            grid.count == 1 ? lo : lo + (hi - lo) * static_cast<double>(t) / (grid.count - 1);
        PrecisionEstimate prec = threshold(cov.theta_hat, lam);
        GridPoint gp;
        gp.lambda1 = lam;
        gp.support_size = static_cast<int>(prec.support.size());
        gp.criterion = criterion(cov.c_hat, prec);
        result.diagnostics.push_back(gp);
        estimates.push_back(std::move(prec));
    }

    int best = -1;
    for (int t = 0; t < grid.count; ++t) {
        const auto& c = result.diagnostics[t].criterion;
        if (!c) continue;
        if (best < 0) {
            best = t;
            continue;
        }
        const double cur = *result.diagnostics[best].criterion;
        if (select_max ? (*c > cur) : (*c < cur)) best = t;
    }
    if (best < 0) {
        std::ostringstream msg;
        msg << "select_lambda1: all " << grid.count << " grid points on [" << lo << ", " << hi
            << "] are infeasible (thresholded precision has no positive determinant); "
            << "consider the percentile-derived grid end (lambda1_max: auto) or a wider range";
        throw std::runtime_error(msg.str());
    }

    result.selected_index = best;
    result.estimate = std::move(estimates[best]);
    result.blankets = blankets_from_support(result.estimate.theta);
    return result;
}

std::string mbs_to_json(const MarkovBlankets& mbs) {
    nlohmann::json j = nlohmann::json::object();
    for (int i = 0; i < mbs.d(); ++i) j[std::to_string(i)] = mbs.sets[i];
    return j.dump(2) + "\n";
}

MarkovBlankets mbs_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    MarkovBlankets mbs;
    mbs.sets.assign(j.size(), {});
    for (auto it = j.begin(); it != j.end(); ++it) {
        const int i = std::stoi(it.key());
        if (i < 0 || i >= static_cast<int>(j.size()))
            throw std::runtime_error("mbs json: bad index");
        mbs.sets[i] = it.value().get<std::vector<int>>();
        std::sort(mbs.sets[i].begin(), mbs.sets[i].end());
    }
    return mbs;
}

std::string diagnostics_to_csv(const std::vector<GridPoint>& points) {
    std::ostringstream ss;
    ss << "lambda1,criterion,support_size\n";
    for (const auto& p : points) {
        ss << fmt_double(p.lambda1) << ",";
        ss << (p.criterion ? fmt_double(*p.criterion) : std::string("inf")) << ",";
        ss << p.support_size << "\n";
    }
    return ss.str();
}

}  // namespace dcilp::phase1
