#include "tmf/lasso.hpp"

#include <cmath>

#include "tmf/error.hpp"

namespace tmf::lasso {
namespace {

// Column sums of squares below this (relative to the response scale) are
// treated as constant columns.
constexpr double kZeroVariance = 1e-24;

}  // namespace

void Problem::validate() const {
  if (x.rows() < 1 || x.cols() < 1) throw ConfigError("lasso design matrix must be non-empty");
  if (y.size() != x.rows()) throw DimensionError("lasso response length differs from row count");
  if (!x.allFinite() || !y.allFinite()) throw ConfigError("lasso inputs must be finite");
  if (!(lambda >= 0.0)) throw ConfigError("lasso lambda must be non-negative");
  if (!(tol > 0.0)) throw ConfigError("lasso tolerance must be positive");
  if (max_sweeps < 1) throw ConfigError("lasso max_sweeps must be at least 1");
}

Eigen::Index Solution::nonzeros() const {
  Eigen::Index count = 0;
  for (Eigen::Index k = 0; k < w.size(); ++k) count += w(k) != 0.0 ? 1 : 0;
  return count;
}

double soft_threshold(double z, double gamma) noexcept {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

Solution solve(const Problem& problem, const SweepCallback& on_sweep) {
  problem.validate();
  const auto n = problem.x.rows();
  const auto p = problem.x.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  // The unpenalized intercept is profiled out: b = mean(y) - mean(X) w, so
  // the coordinate updates run on centered columns.
  const Eigen::RowVectorXd x_mean = problem.x.colwise().mean();
  const double y_mean = problem.y.mean();
  Eigen::MatrixXd xc = problem.x.rowwise() - x_mean;
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(p);
  if (problem.standardize) {
    for (Eigen::Index k = 0; k < p; ++k) {
      const double sd = std::sqrt(xc.col(k).squaredNorm() * inv_n);
      if (sd > 0.0) {
        scale(k) = sd;
        xc.col(k) /= sd;
      }
    }
  }
  Eigen::VectorXd curvature(p);
  for (Eigen::Index k = 0; k < p; ++k) curvature(k) = xc.col(k).squaredNorm() * inv_n;
  const double ref = std::max(1.0, problem.x.cwiseAbs().maxCoeff());

  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd residual = problem.y.array() - y_mean;

  auto snapshot = [&](int sweeps, bool converged) {
    Solution s;
    s.w = w.cwiseQuotient(scale);
    s.intercept = y_mean - x_mean.dot(s.w);
    s.sweeps = sweeps;
    s.converged = converged;
    return s;
  };

  for (int sweep = 1; sweep <= problem.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index k = 0; k < p; ++k) {
      if (curvature(k) <= kZeroVariance * ref * ref) {
        if (w(k) != 0.0) {
          residual += w(k) * xc.col(k);
          w(k) = 0.0;
        }
        continue;
      }
      const double old = w(k);
      const double rho = xc.col(k).dot(residual) * inv_n + curvature(k) * old;
      const double next = soft_threshold(rho, problem.lambda) / curvature(k);
      if (next != old) {
        residual -= (next - old) * xc.col(k);
        w(k) = next;
        max_change = std::max(max_change, std::abs(next - old) / scale(k));
      }
    }
    const bool done = max_change < problem.tol;
    if (on_sweep) on_sweep(sweep, snapshot(sweep, done));
    if (done) return snapshot(sweep, true);
  }
  return snapshot(problem.max_sweeps, false);
}

double objective(const Problem& problem, const Eigen::VectorXd& w, double intercept) {
  const Eigen::VectorXd r = (problem.y - problem.x * w).array() - intercept;
  return 0.5 * r.squaredNorm() / static_cast<double>(problem.x.rows()) +
         problem.lambda * w.lpNorm<1>();
}

Eigen::VectorXd smooth_gradient(const Problem& problem, const Solution& solution) {
  const Eigen::VectorXd r = (problem.y - problem.x * solution.w).array() - solution.intercept;
  return -(problem.x.transpose() * r) / static_cast<double>(problem.x.rows());
}

double kkt_violation(const Problem& problem, const Solution& solution) {
  const Eigen::VectorXd g = smooth_gradient(problem, solution);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const double wk = solution.w(k);
    const double v = wk != 0.0 ? std::abs(g(k) + problem.lambda * (wk > 0 ? 1.0 : -1.0))
                               : std::max(std::abs(g(k)) - problem.lambda, 0.0);
    worst = std::max(worst, v);
  }
  return worst;
}

double lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::VectorXd yc = y.array() - y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  return (xc.transpose() * yc).cwiseAbs().maxCoeff() / static_cast<double>(x.rows());
}

}  // namespace tmf::lasso
