#pragma once

#include <functional>

#include <Eigen/Core>

namespace tmf::lasso {

/// min_{w,b} 1/(2n) |y - X w - b|^2 + lambda |w|_1 with the intercept b unpenalized.
struct Problem {
  Eigen::MatrixXd x;  // n x p, one observation per row
  Eigen::VectorXd y;  // n
  double lambda = 0.1;
  double tol = 1e-6;
  int max_sweeps = 10000;
  /// Solve on unit-variance columns and map the coefficients back.
  bool standardize = false;

  void validate() const;
};

struct Solution {
  Eigen::VectorXd w;
  double intercept = 0.0;
  int sweeps = 0;
  bool converged = false;

  Eigen::Index nonzeros() const;
};

/// S(z, gamma) = sign(z) max(|z| - gamma, 0).
double soft_threshold(double z, double gamma) noexcept;

/// Called after every sweep with the current iterate.
using SweepCallback = std::function<void(int sweep, const Solution& current)>;

/// Cyclic coordinate descent from w = 0, b = mean(y). Stops when the largest
/// coefficient change in a sweep is below tol, or after max_sweeps with
/// converged = false. Columns with zero variance keep a zero coefficient.
Solution solve(const Problem& problem, const SweepCallback& on_sweep = {});

double objective(const Problem& problem, const Eigen::VectorXd& w, double intercept);

/// Subgradient of the smooth part, g_k = -(1/n) X_k . (y - X w - b).
Eigen::VectorXd smooth_gradient(const Problem& problem, const Solution& solution);

/// Largest violation of the optimality conditions: |g_k + lambda sign(w_k)|
/// on the active set and max(|g_k| - lambda, 0) elsewhere.
double kkt_violation(const Problem& problem, const Solution& solution);

/// Smallest lambda at which the solution is w = 0.
double lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

}  // namespace tmf::lasso
