#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "tmf/factorizer.hpp"
#include "tmf/tracker.hpp"

namespace tmf {

/// Which state the delta Z_i(t) is regressed on.
enum class Regressor {
  kPreviousState,  // Z_i(t) = A~ P_i(t-1) + b, the state-update form used for forecasting
  kCurrentState,   // Z_i(t) = A~ P_i(t) + b
};

struct DynamicsOptions {
  double lambda = 0.1;
  double tol = 1e-6;
  int max_sweeps = 10000;
  bool standardize = false;
  Regressor regressor = Regressor::kPreviousState;
  int threads = 1;
};

/// P_i(t) = (I + A~_i) P_i(t-1) + b_i for one user.
struct TransitionModel {
  static constexpr double kIdentityTolerance = 1e-8;

  std::uint32_t user = 0;
  Eigen::MatrixXd a_tilde;  // D x D
  Eigen::VectorXd bias;     // D
  bool identity_like = true;
  /// Too few observations; the model is the identity with zero bias.
  bool fallback = false;
  /// False when any row's Lasso solve hit max_sweeps.
  bool converged = true;

  Eigen::Index nonzeros() const;
  /// Recomputes identity_like from a_tilde and bias.
  void classify();

  static TransitionModel identity(std::uint32_t user, Eigen::Index factors);
};

TransitionModel fit_transition(const UserTrajectory& trajectory, const DynamicsOptions& options);

/// (I + A~) last_state + b.
Eigen::VectorXd forecast_latent(const TransitionModel& model, const Eigen::VectorXd& last_state);

/// Q_j . P_i(T), optionally clamped.
double predict_rating(const Eigen::VectorXd& forecast, const Eigen::MatrixXd& items,
                      std::uint32_t item, const std::optional<RatingClamp>& clamp = std::nullopt);

struct DynamicsFit {
  std::vector<TransitionModel> models;
  std::size_t identity_like = 0;
  std::size_t drifting = 0;
  std::size_t fallbacks = 0;
  std::size_t unconverged = 0;

  double mean_row_nonzeros() const;
};

DynamicsFit fit_all(const std::vector<UserTrajectory>& trajectories,
                    const DynamicsOptions& options);

/// One JSON object per user: {user, nnz, bias_norm, identity_like, fallback,
/// converged}; with `full` also the row-major a_tilde and bias.
void write_transitions_json(std::ostream& out, const DynamicsFit& fit, bool full);
DynamicsFit read_transitions_json(std::istream& in);

}  // namespace tmf
