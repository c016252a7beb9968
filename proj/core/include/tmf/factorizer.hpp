#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include <Eigen/Core>

#include "tmf/corpus.hpp"

namespace tmf {

struct HyperParams {
  int factors = 30;
  double learning_rate = 0.01;
  double regularization = 0.02;
  int epochs = 50;
  std::uint64_t seed = 1;
  /// When set, Q_j is updated from the already-updated P_i instead of the
  /// pre-update snapshot.
  bool sequential_updates = false;

  void validate() const;
  bool operator==(const HyperParams&) const = default;
};

/// Static latent factors. Column i of `users` is P_i, column j of `items` is Q_j.
struct FactorModel {
  Eigen::MatrixXd users;  // D x M
  Eigen::MatrixXd items;  // D x N
  HyperParams params;

  int factors() const noexcept { return static_cast<int>(users.rows()); }
  std::size_t num_users() const noexcept { return static_cast<std::size_t>(users.cols()); }
  std::size_t num_items() const noexcept { return static_cast<std::size_t>(items.cols()); }
};

/// Optional output range applied to predictions.
struct RatingClamp {
  double lo = 1.0;
  double hi = 5.0;

  double apply(double value) const noexcept { return value < lo ? lo : (value > hi ? hi : value); }
};

/// D x M and D x N matrices with entries drawn uniformly from (0, 1).
FactorModel initialize_model(std::size_t num_users, std::size_t num_items, const HyperParams& hp);

/// One SGD pass over `ratings` in the given order. Each triplet computes the
/// residual once and updates P_i and then Q_j from the same pre-update values
/// (or from the updated P_i when `sequential` is set).
void sgd_pass(FactorModel& model, std::span<const Triplet> ratings, double learning_rate,
              double regularization, bool sequential = false);

using EpochCallback = std::function<void(int epoch, const FactorModel& model)>;

/// Runs hp.epochs passes on `model` in place, reshuffling the order each epoch
/// from hp.seed. Throws DivergenceError on a non-finite entry.
void fit(FactorModel& model, const SparseRatings& training, const HyperParams& hp,
         const EpochCallback& on_epoch = {});

/// Random initialization followed by fit().
FactorModel train_mf(const SparseRatings& training, const HyperParams& hp,
                     const EpochCallback& on_epoch = {});

/// 1/2 sum (R_ij - Q_j.P_i)^2 + lambda/2 (|P|_F^2 + |Q|_F^2).
double objective(const SparseRatings& ratings, const FactorModel& model, double lambda);

/// Q_j . P_i, optionally clamped.
double predict_static(const FactorModel& model, std::uint32_t user, std::uint32_t item,
                      const std::optional<RatingClamp>& clamp = std::nullopt);

}  // namespace tmf
