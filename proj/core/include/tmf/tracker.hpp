#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "tmf/corpus.hpp"
#include "tmf/factorizer.hpp"

namespace tmf {

/// Latent vector of one user at steps 1..T-1 and its first differences.
struct UserTrajectory {
  std::uint32_t user = 0;
  std::vector<Eigen::VectorXd> states;  // P_i(1) .. P_i(T-1)
  std::vector<Eigen::VectorXd> deltas;  // Z_i(t) = P_i(t) - P_i(t-1), t = 2..T-1

  /// Recomputes `deltas` from `states`.
  void compute_deltas();
};

struct TrackerOptions {
  double learning_rate = 0.01;
  double regularization = 0.02;
  int epochs = 50;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
  static TrackerOptions from(const HyperParams& hp);
};

/// Adapts one user's vector to the ratings of a single step, starting from
/// `start` and holding every Q_j fixed. `seed` drives the per-epoch shuffle.
Eigen::VectorXd adapt_user(const Eigen::VectorXd& start, const Eigen::MatrixXd& items,
                           std::span<const Triplet> ratings, const TrackerOptions& options,
                           std::uint64_t seed);

/// Per-user, per-step SGD re-anchored at the global P_i for every step.
/// Returns one trajectory per user in index order.
std::vector<UserTrajectory> learn_step_latents(const SlicedCorpus& corpus,
                                               const FactorModel& model,
                                               const TrackerOptions& options);

/// Seed used for (user, step); independent of traversal order.
std::uint64_t step_seed(std::uint64_t seed, std::uint32_t user, std::size_t step);

/// CSV rows `user,step,f1..fD`; user is the dense index, step is 1-based.
void write_trajectories_csv(std::ostream& out, const std::vector<UserTrajectory>& trajectories);
std::vector<UserTrajectory> read_trajectories_csv(std::istream& in);

}  // namespace tmf
