#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "tmf/corpus.hpp"
#include "tmf/factorizer.hpp"

namespace tmf {

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  bool operator==(const Range&) const = default;
};

struct SynthConfig {
  std::size_t users = 10000;
  std::size_t items = 10000;
  double density = 0.01;
  int factors = 30;
  int steps = 10;
  Range transition_range{-0.01, 0.01};  // entries of A_i - I
  Range bias_range{-0.01, 0.01};        // entries of b_i
  double noise_sd = 0.0;
  /// Optional post-processing of generated ratings; both off by default.
  std::optional<RatingClamp> rating_clamp;
  bool round_ratings = false;
  std::uint64_t seed = 1;

  void validate() const;
  /// round(users * items * density)
  std::size_t observed_count() const;
};

/// Ground-truth latent dynamics behind a synthetic corpus.
struct SynthTruth {
  std::vector<Eigen::MatrixXd> user_states;  // P(1)..P(T), each D x M
  Eigen::MatrixXd items;                     // Q, D x N
  std::vector<Eigen::MatrixXd> transitions;  // A_i = I + R', per user
  std::vector<Eigen::VectorXd> biases;       // b_i, per user
};

struct SynthData {
  SlicedCorpus corpus;
  SynthTruth truth;
  /// Steps t with timestamps for export: rating log per observed pair.
  std::vector<RatingLog> logs;
  std::vector<std::string> warnings;
};

/// Draws latents, per-user dynamics and a density-controlled set of distinct
/// (user, item) pairs, each assigned a step uniformly from 1..T. Pairs at
/// step T are the test set; the others populate R(t) one step per slice.
SynthData generate(const SynthConfig& config);

}  // namespace tmf
