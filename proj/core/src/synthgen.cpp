#include "tmf/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

#include "tmf/error.hpp"

namespace tmf {

void SynthConfig::validate() const {
  if (users < 1 || items < 1) throw ConfigError("synthetic corpus needs at least one user and item");
  if (!(density > 0.0 && density <= 1.0)) throw ConfigError("density must lie in (0, 1]");
  if (factors < 1) throw ConfigError("factor count must be at least 1");
  if (steps < 3) throw ConfigError("synthetic corpus needs at least 3 steps");
  // A degenerate range (lo == hi) pins every entry to that value.
  if (!(transition_range.lo <= transition_range.hi)) {
    throw ConfigError("transition range must satisfy lo <= hi");
  }
  if (!(bias_range.lo <= bias_range.hi)) throw ConfigError("bias range must satisfy lo <= hi");
  if (!(noise_sd >= 0.0)) throw ConfigError("noise_sd must be non-negative");
  if (rating_clamp && !(rating_clamp->lo < rating_clamp->hi)) {
    throw ConfigError("rating clamp must satisfy lo < hi");
  }
  if (observed_count() == 0) throw ConfigError("density yields no observed ratings");
}

std::size_t SynthConfig::observed_count() const {
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(users) * static_cast<double>(items) * density));
}

namespace {

double draw(std::mt19937_64& rng, const Range& range) {
  if (range.lo == range.hi) return range.lo;
  return std::uniform_real_distribution<double>(range.lo, range.hi)(rng);
}

}  // namespace

SynthData generate(const SynthConfig& config) {
  config.validate();
  const auto m = static_cast<Eigen::Index>(config.users);
  const auto n = static_cast<Eigen::Index>(config.items);
  const Eigen::Index d = config.factors;
  const int horizon = config.steps;

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SynthData out;
  auto& truth = out.truth;
  truth.user_states.assign(static_cast<std::size_t>(horizon), Eigen::MatrixXd(d, m));
  truth.items.resize(d, n);
  for (Eigen::Index c = 0; c < m; ++c) {
    for (Eigen::Index r = 0; r < d; ++r) truth.user_states[0](r, c) = unit(rng);
  }
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index r = 0; r < d; ++r) truth.items(r, c) = unit(rng);
  }

  truth.transitions.resize(config.users);
  truth.biases.resize(config.users);
  for (Eigen::Index i = 0; i < m; ++i) {
    auto& a = truth.transitions[static_cast<std::size_t>(i)];
    a.resize(d, d);
    for (Eigen::Index c = 0; c < d; ++c) {
      for (Eigen::Index r = 0; r < d; ++r) a(r, c) = draw(rng, config.transition_range);
    }
    a.diagonal().array() += 1.0;
    auto& b = truth.biases[static_cast<std::size_t>(i)];
    b.resize(d);
    for (Eigen::Index r = 0; r < d; ++r) b(r) = draw(rng, config.bias_range);
  }
  for (int t = 1; t < horizon; ++t) {
    auto& next = truth.user_states[static_cast<std::size_t>(t)];
    const auto& prev = truth.user_states[static_cast<std::size_t>(t - 1)];
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto k = static_cast<std::size_t>(i);
      next.col(i).noalias() = truth.transitions[k] * prev.col(i);
      next.col(i) += truth.biases[k];
    }
  }

  // Floyd's sampling of distinct cells of the M x N grid.
  const auto total = static_cast<std::uint64_t>(config.users) * config.items;
  const auto count = static_cast<std::uint64_t>(config.observed_count());
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(static_cast<std::size_t>(count) * 2);
  for (std::uint64_t j = total - count; j < total; ++j) {
    const auto v = std::uniform_int_distribution<std::uint64_t>(0, j)(rng);
    if (!chosen.insert(v).second) chosen.insert(j);
  }
  std::vector<std::uint64_t> cells(chosen.begin(), chosen.end());
  std::sort(cells.begin(), cells.end());

  std::uniform_int_distribution<int> step_of(1, horizon);
  std::normal_distribution<double> noise(0.0, config.noise_sd > 0.0 ? config.noise_sd : 1.0);
  std::vector<std::vector<Triplet>> per_step(static_cast<std::size_t>(horizon));
  out.logs.reserve(cells.size());
  for (const auto cell : cells) {
    const auto user = static_cast<std::uint32_t>(cell / config.items);
    const auto item = static_cast<std::uint32_t>(cell % config.items);
    const int t = step_of(rng);
    double rating =
        truth.items.col(item).dot(truth.user_states[static_cast<std::size_t>(t - 1)].col(user));
    if (config.noise_sd > 0.0) rating += noise(rng);
    if (config.round_ratings) rating = std::round(rating);
    if (config.rating_clamp) rating = config.rating_clamp->apply(rating);
    per_step[static_cast<std::size_t>(t - 1)].push_back({user, item, rating});
    out.logs.push_back({std::to_string(user), std::to_string(item), rating, t});
  }
  std::stable_sort(out.logs.begin(), out.logs.end(), [](const RatingLog& a, const RatingLog& b) {
    return a.timestamp < b.timestamp;
  });

  auto& corpus = out.corpus;
  corpus.window = 1;
  corpus.ids.users = IdMap::sequential(config.users);
  corpus.ids.items = IdMap::sequential(config.items);
  corpus.ids.training_users = config.users;
  corpus.ids.training_items = config.items;
  std::vector<Triplet> training;
  for (int t = 1; t < horizon; ++t) {
    auto& step = per_step[static_cast<std::size_t>(t - 1)];
    if (step.empty()) out.warnings.push_back("step " + std::to_string(t) + " has no ratings");
    training.insert(training.end(), step.begin(), step.end());
    corpus.steps.emplace_back(std::move(step), config.users, config.items);
  }
  if (per_step.back().empty()) out.warnings.push_back("test step has no ratings");
  corpus.training = SparseRatings(std::move(training), config.users, config.items);
  corpus.testing = SparseRatings(std::move(per_step.back()), config.users, config.items);
  return out;
}

}  // namespace tmf
