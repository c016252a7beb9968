#include <gtest/gtest.h>

#include <set>

#include "tmf/error.hpp"
#include "tmf/synthgen.hpp"

namespace tmf {
namespace {

SynthConfig tiny() {
  SynthConfig cfg;
  cfg.users = 4;
  cfg.items = 4;
  cfg.density = 1.0;
  cfg.factors = 2;
  cfg.steps = 3;
  cfg.seed = 5;
  return cfg;
}

SynthConfig desk(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.users = 200;
  cfg.items = 200;
  cfg.density = 0.25;
  cfg.factors = 4;
  cfg.steps = 10;
  cfg.transition_range = {-0.1, 0.1};
  cfg.seed = seed;
  return cfg;
}

std::set<std::pair<std::uint32_t, std::uint32_t>> all_pairs(const SynthData& data) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> pairs;
  for (const auto& step : data.corpus.steps) {
    for (const auto& t : step.triplets()) pairs.insert({t.user, t.item});
  }
  for (const auto& t : data.corpus.testing.triplets()) pairs.insert({t.user, t.item});
  return pairs;
}

TEST(Generate, TinyFullyObservedCorpusIsReproducibleByHand) {
  const auto cfg = tiny();
  const auto data = generate(cfg);
  const auto& truth = data.truth;
  ASSERT_EQ(truth.user_states.size(), 3u);
  ASSERT_EQ(data.corpus.steps.size(), 2u);
  EXPECT_EQ(data.corpus.horizon(), 3);
  std::size_t seen = 0;
  auto check = [&](const SparseRatings& ratings, std::size_t t) {
    for (const auto& r : ratings.triplets()) {
      double expected = 0.0;
      for (int k = 0; k < 2; ++k) expected += truth.items(k, r.item) * truth.user_states[t](k, r.user);
      EXPECT_NEAR(r.rating, expected, 1e-15);
      ++seen;
    }
  };
  check(data.corpus.steps[0], 0);
  check(data.corpus.steps[1], 1);
  check(data.corpus.testing, 2);
  EXPECT_EQ(seen, 16u);
  EXPECT_EQ(all_pairs(data).size(), 16u);
}

TEST(Generate, LatentsAreUnitUniform) {
  const auto data = generate(desk(1));
  EXPECT_GT(data.truth.user_states[0].minCoeff(), 0.0);
  EXPECT_LT(data.truth.user_states[0].maxCoeff(), 1.0);
  EXPECT_GT(data.truth.items.minCoeff(), 0.0);
  EXPECT_LT(data.truth.items.maxCoeff(), 1.0);
  for (const auto& a : data.truth.transitions) {
    const Eigen::MatrixXd r = a - Eigen::MatrixXd::Identity(4, 4);
    EXPECT_GE(r.minCoeff(), -0.1);
    EXPECT_LT(r.maxCoeff(), 0.1);
  }
}

TEST(Generate, RecurrenceHoldsExactly) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto data = generate(desk(seed));
    const auto& truth = data.truth;
    for (std::size_t t = 1; t < truth.user_states.size(); ++t) {
      for (std::size_t i = 0; i < truth.transitions.size(); ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        const Eigen::VectorXd expected =
            truth.transitions[i] * truth.user_states[t - 1].col(c) + truth.biases[i];
        EXPECT_LE((truth.user_states[t].col(c) - expected).cwiseAbs().maxCoeff(), 1e-12);
      }
    }
  }
}

TEST(Generate, ObservedCountExactWithoutDuplicates) {
  for (std::uint64_t seed : {1u, 7u}) {
    auto cfg = desk(seed);
    cfg.density = 0.0137;
    const auto data = generate(cfg);
    std::size_t total = data.corpus.testing.size();
    for (const auto& step : data.corpus.steps) total += step.size();
    EXPECT_EQ(total, cfg.observed_count());
    EXPECT_EQ(cfg.observed_count(), 548u);
    EXPECT_EQ(all_pairs(data).size(), total);
    EXPECT_EQ(data.logs.size(), total);
    EXPECT_EQ(data.corpus.training.size() + data.corpus.testing.size(), total);
  }
}

TEST(Generate, SameSeedSameCorpus) {
  const auto a = generate(desk(4));
  const auto b = generate(desk(4));
  EXPECT_EQ(a.logs, b.logs);
  EXPECT_TRUE(a.truth.items == b.truth.items);
  for (std::size_t t = 0; t < a.truth.user_states.size(); ++t) {
    EXPECT_TRUE(a.truth.user_states[t] == b.truth.user_states[t]);
  }
  EXPECT_NE(a.logs, generate(desk(5)).logs);
}

TEST(Generate, StepSharesPassChiSquare) {
  // df = 9; 27.88 is the 0.999 quantile.
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const auto data = generate(desk(seed));
    std::vector<double> counts;
    for (const auto& step : data.corpus.steps) counts.push_back(static_cast<double>(step.size()));
    counts.push_back(static_cast<double>(data.corpus.testing.size()));
    const double expected = static_cast<double>(desk(seed).observed_count()) / 10.0;
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    EXPECT_LT(chi2, 27.88) << "seed " << seed;
  }
}

TEST(Generate, StaticWorldKeepsStatesFixed) {
  auto cfg = desk(2);
  cfg.transition_range = {0.0, 0.0};
  cfg.bias_range = {0.0, 0.0};
  const auto data = generate(cfg);
  for (const auto& states : data.truth.user_states) {
    EXPECT_TRUE(states == data.truth.user_states[0]);
  }
}

TEST(Generate, LogsCarryStepTimestamps) {
  const auto data = generate(desk(3));
  std::set<std::int64_t> stamps;
  for (const auto& log : data.logs) stamps.insert(log.timestamp);
  EXPECT_EQ(*stamps.begin(), 1);
  EXPECT_EQ(*stamps.rbegin(), 10);
  std::size_t last = 0;
  for (const auto& log : data.logs) last += log.timestamp == 10 ? 1 : 0;
  EXPECT_EQ(last, data.corpus.testing.size());
}

TEST(Generate, SparseStepsWarn) {
  auto cfg = desk(1);
  cfg.users = 3;
  cfg.items = 3;
  cfg.density = 2.0 / 9.0;
  const auto data = generate(cfg);
  EXPECT_FALSE(data.warnings.empty());
}

TEST(Generate, NoiseAndPostProcessing) {
  auto cfg = tiny();
  cfg.noise_sd = 0.5;
  const auto noisy = generate(cfg);
  const auto clean = generate(tiny());
  EXPECT_NE(noisy.logs, clean.logs);
  cfg.noise_sd = 0.0;
  cfg.round_ratings = true;
  cfg.rating_clamp = RatingClamp{1.0, 2.0};
  for (const auto& log : generate(cfg).logs) {
    EXPECT_EQ(log.rating, std::round(log.rating));
    EXPECT_GE(log.rating, 1.0);
    EXPECT_LE(log.rating, 2.0);
  }
}

TEST(SynthConfig, Validation) {
  EXPECT_NO_THROW(SynthConfig{}.validate());
  auto cfg = tiny();
  cfg.density = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny();
  cfg.steps = 2;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny();
  cfg.transition_range = {0.1, -0.1};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny();
  cfg.density = 0.01;
  EXPECT_THROW(generate(cfg), ConfigError);
}

}  // namespace
}  // namespace tmf
