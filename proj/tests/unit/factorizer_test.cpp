#include <gtest/gtest.h>

#include <random>
#include <set>

#include "tmf/error.hpp"
#include "tmf/factorizer.hpp"

namespace tmf {
namespace {

FactorModel scalar_model(double p, double q) {
  FactorModel model;
  model.users = Eigen::MatrixXd::Constant(1, 1, p);
  model.items = Eigen::MatrixXd::Constant(1, 1, q);
  return model;
}

// 200 distinct pairs in a 50 x 50 grid rated by a rank-2 ground truth.
SparseRatings small_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd p(2, 50), q(2, 50);
  for (Eigen::Index k = 0; k < p.size(); ++k) p.data()[k] = unit(rng);
  for (Eigen::Index k = 0; k < q.size(); ++k) q.data()[k] = unit(rng);
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  std::uniform_int_distribution<std::uint32_t> index(0, 49);
  std::vector<Triplet> triplets;
  while (triplets.size() < 200) {
    const auto i = index(rng), j = index(rng);
    if (!seen.insert({i, j}).second) continue;
    triplets.push_back({i, j, q.col(j).dot(p.col(i))});
  }
  return SparseRatings(std::move(triplets), 50, 50);
}

TEST(SgdPass, ZeroErrorIsFixedPoint) {
  auto model = scalar_model(1.0, 1.0);
  const Triplet r{0, 0, 1.0};
  sgd_pass(model, std::span(&r, 1), 0.5, 0.0);
  EXPECT_EQ(model.users(0, 0), 1.0);
  EXPECT_EQ(model.items(0, 0), 1.0);
}

TEST(SgdPass, SnapshotUpdateUsesPreUpdateUserVector) {
  auto model = scalar_model(1.0, 1.0);
  const Triplet r{0, 0, 2.0};
  sgd_pass(model, std::span(&r, 1), 0.1, 0.0);
  EXPECT_NEAR(model.users(0, 0), 1.1, 1e-15);
  EXPECT_NEAR(model.items(0, 0), 1.1, 1e-15);
}

TEST(SgdPass, SequentialUpdateUsesNewUserVector) {
  auto model = scalar_model(1.0, 1.0);
  const Triplet r{0, 0, 2.0};
  sgd_pass(model, std::span(&r, 1), 0.1, 0.0, /*sequential=*/true);
  EXPECT_NEAR(model.users(0, 0), 1.1, 1e-15);
  EXPECT_NEAR(model.items(0, 0), 1.11, 1e-15);
}

TEST(SgdPass, RegularizationShrinks) {
  // e = 0 so only the penalty acts: p <- p - alpha*lambda*p
  auto model = scalar_model(2.0, 0.5);
  const Triplet r{0, 0, 1.0};
  sgd_pass(model, std::span(&r, 1), 0.1, 0.5);
  EXPECT_NEAR(model.users(0, 0), 2.0 * 0.95, 1e-15);
  EXPECT_NEAR(model.items(0, 0), 0.5 * 0.95, 1e-15);
}

TEST(Objective, Examples) {
  const SparseRatings none({}, 1, 1);
  EXPECT_EQ(objective(none, scalar_model(0.0, 0.0), 0.5), 0.0);
  const SparseRatings three({{0, 0, 3.0}}, 1, 1);
  EXPECT_EQ(objective(three, scalar_model(1.5, 2.0), 0.0), 0.0);
  EXPECT_DOUBLE_EQ(objective(three, scalar_model(1.0, 1.0), 2.0), 4.0);
}

TEST(PredictStatic, DotProductAndClamp) {
  FactorModel model;
  model.users = Eigen::Vector2d(1, 2);
  model.items = Eigen::Vector2d(3, 4);
  EXPECT_EQ(predict_static(model, 0, 0), 11.0);
  EXPECT_EQ(predict_static(model, 0, 0, RatingClamp{1.0, 5.0}), 5.0);
  model.users.setZero();
  EXPECT_EQ(predict_static(model, 0, 0), 0.0);
  EXPECT_EQ(RatingClamp{}.apply(5.17), 5.0);
  EXPECT_EQ(RatingClamp{}.apply(0.2), 1.0);
  EXPECT_THROW(predict_static(model, 1, 0), std::out_of_range);
}

TEST(HyperParams, Validation) {
  EXPECT_NO_THROW(HyperParams{}.validate());
  EXPECT_THROW((HyperParams{0}).validate(), ConfigError);
  EXPECT_THROW((HyperParams{30, 0.0}).validate(), ConfigError);
  EXPECT_THROW((HyperParams{30, 0.01, -1.0}).validate(), ConfigError);
  EXPECT_THROW((HyperParams{30, 0.01, 0.02, 0}).validate(), ConfigError);
}

TEST(InitializeModel, UnitIntervalEntries) {
  const auto model = initialize_model(7, 9, HyperParams{4});
  EXPECT_EQ(model.users.rows(), 4);
  EXPECT_EQ(model.users.cols(), 7);
  EXPECT_EQ(model.items.cols(), 9);
  EXPECT_GT(model.users.minCoeff(), 0.0);
  EXPECT_LT(model.items.maxCoeff(), 1.0);
}

TEST(TrainMf, DescentAcrossEpochs) {
  const auto ratings = small_instance(11);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    HyperParams hp{3, 0.01, 0.0, 60, seed};
    auto model = initialize_model(50, 50, hp);
    double previous = objective(ratings, model, 0.0);
    fit(model, ratings, hp, [&](int epoch, const FactorModel& m) {
      const double current = objective(ratings, m, 0.0);
      EXPECT_LE(current, previous) << "epoch " << epoch << " seed " << seed;
      previous = current;
    });
  }
}

TEST(TrainMf, ExactFitOnRankOne) {
  const double u[5] = {0.2, 0.5, 0.9, 0.4, 0.7};
  const double v[5] = {0.8, 0.3, 0.6, 1.0, 0.1};
  std::vector<Triplet> triplets;
  for (std::uint32_t i = 0; i < 5; ++i) {
    for (std::uint32_t j = 0; j < 5; ++j) triplets.push_back({i, j, u[i] * v[j]});
  }
  const SparseRatings ratings(std::move(triplets), 5, 5);
  const auto model = train_mf(ratings, HyperParams{1, 0.05, 0.0, 500, 3});
  EXPECT_LT(objective(ratings, model, 0.0), 1e-3);
}

TEST(TrainMf, DeterministicForSeed) {
  const auto ratings = small_instance(5);
  const HyperParams hp{4, 0.02, 0.02, 10, 9};
  const auto a = train_mf(ratings, hp);
  const auto b = train_mf(ratings, hp);
  EXPECT_TRUE(a.users == b.users);
  EXPECT_TRUE(a.items == b.items);
  const auto c = train_mf(ratings, HyperParams{4, 0.02, 0.02, 10, 10});
  EXPECT_FALSE(a.users == c.users);
}

TEST(TrainMf, UnratedUserKeepsInitialization) {
  const SparseRatings ratings({{0, 0, 4.0}, {0, 1, 2.0}, {2, 1, 3.0}}, 3, 2);
  const HyperParams hp{3, 0.05, 0.1, 20, 4};
  const auto init = initialize_model(3, 2, hp);
  const auto trained = train_mf(ratings, hp);
  EXPECT_TRUE(trained.users.col(1) == init.users.col(1));
  EXPECT_FALSE(trained.users.col(0) == init.users.col(0));
}

TEST(TrainMf, DivergenceNamesEpoch) {
  const SparseRatings ratings({{0, 0, 1e6}, {1, 0, -1e6}, {0, 1, 1e6}}, 2, 2);
  try {
    train_mf(ratings, HyperParams{2, 10.0, 0.0, 50, 1});
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

}  // namespace
}  // namespace tmf
