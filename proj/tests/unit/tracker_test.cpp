#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "tmf/error.hpp"
#include "tmf/tracker.hpp"

namespace tmf {
namespace {

SlicedCorpus corpus_from_steps(std::vector<std::vector<Triplet>> steps, std::size_t users,
                               std::size_t items) {
  SlicedCorpus corpus;
  corpus.ids.users = IdMap::sequential(users);
  corpus.ids.items = IdMap::sequential(items);
  corpus.ids.training_users = users;
  corpus.ids.training_items = items;
  std::vector<Triplet> all;
  for (auto& step : steps) {
    for (const auto& t : step) {
      if (std::none_of(all.begin(), all.end(),
                       [&](const Triplet& x) { return x.user == t.user && x.item == t.item; })) {
        all.push_back(t);
      }
    }
    corpus.steps.emplace_back(std::move(step), users, items);
  }
  corpus.training = SparseRatings(std::move(all), users, items);
  corpus.testing = SparseRatings({}, users, items);
  return corpus;
}

FactorModel random_model(std::size_t users, std::size_t items, int d, std::uint64_t seed) {
  return initialize_model(users, items, HyperParams{d, 0.01, 0.02, 1, seed});
}

SlicedCorpus random_corpus(std::mt19937_64& rng, std::size_t users, std::size_t items, int steps) {
  std::uniform_real_distribution<double> rating(1.0, 5.0);
  std::bernoulli_distribution observed(0.3);
  std::vector<std::vector<Triplet>> data(steps);
  for (auto& step : data) {
    for (std::uint32_t i = 0; i < users; ++i) {
      for (std::uint32_t j = 0; j < items; ++j) {
        if (observed(rng)) step.push_back({i, j, rating(rng)});
      }
    }
  }
  return corpus_from_steps(std::move(data), users, items);
}

TEST(AdaptUser, OneUpdateFromUnitState) {
  const Eigen::VectorXd start = Eigen::VectorXd::Ones(1);
  const Eigen::MatrixXd items = Eigen::MatrixXd::Ones(1, 1);
  const Triplet r{0, 0, 2.0};
  const TrackerOptions options{0.1, 0.0, 1, 1, 1};
  const auto p = adapt_user(start, items, std::span(&r, 1), options, 0);
  EXPECT_NEAR(p(0), 1.1, 1e-15);
  EXPECT_EQ(items(0, 0), 1.0);
}

TEST(LearnStepLatents, SingleStepExample) {
  FactorModel model;
  model.users = Eigen::MatrixXd::Ones(1, 1);
  model.items = Eigen::MatrixXd::Ones(1, 1);
  const auto corpus = corpus_from_steps({{{0, 0, 2.0}}}, 1, 1);
  const auto traj = learn_step_latents(corpus, model, TrackerOptions{0.1, 0.0, 1, 1, 1});
  ASSERT_EQ(traj.size(), 1u);
  ASSERT_EQ(traj[0].states.size(), 1u);
  EXPECT_NEAR(traj[0].states[0](0), 1.1, 1e-15);
  EXPECT_TRUE(traj[0].deltas.empty());
  EXPECT_EQ(model.items(0, 0), 1.0);
}

TEST(LearnStepLatents, UserWithoutRatingsStaysAtGlobalVector) {
  const auto corpus = corpus_from_steps({{{0, 0, 3.0}}, {{0, 1, 4.0}}, {{0, 0, 2.0}}}, 2, 2);
  const auto model = random_model(2, 2, 3, 4);
  const auto traj = learn_step_latents(corpus, model, TrackerOptions{});
  ASSERT_EQ(traj[1].states.size(), 3u);
  ASSERT_EQ(traj[1].deltas.size(), 2u);
  for (const auto& s : traj[1].states) EXPECT_TRUE(s == model.users.col(1));
  for (const auto& z : traj[1].deltas) EXPECT_TRUE(z.isZero(0.0));
}

TEST(LearnStepLatents, ItemsAreNeverModified) {
  std::mt19937_64 rng(3);
  const auto corpus = random_corpus(rng, 6, 8, 4);
  const auto model = random_model(6, 8, 3, 9);
  const Eigen::MatrixXd before = model.items;
  learn_step_latents(corpus, model, TrackerOptions{});
  EXPECT_TRUE(model.items == before);
}

TEST(LearnStepLatents, ReanchorsEveryStep) {
  std::vector<Triplet> busy;
  for (std::uint32_t j = 0; j < 5; ++j) busy.push_back({0, j, 5.0});
  const auto corpus = corpus_from_steps({busy, {}}, 1, 5);
  const auto model = random_model(1, 5, 2, 2);
  const auto traj = learn_step_latents(corpus, model, TrackerOptions{});
  EXPECT_FALSE(traj[0].states[0] == model.users.col(0));
  EXPECT_TRUE(traj[0].states[1] == model.users.col(0));
}

TEST(LearnStepLatents, DeltasAreFirstDifferences) {
  std::mt19937_64 rng(8);
  const auto corpus = random_corpus(rng, 5, 6, 5);
  const auto traj = learn_step_latents(corpus, random_model(5, 6, 3, 1), TrackerOptions{});
  for (const auto& u : traj) {
    ASSERT_EQ(u.states.size(), 5u);
    ASSERT_EQ(u.deltas.size(), 4u);
    for (std::size_t t = 0; t < u.deltas.size(); ++t) {
      EXPECT_LE((u.deltas[t] - (u.states[t + 1] - u.states[t])).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

// A user's states depend only on their own ratings: replacing every other
// user's ratings leaves the trajectory bitwise unchanged.
TEST(TrackerProperties, Locality) {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    std::mt19937_64 rng(100 + trial);
    const auto a = random_corpus(rng, 6, 7, 3);
    auto b = random_corpus(rng, 6, 7, 3);
    std::vector<std::vector<Triplet>> merged;
    for (std::size_t t = 0; t < a.steps.size(); ++t) {
      std::vector<Triplet> step;
      for (const auto& x : a.steps[t].user_ratings(0)) step.push_back(x);
      for (const auto& x : b.steps[t].triplets()) {
        if (x.user != 0) step.push_back(x);
      }
      merged.push_back(std::move(step));
    }
    const auto c = corpus_from_steps(std::move(merged), 6, 7);
    const auto model = random_model(6, 7, 4, trial);
    const auto ta = learn_step_latents(a, model, TrackerOptions{});
    const auto tc = learn_step_latents(c, model, TrackerOptions{});
    for (std::size_t t = 0; t < 3; ++t) EXPECT_TRUE(ta[0].states[t] == tc[0].states[t]);
  }
}

TEST(TrackerProperties, DeterministicAcrossThreadCounts) {
  std::mt19937_64 rng(21);
  const auto corpus = random_corpus(rng, 40, 10, 4);
  const auto model = random_model(40, 10, 5, 6);
  TrackerOptions one;
  one.seed = 77;
  TrackerOptions four = one;
  four.threads = 4;
  const auto a = learn_step_latents(corpus, model, one);
  const auto b = learn_step_latents(corpus, model, four);
  const auto c = learn_step_latents(corpus, model, one);
  for (std::size_t u = 0; u < a.size(); ++u) {
    for (std::size_t t = 0; t < a[u].states.size(); ++t) {
      EXPECT_TRUE(a[u].states[t] == b[u].states[t]);
      EXPECT_TRUE(a[u].states[t] == c[u].states[t]);
    }
  }
}

TEST(LearnStepLatents, DivergenceNamesUserAndStep) {
  const auto corpus = corpus_from_steps({{{0, 0, 1.0}}, {{0, 0, 2.0}}}, 1, 1);
  FactorModel model;
  model.users = Eigen::MatrixXd::Ones(1, 1);
  model.items = Eigen::MatrixXd::Constant(1, 1, 1e10);
  try {
    learn_step_latents(corpus, model, TrackerOptions{1.0, 0.0, 50, 1, 1});
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("user 0"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos);
  }
}

TEST(TrajectoryCsv, RoundTripIsExact) {
  std::mt19937_64 rng(5);
  const auto corpus = random_corpus(rng, 4, 5, 3);
  const auto traj = learn_step_latents(corpus, random_model(4, 5, 3, 2), TrackerOptions{});
  std::stringstream buffer;
  write_trajectories_csv(buffer, traj);
  EXPECT_EQ(buffer.str().substr(0, 17), "user,step,f1,f2,f");
  const auto back = read_trajectories_csv(buffer);
  ASSERT_EQ(back.size(), traj.size());
  for (std::size_t u = 0; u < traj.size(); ++u) {
    EXPECT_EQ(back[u].user, traj[u].user);
    ASSERT_EQ(back[u].states.size(), traj[u].states.size());
    for (std::size_t t = 0; t < traj[u].states.size(); ++t) {
      EXPECT_TRUE(back[u].states[t] == traj[u].states[t]);
    }
    EXPECT_EQ(back[u].deltas.size(), traj[u].deltas.size());
  }
}

TEST(TrackerOptions, FromHyperParams) {
  const auto options = TrackerOptions::from(HyperParams{8, 0.005, 0.03, 12, 4});
  EXPECT_EQ(options.learning_rate, 0.005);
  EXPECT_EQ(options.regularization, 0.03);
  EXPECT_EQ(options.epochs, 12);
  EXPECT_THROW((TrackerOptions{0.0}).validate(), ConfigError);
}

}  // namespace
}  // namespace tmf
