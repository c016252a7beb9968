#include <benchmark/benchmark.h>

#include <random>

#include "tmf/dynamics.hpp"
#include "tmf/factorizer.hpp"
#include "tmf/lasso.hpp"
#include "tmf/synthgen.hpp"
#include "tmf/tracker.hpp"

namespace {

using namespace tmf;

SynthData desk_corpus(std::size_t users) {
  SynthConfig cfg;
  cfg.users = users;
  cfg.items = users;
  cfg.density = 0.01;
  cfg.factors = 30;
  cfg.steps = 10;
  cfg.seed = 1;
  return generate(cfg);
}

void BM_SgdEpoch(benchmark::State& state) {
  const auto data = desk_corpus(static_cast<std::size_t>(state.range(0)));
  const auto& training = data.corpus.training;
  HyperParams hp;
  auto model = initialize_model(training.num_users(), training.num_items(), hp);
  for (auto _ : state) {
    sgd_pass(model, training.triplets(), hp.learning_rate, hp.regularization);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(training.size()));
}
BENCHMARK(BM_SgdEpoch)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_TrackAllUsers(benchmark::State& state) {
  const auto data = desk_corpus(1000);
  HyperParams hp;
  hp.epochs = 5;
  const auto model = train_mf(data.corpus.training, hp);
  TrackerOptions options;
  options.threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(learn_step_latents(data.corpus, model, options));
  }
}
BENCHMARK(BM_TrackAllUsers)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_LassoSolve(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  lasso::Problem problem;
  problem.x = Eigen::MatrixXd::NullaryExpr(state.range(0), 30, [&] { return normal(rng); });
  problem.y = Eigen::VectorXd::NullaryExpr(state.range(0), [&] { return normal(rng); });
  problem.lambda = 0.1;
  for (auto _ : state) benchmark::DoNotOptimize(lasso::solve(problem));
}
BENCHMARK(BM_LassoSolve)->Arg(4)->Arg(8)->Arg(50);

void BM_FitTransition(benchmark::State& state) {
  const auto data = desk_corpus(200);
  UserTrajectory traj;
  for (int t = 0; t < 9; ++t) traj.states.push_back(data.truth.user_states[t].col(0));
  traj.compute_deltas();
  DynamicsOptions options;
  options.lambda = 0.001;
  for (auto _ : state) benchmark::DoNotOptimize(fit_transition(traj, options));
}
BENCHMARK(BM_FitTransition);

}  // namespace

BENCHMARK_MAIN();
