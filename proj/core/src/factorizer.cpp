#include "tmf/factorizer.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "tmf/error.hpp"

namespace tmf {

void HyperParams::validate() const {
  if (factors < 1) throw ConfigError("factor count D must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(regularization >= 0.0)) throw ConfigError("regularization must be non-negative");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
}

FactorModel initialize_model(std::size_t num_users, std::size_t num_items, const HyperParams& hp) {
  hp.validate();
  std::mt19937_64 rng(hp.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  FactorModel model;
  model.params = hp;
  model.users.resize(hp.factors, static_cast<Eigen::Index>(num_users));
  model.items.resize(hp.factors, static_cast<Eigen::Index>(num_items));
  for (Eigen::Index c = 0; c < model.users.cols(); ++c) {
    for (Eigen::Index r = 0; r < model.users.rows(); ++r) model.users(r, c) = unit(rng);
  }
  for (Eigen::Index c = 0; c < model.items.cols(); ++c) {
    for (Eigen::Index r = 0; r < model.items.rows(); ++r) model.items(r, c) = unit(rng);
  }
  return model;
}

void sgd_pass(FactorModel& model, std::span<const Triplet> ratings, double learning_rate,
              double regularization, bool sequential) {
  const auto d = model.users.rows();
  for (const auto& t : ratings) {
    auto p = model.users.col(t.user);
    auto q = model.items.col(t.item);
    const double err = t.rating - q.dot(p);
    for (Eigen::Index k = 0; k < d; ++k) {
      const double pk = p(k);
      const double qk = q(k);
      p(k) = pk + learning_rate * (err * qk - regularization * pk);
      const double pu = sequential ? p(k) : pk;
      q(k) = qk + learning_rate * (err * pu - regularization * qk);
    }
  }
}

void fit(FactorModel& model, const SparseRatings& training, const HyperParams& hp,
         const EpochCallback& on_epoch) {
  hp.validate();
  if (training.empty()) throw EmptyCorpusError("training set is empty");
  if (model.num_users() < training.num_users() || model.num_items() < training.num_items() ||
      model.users.rows() != model.items.rows()) {
    throw DimensionError("factor model does not cover the training matrix");
  }

  std::vector<Triplet> order(training.triplets().begin(), training.triplets().end());
  // Separate stream from initialization so that warm starts shuffle identically.
  std::mt19937_64 rng(hp.seed ^ 0x5bd1e9955bd1e995ULL);
  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    sgd_pass(model, order, hp.learning_rate, hp.regularization, hp.sequential_updates);
    if (!model.users.allFinite() || !model.items.allFinite()) {
      throw DivergenceError("SGD diverged in epoch " + std::to_string(epoch) +
                            "; try a smaller learning rate than " +
                            std::to_string(hp.learning_rate));
    }
    if (on_epoch) on_epoch(epoch, model);
  }
}

FactorModel train_mf(const SparseRatings& training, const HyperParams& hp,
                     const EpochCallback& on_epoch) {
  if (training.empty()) throw EmptyCorpusError("training set is empty");
  auto model = initialize_model(training.num_users(), training.num_items(), hp);
  fit(model, training, hp, on_epoch);
  return model;
}

double objective(const SparseRatings& ratings, const FactorModel& model, double lambda) {
  if (model.users.rows() != model.items.rows()) throw DimensionError("factor counts differ");
  double loss = 0.0;
  for (const auto& t : ratings.triplets()) {
    const double err = t.rating - model.items.col(t.item).dot(model.users.col(t.user));
    loss += err * err;
  }
  return 0.5 * loss + 0.5 * lambda * (model.users.squaredNorm() + model.items.squaredNorm());
}

double predict_static(const FactorModel& model, std::uint32_t user, std::uint32_t item,
                      const std::optional<RatingClamp>& clamp) {
  if (user >= model.num_users() || item >= model.num_items()) {
    throw std::out_of_range("prediction index (" + std::to_string(user) + ", " +
                            std::to_string(item) + ") outside the factor model");
  }
  const double value = model.items.col(item).dot(model.users.col(user));
  return clamp ? clamp->apply(value) : value;
}

}  // namespace tmf
