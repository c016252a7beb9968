#include "tmf/tracker.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <string>

#include "tmf/error.hpp"
#include "tmf/parallel.hpp"

namespace tmf {

void UserTrajectory::compute_deltas() {
  deltas.clear();
  for (std::size_t t = 1; t < states.size(); ++t) deltas.push_back(states[t] - states[t - 1]);
}

void TrackerOptions::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("tracker learning rate must be positive");
  if (!(regularization >= 0.0)) throw ConfigError("tracker regularization must be non-negative");
  if (epochs < 1) throw ConfigError("tracker epochs must be at least 1");
}

TrackerOptions TrackerOptions::from(const HyperParams& hp) {
  TrackerOptions options;
  options.learning_rate = hp.learning_rate;
  options.regularization = hp.regularization;
  options.epochs = hp.epochs;
  options.seed = hp.seed;
  return options;
}

std::uint64_t step_seed(std::uint64_t seed, std::uint32_t user, std::size_t step) {
  return mix_seed(mix_seed(seed, user), step);
}

Eigen::VectorXd adapt_user(const Eigen::VectorXd& start, const Eigen::MatrixXd& items,
                           std::span<const Triplet> ratings, const TrackerOptions& options,
                           std::uint64_t seed) {
  Eigen::VectorXd p = start;
  if (ratings.empty()) return p;
  std::vector<Triplet> order(ratings.begin(), ratings.end());
  std::mt19937_64 rng(seed);
  const double alpha = options.learning_rate;
  const double lambda = options.regularization;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (const auto& t : order) {
      const auto q = items.col(t.item);
      const double err = t.rating - q.dot(p);
      p += alpha * (err * q - lambda * p);
    }
  }
  return p;
}

std::vector<UserTrajectory> learn_step_latents(const SlicedCorpus& corpus,
                                               const FactorModel& model,
                                               const TrackerOptions& options) {
  options.validate();
  if (model.num_users() < corpus.num_users() || model.num_items() < corpus.num_items()) {
    throw DimensionError("factor model does not cover the corpus");
  }
  const auto num_users = corpus.num_users();
  std::vector<UserTrajectory> out(num_users);
  parallel_for(num_users, options.threads, [&](std::size_t u) {
    const auto user = static_cast<std::uint32_t>(u);
    const Eigen::VectorXd global = model.users.col(user);
    auto& traj = out[u];
    traj.user = user;
    traj.states.reserve(corpus.steps.size());
    for (std::size_t t = 0; t < corpus.steps.size(); ++t) {
      auto state = adapt_user(global, model.items, corpus.steps[t].user_ratings(user), options,
                              step_seed(options.seed, user, t + 1));
      if (!state.allFinite()) {
        throw DivergenceError("tracking diverged for user " + std::to_string(user) + " at step " +
                              std::to_string(t + 1));
      }
      traj.states.push_back(std::move(state));
    }
    traj.compute_deltas();
  });
  return out;
}

void write_trajectories_csv(std::ostream& out, const std::vector<UserTrajectory>& trajectories) {
  std::size_t d = 0;
  for (const auto& traj : trajectories) {
    if (!traj.states.empty()) {
      d = static_cast<std::size_t>(traj.states.front().size());
      break;
    }
  }
  out << "user,step";
  for (std::size_t k = 1; k <= d; ++k) out << ",f" << k;
  out << '\n';
  char buf[64];
  for (const auto& traj : trajectories) {
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
      out << traj.user << ',' << (t + 1);
      for (Eigen::Index k = 0; k < traj.states[t].size(); ++k) {
        const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), traj.states[t](k));
        (void)ec;
        out << ',' << std::string_view(buf, end - buf);
      }
      out << '\n';
    }
  }
}

std::vector<UserTrajectory> read_trajectories_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::map<std::uint32_t, std::map<std::size_t, Eigen::VectorXd>> rows;
  Eigen::Index dim = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind("user", 0) == 0) continue;
    std::vector<double> values;
    std::uint64_t user = 0;
    std::uint64_t step = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    auto field_end = [&](const char* from) {
      const char* c = from;
      while (c != end && *c != ',') ++c;
      return c;
    };
    const char* e = field_end(p);
    if (std::from_chars(p, e, user).ptr != e || e == end) {
      throw ParseError(line_no, "invalid trajectory user index");
    }
    p = e + 1;
    e = field_end(p);
    if (std::from_chars(p, e, step).ptr != e || step == 0) {
      throw ParseError(line_no, "invalid trajectory step");
    }
    while (e != end) {
      p = e + 1;
      e = field_end(p);
      double v = 0.0;
      if (std::from_chars(p, e, v).ptr != e) throw ParseError(line_no, "invalid latent value");
      values.push_back(v);
    }
    if (dim < 0) dim = static_cast<Eigen::Index>(values.size());
    if (static_cast<Eigen::Index>(values.size()) != dim || dim == 0) {
      throw ParseError(line_no, "inconsistent latent dimension");
    }
    rows[static_cast<std::uint32_t>(user)][step] =
        Eigen::Map<const Eigen::VectorXd>(values.data(), dim);
  }
  std::vector<UserTrajectory> out;
  out.reserve(rows.size());
  for (auto& [user, steps] : rows) {
    UserTrajectory traj;
    traj.user = user;
    std::size_t expect = 1;
    for (auto& [step, state] : steps) {
      if (step != expect++) {
        throw Error("trajectory for user " + std::to_string(user) + " skips step " +
                    std::to_string(expect - 1));
      }
      traj.states.push_back(std::move(state));
    }
    traj.compute_deltas();
    out.push_back(std::move(traj));
  }
  return out;
}

}  // namespace tmf
