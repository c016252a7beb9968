#include "tmf/dynamics.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "tmf/error.hpp"
#include "tmf/lasso.hpp"
#include "tmf/parallel.hpp"

namespace tmf {

Eigen::Index TransitionModel::nonzeros() const {
  Eigen::Index count = 0;
  for (Eigen::Index k = 0; k < a_tilde.size(); ++k) count += a_tilde.data()[k] != 0.0 ? 1 : 0;
  return count;
}

void TransitionModel::classify() {
  identity_like = nonzeros() == 0 && bias.norm() <= kIdentityTolerance;
}

TransitionModel TransitionModel::identity(std::uint32_t user, Eigen::Index factors) {
  TransitionModel model;
  model.user = user;
  model.a_tilde = Eigen::MatrixXd::Zero(factors, factors);
  model.bias = Eigen::VectorXd::Zero(factors);
  model.identity_like = true;
  return model;
}

TransitionModel fit_transition(const UserTrajectory& trajectory, const DynamicsOptions& options) {
  const Eigen::Index d = trajectory.states.empty() ? 0 : trajectory.states.front().size();
  const auto n = static_cast<Eigen::Index>(trajectory.deltas.size());
  if (n < 2 || d == 0) {
    auto model = TransitionModel::identity(trajectory.user, d);
    model.fallback = true;
    return model;
  }

  // Observation k pairs delta Z(k+2) with its regressor state.
  lasso::Problem problem;
  problem.x.resize(n, d);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& regressor = options.regressor == Regressor::kPreviousState
                                ? trajectory.states[static_cast<std::size_t>(k)]
                                : trajectory.states[static_cast<std::size_t>(k) + 1];
    problem.x.row(k) = regressor.transpose();
  }
  problem.lambda = options.lambda;
  problem.tol = options.tol;
  problem.max_sweeps = options.max_sweeps;
  problem.standardize = options.standardize;
  problem.y.resize(n);

  TransitionModel model;
  model.user = trajectory.user;
  model.a_tilde.resize(d, d);
  model.bias.resize(d);
  for (Eigen::Index row = 0; row < d; ++row) {
    for (Eigen::Index k = 0; k < n; ++k) {
      problem.y(k) = trajectory.deltas[static_cast<std::size_t>(k)](row);
    }
    const auto solution = lasso::solve(problem);
    model.a_tilde.row(row) = solution.w.transpose();
    model.bias(row) = solution.intercept;
    model.converged = model.converged && solution.converged;
  }
  model.classify();
  return model;
}

Eigen::VectorXd forecast_latent(const TransitionModel& model, const Eigen::VectorXd& last_state) {
  if (last_state.size() != model.bias.size() || model.a_tilde.cols() != last_state.size()) {
    throw DimensionError("forecast state has dimension " + std::to_string(last_state.size()) +
                         ", model expects " + std::to_string(model.bias.size()));
  }
  return last_state + model.a_tilde * last_state + model.bias;
}

double predict_rating(const Eigen::VectorXd& forecast, const Eigen::MatrixXd& items,
                      std::uint32_t item, const std::optional<RatingClamp>& clamp) {
  if (item >= static_cast<std::size_t>(items.cols())) {
    throw std::out_of_range("item index " + std::to_string(item) + " outside the item matrix");
  }
  if (forecast.size() != items.rows()) throw DimensionError("forecast dimension mismatch");
  const double value = items.col(item).dot(forecast);
  return clamp ? clamp->apply(value) : value;
}

double DynamicsFit::mean_row_nonzeros() const {
  double rows = 0.0;
  double nnz = 0.0;
  for (const auto& m : models) {
    if (m.fallback) continue;
    rows += static_cast<double>(m.a_tilde.rows());
    nnz += static_cast<double>(m.nonzeros());
  }
  return rows > 0.0 ? nnz / rows : 0.0;
}

DynamicsFit fit_all(const std::vector<UserTrajectory>& trajectories,
                    const DynamicsOptions& options) {
  DynamicsFit fit;
  fit.models.resize(trajectories.size());
  parallel_for(trajectories.size(), options.threads, [&](std::size_t k) {
    fit.models[k] = fit_transition(trajectories[k], options);
  });
  for (const auto& m : fit.models) {
    if (m.identity_like) {
      ++fit.identity_like;
    } else {
      ++fit.drifting;
    }
    if (m.fallback) ++fit.fallbacks;
    if (!m.converged) ++fit.unconverged;
  }
  return fit;
}

void write_transitions_json(std::ostream& out, const DynamicsFit& fit, bool full) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& m : fit.models) {
    nlohmann::json r = {{"user", m.user},
                        {"nnz", m.nonzeros()},
                        {"bias_norm", m.bias.norm()},
                        {"identity_like", m.identity_like},
                        {"fallback", m.fallback},
                        {"converged", m.converged}};
    if (full) {
      std::vector<double> a(static_cast<std::size_t>(m.a_tilde.size()));
      for (Eigen::Index i = 0; i < m.a_tilde.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.a_tilde.cols(); ++j) {
          a[static_cast<std::size_t>(i * m.a_tilde.cols() + j)] = m.a_tilde(i, j);
        }
      }
      r["a_tilde"] = a;
      r["bias"] = std::vector<double>(m.bias.data(), m.bias.data() + m.bias.size());
    }
    records.push_back(std::move(r));
  }
  nlohmann::json doc = {{"format", "tmf-transitions"},
                        {"version", 1},
                        {"identity_like", fit.identity_like},
                        {"drifting", fit.drifting},
                        {"fallbacks", fit.fallbacks},
                        {"unconverged", fit.unconverged},
                        {"users", std::move(records)}};
  out << doc.dump(2) << '\n';
}

DynamicsFit read_transitions_json(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed transitions file: ") + e.what());
  }
  if (doc.value("format", "") != "tmf-transitions" || doc.value("version", 0) != 1) {
    throw Error("not a version-1 tmf-transitions file");
  }
  DynamicsFit fit;
  for (const auto& r : doc.at("users")) {
    if (!r.contains("a_tilde") || !r.contains("bias")) {
      throw Error("transitions file lacks full matrices (written as a summary)");
    }
    const auto a = r.at("a_tilde").get<std::vector<double>>();
    const auto b = r.at("bias").get<std::vector<double>>();
    const auto d = static_cast<Eigen::Index>(b.size());
    if (static_cast<Eigen::Index>(a.size()) != d * d) throw Error("a_tilde size mismatch");
    TransitionModel m;
    m.user = r.at("user").get<std::uint32_t>();
    m.a_tilde.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) m.a_tilde(i, j) = a[static_cast<std::size_t>(i * d + j)];
    }
    m.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), d);
    m.fallback = r.value("fallback", false);
    m.converged = r.value("converged", true);
    m.classify();
    if (m.identity_like) {
      ++fit.identity_like;
    } else {
      ++fit.drifting;
    }
    if (m.fallback) ++fit.fallbacks;
    if (!m.converged) ++fit.unconverged;
    fit.models.push_back(std::move(m));
  }
  return fit;
}

}  // namespace tmf
