#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "tmf/corpus.hpp"
#include "tmf/factorizer.hpp"
#include "tmf/synthgen.hpp"
#include "tmf/tracker.hpp"

namespace tmf {

struct Prediction {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  double value = 0.0;
};

/// Root mean squared error of `predictions` against the matching entries of
/// `actuals`. Summation follows the user-major order of `actuals`, so the
/// result does not depend on the order of `predictions`.
double rmse(std::span<const Prediction> predictions, const SparseRatings& actuals);

enum class ResidualSign { kMixed, kAllOver, kAllUnder };

struct UserReport {
  std::uint32_t user = 0;
  std::size_t n_ratings = 0;
  double rmse_mf = 0.0;
  double rmse_tmf = 0.0;
  /// Sign pattern of the MF residuals; only set for users with at least
  /// kMinFlagRatings test ratings.
  ResidualSign mf_sign = ResidualSign::kMixed;
  /// MF is uniformly over or under and TMF reduces the user's RMSE.
  bool beneficial = false;
};

struct EvalReport {
  static constexpr std::size_t kMinFlagRatings = 3;

  double rmse_mf = 0.0;
  double rmse_tmf = 0.0;
  std::size_t n_test = 0;
  std::vector<UserReport> per_user;
  /// 1 - rmse_tmf / rmse_mf
  double improvement = 0.0;

  double rmse() const noexcept { return rmse_tmf; }
  /// Improvement in percent, rounded to two decimals.
  double improvement_percent() const;
};

EvalReport compare_report(const SparseRatings& testing, std::span<const Prediction> mf,
                          std::span<const Prediction> tmf);

/// sqrt(mean_d (a_d - b_d)^2)
double dissimilarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct CurvePoint {
  int step = 0;
  double static_mean = 0.0;
  double tracked_mean = 0.0;

  /// 1 - tracked / static
  double gain() const noexcept;
};

struct DissimilarityCurve {
  std::vector<CurvePoint> points;  // steps 1..T-1
};

/// Mean over users of the distance between the true P_i(t) and both the
/// tracked state and the static P_i, for t = 1..T-1.
DissimilarityCurve dissimilarity_curve(const std::vector<UserTrajectory>& trajectories,
                                       const SynthTruth& truth, const FactorModel& static_model);

/// One test entry with both predictions.
struct ComparedPrediction {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  double actual = 0.0;
  double mf = 0.0;
  double tmf = 0.0;
};

void write_predictions_csv(std::ostream& out, std::span<const ComparedPrediction> rows,
                           const IdMaps* ids = nullptr);
std::vector<ComparedPrediction> read_predictions_csv(std::istream& in);

void write_report_json(std::ostream& out, const EvalReport& report);
void write_per_user_csv(std::ostream& out, const EvalReport& report);
void write_curve_csv(std::ostream& out, const DissimilarityCurve& curve);

}  // namespace tmf
