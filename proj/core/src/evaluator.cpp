#include "tmf/evaluator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "tmf/error.hpp"

namespace tmf {
namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, end);
}

// Squared residuals placed at the position of each test entry in `actuals`.
std::vector<double> aligned_squared_errors(std::span<const Prediction> predictions,
                                           const SparseRatings& actuals,
                                           std::vector<double>* signed_errors = nullptr) {
  const auto all = actuals.triplets();
  std::vector<double> sq(all.size(), -1.0);
  if (signed_errors) signed_errors->assign(all.size(), 0.0);
  for (const auto& p : predictions) {
    const auto row = actuals.user_ratings(p.user);
    const auto it = std::lower_bound(row.begin(), row.end(), p.item,
                                     [](const Triplet& t, std::uint32_t j) { return t.item < j; });
    if (it == row.end() || it->item != p.item) {
      throw Error("prediction for (" + std::to_string(p.user) + ", " + std::to_string(p.item) +
                  ") has no test rating");
    }
    const auto pos = static_cast<std::size_t>(&*it - all.data());
    if (sq[pos] >= 0.0) {
      throw Error("duplicate prediction for (" + std::to_string(p.user) + ", " +
                  std::to_string(p.item) + ")");
    }
    const double err = p.value - it->rating;
    sq[pos] = err * err;
    if (signed_errors) (*signed_errors)[pos] = err;
  }
  return sq;
}

}  // namespace

double rmse(std::span<const Prediction> predictions, const SparseRatings& actuals) {
  if (predictions.empty() || actuals.empty()) throw EmptyTestError("test set is empty");
  const auto sq = aligned_squared_errors(predictions, actuals);
  double sum = 0.0;
  for (const double v : sq) {
    if (v >= 0.0) sum += v;
  }
  return std::sqrt(sum / static_cast<double>(predictions.size()));
}

double EvalReport::improvement_percent() const {
  return std::round(improvement * 100.0 * 100.0) / 100.0;
}

EvalReport compare_report(const SparseRatings& testing, std::span<const Prediction> mf,
                          std::span<const Prediction> tmf) {
  if (testing.empty() || mf.empty() || tmf.empty()) throw EmptyTestError("test set is empty");
  if (mf.size() != testing.size() || tmf.size() != testing.size()) {
    throw Error("predictions must cover the test set (" + std::to_string(testing.size()) +
                " entries)");
  }
  std::vector<double> mf_err;
  std::vector<double> tmf_err;
  const auto mf_sq = aligned_squared_errors(mf, testing, &mf_err);
  const auto tmf_sq = aligned_squared_errors(tmf, testing, &tmf_err);

  EvalReport report;
  report.n_test = testing.size();
  const auto all = testing.triplets();
  double mf_total = 0.0;
  double tmf_total = 0.0;
  std::size_t begin = 0;
  while (begin < all.size()) {
    std::size_t end = begin;
    while (end < all.size() && all[end].user == all[begin].user) ++end;
    UserReport u;
    u.user = all[begin].user;
    u.n_ratings = end - begin;
    double mf_sum = 0.0;
    double tmf_sum = 0.0;
    std::size_t over = 0;
    std::size_t under = 0;
    for (std::size_t k = begin; k < end; ++k) {
      mf_sum += mf_sq[k];
      tmf_sum += tmf_sq[k];
      over += mf_err[k] > 0.0 ? 1 : 0;
      under += mf_err[k] < 0.0 ? 1 : 0;
    }
    mf_total += mf_sum;
    tmf_total += tmf_sum;
    u.rmse_mf = std::sqrt(mf_sum / static_cast<double>(u.n_ratings));
    u.rmse_tmf = std::sqrt(tmf_sum / static_cast<double>(u.n_ratings));
    if (u.n_ratings >= EvalReport::kMinFlagRatings) {
      if (over == u.n_ratings) u.mf_sign = ResidualSign::kAllOver;
      if (under == u.n_ratings) u.mf_sign = ResidualSign::kAllUnder;
    }
    u.beneficial = u.mf_sign != ResidualSign::kMixed && u.rmse_tmf < u.rmse_mf;
    report.per_user.push_back(u);
    begin = end;
  }
  const auto n = static_cast<double>(report.n_test);
  report.rmse_mf = std::sqrt(mf_total / n);
  report.rmse_tmf = std::sqrt(tmf_total / n);
  report.improvement = report.rmse_mf > 0.0 ? 1.0 - report.rmse_tmf / report.rmse_mf : 0.0;
  return report;
}

double dissimilarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() == 0) {
    throw DimensionError("dissimilarity needs two vectors of equal, non-zero length");
  }
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

double CurvePoint::gain() const noexcept {
  return static_mean > 0.0 ? 1.0 - tracked_mean / static_mean : 0.0;
}

DissimilarityCurve dissimilarity_curve(const std::vector<UserTrajectory>& trajectories,
                                       const SynthTruth& truth, const FactorModel& static_model) {
  DissimilarityCurve curve;
  if (trajectories.empty()) return curve;
  const auto steps = trajectories.front().states.size();
  if (truth.user_states.size() < steps) throw DimensionError("truth has fewer steps than tracking");
  for (std::size_t t = 0; t < steps; ++t) {
    double tracked = 0.0;
    double fixed = 0.0;
    for (const auto& traj : trajectories) {
      if (traj.states.size() != steps) throw DimensionError("trajectories differ in length");
      if (traj.user >= static_cast<std::size_t>(truth.user_states[t].cols()) ||
          traj.user >= static_model.num_users()) {
        throw DimensionError("trajectory user outside the ground truth");
      }
      const Eigen::VectorXd actual = truth.user_states[t].col(traj.user);
      tracked += dissimilarity(actual, traj.states[t]);
      fixed += dissimilarity(actual, static_model.users.col(traj.user));
    }
    const auto users = static_cast<double>(trajectories.size());
    curve.points.push_back({static_cast<int>(t + 1), fixed / users, tracked / users});
  }
  return curve;
}

void write_predictions_csv(std::ostream& out, std::span<const ComparedPrediction> rows,
                           const IdMaps* ids) {
  out << "user_index,item_index,user,item,actual,mf,tmf\n";
  for (const auto& r : rows) {
    out << r.user << ',' << r.item << ',' << (ids ? ids->users.name(r.user) : std::to_string(r.user))
        << ',' << (ids ? ids->items.name(r.item) : std::to_string(r.item)) << ','
        << fmt_double(r.actual) << ',' << fmt_double(r.mf) << ',' << fmt_double(r.tmf) << '\n';
  }
}

std::vector<ComparedPrediction> read_predictions_csv(std::istream& in) {
  std::vector<ComparedPrediction> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind("user_index", 0) == 0) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    while (true) {
      const auto pos = rest.find(',');
      f.push_back(rest.substr(0, pos));
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    if (f.size() != 7) throw ParseError(line_no, "expected 7 prediction columns");
    ComparedPrediction r;
    auto num = [&](std::string_view s, auto& v) {
      if (std::from_chars(s.data(), s.data() + s.size(), v).ptr != s.data() + s.size()) {
        throw ParseError(line_no, "invalid number '" + std::string(s) + "'");
      }
    };
    num(f[0], r.user);
    num(f[1], r.item);
    num(f[4], r.actual);
    num(f[5], r.mf);
    num(f[6], r.tmf);
    rows.push_back(r);
  }
  return rows;
}

void write_report_json(std::ostream& out, const EvalReport& report) {
  auto sign_name = [](ResidualSign s) {
    switch (s) {
      case ResidualSign::kAllOver:
        return "all_over";
      case ResidualSign::kAllUnder:
        return "all_under";
      case ResidualSign::kMixed:
        break;
    }
    return "mixed";
  };
  std::size_t flagged = 0;
  std::size_t beneficial = 0;
  for (const auto& u : report.per_user) {
    flagged += u.mf_sign != ResidualSign::kMixed ? 1 : 0;
    beneficial += u.beneficial ? 1 : 0;
  }
  nlohmann::json users = nlohmann::json::array();
  for (const auto& u : report.per_user) {
    if (u.mf_sign == ResidualSign::kMixed) continue;
    users.push_back({{"user", u.user},
                     {"n_ratings", u.n_ratings},
                     {"rmse_mf", u.rmse_mf},
                     {"rmse_tmf", u.rmse_tmf},
                     {"mf_sign", sign_name(u.mf_sign)},
                     {"beneficial", u.beneficial}});
  }
  nlohmann::json doc = {{"rmse_mf", report.rmse_mf},
                        {"rmse_tmf", report.rmse_tmf},
                        {"n_test", report.n_test},
                        {"n_users", report.per_user.size()},
                        {"improvement_percent", report.improvement_percent()},
                        {"uniform_bias_users", flagged},
                        {"beneficial_users", beneficial},
                        {"flagged", std::move(users)}};
  out << doc.dump(2) << '\n';
}

void write_per_user_csv(std::ostream& out, const EvalReport& report) {
  out << "user,n_ratings,rmse_mf,rmse_tmf,mf_sign,beneficial\n";
  for (const auto& u : report.per_user) {
    const char* sign = u.mf_sign == ResidualSign::kAllOver    ? "all_over"
                       : u.mf_sign == ResidualSign::kAllUnder ? "all_under"
                                                              : "mixed";
    out << u.user << ',' << u.n_ratings << ',' << fmt_double(u.rmse_mf) << ','
        << fmt_double(u.rmse_tmf) << ',' << sign << ',' << (u.beneficial ? 1 : 0) << '\n';
  }
}

void write_curve_csv(std::ostream& out, const DissimilarityCurve& curve) {
  out << "t,static,tracked\n";
  for (const auto& p : curve.points) {
    out << p.step << ',' << fmt_double(p.static_mean) << ',' << fmt_double(p.tracked_mean) << '\n';
  }
}

}  // namespace tmf
