#include "tmf/experiment.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tmf/error.hpp"
#include "tmf/parallel.hpp"
#include "tmf/serialization.hpp"

namespace tmf {
namespace {

using nlohmann::json;

std::string regressor_name(Regressor r) {
  return r == Regressor::kPreviousState ? "previous" : "current";
}

Regressor parse_regressor(const std::string& name) {
  if (name == "previous") return Regressor::kPreviousState;
  if (name == "current") return Regressor::kCurrentState;
  throw ConfigError("lasso.regressor must be 'previous' or 'current', got '" + name + "'");
}

Range parse_range(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(std::string(what) + " must be [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

template <class T>
void read_opt(const json& obj, const char* key, T& out) {
  if (obj.contains(key) && !obj.at(key).is_null()) out = obj.at(key).get<T>();
}

template <class F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double parse_number(const std::string& s) {
  double v = 0.0;
  const char* begin = s.data();
  if (!s.empty() && s.front() == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("invalid numeric sweep value '" + s + "'");
  }
  return v;
}

Range parse_range_value(const std::string& s) {
  const auto colon = s.find(':', 1);
  if (colon == std::string::npos) throw ConfigError("range sweep values are written lo:hi, got '" + s + "'");
  return {parse_number(s.substr(0, colon)), parse_number(s.substr(colon + 1))};
}

}  // namespace

// ---------------------------------------------------------------------------

void RunConfig::validate() const {
  if (mode == RunMode::kSynthetic) {
    if (!data_path.empty()) throw ConfigError("synthetic mode does not take a data path");
    synth.validate();
  } else {
    if (data_path.empty()) throw ConfigError("real mode requires a data path");
    if (has_conflicting_sources) throw ConfigError("real mode does not take a synthetic block");
    slicing.validate();
  }
  mf.validate();
  tracker_options().validate();
  if (!(dynamics.lambda >= 0.0)) throw ConfigError("lasso lambda must be non-negative");
  if (!(dynamics.tol > 0.0) || dynamics.max_sweeps < 1) throw ConfigError("invalid lasso stopping rule");
  if (clamp && !(clamp->lo < clamp->hi)) throw ConfigError("clamp range must satisfy lo < hi");
  if (threads < 1) throw ConfigError("threads must be at least 1");
}

TrackerOptions RunConfig::tracker_options() const {
  TrackerOptions options = TrackerOptions::from(mf);
  if (track_learning_rate) options.learning_rate = *track_learning_rate;
  if (track_regularization) options.regularization = *track_regularization;
  if (track_epochs) options.epochs = *track_epochs;
  options.seed = track_seed();
  options.threads = threads;
  return options;
}

std::uint64_t RunConfig::synth_seed() const { return mix_seed(seed, 1); }
std::uint64_t RunConfig::mf_seed() const { return mix_seed(seed, 2); }
std::uint64_t RunConfig::track_seed() const { return mix_seed(seed, 3); }

RunConfig config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    RunConfig c;
    const auto mode = doc.value("mode", std::string("synthetic"));
    if (mode == "synthetic") {
      c.mode = RunMode::kSynthetic;
    } else if (mode == "real") {
      c.mode = RunMode::kReal;
    } else {
      throw ConfigError("mode must be 'synthetic' or 'real', got '" + mode + "'");
    }
    if (doc.contains("data")) {
      const auto& d = doc.at("data");
      if (d.contains("path")) c.data_path = d.at("path").get<std::string>();
      if (d.contains("format")) c.format = parse_dataset_format(d.at("format").get<std::string>());
    }
    if (doc.contains("synthetic")) {
      const auto& s = doc.at("synthetic");
      if (c.mode == RunMode::kReal) c.has_conflicting_sources = true;
      read_opt(s, "users", c.synth.users);
      read_opt(s, "items", c.synth.items);
      read_opt(s, "density", c.synth.density);
      read_opt(s, "factors", c.synth.factors);
      read_opt(s, "steps", c.synth.steps);
      read_opt(s, "noise_sd", c.synth.noise_sd);
      if (s.contains("r_range")) c.synth.transition_range = parse_range(s.at("r_range"), "r_range");
      if (s.contains("b_range")) c.synth.bias_range = parse_range(s.at("b_range"), "b_range");
    }
    if (doc.contains("mf")) {
      const auto& m = doc.at("mf");
      read_opt(m, "factors", c.mf.factors);
      read_opt(m, "learning_rate", c.mf.learning_rate);
      read_opt(m, "regularization", c.mf.regularization);
      read_opt(m, "epochs", c.mf.epochs);
      read_opt(m, "sequential_updates", c.mf.sequential_updates);
    }
    if (doc.contains("tracker")) {
      const auto& t = doc.at("tracker");
      if (t.contains("learning_rate")) c.track_learning_rate = t.at("learning_rate").get<double>();
      if (t.contains("regularization")) c.track_regularization = t.at("regularization").get<double>();
      if (t.contains("epochs")) c.track_epochs = t.at("epochs").get<int>();
    }
    if (doc.contains("slicing")) {
      const auto& s = doc.at("slicing");
      read_opt(s, "n_slices", c.slicing.n_slices);
      read_opt(s, "window", c.slicing.window);
      read_opt(s, "equal_duration", c.slicing.equal_duration);
    }
    if (doc.contains("lasso")) {
      const auto& l = doc.at("lasso");
      read_opt(l, "lambda", c.dynamics.lambda);
      read_opt(l, "tol", c.dynamics.tol);
      read_opt(l, "max_sweeps", c.dynamics.max_sweeps);
      read_opt(l, "standardize", c.dynamics.standardize);
      if (l.contains("regressor")) c.dynamics.regressor = parse_regressor(l.at("regressor").get<std::string>());
    }
    if (doc.contains("clamp") && !doc.at("clamp").is_null()) {
      const auto r = parse_range(doc.at("clamp"), "clamp");
      c.clamp = RatingClamp{r.lo, r.hi};
    }
    if (doc.contains("output_dir")) c.output_dir = doc.at("output_dir").get<std::string>();
    read_opt(doc, "seed", c.seed);
    read_opt(doc, "threads", c.threads);
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

std::string config_to_json(const RunConfig& c) {
  json doc;
  doc["mode"] = c.mode == RunMode::kSynthetic ? "synthetic" : "real";
  if (c.mode == RunMode::kReal) {
    doc["data"] = {{"path", c.data_path.string()}, {"format", std::string(to_string(c.format))}};
    doc["slicing"] = {{"n_slices", c.slicing.n_slices},
                      {"window", c.slicing.window},
                      {"equal_duration", c.slicing.equal_duration}};
  } else {
    doc["synthetic"] = {{"users", c.synth.users},
                        {"items", c.synth.items},
                        {"density", c.synth.density},
                        {"factors", c.synth.factors},
                        {"steps", c.synth.steps},
                        {"noise_sd", c.synth.noise_sd},
                        {"r_range", {c.synth.transition_range.lo, c.synth.transition_range.hi}},
                        {"b_range", {c.synth.bias_range.lo, c.synth.bias_range.hi}}};
  }
  doc["mf"] = {{"factors", c.mf.factors},
               {"learning_rate", c.mf.learning_rate},
               {"regularization", c.mf.regularization},
               {"epochs", c.mf.epochs},
               {"sequential_updates", c.mf.sequential_updates}};
  const auto t = c.tracker_options();
  doc["tracker"] = {{"learning_rate", t.learning_rate},
                    {"regularization", t.regularization},
                    {"epochs", t.epochs}};
  doc["lasso"] = {{"lambda", c.dynamics.lambda},
                  {"tol", c.dynamics.tol},
                  {"max_sweeps", c.dynamics.max_sweeps},
                  {"standardize", c.dynamics.standardize},
                  {"regressor", regressor_name(c.dynamics.regressor)}};
  doc["clamp"] = c.clamp ? json::array({c.clamp->lo, c.clamp->hi}) : json(nullptr);
  doc["seed"] = c.seed;
  return doc.dump(2);
}

std::string config_hash(const RunConfig& config) { return fnv1a_hex(config_to_json(config)); }

// ---------------------------------------------------------------------------

SlicedCorpus build_corpus(const RunConfig& config, std::optional<SynthTruth>* truth,
                          std::vector<std::string>* warnings) {
  if (config.mode == RunMode::kSynthetic) {
    auto synth = config.synth;
    synth.seed = config.synth_seed();
    auto data = generate(synth);
    if (truth) *truth = std::move(data.truth);
    if (warnings) warnings->insert(warnings->end(), data.warnings.begin(), data.warnings.end());
    return std::move(data.corpus);
  }
  auto logs = ingest(config.data_path, config.format);
  return filter_test_set(slice_and_window(std::move(logs), config.slicing));
}

std::vector<ComparedPrediction> predict_test(const SlicedCorpus& corpus, const FactorModel& model,
                                             const std::vector<UserTrajectory>& trajectories,
                                             const DynamicsFit& dynamics,
                                             const std::optional<RatingClamp>& clamp) {
  std::vector<const UserTrajectory*> traj_of(model.num_users(), nullptr);
  for (const auto& t : trajectories) {
    if (t.user < traj_of.size()) traj_of[t.user] = &t;
  }
  std::vector<const TransitionModel*> dyn_of(model.num_users(), nullptr);
  for (const auto& m : dynamics.models) {
    if (m.user < dyn_of.size()) dyn_of[m.user] = &m;
  }

  std::vector<ComparedPrediction> out;
  out.reserve(corpus.testing.size());
  std::uint32_t cached_user = std::numeric_limits<std::uint32_t>::max();
  Eigen::VectorXd forecast;
  for (const auto& t : corpus.testing.triplets()) {
    if (t.user != cached_user) {
      cached_user = t.user;
      const auto* traj = t.user < traj_of.size() ? traj_of[t.user] : nullptr;
      const auto* dyn = t.user < dyn_of.size() ? dyn_of[t.user] : nullptr;
      const Eigen::VectorXd last = traj && !traj->states.empty()
                                       ? traj->states.back()
                                       : Eigen::VectorXd(model.users.col(t.user));
      forecast = dyn && !dyn->fallback ? forecast_latent(*dyn, last) : last;
    }
    ComparedPrediction p;
    p.user = t.user;
    p.item = t.item;
    p.actual = t.rating;
    p.mf = predict_static(model, t.user, t.item, clamp);
    p.tmf = predict_rating(forecast, model.items, t.item, clamp);
    out.push_back(p);
  }
  return out;
}

EvalReport report_from_predictions(const SparseRatings& testing,
                                   const std::vector<ComparedPrediction>& predictions) {
  std::vector<Prediction> mf;
  std::vector<Prediction> tmf;
  mf.reserve(predictions.size());
  tmf.reserve(predictions.size());
  for (const auto& p : predictions) {
    mf.push_back({p.user, p.item, p.mf});
    tmf.push_back({p.user, p.item, p.tmf});
  }
  return compare_report(testing, mf, tmf);
}

PipelineResult run_pipeline(const RunConfig& config,
                            const std::optional<std::filesystem::path>& output_dir) {
  config.validate();
  PipelineResult r;
  r.corpus = stage("corpus", [&] { return build_corpus(config, &r.truth, &r.warnings); });
  if (r.corpus.testing.empty()) throw StageError("corpus", "test set is empty after filtering");

  r.model = stage("train", [&] {
    auto hp = config.mf;
    hp.seed = config.mf_seed();
    return train_mf(r.corpus.training, hp);
  });
  if (output_dir) save_model(*output_dir / "model" / "factors.json", r.model);

  r.trajectories = stage("track", [&] {
    return learn_step_latents(r.corpus, r.model, config.tracker_options());
  });
  if (output_dir) {
    auto out = open_out(*output_dir / "trajectories" / "trajectories.csv");
    write_trajectories_csv(out, r.trajectories);
  }

  r.dynamics = stage("fit-dynamics", [&] {
    auto options = config.dynamics;
    options.threads = config.threads;
    return fit_all(r.trajectories, options);
  });
  if (output_dir) {
    auto full = open_out(*output_dir / "transitions" / "models.json");
    write_transitions_json(full, r.dynamics, true);
    auto summary = open_out(*output_dir / "transitions" / "summary.json");
    write_transitions_json(summary, r.dynamics, false);
  }

  r.predictions = stage("predict", [&] {
    return predict_test(r.corpus, r.model, r.trajectories, r.dynamics, config.clamp);
  });
  if (output_dir) {
    auto out = open_out(*output_dir / "report" / "predictions.csv");
    write_predictions_csv(out, r.predictions, &r.corpus.ids);
  }

  r.report = stage("evaluate", [&] { return report_from_predictions(r.corpus.testing, r.predictions); });
  if (r.truth && r.truth->items.rows() == r.model.items.rows()) {
    r.curve = stage("evaluate", [&] { return dissimilarity_curve(r.trajectories, *r.truth, r.model); });
  } else if (r.truth) {
    r.warnings.push_back("no dissimilarity curve: generator D differs from model D");
  }
  if (output_dir) {
    auto report = open_out(*output_dir / "report" / "report.json");
    write_report_json(report, r.report);
    auto users = open_out(*output_dir / "report" / "per_user.csv");
    write_per_user_csv(users, r.report);
    if (r.curve) {
      auto curve = open_out(*output_dir / "report" / "curve.csv");
      write_curve_csv(curve, *r.curve);
    }
  }
  return r;
}

EvalReport run_experiment(const RunConfig& config) {
  const auto& dir = config.output_dir;
  std::filesystem::create_directories(dir);
  auto result = run_pipeline(config, dir);

  json manifest = {
      {"tool", "tmf"},
      {"version", kVersion},
      {"config_hash", config_hash(config)},
      {"config", json::parse(config_to_json(config))},
      {"corpus",
       {{"users", result.corpus.num_users()},
        {"items", result.corpus.num_items()},
        {"training", result.corpus.training.size()},
        {"testing", result.corpus.testing.size()},
        {"steps", result.corpus.steps.size()}}},
      {"dynamics",
       {{"identity_like", result.dynamics.identity_like},
        {"drifting", result.dynamics.drifting},
        {"fallbacks", result.dynamics.fallbacks},
        {"unconverged", result.dynamics.unconverged}}},
      {"warnings", result.warnings},
      {"artifacts",
       {"model/factors.json", "trajectories/trajectories.csv", "transitions/models.json",
        "transitions/summary.json", "report/predictions.csv", "report/report.json",
        "report/per_user.csv"}},
  };
  if (result.curve) manifest["artifacts"].push_back("report/curve.csv");
  auto out = open_out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  return result.report;
}

// ---------------------------------------------------------------------------

bool is_sweepable(const std::string& param) {
  return param == "r_range" || param == "b_range" || param == "lasso_lambda" || param == "D" ||
         param == "alpha";
}

RunConfig apply_sweep_value(RunConfig config, const std::string& param, const std::string& value) {
  if (param == "r_range") {
    config.synth.transition_range = parse_range_value(value);
  } else if (param == "b_range") {
    config.synth.bias_range = parse_range_value(value);
  } else if (param == "lasso_lambda") {
    config.dynamics.lambda = parse_number(value);
  } else if (param == "D") {
    const double d = parse_number(value);
    config.mf.factors = static_cast<int>(d);
    if (static_cast<double>(config.mf.factors) != d) throw ConfigError("D must be an integer");
  } else if (param == "alpha") {
    config.mf.learning_rate = parse_number(value);
  } else {
    throw ConfigError("unknown sweep parameter '" + param +
                      "' (expected r_range, b_range, lasso_lambda, D or alpha)");
  }
  return config;
}

std::vector<SweepRow> sweep(const RunConfig& config, const std::string& param,
                            const std::vector<std::string>& values, SeedPolicy policy) {
  if (!is_sweepable(param)) {
    throw ConfigError("unknown sweep parameter '" + param +
                      "' (expected r_range, b_range, lasso_lambda, D or alpha)");
  }
  std::vector<RunConfig> runs;
  for (std::size_t k = 0; k < values.size(); ++k) {
    auto run = apply_sweep_value(config, param, values[k]);
    if (policy == SeedPolicy::kDerived) run.seed = mix_seed(config.seed, k + 100);
    run.output_dir = config.output_dir / ("run_" + std::to_string(k));
    run.validate();
    runs.push_back(std::move(run));
  }
  std::vector<SweepRow> rows;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    std::filesystem::create_directories(runs[k].output_dir);
    auto result = run_pipeline(runs[k], runs[k].output_dir);
    SweepRow row;
    row.value = values[k];
    row.report = result.report;
    row.mean_row_nonzeros = result.dynamics.mean_row_nonzeros();
    row.drifting_users = result.dynamics.drifting;
    row.identity_users = result.dynamics.identity_like;
    if (result.curve && !result.curve->points.empty()) {
      row.final_step_gain = result.curve->points.back().gain();
    }
    rows.push_back(std::move(row));
  }
  std::filesystem::create_directories(config.output_dir);
  auto out = open_out(config.output_dir / "sweep.csv");
  write_sweep_csv(out, param, rows);
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::string& param,
                     const std::vector<SweepRow>& rows) {
  out << param
      << ",rmse_mf,rmse_tmf,improvement_percent,n_test,mean_row_nnz,drifting_users,"
         "identity_users,final_step_gain\n";
  auto num = [](double v) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, end);
  };
  for (const auto& r : rows) {
    out << '"' << r.value << '"' << ',' << num(r.report.rmse_mf) << ',' << num(r.report.rmse_tmf)
        << ',' << num(r.report.improvement_percent()) << ',' << r.report.n_test << ','
        << num(r.mean_row_nonzeros) << ',' << r.drifting_users << ',' << r.identity_users << ','
        << (r.final_step_gain ? num(*r.final_step_gain) : std::string()) << '\n';
  }
}

}  // namespace tmf
