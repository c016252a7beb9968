// tmf: command-line driver for temporal matrix factorization experiments.
//
//   tmf run --config cfg.json [overrides]
//   tmf generate | train | track | fit-dynamics | predict | evaluate [options]
//   tmf sweep --config cfg.json --param lasso_lambda --values "0.001;0.01;0.1;1"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tmf/error.hpp"
#include "tmf/experiment.hpp"
#include "tmf/serialization.hpp"

namespace {

using namespace tmf;
namespace fs = std::filesystem;

Range parse_range_flag(const std::string& s) {
  const auto colon = s.find(':', 1);
  if (colon == std::string::npos) throw ConfigError("ranges are written lo:hi, got '" + s + "'");
  return {std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
}

std::vector<std::string> split_values(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ';')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Command-line values that override the config file.
struct Overrides {
  std::string config;
  std::optional<std::string> mode;
  std::optional<std::string> data;
  std::optional<std::string> format;
  std::optional<int> slices;
  std::optional<int> window;
  bool equal_duration = false;
  std::optional<std::size_t> users;
  std::optional<std::size_t> items;
  std::optional<double> density;
  std::optional<int> steps;
  std::optional<std::string> r_range;
  std::optional<std::string> b_range;
  std::optional<double> noise;
  std::optional<int> factors;
  std::optional<double> alpha;
  std::optional<double> lambda;
  std::optional<int> epochs;
  std::optional<double> track_alpha;
  std::optional<int> track_epochs;
  std::optional<double> lasso_lambda;
  std::optional<std::string> regressor;
  bool standardize = false;
  std::optional<std::string> clamp;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON run configuration");
    app->add_option("--mode", mode, "synthetic or real")->check(CLI::IsMember({"synthetic", "real"}));
    app->add_option("--data", data, "rating log (real mode)");
    app->add_option("--format", format, "csv, tsv or movielens");
    app->add_option("--slices", slices, "number of chronological slices");
    app->add_option("--window", window, "slices merged into one time step");
    app->add_flag("--equal-duration", equal_duration, "slice by equal time spans");
    app->add_option("--users", users, "synthetic users M");
    app->add_option("--items", items, "synthetic items N");
    app->add_option("--density", density, "synthetic density");
    app->add_option("--steps", steps, "synthetic steps T");
    app->add_option("--r-range", r_range, "transition perturbation range lo:hi");
    app->add_option("--b-range", b_range, "bias range lo:hi");
    app->add_option("--noise", noise, "synthetic rating noise sd");
    app->add_option("--factors,-D", factors, "latent factors D");
    app->add_option("--alpha", alpha, "SGD learning rate");
    app->add_option("--lambda", lambda, "SGD regularization");
    app->add_option("--epochs", epochs, "MF epochs");
    app->add_option("--track-alpha", track_alpha, "per-step learning rate");
    app->add_option("--track-epochs", track_epochs, "per-step epochs");
    app->add_option("--lasso-lambda", lasso_lambda, "L1 weight of the transition fit");
    app->add_option("--regressor", regressor, "previous or current")
        ->check(CLI::IsMember({"previous", "current"}));
    app->add_flag("--standardize", standardize, "standardize Lasso columns");
    app->add_option("--clamp", clamp, "clamp predictions to lo:hi");
    app->add_option("--seed", seed, "global seed");
    app->add_option("--threads", threads, "worker threads for per-user stages");
    app->add_option("--out,-o", out, "output directory");
  }

  RunConfig resolve() const {
    RunConfig c = config.empty() ? RunConfig{} : load_config(config);
    if (config.empty()) {
      if (const char* root = std::getenv("TMF_OUTPUT_ROOT")) c.output_dir = root;
    }
    if (mode) c.mode = *mode == "real" ? RunMode::kReal : RunMode::kSynthetic;
    if (data) {
      c.data_path = *data;
      if (!mode) c.mode = RunMode::kReal;
    }
    if (format) c.format = parse_dataset_format(*format);
    if (slices) c.slicing.n_slices = *slices;
    if (window) c.slicing.window = *window;
    if (equal_duration) c.slicing.equal_duration = true;
    if (users) c.synth.users = *users;
    if (items) c.synth.items = *items;
    if (density) c.synth.density = *density;
    if (steps) c.synth.steps = *steps;
    if (r_range) c.synth.transition_range = parse_range_flag(*r_range);
    if (b_range) c.synth.bias_range = parse_range_flag(*b_range);
    if (noise) c.synth.noise_sd = *noise;
    if (factors) {
      c.mf.factors = *factors;
      c.synth.factors = *factors;
    }
    if (alpha) c.mf.learning_rate = *alpha;
    if (lambda) c.mf.regularization = *lambda;
    if (epochs) c.mf.epochs = *epochs;
    if (track_alpha) c.track_learning_rate = *track_alpha;
    if (track_epochs) c.track_epochs = *track_epochs;
    if (lasso_lambda) c.dynamics.lambda = *lasso_lambda;
    if (regressor) {
      c.dynamics.regressor = *regressor == "current" ? Regressor::kCurrentState : Regressor::kPreviousState;
    }
    if (standardize) c.dynamics.standardize = true;
    if (clamp) {
      const auto r = parse_range_flag(*clamp);
      c.clamp = RatingClamp{r.lo, r.hi};
    }
    if (seed) c.seed = *seed;
    if (threads) c.threads = *threads;
    if (out) c.output_dir = *out;
    c.validate();
    return c;
  }
};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

template <class F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

SlicedCorpus corpus_for(const RunConfig& c, std::optional<SynthTruth>* truth = nullptr) {
  std::vector<std::string> warnings;
  auto corpus = stage("corpus", [&] { return build_corpus(c, truth, &warnings); });
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  return corpus;
}

void print_report(const EvalReport& r) {
  std::cout << "test ratings     " << r.n_test << '\n'
            << "RMSE (MF)        " << r.rmse_mf << '\n'
            << "RMSE (TMF)       " << r.rmse_tmf << '\n'
            << "improvement      " << r.improvement_percent() << "%\n";
}

int cmd_generate(const RunConfig& c) {
  if (c.mode != RunMode::kSynthetic) throw ConfigError("generate requires synthetic mode");
  auto synth = c.synth;
  synth.seed = c.synth_seed();
  const auto data = stage("generate", [&] { return generate(synth); });
  for (const auto& w : data.warnings) std::cerr << "warning: " << w << '\n';
  auto logs = open_out(c.output_dir / "data" / "logs.csv");
  write_logs_csv(logs, data.logs);

  std::vector<UserTrajectory> truth(synth.users);
  for (std::size_t u = 0; u < synth.users; ++u) {
    truth[u].user = static_cast<std::uint32_t>(u);
    for (const auto& p : data.truth.user_states) truth[u].states.push_back(p.col(static_cast<Eigen::Index>(u)));
  }
  auto states = open_out(c.output_dir / "data" / "truth_states.csv");
  write_trajectories_csv(states, truth);
  std::cout << "wrote " << data.logs.size() << " ratings over " << synth.steps << " steps to "
            << (c.output_dir / "data" / "logs.csv").string() << '\n'
            << "ingest with: --data <logs.csv> --slices " << synth.steps
            << " --window 1 --equal-duration\n";
  return 0;
}

int cmd_train(const RunConfig& c, const std::string& model_path) {
  const auto corpus = corpus_for(c);
  auto hp = c.mf;
  hp.seed = c.mf_seed();
  const auto model = stage("train", [&] { return train_mf(corpus.training, hp); });
  const fs::path path = model_path.empty() ? c.output_dir / "model" / "factors.json" : fs::path(model_path);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_model(path, model);
  std::cout << "trained D=" << model.factors() << " on " << corpus.training.size()
            << " ratings; objective " << objective(corpus.training, model, hp.regularization)
            << "\nwrote " << path.string() << '\n';
  return 0;
}

fs::path or_default(const std::string& given, const fs::path& fallback) {
  return given.empty() ? fallback : fs::path(given);
}

int cmd_track(const RunConfig& c, const std::string& model_path, const std::string& traj_path) {
  const auto corpus = corpus_for(c);
  const auto model = stage("track", [&] { return load_model(or_default(model_path, c.output_dir / "model" / "factors.json")); });
  const auto trajectories = stage("track", [&] { return learn_step_latents(corpus, model, c.tracker_options()); });
  const auto path = or_default(traj_path, c.output_dir / "trajectories" / "trajectories.csv");
  auto out = open_out(path);
  write_trajectories_csv(out, trajectories);
  std::cout << "tracked " << trajectories.size() << " users over " << corpus.steps.size()
            << " steps\nwrote " << path.string() << '\n';
  return 0;
}

std::vector<UserTrajectory> load_trajectories(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_trajectories_csv(in);
}

DynamicsOptions dynamics_options(const RunConfig& c) {
  auto options = c.dynamics;
  options.threads = c.threads;
  return options;
}

int cmd_fit(const RunConfig& c, const std::string& traj_path, const std::string& transitions_path) {
  const auto trajectories = stage("fit-dynamics", [&] {
    return load_trajectories(or_default(traj_path, c.output_dir / "trajectories" / "trajectories.csv"));
  });
  const auto fit = stage("fit-dynamics", [&] { return fit_all(trajectories, dynamics_options(c)); });
  const auto path = or_default(transitions_path, c.output_dir / "transitions" / "models.json");
  auto full = open_out(path);
  write_transitions_json(full, fit, true);
  auto summary = open_out(path.parent_path() / "summary.json");
  write_transitions_json(summary, fit, false);
  std::cout << "users " << fit.models.size() << ": identity-like " << fit.identity_like
            << ", drifting " << fit.drifting << ", fallback " << fit.fallbacks << ", unconverged "
            << fit.unconverged << "\nmean nonzeros per row " << fit.mean_row_nonzeros()
            << "\nwrote " << path.string() << '\n';
  return 0;
}

int cmd_predict(const RunConfig& c, const std::string& model_path, const std::string& traj_path,
                const std::string& transitions_path, const std::string& predictions_path) {
  const auto corpus = corpus_for(c);
  const auto model = stage("predict", [&] { return load_model(or_default(model_path, c.output_dir / "model" / "factors.json")); });
  const auto trajectories = stage("predict", [&] {
    return load_trajectories(or_default(traj_path, c.output_dir / "trajectories" / "trajectories.csv"));
  });
  const auto tpath = or_default(transitions_path, c.output_dir / "transitions" / "models.json");
  const auto fit = stage("predict", [&] {
    if (fs::exists(tpath)) {
      std::ifstream in(tpath);
      return read_transitions_json(in);
    }
    return fit_all(trajectories, dynamics_options(c));
  });
  const auto predictions =
      stage("predict", [&] { return predict_test(corpus, model, trajectories, fit, c.clamp); });
  const auto path = or_default(predictions_path, c.output_dir / "report" / "predictions.csv");
  auto out = open_out(path);
  write_predictions_csv(out, predictions, &corpus.ids);
  std::cout << "predicted " << predictions.size() << " test ratings\nwrote " << path.string() << '\n';
  return 0;
}

int cmd_evaluate(const RunConfig& c, const std::string& predictions_path) {
  const auto path = or_default(predictions_path, c.output_dir / "report" / "predictions.csv");
  const auto report = stage("evaluate", [&] {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    const auto rows = read_predictions_csv(in);
    std::vector<Triplet> actual;
    std::size_t users = 0;
    std::size_t items = 0;
    for (const auto& r : rows) {
      actual.push_back({r.user, r.item, r.actual});
      users = std::max<std::size_t>(users, r.user + 1);
      items = std::max<std::size_t>(items, r.item + 1);
    }
    return report_from_predictions(SparseRatings(std::move(actual), users, items), rows);
  });
  auto json = open_out(path.parent_path() / "report.json");
  write_report_json(json, report);
  auto users = open_out(path.parent_path() / "per_user.csv");
  write_per_user_csv(users, report);
  print_report(report);
  return 0;
}

int cmd_run(const RunConfig& c) {
  const auto report = run_experiment(c);
  print_report(report);
  std::cout << "artifacts in " << c.output_dir.string() << '\n';
  return 0;
}

int cmd_sweep(const RunConfig& c, const std::string& param, const std::string& values,
              const std::string& policy) {
  const auto rows = sweep(c, param, split_values(values),
                          policy == "derived" ? SeedPolicy::kDerived : SeedPolicy::kSame);
  write_sweep_csv(std::cout, param, rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal matrix factorization: track per-user concept drift and forecast ratings"};
  app.require_subcommand(1);

  Overrides opts;
  std::string model_path;
  std::string traj_path;
  std::string transitions_path;
  std::string predictions_path;
  std::string param;
  std::string values;
  std::string seed_policy = "same";

  auto* generate = app.add_subcommand("generate", "write a synthetic rating log and its ground truth");
  auto* train = app.add_subcommand("train", "fit static P and Q by SGD");
  auto* track = app.add_subcommand("track", "learn per-step user latent vectors");
  auto* fit = app.add_subcommand("fit-dynamics", "fit per-user transition models by Lasso");
  auto* predict = app.add_subcommand("predict", "forecast test ratings with MF and TMF");
  auto* evaluate = app.add_subcommand("evaluate", "RMSE report from a predictions file");
  auto* run = app.add_subcommand("run", "end-to-end experiment");
  auto* sweep_cmd = app.add_subcommand("sweep", "repeat run over values of one parameter");

  for (auto* sub : {generate, train, track, fit, predict, evaluate, run, sweep_cmd}) opts.attach(sub);
  for (auto* sub : {train, track, predict}) sub->add_option("--model", model_path, "factor model JSON");
  for (auto* sub : {track, fit, predict}) sub->add_option("--trajectories", traj_path, "trajectory CSV");
  for (auto* sub : {fit, predict}) sub->add_option("--transitions", transitions_path, "transition JSON");
  for (auto* sub : {predict, evaluate}) sub->add_option("--predictions", predictions_path, "predictions CSV");
  sweep_cmd->add_option("--param", param, "r_range, b_range, lasso_lambda, D or alpha")->required();
  sweep_cmd->add_option("--values", values, "values separated by ';' (ranges as lo:hi)")->required();
  sweep_cmd->add_option("--seed-policy", seed_policy, "same or derived")
      ->check(CLI::IsMember({"same", "derived"}));

  CLI11_PARSE(app, argc, argv);

  try {
    const auto config = opts.resolve();
    if (*generate) return cmd_generate(config);
    if (*train) return cmd_train(config, model_path);
    if (*track) return cmd_track(config, model_path, traj_path);
    if (*fit) return cmd_fit(config, traj_path, transitions_path);
    if (*predict) return cmd_predict(config, model_path, traj_path, transitions_path, predictions_path);
    if (*evaluate) return cmd_evaluate(config, predictions_path);
    if (*run) return cmd_run(config);
    if (*sweep_cmd) return cmd_sweep(config, param, values, seed_policy);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
