#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tmf/corpus.hpp"
#include "tmf/dynamics.hpp"
#include "tmf/evaluator.hpp"
#include "tmf/factorizer.hpp"
#include "tmf/synthgen.hpp"
#include "tmf/tracker.hpp"

namespace tmf {

inline constexpr const char* kVersion = "0.1.0";

enum class RunMode { kSynthetic, kReal };

/// Everything needed to reproduce one experiment. Serialized as JSON; see
/// README for the schema.
struct RunConfig {
  RunMode mode = RunMode::kSynthetic;
  std::filesystem::path data_path;
  DatasetFormat format = DatasetFormat::kCsv;
  SynthConfig synth;
  HyperParams mf;
  /// Per-step tracking; unset fields follow the MF hyperparameters.
  std::optional<double> track_learning_rate;
  std::optional<double> track_regularization;
  std::optional<int> track_epochs;
  SliceOptions slicing;
  DynamicsOptions dynamics;
  std::optional<RatingClamp> clamp;
  std::filesystem::path output_dir = "tmf-out";
  std::uint64_t seed = 1;
  int threads = 1;
  /// Present only in configs read from a file with a "synthetic" block in
  /// real mode, or a data path in synthetic mode; rejected by validate().
  bool has_conflicting_sources = false;

  void validate() const;
  TrackerOptions tracker_options() const;
  /// Seeds for the generator, MF initialization and tracking, all derived
  /// from `seed`.
  std::uint64_t synth_seed() const;
  std::uint64_t mf_seed() const;
  std::uint64_t track_seed() const;
};

RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Canonical JSON (sorted keys, no output directory).
std::string config_to_json(const RunConfig& config);
/// 64-bit FNV-1a of config_to_json, hex encoded.
std::string config_hash(const RunConfig& config);

/// Builds the corpus a config describes (generated or ingested + sliced +
/// filtered). `truth` is filled in synthetic mode.
SlicedCorpus build_corpus(const RunConfig& config, std::optional<SynthTruth>* truth = nullptr,
                          std::vector<std::string>* warnings = nullptr);

/// MF and TMF predictions for every test entry.
std::vector<ComparedPrediction> predict_test(const SlicedCorpus& corpus, const FactorModel& model,
                                             const std::vector<UserTrajectory>& trajectories,
                                             const DynamicsFit& dynamics,
                                             const std::optional<RatingClamp>& clamp);

EvalReport report_from_predictions(const SparseRatings& testing,
                                   const std::vector<ComparedPrediction>& predictions);

struct PipelineResult {
  SlicedCorpus corpus;
  std::optional<SynthTruth> truth;
  FactorModel model;
  std::vector<UserTrajectory> trajectories;
  DynamicsFit dynamics;
  std::vector<ComparedPrediction> predictions;
  EvalReport report;
  std::optional<DissimilarityCurve> curve;
  std::vector<std::string> warnings;
};

/// corpus -> factorizer -> tracker -> dynamics -> evaluator, in memory. When
/// `output_dir` is set, each stage's artifacts are written as soon as the
/// stage finishes. An invalid config throws ConfigError before any work;
/// stage failures surface as StageError.
PipelineResult run_pipeline(const RunConfig& config,
                            const std::optional<std::filesystem::path>& output_dir = std::nullopt);

/// run_pipeline writing into config.output_dir: model/, trajectories/,
/// transitions/, report/ and manifest.json.
EvalReport run_experiment(const RunConfig& config);

enum class SeedPolicy { kSame, kDerived };

struct SweepRow {
  std::string value;
  EvalReport report;
  double mean_row_nonzeros = 0.0;
  std::size_t drifting_users = 0;
  std::size_t identity_users = 0;
  std::optional<double> final_step_gain;
};

/// Sweepable parameters: r_range, b_range, lasso_lambda, D, alpha. Range
/// values are written "lo:hi".
bool is_sweepable(const std::string& param);
RunConfig apply_sweep_value(RunConfig config, const std::string& param, const std::string& value);

/// One run per value into output_dir/run_<k>/, plus output_dir/sweep.csv.
std::vector<SweepRow> sweep(const RunConfig& config, const std::string& param,
                            const std::vector<std::string>& values, SeedPolicy policy);

void write_sweep_csv(std::ostream& out, const std::string& param,
                     const std::vector<SweepRow>& rows);

}  // namespace tmf
