#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mobility/config.hpp"
#include "mobility/fusion.hpp"
#include "mobility/grid.hpp"
#include "mobility/kmeans.hpp"
#include "mobility/metrics.hpp"
#include "mobility/semantics.hpp"
#include "mobility/training.hpp"

namespace mobility {

struct StageError : std::runtime_error {
  StageError(const std::string& stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage(stage) {}
  std::string stage;
};

// Everything derived from the raw file that does not depend on the seed.
struct PreparedData {
  GridSpec grid;
  SplitDataset split;
  std::vector<UserProfile> profiles;
  std::size_t checkins = 0;
  std::size_t malformed_rows = 0;
  std::size_t users_total = 0;
  std::size_t users_kept = 0;
  std::size_t dropped_out_of_bbox = 0;
};

// Grid over the training-period check-ins of every user (before subsampling).
GridSpec grid_from_checkins(const std::vector<CheckIn>& checkins, int rows, int cols, int train_days);
// Keeps a user when a hash of its id falls below `fraction`.
bool keep_user(UserId user, double fraction);

PreparedData prepare_data(const ExperimentConfig& config);
PreparedData prepare_data(const ExperimentConfig& config, const std::vector<CheckIn>& checkins);

// Grid sizes and in-window volumes for the stats report.
Json preprocessing_summary(const std::vector<CheckIn>& checkins, int rows, int cols, SplitConfig split);

Clustering cluster_stage(const ExperimentConfig& config, std::vector<UserProfile>& profiles, std::uint64_t seed);

// Semantic vectors keyed by user; fits a seeded autoencoder.
std::map<UserId, std::vector<double>> semantic_stage(const ExperimentConfig& config, std::vector<UserProfile>& profiles,
                                                     std::uint64_t seed);

BatchSchedule schedule_stage(const ExperimentConfig& config, const WindowSet& windows, const Clustering& clustering,
                             std::uint64_t seed);

struct ModelBundle {
  TrainedModel model;
  std::optional<GateParams> gate;
  std::map<UserId, std::vector<double>> user_vectors;
};

// Scores every non-flagged user; `bundle` is ignored for the HV baseline.
EvalReport evaluate(const ExperimentConfig& config, const PreparedData& data, ModelBundle* bundle, std::uint64_t seed);

std::string run_directory(const ExperimentConfig& config, std::uint64_t seed);

// Short description of the configuration used in report rows.
std::string run_label(const ExperimentConfig& c);

// Full pipeline for one seed. Artifacts go to run_directory(); on failure a
// FAILED marker is written next to whatever was produced and StageError is
// rethrown.
EvalReport run_experiment(const ExperimentConfig& config, const PreparedData& data, std::uint64_t seed);
EvalReport run_experiment(const ExperimentConfig& config, std::uint64_t seed);

// Stops after training; persists the checkpoint.
void train_only(const ExperimentConfig& config, const PreparedData& data, std::uint64_t seed);
// Evaluates a persisted checkpoint (or the HV baseline) for one seed.
EvalReport evaluate_persisted(const ExperimentConfig& config, const PreparedData& data, std::uint64_t seed);

struct SeedSummary {
  std::vector<std::pair<std::uint64_t, EvalReport>> runs;
  double geo_bleu_mean = 0.0, geo_bleu_min = 0.0, geo_bleu_max = 0.0;
  double accuracy_mean = 0.0, accuracy_min = 0.0, accuracy_max = 0.0;
};

SeedSummary summarize(std::vector<std::pair<std::uint64_t, EvalReport>> runs);
Json summary_to_json(const SeedSummary& s);
// Every configured seed, plus summary.json under the output directory.
SeedSummary run_seeds(const ExperimentConfig& config);

enum class SweepAxis { BatchSize, Sampling, Ablation };
SweepAxis sweep_axis_from_string(std::string_view s);
std::string to_string(SweepAxis a);
std::vector<std::string> default_axis_values(SweepAxis axis);
// Configuration overrides that realize one axis value.
std::vector<std::string> axis_overrides(SweepAxis axis, const std::string& value);

struct SweepCell {
  std::string value;
  std::uint64_t seed = 0;
  std::optional<EvalReport> report;  // empty when the run failed
  std::string error;
  bool reference_na = false;  // combination absent from the reference tables
};

struct SweepResult {
  SweepAxis axis = SweepAxis::BatchSize;
  std::string dataset;
  std::vector<SweepCell> cells;
};

// Throws ConfigError for an empty value list.
SweepResult run_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::string>& values);
// axis,value,dataset,seed,geo_bleu,accuracy,status,reference_na with mean/min/max rows per value.
std::string sweep_csv(const SweepResult& r);
// Rebuilds the table from the per-run report.json files.
SweepResult reload_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::string>& values);

struct ReplayResult {
  bool identical = false;
  std::string original_report;
  std::string replayed_report;
  std::string message;
};

// Reruns a persisted run from its saved config into <run_dir>/replay and
// compares report bytes and schedule digests.
ReplayResult replay(const std::string& run_dir);

}  // namespace mobility
