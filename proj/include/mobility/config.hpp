#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mobility/fusion.hpp"
#include "mobility/features.hpp"
#include "mobility/ingest.hpp"
#include "mobility/kmeans.hpp"
#include "mobility/metrics.hpp"
#include "mobility/sampling.hpp"
#include "mobility/seqmodel.hpp"

namespace mobility {

// Directory searched for relative dataset paths that do not exist as given.
inline constexpr const char* kDataDirEnv = "MOBILITY_DATA_DIR";

struct ExperimentConfig {
  std::string data_path;
  std::string city = "city";
  std::string delimiter = "tab";  // tab | comma
  std::string columns;            // optional column mapping, see CheckInSchema::from_column_names
  double subsample = 1.0;         // fraction of users kept, chosen by user-id hash

  int grid_rows = 200;
  int grid_cols = 200;
  SplitConfig split;

  ModelConfig model;
  SamplingStrategy sampling = SamplingStrategy::Stratified;

  int top_k = 10;
  ClusterOptions cluster;
  std::string embeddings_path;
  int autoencoder_epochs = 200;
  double autoencoder_lr = 1e-3;

  GateTrainConfig gate;
  double gate_tail_fraction = 0.1;

  GeoBleuConfig metric;

  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string output_dir = "runs/default";

  CheckInSchema schema() const;
  // Dataset path after the data-directory lookup.
  std::string resolved_data_path() const;
  // Throws ConfigError on inconsistent values or a missing dataset file.
  void validate(bool require_data = true) const;

  // Canonical INI text: every key, fixed order. Parsing it yields an equal
  // configuration.
  std::string to_ini() const;
  std::string digest() const;
  std::string fingerprint(std::uint64_t seed) const;
};

// Reads "section.key = value" settings, then applies "section.key=value"
// overrides. Unknown keys are rejected.
ExperimentConfig parse_config(const std::string& ini_text, const std::vector<std::string>& overrides = {});
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

// Model config for one seed: seed-specific copy with the autoencoder etc. untouched.
ModelConfig model_config_for_seed(const ExperimentConfig& c, std::uint64_t seed);

}  // namespace mobility
