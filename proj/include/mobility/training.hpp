#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mobility/features.hpp"
#include "mobility/sampling.hpp"
#include "mobility/seqmodel.hpp"

namespace mobility {

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// [begin, end) point ranges of the sliding windows over n points: windows of
// window_len + 1 points advancing by window_len / 2.
std::vector<std::pair<std::size_t, std::size_t>> window_bounds(std::size_t n, int window_len);

struct WindowSet {
  std::vector<SampleRef> refs;  // dataset order
  std::vector<EncodedSequence> sequences;
  std::map<SampleRef, std::size_t> index;
  std::map<UserId, std::vector<double>> user_vectors;

  const EncodedSequence& at(const SampleRef& r) const;
};

// Vocabulary and distance/duration buckets fitted on the training split.
FeatureContext fit_feature_context(const SplitDataset& data, const GridSpec& grid, VocabMode mode, int buckets);

// Windows over every user's training points, users in dataset order.
WindowSet build_windows(const SplitDataset& data, const FeatureContext& ctx, int window_len);

// Next-cell training with Adam, one optimizer step per scheduled batch.
// Throws TrainingError on a non-finite loss.
TrainedModel train(const ModelConfig& config, const BatchSchedule& schedule, const WindowSet& windows,
                   const FeatureContext& context);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  int checked = 0;
};

// Central finite differences on `samples` randomly chosen parameter entries.
// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
GradientCheckResult gradient_check(SequenceModel& model, const Batch& batch, int samples, std::uint64_t seed,
                                   double h = 1e-4, double floor = 1e-6);

}  // namespace mobility
