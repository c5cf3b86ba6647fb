#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "mobility/ingest.hpp"

namespace mobility {

// One training window: the `window`-th sliding window of a user's history.
struct SampleRef {
  UserId user = 0;
  int window = 0;
  friend auto operator<=>(const SampleRef&, const SampleRef&) = default;
};

enum class SamplingStrategy { Sequential, ClusterOrdered, Stratified };
std::string to_string(SamplingStrategy s);
SamplingStrategy sampling_from_string(std::string_view s);

using Epoch = std::vector<std::vector<SampleRef>>;

struct BatchSchedule {
  SamplingStrategy strategy = SamplingStrategy::Sequential;
  int batch_size = 1;
  std::uint64_t seed = 0;
  std::vector<Epoch> epochs;
};

// Contiguous slices in the given order, identical every epoch.
BatchSchedule plan_sequential(const std::vector<SampleRef>& samples, int batch_size, int epochs);
// Sorted by (cluster, user, window), then sliced; identical every epoch.
BatchSchedule plan_cluster_ordered(const std::vector<SampleRef>& samples, const std::map<UserId, int>& clusters,
                                   int batch_size, int epochs);
// Every batch takes from each cluster a largest-remainder quota proportional
// to the cluster's share of the samples not yet used this epoch; clusters
// are shuffled independently each epoch.
BatchSchedule plan_stratified(const std::vector<SampleRef>& samples, const std::map<UserId, int>& clusters,
                              int batch_size, int epochs, std::uint64_t seed);

// Largest-remainder apportionment of `total` over `weights` (ties go to the
// lower index). Exposed for tests.
std::vector<int> largest_remainder(const std::vector<std::size_t>& weights, int total);

// "epoch,batch,user,window" lines after a '#' metadata header.
void write_schedule(std::ostream& out, const BatchSchedule& schedule);
BatchSchedule read_schedule(std::istream& in);
std::string schedule_digest(const BatchSchedule& schedule);

}  // namespace mobility
