#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mobility/ingest.hpp"

namespace mobility {

// Synthetic check-ins with weekly routines: users live in one of `neighborhoods`
// clusters, each user owns a few venues near its neighborhood and repeats a
// fixed per-weekday itinerary. `skip_probability` drops scheduled visits and
// `noise_probability` adds a visit to a random venue of the same neighborhood.
struct SynthConfig {
  int users = 30;
  int days = 300;
  int neighborhoods = 3;
  int venues_per_user = 6;
  int visits_per_day = 4;
  double center_lat = 40.75;
  double center_lon = -73.97;
  double spread_deg = 0.08;        // neighborhood centers lie within this radius
  double venue_jitter_deg = 0.004;  // venues around their neighborhood center
  double skip_probability = 0.1;
  double noise_probability = 0.1;
  int tz_offset_min = -240;
  EpochSeconds start_utc = 1333411200;  // 2012-04-03 00:00 UTC
  std::uint64_t seed = 7;
};

std::vector<CheckIn> synthesize_checkins(const SynthConfig& config);
// Tab-separated rows in the public dataset's column order, no header.
std::string synthesize_tsv(const SynthConfig& config);

}  // namespace mobility
