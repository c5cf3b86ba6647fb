#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "mobility/grid.hpp"
#include "mobility/ingest.hpp"

namespace mobility {

enum class TimeSegment { Rush = 0, OffPeak = 1 };

// Rush covers [07:00, 23:00); every other hour is off-peak.
constexpr TimeSegment time_segment(int local_hour) {
  return (local_hour >= 7 && local_hour <= 22) ? TimeSegment::Rush : TimeSegment::OffPeak;
}

struct TimeSlot {
  int day_of_week = 0;
  int hour = 0;
  friend bool operator==(const TimeSlot&, const TimeSlot&) = default;
};

struct EnrichedPoint {
  UserId user_id = 0;
  CellId cell;
  double lat = 0.0;
  double lon = 0.0;
  EpochSeconds local_time = 0;
  int day_index = 0;
  int day_of_week = 0;
  int local_hour = 0;
  TimeSegment segment = TimeSegment::Rush;
  double travel_distance_m = 0.0;
  double duration_min = 0.0;
  std::string venue_id;
  std::string category_id;
  std::string category_name;

  TimeSlot slot() const { return {day_of_week, local_hour}; }
  LatLon position() const { return {lat, lon}; }
  friend bool operator==(const EnrichedPoint&, const EnrichedPoint&) = default;
};

struct EnrichedTrajectory {
  UserId user_id = 0;
  std::vector<EnrichedPoint> points;
};

struct EnrichResult {
  EnrichedTrajectory trajectory;
  std::size_t dropped_out_of_bbox = 0;
};

// Earliest local calendar day (as a day number) across the check-ins.
std::int64_t earliest_local_day(const std::vector<CheckIn>& checkins);

// Distances and durations are measured from the previous retained point;
// points outside the grid are dropped and counted.
EnrichResult enrich(const Trajectory& t, const GridSpec& spec, std::int64_t epoch_day0);

struct SplitConfig {
  int train_days = 250;  // days [0, train_days) are training
  int test_days = 50;    // days [train_days, train_days + test_days) are test
};

struct UserSplit {
  UserId user_id = 0;
  std::vector<EnrichedPoint> train;
  std::vector<EnrichedPoint> test;
  // Empty train or test side; such users are kept but not scored.
  bool flagged = false;
};

struct SplitDataset {
  std::vector<UserSplit> users;
  int t_split = 250;
  int test_days = 50;
  std::size_t out_of_window = 0;

  std::size_t train_points() const;
  std::size_t test_points() const;
};

SplitDataset temporal_split(const std::vector<EnrichedTrajectory>& trajectories, SplitConfig config = {});

// Tab-separated, one point per line, header line starting with '#'.
void write_enriched(std::ostream& out, const std::vector<EnrichedTrajectory>& trajectories);
std::vector<EnrichedTrajectory> read_enriched(std::istream& in, const GridSpec& spec);

}  // namespace mobility
