#pragma once

#include <random>
#include <string>
#include <vector>

#include "mobility/features.hpp"
#include "mobility/grid.hpp"
#include "mobility/ingest.hpp"

namespace test {

using namespace mobility;

// 2012-04-02 00:00 UTC, a Monday.
inline constexpr EpochSeconds kMonday = 1333324800;

inline CheckIn checkin(UserId user, std::string venue, double lat, double lon, EpochSeconds local,
                       std::string category = "Bar") {
  CheckIn c;
  c.user_id = user;
  c.venue_id = std::move(venue);
  c.venue_category_id = "cat-" + category;
  c.venue_category_name = std::move(category);
  c.lat = lat;
  c.lon = lon;
  c.tz_offset_min = 0;
  c.utc_time = local;
  c.local_time = local;
  return c;
}

// Enriched point in `grid` at the given cell, at local time t (day index
// counted from kMonday).
inline EnrichedPoint point_at(const GridSpec& grid, int flat, EpochSeconds t, UserId user = 1) {
  EnrichedPoint p;
  p.user_id = user;
  p.cell = grid.cell(flat);
  const auto c = centroid_of(p.cell, grid);
  p.lat = c.lat;
  p.lon = c.lon;
  p.local_time = t;
  p.day_index = static_cast<int>(day_number(t) - day_number(kMonday));
  p.day_of_week = day_of_week(t);
  p.local_hour = hour_of_day(t);
  p.segment = time_segment(p.local_hour);
  p.venue_id = "v" + std::to_string(flat);
  p.category_name = "Bar";
  return p;
}

inline GridSpec small_grid(int rows = 4, int cols = 4) { return make_grid(40.0, 40.04, -74.0, -73.96, rows, cols); }

}  // namespace test
