#pragma once

#include <optional>
#include <span>

#include "mobility/geo.hpp"
#include "mobility/util.hpp"

namespace mobility {

struct CellId {
  int row = 0;
  int col = 0;
  int flat = 0;
  friend bool operator==(const CellId&, const CellId&) = default;
};

// Uniform lat/lon binning. Row 0 is the southern edge (lat_min), column 0 the
// western edge (lon_min).
struct GridSpec {
  double lat_min = 0.0;
  double lat_max = 0.0;
  double lon_min = 0.0;
  double lon_max = 0.0;
  int rows = 200;
  int cols = 200;
  double cell_height_m = 0.0;
  double cell_width_m = 0.0;

  int cell_count() const { return rows * cols; }
  CellId cell(int row, int col) const { return {row, col, row * cols + col}; }
  CellId cell(int flat) const { return {flat / cols, flat % cols, flat}; }
  bool contains(LatLon p) const {
    return p.lat >= lat_min && p.lat <= lat_max && p.lon >= lon_min && p.lon <= lon_max;
  }
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

inline constexpr double kBboxPadDeg = 1e-9;

// Bounding box of the points, padded by kBboxPadDeg at the max edges; metric
// cell sizes are measured with haversine at the box mid-latitude/longitude.
GridSpec build_grid(std::span<const LatLon> points, int rows = 200, int cols = 200);
// Validates the box and fills in the derived metric cell sizes.
GridSpec make_grid(double lat_min, double lat_max, double lon_min, double lon_max, int rows, int cols);

std::optional<CellId> cell_of(LatLon p, const GridSpec& spec);
LatLon centroid_of(const CellId& cell, const GridSpec& spec);

Json grid_to_json(const GridSpec& spec);
GridSpec grid_from_json(const Json& j);

}  // namespace mobility
