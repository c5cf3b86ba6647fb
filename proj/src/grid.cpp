#include "mobility/grid.hpp"

#include <algorithm>
#include <cmath>

namespace mobility {

GridSpec make_grid(double lat_min, double lat_max, double lon_min, double lon_max, int rows, int cols) {
  if (rows < 1 || cols < 1) throw ConfigError("grid needs at least one row and one column");
  if (!(lat_min < lat_max) || !(lon_min < lon_max)) throw DomainError("degenerate bounding box");
  GridSpec g;
  g.lat_min = lat_min;
  g.lat_max = lat_max;
  g.lon_min = lon_min;
  g.lon_max = lon_max;
  g.rows = rows;
  g.cols = cols;
  const double mid_lat = 0.5 * (lat_min + lat_max);
  const double mid_lon = 0.5 * (lon_min + lon_max);
  g.cell_width_m = haversine_m({mid_lat, lon_min}, {mid_lat, lon_max}) / cols;
  g.cell_height_m = haversine_m({lat_min, mid_lon}, {lat_max, mid_lon}) / rows;
  return g;
}

GridSpec build_grid(std::span<const LatLon> points, int rows, int cols) {
  if (points.empty()) throw DomainError("cannot build a grid from no points");
  double lat_min = points[0].lat, lat_max = points[0].lat;
  double lon_min = points[0].lon, lon_max = points[0].lon;
  for (const auto& p : points) {
    lat_min = std::min(lat_min, p.lat);
    lat_max = std::max(lat_max, p.lat);
    lon_min = std::min(lon_min, p.lon);
    lon_max = std::max(lon_max, p.lon);
  }
  if (lat_min == lat_max && lon_min == lon_max) throw DomainError("degenerate bounding box: all points identical");
  return make_grid(lat_min, lat_max + kBboxPadDeg, lon_min, lon_max + kBboxPadDeg, rows, cols);
}

namespace {
int bin(double v, double lo, double hi, int n) {
  const int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * n));
  return std::clamp(b, 0, n - 1);
}
}  // namespace

std::optional<CellId> cell_of(LatLon p, const GridSpec& spec) {
  if (!spec.contains(p)) return std::nullopt;
  return spec.cell(bin(p.lat, spec.lat_min, spec.lat_max, spec.rows), bin(p.lon, spec.lon_min, spec.lon_max, spec.cols));
}

LatLon centroid_of(const CellId& cell, const GridSpec& spec) {
  const double dlat = (spec.lat_max - spec.lat_min) / spec.rows;
  const double dlon = (spec.lon_max - spec.lon_min) / spec.cols;
  return {spec.lat_min + (cell.row + 0.5) * dlat, spec.lon_min + (cell.col + 0.5) * dlon};
}

Json grid_to_json(const GridSpec& spec) {
  Json j;
  j["lat_min"] = spec.lat_min;
  j["lat_max"] = spec.lat_max;
  j["lon_min"] = spec.lon_min;
  j["lon_max"] = spec.lon_max;
  j["rows"] = spec.rows;
  j["cols"] = spec.cols;
  j["cell_height_m"] = spec.cell_height_m;
  j["cell_width_m"] = spec.cell_width_m;
  return j;
}

GridSpec grid_from_json(const Json& j) {
  return make_grid(j.at("lat_min").get<double>(), j.at("lat_max").get<double>(), j.at("lon_min").get<double>(),
                   j.at("lon_max").get<double>(), j.at("rows").get<int>(), j.at("cols").get<int>());
}

}  // namespace mobility
