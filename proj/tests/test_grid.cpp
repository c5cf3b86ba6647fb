#include <doctest.h>

#include <cmath>
#include <random>

#include "mobility/grid.hpp"

using namespace mobility;

TEST_CASE("two corner points with one cell give a single cell over the box") {
  const std::vector<LatLon> pts{{40.0, -74.0}, {41.0, -73.0}};
  const auto g = build_grid(pts, 1, 1);
  CHECK(g.cell_count() == 1);
  CHECK(cell_of(pts[0], g)->flat == 0);
  CHECK(cell_of(pts[1], g)->flat == 0);
  const auto c = centroid_of(g.cell(0), g);
  CHECK(c.lat == doctest::Approx(40.5));
  CHECK(c.lon == doctest::Approx(-73.5));
}

TEST_CASE("degenerate inputs are rejected") {
  const std::vector<LatLon> same{{1.0, 2.0}, {1.0, 2.0}};
  CHECK_THROWS_AS(build_grid(same), DomainError);
  CHECK_THROWS_AS(build_grid(std::vector<LatLon>{}), DomainError);
  CHECK_THROWS(make_grid(1.0, 0.0, 0.0, 1.0, 2, 2));
  CHECK_THROWS(make_grid(0.0, 1.0, 0.0, 1.0, 0, 2));
}

TEST_CASE("corners map to the first and last cells; outside points are rejected") {
  const std::vector<LatLon> pts{{35.5, 139.4}, {35.9, 139.9}, {35.7, 139.6}};
  const auto g = build_grid(pts);
  CHECK(g.cell_count() == 40'000);
  CHECK(*cell_of({35.5, 139.4}, g) == g.cell(0, 0));
  CHECK(*cell_of({35.9, 139.9}, g) == g.cell(199, 199));
  CHECK_FALSE(cell_of({35.4, 139.6}, g).has_value());
  CHECK_FALSE(cell_of({35.7, 140.0}, g).has_value());
}

TEST_CASE("binning agrees with a scan over every cell rectangle") {
  const auto g = make_grid(40.5, 40.9, -74.3, -73.7, 17, 23);
  const double dlat = (g.lat_max - g.lat_min) / g.rows, dlon = (g.lon_max - g.lon_min) / g.cols;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ulat(g.lat_min, g.lat_max), ulon(g.lon_min, g.lon_max);
  for (int i = 0; i < 1000; ++i) {
    const LatLon p{ulat(rng), ulon(rng)};
    int found = -1, hits = 0;
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) {
        const double la = g.lat_min + r * dlat, lo = g.lon_min + c * dlon;
        const bool last_r = r == g.rows - 1, last_c = c == g.cols - 1;
        if (p.lat >= la && (p.lat < la + dlat || last_r) && p.lon >= lo && (p.lon < lo + dlon || last_c)) {
          found = r * g.cols + c;
          ++hits;
        }
      }
    CHECK(hits == 1);
    CHECK(cell_of(p, g)->flat == found);
  }
}

TEST_CASE("centroid round trip and adjacent-column spacing") {
  const auto g = make_grid(40.5, 40.9, -74.3, -73.7, 5, 5);
  for (int f = 0; f < g.cell_count(); ++f) CHECK(cell_of(centroid_of(g.cell(f), g), g)->flat == f);

  const auto big = make_grid(40.55, 40.99, -74.27, -73.68, 200, 200);
  for (int r : {0, 100, 199}) {
    const double d = haversine_m(centroid_of(big.cell(r, 10), big), centroid_of(big.cell(r, 11), big));
    CHECK(std::abs(d - big.cell_width_m) / big.cell_width_m < 0.005);
  }
  const double h = haversine_m(centroid_of(big.cell(50, 3), big), centroid_of(big.cell(51, 3), big));
  CHECK(std::abs(h - big.cell_height_m) / big.cell_height_m < 0.005);
}

TEST_CASE("binning is monotone in latitude and longitude") {
  const auto g = make_grid(0.0, 1.0, 0.0, 2.0, 13, 29);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double lat = u(rng), lon = 2.0 * u(rng);
    const double lat2 = lat + (1.0 - lat) * u(rng), lon2 = lon + (2.0 - lon) * u(rng);
    CHECK(cell_of({lat2, lon}, g)->row >= cell_of({lat, lon}, g)->row);
    CHECK(cell_of({lat, lon2}, g)->col >= cell_of({lat, lon}, g)->col);
  }
}

TEST_CASE("grid json round trip") {
  const auto g = make_grid(35.51, 35.87, 139.47, 139.91, 200, 200);
  CHECK(grid_from_json(grid_to_json(g)) == g);
}
