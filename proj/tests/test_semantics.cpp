#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "mobility/semantics.hpp"
#include "support.hpp"

using namespace mobility;

namespace {
std::vector<CheckIn> visits(std::initializer_list<const char*> venues) {
  std::vector<CheckIn> out;
  EpochSeconds t = test::kMonday;
  for (const char* v : venues) out.push_back(test::checkin(1, v, 40.0 + (v[0] - 'a') * 0.01, -74.0, t += 60, std::string("cat_") + v));
  return out;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}
}  // namespace

TEST_CASE("top PoIs are padded by repeating the last entry") {
  const auto pois = top_k_pois(std::span<const CheckIn>(visits({"a", "b", "a", "c", "b", "a"})), 10);
  REQUIRE(pois.size() == 10);
  CHECK(pois[0].venue_id == "a");
  CHECK(pois[0].visits == 3);
  CHECK(pois[1].venue_id == "b");
  CHECK(pois[2].venue_id == "c");
  for (std::size_t i = 3; i < 10; ++i) CHECK(pois[i] == pois[2]);

  const auto single = top_k_pois(std::span<const CheckIn>(visits({"d"})), 10);
  CHECK(single.size() == 10);
  CHECK_THROWS_AS(top_k_pois(std::span<const CheckIn>(), 10), DomainError);
}

TEST_CASE("ties are broken by earliest first visit; long lists keep the top k") {
  const auto pois = top_k_pois(std::span<const CheckIn>(visits({"e", "b", "d", "a", "c", "f", "g", "h", "i", "j", "k", "l", "c"})), 10);
  REQUIRE(pois.size() == 10);
  CHECK(pois[0].venue_id == "c");
  const std::vector<std::string> expect{"c", "e", "b", "d", "a", "f", "g", "h", "i", "j"};
  for (std::size_t i = 0; i < 10; ++i) CHECK(pois[i].venue_id == expect[i]);
}

TEST_CASE("visit counts match a brute-force group-by") {
  std::mt19937_64 rng(12);
  std::vector<CheckIn> rows;
  for (int i = 0; i < 200; ++i) rows.push_back(test::checkin(1, "v" + std::to_string(rng() % 25), 40, -74, test::kMonday + i));
  std::map<std::string, int> counts;
  for (const auto& r : rows) ++counts[r.venue_id];
  const auto pois = top_k_pois(std::span<const CheckIn>(rows), 10);
  std::vector<int> sorted;
  for (const auto& [v, c] : counts) sorted.push_back(c);
  std::sort(sorted.rbegin(), sorted.rend());
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(pois[i].visits == counts.at(pois[i].venue_id));
    CHECK(pois[i].visits == sorted[i]);
  }
}

TEST_CASE("weighted centroid") {
  const LatLon a{40.0, -74.0}, b{41.0, -73.0};
  std::vector<LatLon> two{a, b};
  auto mid = weighted_centroid(two, std::vector<double>{1.0, 1.0});
  CHECK(mid.lat == doctest::Approx(40.5));
  CHECK(mid.lon == doctest::Approx(-73.5));
  auto one = weighted_centroid(std::vector<LatLon>{a}, std::vector<double>{7.0});
  CHECK(one.lat == a.lat);
  CHECK(one.lon == a.lon);
  const auto w = weighted_centroid(two, std::vector<double>{3.0, 1.0});
  CHECK(w.lat == doctest::Approx((3.0 * a.lat + 1.0 * b.lat) / 4.0));
  CHECK(w.lon == doctest::Approx((3.0 * a.lon + 1.0 * b.lon) / 4.0));
  CHECK_THROWS_AS(weighted_centroid(two, std::vector<double>{0.0, 0.0}), DomainError);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.1, 5.0), ll(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<LatLon> pts;
    std::vector<double> ws, scaled;
    const double c = u(rng);
    for (int i = 0; i < 6; ++i) {
      pts.push_back({40 + ll(rng), -74 + ll(rng)});
      ws.push_back(u(rng));
      scaled.push_back(ws.back() * c);
    }
    const auto p = weighted_centroid(pts, ws), q = weighted_centroid(pts, scaled);
    CHECK(p.lat == doctest::Approx(q.lat).epsilon(1e-12));
    CHECK(p.lon == doctest::Approx(q.lon).epsilon(1e-12));
    double lo = 1e9, hi = -1e9;
    for (const auto& x : pts) {
      lo = std::min(lo, x.lat);
      hi = std::max(hi, x.lat);
    }
    CHECK((p.lat >= lo && p.lat <= hi));
  }
}

TEST_CASE("fallback embeddings are deterministic and nearly orthogonal") {
  const CategoryEmbedder e(3);
  CHECK(e.embed("Coffee Shop") == e.embed("Coffee Shop"));
  CHECK(e.embed("Coffee Shop").size() == 512);
  int below = 0;
  for (int i = 0; i < 1000; ++i)
    below += cosine(e.embed("cat-a-" + std::to_string(i)), e.embed("cat-b-" + std::to_string(i))) < 0.5 ? 1 : 0;
  CHECK(below >= 990);
  CHECK_THROWS_AS(e.embed(""), DomainError);
}

TEST_CASE("embedding file lookups and missing-entry counter") {
  const auto path = std::filesystem::temp_directory_path() / "mobility_embeddings_test.tsv";
  {
    std::ofstream out(path);
    out << "Coffee Shop\t";
    for (int i = 0; i < 512; ++i) out << (i ? " " : "") << i * 0.25 - 3.0;
    out << '\n';
  }
  const auto e = CategoryEmbedder::from_file(path.string());
  CHECK(e.has_provider());
  const auto v = e.embed("Coffee Shop");
  for (int i = 0; i < 512; ++i) CHECK(v[static_cast<std::size_t>(i)] == i * 0.25 - 3.0);
  CHECK(e.missing_count() == 0);
  CHECK(e.embed("Bar") == e.fallback("Bar"));
  CHECK(e.missing_count() == 1);
  std::filesystem::remove(path);
}

TEST_CASE("autoencoder: descent, determinism, identity capacity, fitted guard") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n01(0.0, 1.0);

  AutoencoderConfig small{40, 8, 1e-3, 200, 4};
  nn::Matrix x(12, 40);
  for (auto& v : x.data) v = n01(rng);
  Autoencoder ae(small);
  CHECK_THROWS_AS(ae.encode(x), StateError);
  const auto curve = ae.fit(x);
  CHECK(curve.back() < curve.front());
  CHECK(ae.reconstruction_error(x) < curve.front());

  nn::Matrix twin(2, 40);
  std::copy_n(x.row(0), 40, twin.row(0));
  std::copy_n(x.row(0), 40, twin.row(1));
  const auto z = ae.encode(twin);
  for (int d = 0; d < 8; ++d) CHECK(z(0, d) == z(1, d));

  Autoencoder again(small);
  again.fit(x);
  CHECK(again.encode(x).data == ae.encode(x).data);

  // Bottleneck as wide as the input: the linear map can represent identity.
  AutoencoderConfig wide{16, 16, 1e-3, 200, 5};
  nn::Matrix users(20, 16);
  for (auto& v : users.data) v = n01(rng);
  wide.epochs = 3000;
  wide.lr = 1e-2;
  Autoencoder id(wide);
  id.fit(users);
  CHECK(id.reconstruction_error(users) < 1e-3);
}

TEST_CASE("profiles from a split dataset") {
  const auto g = test::small_grid(10, 10);
  SplitDataset ds;
  UserSplit u;
  u.user_id = 4;
  for (int i = 0; i < 5; ++i) u.train.push_back(test::point_at(g, i % 2 ? 11 : 57, test::kMonday + i * 3600, 4));
  ds.users.push_back(u);
  ds.users.push_back(UserSplit{5, {}, {}, true});
  const auto profiles = build_profiles(ds);
  REQUIRE(profiles.size() == 1);
  CHECK(profiles[0].top_pois.size() == 10);
  CHECK(profiles[0].rcr == doctest::Approx(0.6));
  const auto c57 = centroid_of(g.cell(57), g), c11 = centroid_of(g.cell(11), g);
  // counts 3 and 2; the padded entries repeat the second venue eight times
  const double w57 = 3.0, w11 = 2.0 * 9.0;
  CHECK(profiles[0].centroid.lat == doctest::Approx((w57 * c57.lat + w11 * c11.lat) / (w57 + w11)));
}
