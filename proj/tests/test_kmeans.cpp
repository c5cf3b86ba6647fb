#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "mobility/kmeans.hpp"

using namespace mobility;

namespace {

// Silhouette straight from its definition.
double brute_silhouette(const nn::Matrix& pts, const std::vector<int>& lab) {
  const int n = pts.rows;
  double total = 0;
  for (int i = 0; i < n; ++i) {
    std::map<int, std::pair<double, int>> acc;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double s = 0;
      for (int d = 0; d < pts.cols; ++d) s += (pts(i, d) - pts(j, d)) * (pts(i, d) - pts(j, d));
      acc[lab[static_cast<std::size_t>(j)]].first += std::sqrt(s);
      acc[lab[static_cast<std::size_t>(j)]].second += 1;
    }
    const int own = lab[static_cast<std::size_t>(i)];
    if (acc[own].second == 0) continue;
    const double a = acc[own].first / acc[own].second;
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [c, v] : acc)
      if (c != own && v.second > 0) b = std::min(b, v.first / v.second);
    total += (b - a) / std::max(a, b);
  }
  return total / n;
}

std::vector<UserProfile> blobs(const std::vector<LatLon>& centers, int per, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spread);
  std::vector<UserProfile> out;
  for (std::size_t b = 0; b < centers.size(); ++b)
    for (int i = 0; i < per; ++i) {
      UserProfile p;
      p.user_id = static_cast<UserId>(b * 1000 + i);
      p.centroid = {centers[b].lat + noise(rng), centers[b].lon + noise(rng)};
      out.push_back(p);
    }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace

TEST_CASE("three separated blobs: K = 3 with exact membership") {
  const auto profiles = blobs({{40.6, -74.1}, {40.9, -73.8}, {40.6, -73.7}}, 20, 0.01, 3);
  const auto c = cluster_users(profiles);
  CHECK(c.k == 3);
  REQUIRE(c.silhouette.has_value());
  std::map<int, int> blob_of_cluster;
  for (const auto& p : profiles) {
    const int blob = static_cast<int>(p.user_id / 1000);
    const int cl = c.assignments.at(p.user_id);
    auto [it, inserted] = blob_of_cluster.try_emplace(cl, blob);
    CHECK(it->second == blob);
  }
  CHECK(blob_of_cluster.size() == 3);
}

TEST_CASE("identical centroids fall back to a single cluster") {
  std::vector<UserProfile> same(20);
  for (int i = 0; i < 20; ++i) {
    same[static_cast<std::size_t>(i)].user_id = i;
    same[static_cast<std::size_t>(i)].centroid = {40.7, -74.0};
  }
  const auto c = cluster_users(same);
  CHECK(c.k == 1);
  CHECK_FALSE(c.silhouette.has_value());
  for (const auto& [u, a] : c.assignments) CHECK(a == 0);
}

TEST_CASE("silhouette conventions and a constructed two-blob instance") {
  nn::Matrix two(2, 2);
  two(1, 0) = 1.0;
  CHECK(silhouette(two, std::vector<int>{0, 1}) == 0.0);
  CHECK_THROWS_AS(silhouette(two, std::vector<int>{0, 0}), DomainError);
  CHECK_THROWS_AS(silhouette(nn::Matrix(1, 2), std::vector<int>{0}), DomainError);

  // Five points at each end of a unit segment, 0.01 jitter: a ~ 0.01, b ~ 1.
  nn::Matrix pts(10, 2);
  std::vector<int> lab(10);
  for (int i = 0; i < 10; ++i) {
    pts(i, 0) = (i < 5 ? 0.0 : 1.0) + 0.002 * (i % 5);
    pts(i, 1) = 0.001 * i;
    lab[static_cast<std::size_t>(i)] = i < 5 ? 0 : 1;
  }
  CHECK(silhouette(pts, lab) > 0.8);
}

TEST_CASE("silhouette matches the brute-force definition and ignores label names") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    nn::Matrix pts(50, 2);
    for (auto& v : pts.data) v = u(rng);
    std::vector<int> lab(50);
    for (auto& l : lab) l = static_cast<int>(rng() % 4);
    lab[0] = 0, lab[1] = 1, lab[2] = 2, lab[3] = 3;
    const double s = silhouette(pts, lab);
    CHECK(std::abs(s - brute_silhouette(pts, lab)) < 1e-9);
    CHECK(s == reference::silhouette(pts, lab));
    std::vector<int> perm{2, 0, 3, 1};
    std::vector<int> relabeled;
    for (int l : lab) relabeled.push_back(perm[static_cast<std::size_t>(l)]);
    CHECK(std::abs(silhouette(pts, relabeled) - s) < 1e-12);
  }
}

TEST_CASE("k-means objective never increases and reruns are identical") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n(0.0, 1.0);
  nn::Matrix pts(300, 3);
  for (auto& v : pts.data) v = n(rng);
  for (int k : {2, 5, 9}) {
    const auto r = kmeans(pts, k, 7);
    REQUIRE(r.has_value());
    for (std::size_t i = 1; i < r->wcss.size(); ++i) CHECK(r->wcss[i] <= r->wcss[i - 1] + 1e-9);
    CHECK(r->iterations <= 100);
    const auto again = kmeans(pts, k, 7);
    CHECK(again->assignments == r->assignments);
    std::vector<int> sizes(static_cast<std::size_t>(k));
    for (int a : r->assignments) ++sizes[static_cast<std::size_t>(a)];
    for (int s : sizes) CHECK(s > 0);
  }
  nn::Matrix dup(4, 2);
  dup(3, 0) = 1.0;
  CHECK_FALSE(kmeans(dup, 3, 1).has_value());
  CHECK_FALSE(kmeans(dup, 5, 1).has_value());
}

TEST_CASE("clustering is deterministic and round-trips through json") {
  const auto profiles = blobs({{0, 0}, {1, 1}}, 15, 0.2, 9);
  const auto a = cluster_users(profiles, {2, 6, 4, 100, ClusterSpace::Centroid});
  const auto b = cluster_users(profiles, {2, 6, 4, 100, ClusterSpace::Centroid});
  CHECK(a.assignments == b.assignments);
  const auto back = clustering_from_json(clustering_to_json(a));
  CHECK(back.k == a.k);
  CHECK(back.assignments == a.assignments);
  CHECK(back.centers.data == a.centers.data);
  CHECK(*back.silhouette == *a.silhouette);
  std::vector<int> lab;
  nn::Matrix pts(static_cast<int>(profiles.size()), 2);
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    pts(static_cast<int>(i), 0) = profiles[i].centroid.lat;
    pts(static_cast<int>(i), 1) = profiles[i].centroid.lon;
    lab.push_back(a.assignments.at(profiles[i].user_id));
  }
  CHECK(std::abs(silhouette(pts, lab) - *a.silhouette) < 1e-12);
}

TEST_CASE("semantic-space clustering needs vectors") {
  auto profiles = blobs({{0, 0}, {1, 1}}, 5, 0.1, 2);
  CHECK_THROWS_AS(cluster_users(profiles, {2, 4, 1, 100, ClusterSpace::Semantic}), StateError);
  for (auto& p : profiles) p.semantic_vector = {p.centroid.lat * 10, p.centroid.lon * 10, 0.0};
  const auto c = cluster_users(profiles, {2, 4, 1, 100, ClusterSpace::Semantic});
  CHECK(c.k == 2);
  CHECK(c.centers.cols == 3);
}
