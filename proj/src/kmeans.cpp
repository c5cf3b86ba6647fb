#include "mobility/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace mobility {

namespace {

double sq_dist(const double* a, const double* b, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return s;
}

int nearest(const nn::Matrix& centers, const double* p, double* best_d = nullptr) {
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (int c = 0; c < centers.rows; ++c) {
    const double d = sq_dist(centers.row(c), p, centers.cols);
    if (d < bd) {
      bd = d;
      best = c;
    }
  }
  if (best_d) *best_d = bd;
  return best;
}

double wcss_of(const nn::Matrix& points, const nn::Matrix& centers, std::span<const int> assign) {
  double s = 0.0;
  for (int i = 0; i < points.rows; ++i) s += sq_dist(points.row(i), centers.row(assign[i]), points.cols);
  return s;
}

int cluster_count(std::span<const int> assignments) {
  if (assignments.empty()) return 0;
  const int k = *std::max_element(assignments.begin(), assignments.end()) + 1;
  if (*std::min_element(assignments.begin(), assignments.end()) < 0) throw DomainError("negative cluster id");
  return k;
}

// Sum of distances from point i to each cluster, plus cluster sizes.
void distance_sums(const nn::Matrix& points, std::span<const int> assign, int i, std::vector<double>& sums) {
  std::fill(sums.begin(), sums.end(), 0.0);
  for (int j = 0; j < points.rows; ++j) {
    if (j == i) continue;
    sums[static_cast<std::size_t>(assign[j])] += std::sqrt(sq_dist(points.row(i), points.row(j), points.cols));
  }
}

double point_silhouette(std::span<const int> assign, const std::vector<double>& sums, const std::vector<int>& sizes,
                        int i) {
  const int own = assign[i];
  if (sizes[static_cast<std::size_t>(own)] <= 1) return 0.0;
  const double a = sums[static_cast<std::size_t>(own)] / (sizes[static_cast<std::size_t>(own)] - 1);
  double b = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    if (static_cast<int>(c) == own || sizes[c] == 0) continue;
    b = std::min(b, sums[c] / sizes[c]);
  }
  const double m = std::max(a, b);
  return m > 0.0 ? (b - a) / m : 0.0;
}

std::vector<int> validated_sizes(const nn::Matrix& points, std::span<const int> assignments) {
  if (static_cast<int>(assignments.size()) != points.rows) throw DomainError("silhouette: assignment count mismatch");
  if (points.rows < 2) throw DomainError("silhouette undefined for fewer than two points");
  const int k = cluster_count(assignments);
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int a : assignments) ++sizes[static_cast<std::size_t>(a)];
  const auto nonempty = std::count_if(sizes.begin(), sizes.end(), [](int s) { return s > 0; });
  if (nonempty < 2) throw DomainError("silhouette undefined for a single cluster");
  return sizes;
}

}  // namespace

std::optional<KMeansResult> kmeans(const nn::Matrix& points, int k, std::uint64_t seed, int max_iterations) {
  if (k <= 0) throw DomainError("kmeans: k must be positive");
  const int n = points.rows, dim = points.cols;
  if (n < k) return std::nullopt;

  KMeansResult r;
  r.k = k;
  r.centers = nn::Matrix(k, dim);
  std::mt19937_64 rng(seed);
  const int first = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
  std::copy_n(points.row(first), dim, r.centers.row(0));
  std::vector<double> min_d(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    int far = -1;
    double far_d = 0.0;
    for (int i = 0; i < n; ++i) {
      min_d[static_cast<std::size_t>(i)] =
          std::min(min_d[static_cast<std::size_t>(i)], sq_dist(points.row(i), r.centers.row(c - 1), dim));
      if (min_d[static_cast<std::size_t>(i)] > far_d) {
        far_d = min_d[static_cast<std::size_t>(i)];
        far = i;
      }
    }
    if (far < 0) return std::nullopt;  // every point coincides with a center
    std::copy_n(points.row(far), dim, r.centers.row(c));
  }

  r.assignments.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> sizes(static_cast<std::size_t>(k));
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    std::vector<double> dist(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const int c = nearest(r.centers, points.row(i), &dist[static_cast<std::size_t>(i)]);
      if (c != r.assignments[static_cast<std::size_t>(i)]) changed = true;
      r.assignments[static_cast<std::size_t>(i)] = c;
    }
    // An emptied cluster takes over the point farthest from its center.
    std::fill(sizes.begin(), sizes.end(), 0);
    for (int a : r.assignments) ++sizes[static_cast<std::size_t>(a)];
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] > 0) continue;
      int far = -1;
      for (int i = 0; i < n; ++i)
        if (sizes[static_cast<std::size_t>(r.assignments[static_cast<std::size_t>(i)])] > 1 &&
            (far < 0 || dist[static_cast<std::size_t>(i)] > dist[static_cast<std::size_t>(far)]))
          far = i;
      --sizes[static_cast<std::size_t>(r.assignments[static_cast<std::size_t>(far)])];
      r.assignments[static_cast<std::size_t>(far)] = c;
      dist[static_cast<std::size_t>(far)] = 0.0;
      sizes[static_cast<std::size_t>(c)] = 1;
      changed = true;
    }
    if (!changed) {
      r.converged = true;
      break;
    }
    r.centers.fill(0.0);
    for (int i = 0; i < n; ++i) {
      double* c = r.centers.row(r.assignments[static_cast<std::size_t>(i)]);
      for (int d = 0; d < dim; ++d) c[d] += points(i, d);
    }
    for (int c = 0; c < k; ++c)
      for (int d = 0; d < dim; ++d) r.centers(c, d) /= sizes[static_cast<std::size_t>(c)];
    r.wcss.push_back(wcss_of(points, r.centers, r.assignments));
    r.iterations = it + 1;
  }
  return r;
}

double silhouette(const nn::Matrix& points, std::span<const int> assignments) {
  const auto sizes = validated_sizes(points, assignments);
  const int n = points.rows;
  double total = 0.0;
#pragma omp parallel reduction(+ : total) if (n > 256)
  {
    std::vector<double> sums(sizes.size());
#pragma omp for schedule(static)
    for (int i = 0; i < n; ++i) {
      distance_sums(points, assignments, i, sums);
      total += point_silhouette(assignments, sums, sizes, i);
    }
  }
  return total / n;
}

namespace reference {

double silhouette(const nn::Matrix& points, std::span<const int> assignments) {
  const auto sizes = validated_sizes(points, assignments);
  std::vector<double> sums(sizes.size());
  double total = 0.0;
  for (int i = 0; i < points.rows; ++i) {
    distance_sums(points, assignments, i, sums);
    total += point_silhouette(assignments, sums, sizes, i);
  }
  return total / points.rows;
}

}  // namespace reference

Clustering cluster_users(std::span<const UserProfile> profiles, const ClusterOptions& options) {
  if (profiles.empty()) throw DomainError("cluster_users: no profiles");
  if (options.k_min < 2 || options.k_max < options.k_min) throw ConfigError("invalid K range");
  const int n = static_cast<int>(profiles.size());
  nn::Matrix points;
  if (options.space == ClusterSpace::Centroid) {
    points = nn::Matrix(n, 2);
    for (int i = 0; i < n; ++i) {
      points(i, 0) = profiles[static_cast<std::size_t>(i)].centroid.lat;
      points(i, 1) = profiles[static_cast<std::size_t>(i)].centroid.lon;
    }
  } else {
    const auto dim = profiles.front().semantic_vector.size();
    if (dim == 0) throw StateError("semantic clustering requires semantic vectors");
    points = nn::Matrix(n, static_cast<int>(dim));
    for (int i = 0; i < n; ++i) {
      const auto& v = profiles[static_cast<std::size_t>(i)].semantic_vector;
      if (v.size() != dim) throw DomainError("semantic vectors differ in length");
      std::copy(v.begin(), v.end(), points.row(i));
    }
  }

  const int count = options.k_max - options.k_min + 1;
  std::vector<std::optional<KMeansResult>> runs(static_cast<std::size_t>(count));
  std::vector<double> scores(static_cast<std::size_t>(count), -std::numeric_limits<double>::infinity());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < count; ++i) {
    const int k = options.k_min + i;
    if (k >= n) continue;
    auto r = kmeans(points, k, options.seed, options.max_iterations);
    if (!r) continue;
    scores[static_cast<std::size_t>(i)] = reference::silhouette(points, r->assignments);
    runs[static_cast<std::size_t>(i)] = std::move(r);
  }

  Clustering out;
  out.space = options.space;
  int best = -1;
  for (int i = 0; i < count; ++i) {
    if (!runs[static_cast<std::size_t>(i)]) continue;
    out.silhouette_by_k[options.k_min + i] = scores[static_cast<std::size_t>(i)];
    if (best < 0 || scores[static_cast<std::size_t>(i)] > scores[static_cast<std::size_t>(best)]) best = i;
  }
  if (best < 0) {
    out.k = 1;
    out.centers = nn::Matrix(1, points.cols);
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < points.cols; ++d) out.centers(0, d) += points(i, d) / n;
    for (const auto& p : profiles) out.assignments[p.user_id] = 0;
    return out;
  }
  const auto& run = *runs[static_cast<std::size_t>(best)];
  out.k = run.k;
  out.centers = run.centers;
  out.silhouette = scores[static_cast<std::size_t>(best)];
  for (int i = 0; i < n; ++i) out.assignments[profiles[static_cast<std::size_t>(i)].user_id] = run.assignments[static_cast<std::size_t>(i)];
  return out;
}

Json clustering_to_json(const Clustering& c) {
  Json j;
  j["K"] = c.k;
  j["space"] = c.space == ClusterSpace::Centroid ? "centroid" : "semantic";
  j["silhouette"] = c.silhouette ? Json(*c.silhouette) : Json(nullptr);
  Json centers = Json::array();
  for (int r = 0; r < c.centers.rows; ++r) {
    const auto row = c.centers.row_span(r);
    centers.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["centers"] = centers;
  Json by_k = Json::object();
  for (const auto& [k, s] : c.silhouette_by_k) by_k[std::to_string(k)] = s;
  j["silhouette_by_k"] = by_k;
  Json assign = Json::object();
  for (const auto& [u, a] : c.assignments) assign[std::to_string(u)] = a;
  j["assignments"] = assign;
  return j;
}

Clustering clustering_from_json(const Json& j) {
  try {
    Clustering c;
    c.k = j.at("K").get<int>();
    c.space = j.value("space", "centroid") == "semantic" ? ClusterSpace::Semantic : ClusterSpace::Centroid;
    if (!j.at("silhouette").is_null()) c.silhouette = j.at("silhouette").get<double>();
    const auto& centers = j.at("centers");
    const int dim = centers.empty() ? 0 : static_cast<int>(centers.at(0).size());
    c.centers = nn::Matrix(static_cast<int>(centers.size()), dim);
    for (int r = 0; r < c.centers.rows; ++r)
      for (int d = 0; d < dim; ++d) c.centers(r, d) = centers.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(d)).get<double>();
    if (j.contains("silhouette_by_k"))
      for (const auto& [k, s] : j.at("silhouette_by_k").items()) c.silhouette_by_k[std::stoi(k)] = s.get<double>();
    for (const auto& [u, a] : j.at("assignments").items()) c.assignments[std::stoll(u)] = a.get<int>();
    return c;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("clustering json: ") + e.what());
  }
}

}  // namespace mobility
