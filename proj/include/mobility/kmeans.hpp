#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "mobility/ingest.hpp"
#include "mobility/nn/matrix.hpp"
#include "mobility/semantics.hpp"
#include "mobility/util.hpp"

namespace mobility {

struct KMeansResult {
  int k = 0;
  std::vector<int> assignments;
  nn::Matrix centers;        // k x dim
  std::vector<double> wcss;  // after each iteration
  int iterations = 0;
  bool converged = false;
};

// Lloyd iterations from a seeded first center plus greedy farthest-point
// picks. Returns nullopt when the points have fewer than k distinct values.
std::optional<KMeansResult> kmeans(const nn::Matrix& points, int k, std::uint64_t seed, int max_iterations = 100);

// Mean silhouette with Euclidean distance. Singleton clusters score 0.
// Throws DomainError with fewer than two points or two clusters.
double silhouette(const nn::Matrix& points, std::span<const int> assignments);

namespace reference {
double silhouette(const nn::Matrix& points, std::span<const int> assignments);
}

enum class ClusterSpace { Centroid, Semantic };

struct Clustering {
  int k = 1;
  std::map<UserId, int> assignments;
  nn::Matrix centers;
  std::optional<double> silhouette;  // empty for the single-cluster fallback
  std::map<int, double> silhouette_by_k;
  ClusterSpace space = ClusterSpace::Centroid;
};

struct ClusterOptions {
  int k_min = 2;
  int k_max = 15;
  std::uint64_t seed = 1;
  int max_iterations = 100;
  ClusterSpace space = ClusterSpace::Centroid;
};

// Best-silhouette K-means over the K range; ties go to the smaller K.
Clustering cluster_users(std::span<const UserProfile> profiles, const ClusterOptions& options = {});

Json clustering_to_json(const Clustering& c);
Clustering clustering_from_json(const Json& j);

}  // namespace mobility
