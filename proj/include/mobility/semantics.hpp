#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mobility/features.hpp"
#include "mobility/geo.hpp"
#include "mobility/ingest.hpp"
#include "mobility/nn/matrix.hpp"

namespace mobility {

inline constexpr int kEmbeddingDim = 512;
inline constexpr int kDefaultTopK = 10;

struct PoiEntry {
  std::string venue_id;
  LatLon coords;
  int visits = 0;
  std::string category;
  friend bool operator==(const PoiEntry&, const PoiEntry&) = default;
};

// Venues by visit count (desc), ties by earliest first visit, padded to k by
// repeating the last entry. Venue coordinates come from the first visit.
std::vector<PoiEntry> top_k_pois(std::span<const CheckIn> points, int k = kDefaultTopK);
std::vector<PoiEntry> top_k_pois(std::span<const EnrichedPoint> points, int k = kDefaultTopK);

LatLon weighted_centroid(std::span<const LatLon> points, std::span<const double> weights);
// Centroid of the (padded) list weighted by visit counts.
LatLon poi_centroid(std::span<const PoiEntry> pois);

class CategoryEmbedder {
 public:
  explicit CategoryEmbedder(std::uint64_t seed = 0, int dim = kEmbeddingDim) : seed_(seed), dim_(dim) {}

  // Lines "name<TAB>dim space-separated decimals".
  static CategoryEmbedder from_file(const std::string& path, std::uint64_t seed = 0, int dim = kEmbeddingDim);

  std::vector<double> embed(const std::string& name) const;
  // Hash-seeded standard normal values.
  std::vector<double> fallback(const std::string& name) const;

  bool has_provider() const { return provider_loaded_; }
  std::size_t size() const { return table_.size(); }
  int dim() const { return dim_; }
  // Lookups that missed a loaded provider file.
  std::size_t missing_count() const { return missing_; }

 private:
  std::uint64_t seed_;
  int dim_;
  bool provider_loaded_ = false;
  std::unordered_map<std::string, std::vector<double>> table_;
  mutable std::size_t missing_ = 0;
};

struct AutoencoderConfig {
  int input_dim = kDefaultTopK * kEmbeddingDim;
  int hidden_dim = kEmbeddingDim;
  double lr = 1e-3;
  int epochs = 200;
  std::uint64_t seed = 1;
};

// Linear encoder and decoder trained full-batch on mean squared
// reconstruction error.
class Autoencoder {
 public:
  explicit Autoencoder(AutoencoderConfig config = {});

  // Returns the per-epoch loss; rows of `inputs` are samples.
  std::vector<double> fit(const nn::Matrix& inputs);
  bool fitted() const { return fitted_; }

  nn::Matrix encode(const nn::Matrix& inputs) const;
  std::vector<double> encode(std::span<const double> input) const;
  nn::Matrix reconstruct(const nn::Matrix& inputs) const;
  double reconstruction_error(const nn::Matrix& inputs) const;
  const AutoencoderConfig& config() const { return config_; }

 private:
  void require_fitted() const;

  AutoencoderConfig config_;
  nn::Parameter enc_w_, enc_b_, dec_w_, dec_b_;
  bool fitted_ = false;
};

struct UserProfile {
  UserId user_id = 0;
  std::vector<PoiEntry> top_pois;
  LatLon centroid;
  int cluster_id = -1;
  std::vector<double> semantic_vector;
  double rcr = 0.0;
};

// Profiles from each user's training points; users with no training points
// are skipped.
std::vector<UserProfile> build_profiles(const SplitDataset& data, int k = kDefaultTopK);

// Stacks each profile's top-k category embeddings, fits the autoencoder on
// them and stores the encoded vectors in the profiles.
void attach_semantic_vectors(std::vector<UserProfile>& profiles, const CategoryEmbedder& embedder,
                             Autoencoder& autoencoder);

}  // namespace mobility
