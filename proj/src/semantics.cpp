#include "mobility/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "mobility/nn/adam.hpp"
#include "mobility/nn/graph.hpp"
#include "mobility/nn/kernels.hpp"
#include "mobility/util.hpp"

namespace mobility {

namespace {

struct Visit {
  const std::string& venue;
  LatLon coords;
  const std::string& category;
};

template <class Point, class Project>
std::vector<PoiEntry> rank_pois(std::span<const Point> points, int k, Project project) {
  if (points.empty()) throw DomainError("top_k_pois: empty trajectory");
  if (k <= 0) throw DomainError("top_k_pois: k must be positive");
  std::vector<PoiEntry> entries;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& p : points) {
    const Visit v = project(p);
    auto [it, inserted] = slot.try_emplace(v.venue, entries.size());
    if (inserted) entries.push_back({v.venue, v.coords, 0, v.category});
    ++entries[it->second].visits;
  }
  // entries are in first-visit order, so a stable sort keeps that as tie-break
  std::stable_sort(entries.begin(), entries.end(), [](const PoiEntry& a, const PoiEntry& b) { return a.visits > b.visits; });
  if (entries.size() > static_cast<std::size_t>(k)) entries.resize(static_cast<std::size_t>(k));
  while (entries.size() < static_cast<std::size_t>(k)) entries.push_back(entries.back());
  return entries;
}

}  // namespace

std::vector<PoiEntry> top_k_pois(std::span<const CheckIn> points, int k) {
  return rank_pois(points, k, [](const CheckIn& c) {
    return Visit{c.venue_id, c.position(), c.venue_category_name};
  });
}

std::vector<PoiEntry> top_k_pois(std::span<const EnrichedPoint> points, int k) {
  return rank_pois(points, k, [](const EnrichedPoint& p) {
    return Visit{p.venue_id, p.position(), p.category_name};
  });
}

LatLon weighted_centroid(std::span<const LatLon> points, std::span<const double> weights) {
  if (points.size() != weights.size()) throw DomainError("weighted_centroid: size mismatch");
  double total = 0.0, lat = 0.0, lon = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (weights[i] < 0.0) throw DomainError("weighted_centroid: negative weight");
    total += weights[i];
    lat += weights[i] * points[i].lat;
    lon += weights[i] * points[i].lon;
  }
  if (!(total > 0.0)) throw DomainError("weighted_centroid: weights sum to zero");
  return {lat / total, lon / total};
}

LatLon poi_centroid(std::span<const PoiEntry> pois) {
  std::vector<LatLon> pts;
  std::vector<double> w;
  for (const auto& p : pois) {
    pts.push_back(p.coords);
    w.push_back(static_cast<double>(p.visits));
  }
  return weighted_centroid(pts, w);
}

CategoryEmbedder CategoryEmbedder::from_file(const std::string& path, std::uint64_t seed, int dim) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open embedding file " + path);
  CategoryEmbedder e(seed, dim);
  e.provider_loaded_ = true;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path + ":" + std::to_string(lineno) + ": missing tab");
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(dim));
    std::istringstream values(line.substr(tab + 1));
    double x;
    while (values >> x) v.push_back(x);
    if (!values.eof() || v.size() != static_cast<std::size_t>(dim))
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(dim) + " values");
    e.table_[line.substr(0, tab)] = std::move(v);
  }
  return e;
}

std::vector<double> CategoryEmbedder::embed(const std::string& name) const {
  if (name.empty()) throw DomainError("embed_category: empty name");
  if (auto it = table_.find(name); it != table_.end()) return it->second;
  if (provider_loaded_) ++missing_;
  return fallback(name);
}

std::vector<double> CategoryEmbedder::fallback(const std::string& name) const {
  std::mt19937_64 rng(fnv1a64(name) ^ (seed_ * 0x9e3779b97f4a7c15ULL));
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(dim_));
  for (auto& x : v) x = dist(rng);
  return v;
}

Autoencoder::Autoencoder(AutoencoderConfig config)
    : config_(config),
      enc_w_("ae.enc_w", config.input_dim, config.hidden_dim),
      enc_b_("ae.enc_b", 1, config.hidden_dim),
      dec_w_("ae.dec_w", config.hidden_dim, config.input_dim),
      dec_b_("ae.dec_b", 1, config.input_dim) {
  if (config.input_dim <= 0 || config.hidden_dim <= 0 || config.epochs < 0 || !(config.lr > 0.0))
    throw ConfigError("invalid autoencoder configuration");
  std::mt19937_64 rng(config.seed);
  nn::init_uniform(enc_w_.value, rng, 1.0 / std::sqrt(config.input_dim));
  nn::init_uniform(dec_w_.value, rng, 1.0 / std::sqrt(config.hidden_dim));
}

std::vector<double> Autoencoder::fit(const nn::Matrix& inputs) {
  if (inputs.cols != config_.input_dim) throw DomainError("autoencoder input width mismatch");
  if (inputs.rows == 0) throw DomainError("autoencoder: no samples");
  nn::Adam adam(nn::AdamConfig{config_.lr});
  std::vector<nn::Parameter*> params{&enc_w_, &enc_b_, &dec_w_, &dec_b_};
  std::vector<double> curve;
  const double denom = static_cast<double>(inputs.size());
  for (int e = 0; e < config_.epochs; ++e) {
    nn::Graph g;
    nn::Var x = g.constant(inputs);
    nn::Var h = nn::add_row(g, nn::matmul(g, x, g.param(enc_w_)), g.param(enc_b_));
    nn::Var y = nn::add_row(g, nn::matmul(g, h, g.param(dec_w_)), g.param(dec_b_));
    nn::Var loss = nn::squared_error(g, y, inputs, denom);
    curve.push_back(g.value(loss)(0, 0));
    g.backward(loss);
    adam.step(params);
  }
  fitted_ = true;
  return curve;
}

void Autoencoder::require_fitted() const {
  if (!fitted_) throw StateError("autoencoder has not been fitted");
}

nn::Matrix Autoencoder::encode(const nn::Matrix& inputs) const {
  require_fitted();
  if (inputs.cols != config_.input_dim) throw DomainError("autoencoder input width mismatch");
  nn::Matrix h(inputs.rows, config_.hidden_dim);
  for (int r = 0; r < h.rows; ++r) std::copy(enc_b_.value.data.begin(), enc_b_.value.data.end(), h.row(r));
  nn::kernels::matmul_acc(inputs, enc_w_.value, h);
  return h;
}

std::vector<double> Autoencoder::encode(std::span<const double> input) const {
  nn::Matrix x(1, static_cast<int>(input.size()));
  std::copy(input.begin(), input.end(), x.data.begin());
  return encode(x).data;
}

nn::Matrix Autoencoder::reconstruct(const nn::Matrix& inputs) const {
  nn::Matrix h = encode(inputs);
  nn::Matrix y(inputs.rows, config_.input_dim);
  for (int r = 0; r < y.rows; ++r) std::copy(dec_b_.value.data.begin(), dec_b_.value.data.end(), y.row(r));
  nn::kernels::matmul_acc(h, dec_w_.value, y);
  return y;
}

double Autoencoder::reconstruction_error(const nn::Matrix& inputs) const {
  nn::Matrix y = reconstruct(inputs);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y.data[i] - inputs.data[i]) * (y.data[i] - inputs.data[i]);
  return s / static_cast<double>(y.size());
}

std::vector<UserProfile> build_profiles(const SplitDataset& data, int k) {
  std::vector<UserProfile> out;
  for (const auto& u : data.users) {
    if (u.train.empty()) continue;
    UserProfile p;
    p.user_id = u.user_id;
    p.top_pois = top_k_pois(std::span<const EnrichedPoint>(u.train), k);
    p.centroid = poi_centroid(p.top_pois);
    std::size_t distinct = 0;
    {
      std::vector<std::string> venues;
      for (const auto& pt : u.train) venues.push_back(pt.venue_id);
      std::sort(venues.begin(), venues.end());
      distinct = static_cast<std::size_t>(std::unique(venues.begin(), venues.end()) - venues.begin());
    }
    p.rcr = 1.0 - static_cast<double>(distinct) / static_cast<double>(u.train.size());
    out.push_back(std::move(p));
  }
  return out;
}

void attach_semantic_vectors(std::vector<UserProfile>& profiles, const CategoryEmbedder& embedder,
                             Autoencoder& autoencoder) {
  if (profiles.empty()) return;
  const int k = static_cast<int>(profiles.front().top_pois.size());
  const int dim = embedder.dim();
  if (autoencoder.config().input_dim != k * dim) throw ConfigError("autoencoder input width does not match k * dim");
  nn::Matrix stacked(static_cast<int>(profiles.size()), k * dim);
  for (std::size_t u = 0; u < profiles.size(); ++u) {
    if (static_cast<int>(profiles[u].top_pois.size()) != k) throw DomainError("profiles with different k");
    for (int j = 0; j < k; ++j) {
      const auto& name = profiles[u].top_pois[static_cast<std::size_t>(j)].category;
      const auto v = embedder.embed(name.empty() ? std::string("unknown") : name);
      std::copy(v.begin(), v.end(), stacked.row(static_cast<int>(u)) + static_cast<std::ptrdiff_t>(j) * dim);
    }
  }
  autoencoder.fit(stacked);
  const nn::Matrix latent = autoencoder.encode(stacked);
  for (std::size_t u = 0; u < profiles.size(); ++u) {
    const auto r = latent.row_span(static_cast<int>(u));
    profiles[u].semantic_vector.assign(r.begin(), r.end());
  }
}

}  // namespace mobility
