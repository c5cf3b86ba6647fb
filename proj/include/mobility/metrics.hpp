#pragma once

#include <span>
#include <string>
#include <vector>

#include "mobility/geo.hpp"
#include "mobility/grid.hpp"
#include "mobility/ingest.hpp"
#include "mobility/nn/matrix.hpp"
#include "mobility/util.hpp"

namespace mobility {

struct GeoBleuConfig {
  int max_n = 3;
  double beta_per_km = 0.5;
};

// Largest total weight of a one-to-one matching between rows and columns
// (Hungarian algorithm). Unmatched rows or columns contribute nothing.
double max_weight_matching(const nn::Matrix& weights);

// Modified n-gram precision: every predicted n-gram is matched to at most one
// reference n-gram so that the summed similarity is maximal; similarity is the
// geometric mean over positions of exp(-beta * km).
double geo_ngram_precision(std::span<const LatLon> pred, std::span<const LatLon> ref, int n, double beta_per_km);

// Throws DomainError on an empty sequence.
double geo_bleu(std::span<const LatLon> pred, std::span<const LatLon> ref, const GeoBleuConfig& config = {});

std::size_t count_matches(std::span<const CellId> pred, std::span<const CellId> ref);
// Throws DomainError when lengths differ or both are empty.
double accuracy(std::span<const CellId> pred, std::span<const CellId> ref);

struct UnitScore {
  UserId user_id = 0;
  int day = 0;
  double geo_bleu = 0.0;
  std::size_t matches = 0;
  std::size_t total = 0;
};

struct EvalReport {
  double geo_bleu = 0.0;
  double accuracy = 0.0;
  std::vector<UnitScore> per_unit;
  std::size_t skipped_users = 0;
  std::string fingerprint;
  std::size_t routed_model = 0;
  std::size_t routed_history = 0;
  std::size_t unknown_targets = 0;  // reference cells outside the vocabulary
};

// Unweighted mean GEO-BLEU over units, pooled accuracy. Throws DomainError on
// zero units.
EvalReport aggregate(std::vector<UnitScore> units, std::size_t skipped_users = 0);

Json report_to_json(const EvalReport& r);
EvalReport report_from_json(const Json& j);

// "configuration,dataset,metric,value" rows.
std::string report_csv_header();
std::string report_csv_rows(const EvalReport& r, const std::string& configuration, const std::string& dataset);

}  // namespace mobility
