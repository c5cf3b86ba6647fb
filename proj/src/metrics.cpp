#include "mobility/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mobility {

double max_weight_matching(const nn::Matrix& weights) {
  if (weights.rows == 0 || weights.cols == 0) return 0.0;
  const bool transpose = weights.rows > weights.cols;
  const int n = transpose ? weights.cols : weights.rows;
  const int m = transpose ? weights.rows : weights.cols;
  auto cost = [&](int i, int j) { return -(transpose ? weights(j, i) : weights(i, j)); };

  // Shortest augmenting path with potentials; 1-based with column 0 as sentinel.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1), v(static_cast<std::size_t>(m) + 1);
  std::vector<int> p(static_cast<std::size_t>(m) + 1), way(static_cast<std::size_t>(m) + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(m) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (int j = 1; j <= m; ++j)
    if (p[static_cast<std::size_t>(j)] != 0) total -= cost(p[static_cast<std::size_t>(j)] - 1, j - 1);
  return total;
}

double geo_ngram_precision(std::span<const LatLon> pred, std::span<const LatLon> ref, int n, double beta_per_km) {
  if (n < 1) throw DomainError("n-gram order must be positive");
  if (pred.size() < static_cast<std::size_t>(n) || ref.size() < static_cast<std::size_t>(n)) return 0.0;
  const int np = static_cast<int>(pred.size()) - n + 1;
  const int nr = static_cast<int>(ref.size()) - n + 1;
  // log-similarity of single points, then n-gram similarity from window sums
  nn::Matrix point_log(static_cast<int>(pred.size()), static_cast<int>(ref.size()));
  for (int i = 0; i < point_log.rows; ++i)
    for (int j = 0; j < point_log.cols; ++j)
      point_log(i, j) = -beta_per_km * haversine_m(pred[static_cast<std::size_t>(i)], ref[static_cast<std::size_t>(j)]) / 1000.0;
  nn::Matrix sim(np, nr);
  for (int i = 0; i < np; ++i)
    for (int j = 0; j < nr; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += point_log(i + k, j + k);
      sim(i, j) = std::exp(s / n);
    }
  return max_weight_matching(sim) / np;
}

double geo_bleu(std::span<const LatLon> pred, std::span<const LatLon> ref, const GeoBleuConfig& config) {
  if (pred.empty() || ref.empty()) throw DomainError("GEO-BLEU needs non-empty sequences");
  if (config.max_n < 1 || !(config.beta_per_km > 0.0)) throw ConfigError("invalid GEO-BLEU parameters");
  const int n_eff = static_cast<int>(std::min<std::size_t>({static_cast<std::size_t>(config.max_n), pred.size(), ref.size()}));
  double log_sum = 0.0;
  for (int n = 1; n <= n_eff; ++n)
    log_sum += std::log(std::max(1e-12, geo_ngram_precision(pred, ref, n, config.beta_per_km))) / n_eff;
  const double bp = std::min(1.0, std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(pred.size())));
  return std::clamp(bp * std::exp(log_sum), 0.0, 1.0);
}

std::size_t count_matches(std::span<const CellId> pred, std::span<const CellId> ref) {
  if (pred.size() != ref.size()) throw DomainError("accuracy: sequences differ in length");
  std::size_t m = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) m += pred[i] == ref[i] ? 1 : 0;
  return m;
}

double accuracy(std::span<const CellId> pred, std::span<const CellId> ref) {
  const std::size_t m = count_matches(pred, ref);
  if (pred.empty()) throw DomainError("accuracy of empty sequences is undefined");
  return static_cast<double>(m) / static_cast<double>(pred.size());
}

EvalReport aggregate(std::vector<UnitScore> units, std::size_t skipped_users) {
  if (units.empty()) throw DomainError("no evaluation units to aggregate");
  EvalReport r;
  double bleu = 0.0;
  std::size_t matches = 0, total = 0;
  for (const auto& u : units) {
    bleu += u.geo_bleu;
    matches += u.matches;
    total += u.total;
  }
  r.geo_bleu = bleu / static_cast<double>(units.size());
  r.accuracy = total == 0 ? 0.0 : static_cast<double>(matches) / static_cast<double>(total);
  r.per_unit = std::move(units);
  r.skipped_users = skipped_users;
  return r;
}

Json report_to_json(const EvalReport& r) {
  Json j;
  j["geo_bleu"] = r.geo_bleu;
  j["accuracy"] = r.accuracy;
  j["units"] = r.per_unit.size();
  j["skipped_users"] = r.skipped_users;
  j["fingerprint"] = r.fingerprint;
  j["routed_model"] = r.routed_model;
  j["routed_history"] = r.routed_history;
  j["unknown_targets"] = r.unknown_targets;
  Json rows = Json::array();
  for (const auto& u : r.per_unit)
    rows.push_back(Json{{"user", u.user_id}, {"day", u.day}, {"geo_bleu", u.geo_bleu}, {"matches", u.matches}, {"total", u.total}});
  j["per_unit"] = rows;
  return j;
}

EvalReport report_from_json(const Json& j) {
  try {
    EvalReport r;
    r.geo_bleu = j.at("geo_bleu").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    r.skipped_users = j.value("skipped_users", std::size_t{0});
    r.fingerprint = j.value("fingerprint", std::string());
    r.routed_model = j.value("routed_model", std::size_t{0});
    r.routed_history = j.value("routed_history", std::size_t{0});
    r.unknown_targets = j.value("unknown_targets", std::size_t{0});
    for (const auto& u : j.at("per_unit"))
      r.per_unit.push_back({u.at("user").get<UserId>(), u.at("day").get<int>(), u.at("geo_bleu").get<double>(),
                            u.at("matches").get<std::size_t>(), u.at("total").get<std::size_t>()});
    return r;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("report json: ") + e.what());
  }
}

std::string report_csv_header() { return "configuration,dataset,metric,value\n"; }

std::string report_csv_rows(const EvalReport& r, const std::string& configuration, const std::string& dataset) {
  std::ostringstream out;
  out.precision(17);
  out << configuration << ',' << dataset << ",geo_bleu," << r.geo_bleu << '\n';
  out << configuration << ',' << dataset << ",accuracy," << r.accuracy << '\n';
  return out.str();
}

}  // namespace mobility
