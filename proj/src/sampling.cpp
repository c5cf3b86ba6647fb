#include "mobility/sampling.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

namespace mobility {

std::string to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::Sequential: return "sequential";
    case SamplingStrategy::ClusterOrdered: return "cluster";
    case SamplingStrategy::Stratified: return "stratified";
  }
  return "?";
}

SamplingStrategy sampling_from_string(std::string_view s) {
  if (s == "sequential") return SamplingStrategy::Sequential;
  if (s == "cluster" || s == "cluster_ordered") return SamplingStrategy::ClusterOrdered;
  if (s == "stratified") return SamplingStrategy::Stratified;
  throw ConfigError("unknown sampling strategy '" + std::string(s) + "'");
}

namespace {

void check_batch(int batch_size, int epochs) {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
}

Epoch slice(const std::vector<SampleRef>& ordered, int batch_size) {
  Epoch e;
  for (std::size_t i = 0; i < ordered.size(); i += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(ordered.size(), i + static_cast<std::size_t>(batch_size));
    e.emplace_back(ordered.begin() + static_cast<std::ptrdiff_t>(i), ordered.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return e;
}

int cluster_of(const std::map<UserId, int>& clusters, UserId user) {
  auto it = clusters.find(user);
  if (it == clusters.end()) throw ConfigError("user " + std::to_string(user) + " has no cluster assignment");
  return it->second;
}

}  // namespace

BatchSchedule plan_sequential(const std::vector<SampleRef>& samples, int batch_size, int epochs) {
  check_batch(batch_size, epochs);
  BatchSchedule s{SamplingStrategy::Sequential, batch_size, 0, {}};
  const Epoch e = slice(samples, batch_size);
  s.epochs.assign(static_cast<std::size_t>(epochs), e);
  return s;
}

BatchSchedule plan_cluster_ordered(const std::vector<SampleRef>& samples, const std::map<UserId, int>& clusters,
                                   int batch_size, int epochs) {
  check_batch(batch_size, epochs);
  std::vector<std::pair<int, SampleRef>> keyed;
  keyed.reserve(samples.size());
  for (const auto& r : samples) keyed.emplace_back(cluster_of(clusters, r.user), r);
  std::sort(keyed.begin(), keyed.end());
  std::vector<SampleRef> ordered;
  ordered.reserve(keyed.size());
  for (const auto& [c, r] : keyed) ordered.push_back(r);
  BatchSchedule s{SamplingStrategy::ClusterOrdered, batch_size, 0, {}};
  s.epochs.assign(static_cast<std::size_t>(epochs), slice(ordered, batch_size));
  return s;
}

std::vector<int> largest_remainder(const std::vector<std::size_t>& weights, int total) {
  const std::size_t sum = std::accumulate(weights.begin(), weights.end(), std::size_t{0});
  std::vector<int> quota(weights.size(), 0);
  if (sum == 0 || total <= 0) return quota;
  std::vector<std::pair<std::size_t, std::size_t>> rems;  // (remainder numerator, index)
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const std::size_t num = weights[i] * static_cast<std::size_t>(total);
    quota[i] = static_cast<int>(num / sum);
    assigned += quota[i];
    rems.emplace_back(num % sum, i);
  }
  std::stable_sort(rems.begin(), rems.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total && k < rems.size(); ++k) {
    ++quota[rems[k].second];
    ++assigned;
  }
  return quota;
}

BatchSchedule plan_stratified(const std::vector<SampleRef>& samples, const std::map<UserId, int>& clusters,
                              int batch_size, int epochs, std::uint64_t seed) {
  check_batch(batch_size, epochs);
  std::map<int, std::vector<SampleRef>> by_cluster;
  for (const auto& r : samples) by_cluster[cluster_of(clusters, r.user)].push_back(r);
  std::vector<std::vector<SampleRef>> groups;
  for (auto& [c, refs] : by_cluster) groups.push_back(std::move(refs));

  BatchSchedule s{SamplingStrategy::Stratified, batch_size, seed, {}};
  std::mt19937_64 rng(seed);
  for (int e = 0; e < epochs; ++e) {
    auto pools = groups;
    for (auto& p : pools) std::shuffle(p.begin(), p.end(), rng);
    std::vector<std::size_t> next(pools.size(), 0);
    std::size_t remaining = samples.size();
    Epoch epoch;
    while (remaining > 0) {
      const int take = static_cast<int>(std::min<std::size_t>(remaining, static_cast<std::size_t>(batch_size)));
      std::vector<std::size_t> left(pools.size());
      for (std::size_t c = 0; c < pools.size(); ++c) left[c] = pools[c].size() - next[c];
      const auto quota = largest_remainder(left, take);
      std::vector<SampleRef> batch;
      batch.reserve(static_cast<std::size_t>(take));
      for (std::size_t c = 0; c < pools.size(); ++c)
        for (int q = 0; q < quota[c]; ++q) batch.push_back(pools[c][next[c]++]);
      remaining -= batch.size();
      epoch.push_back(std::move(batch));
    }
    s.epochs.push_back(std::move(epoch));
  }
  return s;
}

void write_schedule(std::ostream& out, const BatchSchedule& s) {
  out << "# strategy=" << to_string(s.strategy) << " batch_size=" << s.batch_size << " seed=" << s.seed
      << " epochs=" << s.epochs.size() << '\n';
  out << "epoch,batch,user,window\n";
  for (std::size_t e = 0; e < s.epochs.size(); ++e)
    for (std::size_t b = 0; b < s.epochs[e].size(); ++b)
      for (const auto& r : s.epochs[e][b]) out << e << ',' << b << ',' << r.user << ',' << r.window << '\n';
}

BatchSchedule read_schedule(std::istream& in) {
  BatchSchedule s;
  std::string line;
  std::size_t epochs_declared = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string kv;
      while (meta >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const auto key = kv.substr(0, eq), val = kv.substr(eq + 1);
        if (key == "strategy") s.strategy = sampling_from_string(val);
        else if (key == "batch_size") s.batch_size = std::stoi(val);
        else if (key == "seed") s.seed = std::stoull(val);
        else if (key == "epochs") epochs_declared = std::stoull(val);
      }
      continue;
    }
    if (line.rfind("epoch,", 0) == 0) continue;
    const auto f = split(line, ',');
    if (f.size() != 4) throw ParseError("schedule line: expected 4 fields");
    const auto e = static_cast<std::size_t>(std::stoull(std::string(f[0])));
    const auto b = static_cast<std::size_t>(std::stoull(std::string(f[1])));
    if (s.epochs.size() <= e) s.epochs.resize(e + 1);
    if (s.epochs[e].size() <= b) s.epochs[e].resize(b + 1);
    s.epochs[e][b].push_back({std::stoll(std::string(f[2])), std::stoi(std::string(f[3]))});
  }
  if (s.epochs.size() < epochs_declared) s.epochs.resize(epochs_declared);
  return s;
}

std::string schedule_digest(const BatchSchedule& schedule) {
  std::ostringstream ss;
  write_schedule(ss, schedule);
  return hex64(fnv1a64(ss.str()));
}

}  // namespace mobility
