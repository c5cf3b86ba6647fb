// Property criteria that need no dataset. Prints one PASS/FAIL line per
// criterion and exits non-zero when any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "mobility/harness.hpp"
#include "mobility/kmeans.hpp"
#include "mobility/metrics.hpp"
#include "mobility/sampling.hpp"
#include "mobility/synth.hpp"
#include "mobility/training.hpp"

using namespace mobility;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << detail << std::endl;
  failures += pass ? 0 : 1;
}

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << x;
  return s.str();
}

ExperimentConfig synthetic_config(const fs::path& data, const fs::path& out) {
  std::ostringstream ini;
  ini << "[data]\npath = " << data.string() << "\ncity = synthetic\n"
      << "[grid]\nrows = 50\ncols = 50\n"
      << "[split]\ntrain_days = 50\ntest_days = 10\n"
      << "[model]\narch = transformer\nd_model = 64\nlayers = 2\nheads = 4\nwindow_len = 32\nlr = 0.001\n"
      << "batch_size = 16\nepochs = 2\n"
      << "[sampling]\nstrategy = stratified\n"
      << "[features]\next_spatiotemporal = true\nfusion = true\n"
      << "[run]\nseeds = 7\noutput = " << out.string() << "\n";
  return parse_config(ini.str());
}

void gradient_checks(const fs::path& data) {
  auto config = synthetic_config(data, "unused");
  std::ifstream in(data);
  const auto prepared = prepare_data(config, parse_checkins(in, config.schema()).checkins);
  const auto ctx = fit_feature_context(prepared.split, prepared.grid, VocabMode::Observed, 4);
  auto windows = build_windows(prepared.split, ctx, 6);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (const auto& u : prepared.split.users) {
    std::vector<double> v(6);
    for (auto& x : v) x = n01(rng);
    windows.user_vectors[u.user_id] = v;
  }
  for (Arch arch : {Arch::LSTM, Arch::Transformer}) {
    double worst = 0.0;
    int checked = 0;
    for (bool flags : {false, true}) {
      ModelConfig c;
      c.arch = arch;
      c.d_model = 8;
      c.layers = 1;
      c.heads = 2;
      c.window_len = 6;
      c.buckets = 4;
      c.semantic_dim = 6;
      c.flags.ext_spatiotemporal = flags;
      c.flags.user_semantic = flags;
      SequenceModel model(c, ctx.vocab.size());
      std::vector<const EncodedSequence*> seqs;
      std::vector<const std::vector<double>*> uv;
      for (std::size_t i = 0; i < 4; ++i) {
        seqs.push_back(&windows.sequences[i]);
        if (flags) uv.push_back(&windows.user_vectors.at(windows.refs[i].user));
      }
      const auto r = gradient_check(model, make_batch(seqs, uv, c.semantic_dim), 400, 11);
      worst = std::max(worst, r.max_relative_error);
      checked += r.checked;
    }
    report(8, "gradient check, tiny " + to_string(arch), worst < 1e-4,
           "max relative error " + fmt(worst) + " over " + std::to_string(checked) + " entries (limit 1e-4)");
  }
}

void geo_bleu_properties() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.05, 0.05), grow(0.1, 2.0);
  auto random_seq = [&](std::size_t n) {
    std::vector<LatLon> s;
    for (std::size_t i = 0; i < n; ++i) s.push_back({40.7 + u(rng), -74.0 + u(rng)});
    return s;
  };
  double identity_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto s = random_seq(1 + rng() % 30);
    identity_err = std::max(identity_err, std::abs(geo_bleu(s, s) - 1.0));
  }
  report(9, "GEO-BLEU identity", identity_err <= 1e-9, "max |score - 1| " + fmt(identity_err) + " on 100 sequences");

  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double s = geo_bleu(random_seq(1 + rng() % 20), random_seq(1 + rng() % 20));
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  report(9, "GEO-BLEU range", lo >= 0.0 && hi <= 1.0, "scores in [" + fmt(lo) + ", " + fmt(hi) + "] on 1000 pairs");

  int cases = 0, violations = 0;
  for (int trial = 0; cases < 100 && trial < 5000; ++trial) {
    const auto p = random_seq(6), r = random_seq(6);
    const std::size_t k = rng() % p.size();
    auto q = p;
    const double t = grow(rng);
    q[k] = {p[k].lat + t * (p[k].lat - 40.7), p[k].lon + t * (p[k].lon + 74.0)};
    bool farther = true;
    for (const auto& x : r) farther = farther && haversine_m(q[k], x) >= haversine_m(p[k], x);
    if (!farther) continue;
    ++cases;
    violations += geo_bleu(q, r) > geo_bleu(p, r) + 1e-12 ? 1 : 0;
  }
  report(9, "GEO-BLEU farther is never better", cases == 100 && violations == 0,
         std::to_string(violations) + " violations in " + std::to_string(cases) + " perturbations");
}

void schedule_properties() {
  std::mt19937_64 rng(3);
  std::vector<SampleRef> samples;
  std::map<UserId, int> clusters;
  for (UserId u = 0; u < 40; ++u) {
    clusters[u] = static_cast<int>(rng() % 5);
    const int windows = 1 + static_cast<int>(rng() % 15);
    for (int w = 0; w < windows; ++w) samples.push_back({u, w});
  }
  auto sorted_samples = samples;
  std::sort(sorted_samples.begin(), sorted_samples.end());

  double worst_dev = 0.0;
  bool coverage = true;
  for (int bs : {1, 3, 4, 16, 64, 256}) {
    const auto strat = plan_stratified(samples, clusters, bs, 3, 5);
    const auto seq = plan_sequential(samples, bs, 3);
    const auto clus = plan_cluster_ordered(samples, clusters, bs, 3);
    for (const auto& epoch : strat.epochs) {
      std::map<int, double> left;
      for (const auto& s : samples) left[clusters.at(s.user)] += 1.0;
      double remaining = static_cast<double>(samples.size());
      for (const auto& batch : epoch) {
        std::map<int, double> got;
        for (const auto& r : batch) got[clusters.at(r.user)] += 1.0;
        for (const auto& [c, n] : left)
          worst_dev = std::max(worst_dev, std::abs(got[c] - n * static_cast<double>(batch.size()) / remaining));
        for (const auto& [c, n] : got) left[c] -= n;
        remaining -= static_cast<double>(batch.size());
      }
    }
    for (const auto* plan : {&strat, &seq, &clus})
      for (const auto& epoch : plan->epochs) {
        std::vector<SampleRef> flat;
        for (const auto& b : epoch) flat.insert(flat.end(), b.begin(), b.end());
        std::sort(flat.begin(), flat.end());
        coverage = coverage && flat == sorted_samples;
      }
  }
  report(10, "stratified quotas", worst_dev < 1.0 + 1e-9,
         "max deviation from exact proportional share " + fmt(worst_dev) + " (limit 1)");
  report(10, "epoch coverage", coverage, "every epoch of all three strategies covers the sample multiset exactly");
}

void clustering_properties() {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.01);
  const std::vector<LatLon> centers{{40.6, -74.1}, {40.9, -73.8}, {40.6, -73.7}};
  std::vector<UserProfile> profiles;
  for (std::size_t b = 0; b < 3; ++b)
    for (int i = 0; i < 20; ++i) {
      UserProfile p;
      p.user_id = static_cast<UserId>(b * 100 + static_cast<std::size_t>(i));
      p.centroid = {centers[b].lat + noise(rng), centers[b].lon + noise(rng)};
      profiles.push_back(p);
    }
  std::shuffle(profiles.begin(), profiles.end(), rng);
  const auto c = cluster_users(profiles);
  std::map<int, std::set<int>> blobs_of_cluster;
  for (const auto& p : profiles) blobs_of_cluster[c.assignments.at(p.user_id)].insert(static_cast<int>(p.user_id / 100));
  bool exact = blobs_of_cluster.size() == 3;
  for (const auto& [cl, blobs] : blobs_of_cluster) exact = exact && blobs.size() == 1;
  report(11, "three-blob recovery", c.k == 3 && exact, "K = " + std::to_string(c.k) + (exact ? ", membership exact" : ", membership mixed"));

  std::uniform_real_distribution<double> u(0.0, 1.0);
  nn::Matrix pts(50, 2);
  for (auto& x : pts.data) x = u(rng);
  std::vector<int> lab(50);
  for (std::size_t i = 0; i < 50; ++i) lab[i] = static_cast<int>(i % 4);
  double brute = 0.0;
  for (int i = 0; i < 50; ++i) {
    std::map<int, std::pair<double, int>> acc;
    for (int j = 0; j < 50; ++j) {
      if (i == j) continue;
      auto& [s, n] = acc[lab[static_cast<std::size_t>(j)]];
      s += std::hypot(pts(i, 0) - pts(j, 0), pts(i, 1) - pts(j, 1));
      ++n;
    }
    const int own = lab[static_cast<std::size_t>(i)];
    const double a = acc[own].first / acc[own].second;
    double b = 1e300;
    for (const auto& [cl, v] : acc)
      if (cl != own) b = std::min(b, v.first / v.second);
    brute += (b - a) / std::max(a, b);
  }
  brute /= 50.0;
  const double err = std::abs(silhouette(pts, lab) - brute);
  report(11, "silhouette against brute force", err < 1e-9, "|difference| " + fmt(err) + " on 50 points (limit 1e-9)");
}

void determinism(const fs::path& root, const fs::path& data) {
  const auto start = std::chrono::steady_clock::now();
  const auto a = synthetic_config(data, root / "first"), b = synthetic_config(data, root / "second");
  run_experiment(a, 7);
  run_experiment(b, 7);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  const auto ra = slurp(fs::path(run_directory(a, 7)) / "report.json");
  const auto rb = slurp(fs::path(run_directory(b, 7)) / "report.json");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report(12, "byte-identical reruns", !ra.empty() && ra == rb,
         "transformer with fusion on synthetic data, two runs of seed 7, " + std::to_string(ra.size()) + " report bytes, " +
             std::to_string(static_cast<int>(secs)) + " s");
}

}  // namespace

int main() {
  const fs::path root = fs::temp_directory_path() / "mobility_acceptance_properties";
  fs::remove_all(root);
  fs::create_directories(root);
  SynthConfig sc;
  sc.users = 16;
  sc.days = 60;
  const fs::path data = root / "synthetic.tsv";
  std::ofstream(data) << synthesize_tsv(sc);

  const auto run = [](auto&& f) {
    try {
      f();
    } catch (const std::exception& e) {
      report(0, "unexpected error", false, e.what());
    }
  };
  run([&] { gradient_checks(data); });
  run(geo_bleu_properties);
  run(schedule_properties);
  run(clustering_properties);
  run([&] { determinism(root, data); });
  std::cout << (failures == 0 ? "all property criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
