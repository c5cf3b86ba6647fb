#include "mobility/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mobility/checkpoint.hpp"
#include "mobility/history.hpp"
#include "mobility/util.hpp"

namespace mobility {

namespace fs = std::filesystem;

namespace {

template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::vector<LatLon> centroids_of(const std::vector<const EnrichedPoint*>& pts, const GridSpec& grid) {
  std::vector<LatLon> out;
  for (const auto* p : pts) out.push_back(centroid_of(p->cell, grid));
  return out;
}

EpochSeconds time_of_day(EpochSeconds t) { return t - day_number(t) * kSecondsPerDay; }

// Each reference point is compared with the copied point closest in time of
// day (earlier one on ties).
std::size_t aligned_matches(const std::vector<const EnrichedPoint*>& ref, const std::vector<const PredictionCandidate*>& pred) {
  std::size_t m = 0;
  if (pred.empty()) return 0;
  for (const auto* r : ref) {
    const PredictionCandidate* best = nullptr;
    EpochSeconds bd = 0;
    for (const auto* p : pred) {
      const EpochSeconds d = std::abs(time_of_day(p->time) - time_of_day(r->local_time));
      if (!best || d < bd) {
        best = p;
        bd = d;
      }
    }
    m += best->cell == r->cell ? 1 : 0;
  }
  return m;
}

struct UserEval {
  std::vector<UnitScore> units;
  bool skipped = false;
  std::size_t routed_model = 0, routed_history = 0, unknown = 0;
};

UserEval evaluate_user(const ExperimentConfig& config, const PreparedData& data, ModelBundle* bundle, const UserSplit& u) {
  UserEval out;
  if (u.flagged) {
    out.skipped = true;
    return out;
  }
  const auto& grid = data.grid;
  std::map<int, std::vector<const EnrichedPoint*>> ref_by_day;
  for (const auto& p : u.test) ref_by_day[p.day_index].push_back(&p);

  if (config.model.arch == Arch::HV) {
    const auto days = test_days_of(u.test);
    const auto preds = hv_predict(u.train, days, grid);
    std::map<EpochSeconds, int> day_of_start;
    for (const auto& d : days) day_of_start[d.day_start] = d.day_index;
    std::map<int, std::vector<const PredictionCandidate*>> pred_by_day;
    for (const auto& p : preds) pred_by_day[day_of_start.at(day_number(p.time) * kSecondsPerDay)].push_back(&p);
    for (const auto& [day, refs] : ref_by_day) {
      UnitScore s{u.user_id, day, 0.0, 0, refs.size()};
      const auto& pd = pred_by_day[day];
      if (!pd.empty()) {
        std::vector<LatLon> pc;
        for (const auto* p : pd) pc.push_back(p->coords);
        s.geo_bleu = geo_bleu(pc, centroids_of(refs, grid), config.metric);
        s.matches = aligned_matches(refs, pd);
      }
      out.units.push_back(s);
    }
    out.routed_history = preds.size();
    return out;
  }

  const std::vector<double>* uv = nullptr;
  if (config.model.flags.user_semantic) {
    auto it = bundle->user_vectors.find(u.user_id);
    if (it == bundle->user_vectors.end()) {
      out.skipped = true;
      return out;
    }
    uv = &it->second;
  }
  std::vector<EpochSeconds> times;
  for (const auto& p : u.test) times.push_back(p.local_time);
  auto preds = predict_sequence(bundle->model, u.train, times, uv);
  if (bundle->gate) {
    const HistoryIndex hist(u.train, grid);
    auto fused = fuse(*bundle->gate, bundle->model.context.vocab, preds, hist);
    preds = std::move(fused.predictions);
    out.routed_model = fused.routed_model;
    out.routed_history = fused.routed_history;
  } else {
    out.routed_model = preds.size();
  }
  for (const auto& p : u.test) out.unknown += bundle->model.context.vocab.token(p.cell.flat) == CellVocab::kUnk ? 1 : 0;

  std::size_t i = 0;
  for (const auto& [day, refs] : ref_by_day) {
    UnitScore s{u.user_id, day, 0.0, 0, refs.size()};
    std::vector<LatLon> pc;
    for (const auto* r : refs) {
      pc.push_back(preds[i].coords);
      s.matches += preds[i].cell == r->cell ? 1 : 0;
      ++i;
    }
    s.geo_bleu = geo_bleu(pc, centroids_of(refs, grid), config.metric);
    out.units.push_back(s);
  }
  return out;
}

void write_json(const fs::path& p, const Json& j) { write_file(p, dump_json(j) + "\n"); }

ModelBundle build_model(const ExperimentConfig& config, const PreparedData& data, std::uint64_t seed, const fs::path& dir) {
  auto profiles = data.profiles;
  ModelBundle bundle;
  if (config.model.flags.user_semantic || config.cluster.space == ClusterSpace::Semantic)
    bundle.user_vectors = stage("semantics", [&] { return semantic_stage(config, profiles, seed); });
  const Clustering clustering = stage("clustering", [&] { return cluster_stage(config, profiles, seed); });
  write_json(dir / "clustering.json", clustering_to_json(clustering));
  if (config.model.arch == Arch::HV) return bundle;

  const auto ctx = stage("features", [&] {
    return fit_feature_context(data.split, data.grid, config.model.vocab_mode, config.model.buckets);
  });
  WindowSet windows = stage("windows", [&] { return build_windows(data.split, ctx, config.model.window_len); });
  windows.user_vectors = bundle.user_vectors;
  const BatchSchedule schedule = stage("sampling", [&] { return schedule_stage(config, windows, clustering, seed); });
  {
    std::ostringstream s;
    write_schedule(s, schedule);
    write_file(dir / "schedule.csv", s.str());
    write_file(dir / "schedule.digest", schedule_digest(schedule) + "\n");
  }
  bundle.model = stage("training", [&] { return train(model_config_for_seed(config, seed), schedule, windows, ctx); });
  write_file(dir / "loss.csv", loss_curve_csv(bundle.model.loss_curve));
  if (config.model.flags.fusion) {
    bundle.gate = stage("fusion", [&] {
      const auto examples = gate_examples(bundle.model, data.split, bundle.user_vectors, config.gate_tail_fraction);
      GateTrainConfig gc = config.gate;
      gc.seed = seed;
      return train_gate(gate_from_model(bundle.model.model), bundle.model.context.vocab, examples, gc);
    });
  }
  save_checkpoint((dir / "checkpoint.txt").string(), bundle.model, bundle.gate ? &*bundle.gate : nullptr);
  return bundle;
}

fs::path begin_run(const ExperimentConfig& config, std::uint64_t seed) {
  const fs::path dir = run_directory(config, seed);
  fs::create_directories(dir);
  fs::remove(dir / "FAILED");
  ExperimentConfig saved = config;
  saved.seeds = {seed};
  write_file(dir / "config.ini", saved.to_ini());
  return dir;
}

template <class F>
auto guarded(const fs::path& dir, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::exception& e) {
    write_file(dir / "FAILED", std::string(e.what()) + "\n");
    throw;
  }
}

void finish_run(const ExperimentConfig& config, const PreparedData& data, const fs::path& dir, std::uint64_t seed,
                const EvalReport& report) {
  write_json(dir / "report.json", report_to_json(report));
  write_file(dir / "report.csv", report_csv_header() + report_csv_rows(report, run_label(config), config.city));
  Json info;
  info["fingerprint"] = report.fingerprint;
  info["seed"] = seed;
  info["users_total"] = data.users_total;
  info["users_kept"] = data.users_kept;
  info["checkins"] = data.checkins;
  info["malformed_rows"] = data.malformed_rows;
  info["dropped_out_of_bbox"] = data.dropped_out_of_bbox;
  info["train_points"] = data.split.train_points();
  info["test_points"] = data.split.test_points();
  if (fs::exists(dir / "schedule.digest")) info["schedule_digest"] = std::string(trim(read_file(dir / "schedule.digest")));
  write_json(dir / "run_info.json", info);
}

}  // namespace

std::string run_label(const ExperimentConfig& c) {
  std::string label = to_string(c.model.arch);
  if (c.model.arch != Arch::HV) {
    label += "/" + to_string(c.sampling) + "/b" + std::to_string(c.model.batch_size);
    if (c.model.flags.ext_spatiotemporal) label += "+ext";
    if (c.model.flags.user_semantic) label += "+semantic";
    if (c.model.flags.fusion) label += "+fusion";
  }
  return label;
}

GridSpec grid_from_checkins(const std::vector<CheckIn>& checkins, int rows, int cols, int train_days) {
  const auto day0 = earliest_local_day(checkins);
  std::vector<LatLon> pts;
  for (const auto& c : checkins)
    if (day_number(c.local_time) - day0 < train_days) pts.push_back(c.position());
  return build_grid(pts, rows, cols);
}

bool keep_user(UserId user, double fraction) {
  if (fraction >= 1.0) return true;
  // FNV-1a leaves the high bits of short, similar keys correlated; the
  // murmur3 finalizer spreads consecutive ids evenly.
  std::uint64_t h = fnv1a64("user:" + std::to_string(user));
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ULL;
  h ^= h >> 33;
  return static_cast<double>(h >> 11) * 0x1.0p-53 < fraction;
}

PreparedData prepare_data(const ExperimentConfig& config) {
  config.validate();
  auto parsed = stage("ingest", [&] { return parse_checkins_file(config.resolved_data_path(), config.schema()); });
  PreparedData d = prepare_data(config, parsed.checkins);
  d.malformed_rows = parsed.errors.size();
  return d;
}

PreparedData prepare_data(const ExperimentConfig& config, const std::vector<CheckIn>& checkins) {
  PreparedData d;
  d.checkins = checkins.size();
  d.grid = stage("grid", [&] { return grid_from_checkins(checkins, config.grid_rows, config.grid_cols, config.split.train_days); });
  const auto day0 = earliest_local_day(checkins);
  const auto trajectories = build_trajectories(checkins);
  d.users_total = trajectories.size();
  std::vector<EnrichedTrajectory> enriched;
  stage("features", [&] {
    for (const auto& t : trajectories) {
      if (!keep_user(t.user_id, config.subsample)) continue;
      auto r = enrich(t, d.grid, day0);
      d.dropped_out_of_bbox += r.dropped_out_of_bbox;
      enriched.push_back(std::move(r.trajectory));
    }
    return 0;
  });
  d.users_kept = enriched.size();
  d.split = temporal_split(enriched, config.split);
  d.profiles = stage("semantics", [&] { return build_profiles(d.split, config.top_k); });
  return d;
}

Json preprocessing_summary(const std::vector<CheckIn>& checkins, int rows, int cols, SplitConfig split) {
  const GridSpec grid = grid_from_checkins(checkins, rows, cols, split.train_days);
  const auto day0 = earliest_local_day(checkins);
  std::size_t in_window = 0, dropped = 0, out_of_window = 0;
  for (const auto& t : build_trajectories(checkins)) {
    const auto r = enrich(t, grid, day0);
    dropped += r.dropped_out_of_bbox;
    for (const auto& p : r.trajectory.points)
      (p.day_index < split.train_days + split.test_days ? in_window : out_of_window)++;
  }
  Json j;
  j["grid"] = grid_to_json(grid);
  j["cell_height_m"] = grid.cell_height_m;
  j["cell_width_m"] = grid.cell_width_m;
  j["in_window_records"] = in_window;
  j["out_of_window_records"] = out_of_window;
  j["dropped_out_of_bbox"] = dropped;
  return j;
}

Clustering cluster_stage(const ExperimentConfig& config, std::vector<UserProfile>& profiles, std::uint64_t seed) {
  if (profiles.empty()) throw DomainError("no user profiles to cluster");
  ClusterOptions opt = config.cluster;
  opt.seed = seed;
  Clustering c = cluster_users(profiles, opt);
  for (auto& p : profiles) p.cluster_id = c.assignments.at(p.user_id);
  return c;
}

std::map<UserId, std::vector<double>> semantic_stage(const ExperimentConfig& config, std::vector<UserProfile>& profiles,
                                                     std::uint64_t seed) {
  const CategoryEmbedder embedder =
      config.embeddings_path.empty() ? CategoryEmbedder() : CategoryEmbedder::from_file(config.embeddings_path);
  AutoencoderConfig ac;
  ac.input_dim = config.top_k * embedder.dim();
  ac.hidden_dim = config.model.semantic_dim;
  ac.lr = config.autoencoder_lr;
  ac.epochs = config.autoencoder_epochs;
  ac.seed = seed;
  Autoencoder ae(ac);
  attach_semantic_vectors(profiles, embedder, ae);
  std::map<UserId, std::vector<double>> out;
  for (const auto& p : profiles) out[p.user_id] = p.semantic_vector;
  return out;
}

BatchSchedule schedule_stage(const ExperimentConfig& config, const WindowSet& windows, const Clustering& clustering,
                             std::uint64_t seed) {
  const int b = config.model.batch_size, e = config.model.epochs;
  switch (config.sampling) {
    case SamplingStrategy::Sequential:
      return plan_sequential(windows.refs, b, e);
    case SamplingStrategy::ClusterOrdered:
      return plan_cluster_ordered(windows.refs, clustering.assignments, b, e);
    case SamplingStrategy::Stratified:
      return plan_stratified(windows.refs, clustering.assignments, b, e, seed);
  }
  throw StateError("unknown sampling strategy");
}

EvalReport evaluate(const ExperimentConfig& config, const PreparedData& data, ModelBundle* bundle, std::uint64_t seed) {
  if (config.model.arch != Arch::HV && !bundle) throw StateError("model evaluation needs a trained model");
  const auto& users = data.split.users;
  std::vector<UserEval> per_user(users.size());
  const int n = static_cast<int>(users.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) per_user[static_cast<std::size_t>(i)] = evaluate_user(config, data, bundle, users[static_cast<std::size_t>(i)]);

  std::vector<UnitScore> units;
  std::size_t skipped = 0, routed_model = 0, routed_history = 0, unknown = 0;
  for (auto& u : per_user) {
    skipped += u.skipped ? 1 : 0;
    routed_model += u.routed_model;
    routed_history += u.routed_history;
    unknown += u.unknown;
    units.insert(units.end(), u.units.begin(), u.units.end());
  }
  EvalReport r = aggregate(std::move(units), skipped);
  r.fingerprint = config.fingerprint(seed);
  r.routed_model = routed_model;
  r.routed_history = routed_history;
  r.unknown_targets = unknown;
  return r;
}

std::string run_directory(const ExperimentConfig& config, std::uint64_t seed) {
  return (fs::path(config.output_dir) / ("seed" + std::to_string(seed))).string();
}

EvalReport run_experiment(const ExperimentConfig& config, const PreparedData& data, std::uint64_t seed) {
  const fs::path dir = begin_run(config, seed);
  return guarded(dir, [&] {
    write_json(dir / "grid.json", grid_to_json(data.grid));
    ModelBundle bundle = build_model(config, data, seed, dir);
    EvalReport report = stage("evaluation", [&] { return evaluate(config, data, &bundle, seed); });
    finish_run(config, data, dir, seed, report);
    return report;
  });
}

EvalReport run_experiment(const ExperimentConfig& config, std::uint64_t seed) {
  const PreparedData data = prepare_data(config);
  return run_experiment(config, data, seed);
}

void train_only(const ExperimentConfig& config, const PreparedData& data, std::uint64_t seed) {
  const fs::path dir = begin_run(config, seed);
  guarded(dir, [&] {
    write_json(dir / "grid.json", grid_to_json(data.grid));
    build_model(config, data, seed, dir);
    return 0;
  });
}

EvalReport evaluate_persisted(const ExperimentConfig& config, const PreparedData& data, std::uint64_t seed) {
  const fs::path dir = run_directory(config, seed);
  return guarded(dir, [&] {
    ModelBundle bundle;
    if (config.model.arch != Arch::HV) {
      const auto path = dir / "checkpoint.txt";
      if (!fs::exists(path)) throw StateError("no checkpoint at " + path.string() + "; run train first");
      Checkpoint ck = load_checkpoint(path.string());
      if (!(ck.model.context.grid == data.grid)) throw StateError("checkpoint grid differs from the dataset grid");
      bundle.model = std::move(ck.model);
      bundle.gate = std::move(ck.gate);
      if (config.model.flags.user_semantic) {
        auto profiles = data.profiles;
        bundle.user_vectors = semantic_stage(config, profiles, seed);
      }
    } else {
      fs::create_directories(dir);
    }
    EvalReport report = stage("evaluation", [&] { return evaluate(config, data, &bundle, seed); });
    finish_run(config, data, dir, seed, report);
    return report;
  });
}

SeedSummary summarize(std::vector<std::pair<std::uint64_t, EvalReport>> runs) {
  SeedSummary s;
  s.runs = std::move(runs);
  if (s.runs.empty()) return s;
  s.geo_bleu_min = s.accuracy_min = 1.0;
  for (const auto& [seed, r] : s.runs) {
    s.geo_bleu_mean += r.geo_bleu;
    s.accuracy_mean += r.accuracy;
    s.geo_bleu_min = std::min(s.geo_bleu_min, r.geo_bleu);
    s.geo_bleu_max = std::max(s.geo_bleu_max, r.geo_bleu);
    s.accuracy_min = std::min(s.accuracy_min, r.accuracy);
    s.accuracy_max = std::max(s.accuracy_max, r.accuracy);
  }
  s.geo_bleu_mean /= static_cast<double>(s.runs.size());
  s.accuracy_mean /= static_cast<double>(s.runs.size());
  return s;
}

Json summary_to_json(const SeedSummary& s) {
  Json j;
  Json runs = Json::array();
  for (const auto& [seed, r] : s.runs)
    runs.push_back(Json{{"seed", seed}, {"geo_bleu", r.geo_bleu}, {"accuracy", r.accuracy}, {"fingerprint", r.fingerprint}});
  j["runs"] = runs;
  j["geo_bleu"] = Json{{"mean", s.geo_bleu_mean}, {"min", s.geo_bleu_min}, {"max", s.geo_bleu_max}};
  j["accuracy"] = Json{{"mean", s.accuracy_mean}, {"min", s.accuracy_min}, {"max", s.accuracy_max}};
  return j;
}

SeedSummary run_seeds(const ExperimentConfig& config) {
  const PreparedData data = prepare_data(config);
  std::vector<std::pair<std::uint64_t, EvalReport>> runs;
  for (auto seed : config.seeds) runs.emplace_back(seed, run_experiment(config, data, seed));
  SeedSummary s = summarize(std::move(runs));
  write_json(fs::path(config.output_dir) / "summary.json", summary_to_json(s));
  return s;
}

SweepAxis sweep_axis_from_string(std::string_view s) {
  if (s == "batch_size" || s == "batch") return SweepAxis::BatchSize;
  if (s == "sampling") return SweepAxis::Sampling;
  if (s == "ablation") return SweepAxis::Ablation;
  throw ConfigError("unknown sweep axis '" + std::string(s) + "'");
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::BatchSize: return "batch_size";
    case SweepAxis::Sampling: return "sampling";
    case SweepAxis::Ablation: return "ablation";
  }
  return "?";
}

std::vector<std::string> default_axis_values(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::BatchSize: return {"4", "16", "64", "256", "512"};
    case SweepAxis::Sampling: return {"sequential", "cluster", "stratified"};
    case SweepAxis::Ablation: return {"baseline", "ext", "semantic", "fusion"};
  }
  return {};
}

std::vector<std::string> axis_overrides(SweepAxis axis, const std::string& value) {
  switch (axis) {
    case SweepAxis::BatchSize:
      return {"model.batch_size=" + value};
    case SweepAxis::Sampling:
      return {"sampling.strategy=" + value};
    case SweepAxis::Ablation: {
      std::vector<std::string> o{"features.ext_spatiotemporal=false", "features.user_semantic=false", "features.fusion=false"};
      if (value == "ext") o[0] = "features.ext_spatiotemporal=true";
      else if (value == "semantic") o[1] = "features.user_semantic=true";
      else if (value == "fusion") o[2] = "features.fusion=true";
      else if (value != "baseline") throw ConfigError("unknown ablation value '" + value + "'");
      return o;
    }
  }
  return {};
}

namespace {

ExperimentConfig cell_config(const ExperimentConfig& base, SweepAxis axis, const std::string& value) {
  auto overrides = axis_overrides(axis, value);
  overrides.push_back("run.output=" + (fs::path(base.output_dir) / ("sweep-" + to_string(axis)) / value).string());
  return parse_config(base.to_ini(), overrides);
}

bool reference_na(const ExperimentConfig& c, SweepAxis axis, const std::string& value) {
  return axis == SweepAxis::Ablation && c.model.arch == Arch::LSTM && value != "baseline";
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::string>& values) {
  if (values.empty()) throw ConfigError("sweep axis has no values");
  std::vector<ExperimentConfig> configs;
  for (const auto& v : values) {
    configs.push_back(cell_config(base, axis, v));
    configs.back().validate();
  }
  const PreparedData data = prepare_data(base);
  SweepResult r;
  r.axis = axis;
  r.dataset = base.city;
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (auto seed : base.seeds) {
      SweepCell cell;
      cell.value = values[i];
      cell.seed = seed;
      cell.reference_na = reference_na(configs[i], axis, values[i]);
      try {
        cell.report = run_experiment(configs[i], data, seed);
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      r.cells.push_back(std::move(cell));
    }
  }
  write_file(fs::path(base.output_dir) / ("sweep-" + to_string(axis) + ".csv"), sweep_csv(r));
  return r;
}

std::string sweep_csv(const SweepResult& r) {
  std::ostringstream out;
  out.precision(17);
  out << "axis,value,dataset,seed,geo_bleu,accuracy,status,reference_na\n";
  std::vector<std::string> order;
  for (const auto& c : r.cells)
    if (std::find(order.begin(), order.end(), c.value) == order.end()) order.push_back(c.value);
  for (const auto& v : order) {
    std::vector<std::pair<std::uint64_t, EvalReport>> ok;
    bool na = false, any_failed = false;
    for (const auto& c : r.cells) {
      if (c.value != v) continue;
      na = c.reference_na;
      out << to_string(r.axis) << ',' << v << ',' << r.dataset << ',' << c.seed << ',';
      if (c.report) {
        out << c.report->geo_bleu << ',' << c.report->accuracy << ",ok";
        ok.emplace_back(c.seed, *c.report);
      } else {
        out << ",,failed";
        any_failed = true;
      }
      out << ',' << (c.reference_na ? "NA" : "") << '\n';
    }
    if (ok.empty()) continue;
    const auto s = summarize(ok);
    const std::string status = any_failed ? "partial" : "ok";
    const std::string tag = na ? "NA" : "";
    out << to_string(r.axis) << ',' << v << ',' << r.dataset << ",mean," << s.geo_bleu_mean << ',' << s.accuracy_mean << ',' << status << ',' << tag << '\n';
    out << to_string(r.axis) << ',' << v << ',' << r.dataset << ",min," << s.geo_bleu_min << ',' << s.accuracy_min << ',' << status << ',' << tag << '\n';
    out << to_string(r.axis) << ',' << v << ',' << r.dataset << ",max," << s.geo_bleu_max << ',' << s.accuracy_max << ',' << status << ',' << tag << '\n';
  }
  return out.str();
}

SweepResult reload_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::string>& values) {
  if (values.empty()) throw ConfigError("sweep axis has no values");
  SweepResult r;
  r.axis = axis;
  r.dataset = base.city;
  for (const auto& v : values) {
    const auto cfg = cell_config(base, axis, v);
    for (auto seed : base.seeds) {
      SweepCell cell;
      cell.value = v;
      cell.seed = seed;
      cell.reference_na = reference_na(cfg, axis, v);
      const fs::path dir = run_directory(cfg, seed);
      if (fs::exists(dir / "report.json") && !fs::exists(dir / "FAILED"))
        cell.report = report_from_json(Json::parse(read_file(dir / "report.json")));
      else
        cell.error = fs::exists(dir / "FAILED") ? std::string(trim(read_file(dir / "FAILED"))) : "missing report";
      r.cells.push_back(std::move(cell));
    }
  }
  return r;
}

ReplayResult replay(const std::string& run_dir) {
  const fs::path dir(run_dir);
  for (const char* f : {"config.ini", "run_info.json", "report.json"})
    if (!fs::exists(dir / f)) throw StateError(std::string("replay needs ") + f + " in " + run_dir);
  const Json info = Json::parse(read_file(dir / "run_info.json"));
  const auto seed = info.at("seed").get<std::uint64_t>();
  ExperimentConfig config = load_config((dir / "config.ini").string(), {"run.output=" + (dir / "replay").string()});
  config.seeds = {seed};
  run_experiment(config, seed);

  ReplayResult r;
  const fs::path again = run_directory(config, seed);
  r.original_report = read_file(dir / "report.json");
  r.replayed_report = read_file(again / "report.json");
  r.identical = r.original_report == r.replayed_report;
  if (fs::exists(dir / "schedule.digest")) {
    const bool same = read_file(dir / "schedule.digest") == read_file(again / "schedule.digest");
    if (!same) r.identical = false;
    r.message = same ? "schedule digest matches; " : "schedule digest differs; ";
  }
  r.message += r.original_report == r.replayed_report ? "report identical" : "report differs";
  return r;
}

}  // namespace mobility
