#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "mobility/config.hpp"
#include "mobility/harness.hpp"
#include "mobility/ingest.hpp"
#include "mobility/synth.hpp"
#include "mobility/util.hpp"

namespace fs = std::filesystem;
using namespace mobility;

namespace {

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;
  std::vector<std::uint64_t> seeds;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", path, "experiment config (INI)")->required()->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", overrides, "override, section.key=value")->take_all();
    cmd->add_option("--seed", seeds, "restrict to these seeds");
  }

  ExperimentConfig load() const {
    ExperimentConfig c = load_config(path, overrides);
    if (!seeds.empty()) c.seeds = seeds;
    c.validate();
    return c;
  }
};

void print_report(std::uint64_t seed, const EvalReport& r) {
  std::cout << "seed " << seed << ": geo_bleu=" << r.geo_bleu << " accuracy=" << r.accuracy
            << " units=" << r.per_unit.size() << " skipped_users=" << r.skipped_users << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Next-location prediction experiments on check-in data"};
  app.require_subcommand(1);

  auto* stats = app.add_subcommand("stats", "dataset statistics, category table and repeat-check-in ratios");
  std::string stats_data, stats_delim = "tab", stats_columns, stats_out;
  std::size_t stats_top = 10;
  int stats_rows = 200, stats_cols = 200;
  SplitConfig stats_split;
  stats->add_option("data", stats_data, "check-in file")->required()->check(CLI::ExistingFile);
  stats->add_option("--delimiter", stats_delim, "tab, comma or one character");
  stats->add_option("--columns", stats_columns, "column order, e.g. user,venue,catid,catname,lat,lon,tz,utc");
  stats->add_option("--top", stats_top, "categories listed");
  stats->add_option("--rows", stats_rows);
  stats->add_option("--cols", stats_cols);
  stats->add_option("--train-days", stats_split.train_days);
  stats->add_option("--test-days", stats_split.test_days);
  stats->add_option("-o,--out", stats_out, "write JSON here instead of stdout");

  ConfigArgs cluster_args, train_args, eval_args, run_args, sweep_args;
  auto* cluster = app.add_subcommand("cluster", "user profiles and silhouette-selected K-means");
  cluster_args.attach(cluster);
  auto* train_cmd = app.add_subcommand("train", "train and checkpoint one model per seed");
  train_args.attach(train_cmd);
  auto* eval_cmd = app.add_subcommand("eval", "score persisted checkpoints (or the HV baseline)");
  eval_args.attach(eval_cmd);
  auto* run_cmd = app.add_subcommand("run", "train and evaluate every seed, then summarize");
  run_args.attach(run_cmd);

  auto* sweep = app.add_subcommand("sweep", "one run per axis value and seed");
  sweep_args.attach(sweep);
  std::string axis_name;
  std::vector<std::string> axis_values;
  bool use_defaults = true;
  sweep->add_option("--axis", axis_name, "batch_size, sampling or ablation")->required();
  auto* values_opt = sweep->add_option("--values", axis_values, "axis values (comma separated)")->delimiter(',');
  sweep->add_flag("--reload", "rebuild the table from persisted reports without running");

  auto* replay_cmd = app.add_subcommand("replay", "rerun a persisted run and compare its report");
  std::string replay_dir;
  replay_cmd->add_option("run_dir", replay_dir)->required()->check(CLI::ExistingDirectory);

  auto* synth = app.add_subcommand("synth", "write a synthetic check-in file");
  SynthConfig sc;
  std::string synth_out;
  synth->add_option("-o,--out", synth_out)->required();
  synth->add_option("--users", sc.users);
  synth->add_option("--days", sc.days);
  synth->add_option("--neighborhoods", sc.neighborhoods);
  synth->add_option("--visits-per-day", sc.visits_per_day);
  synth->add_option("--skip", sc.skip_probability);
  synth->add_option("--noise", sc.noise_probability);
  synth->add_option("--seed", sc.seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*stats) {
      ExperimentConfig c;
      c.delimiter = stats_delim;
      c.columns = stats_columns;
      const auto parsed = parse_checkins_file(stats_data, c.schema());
      Json j = stats_to_json(dataset_stats(build_trajectories(parsed.checkins)), stats_top);
      j["malformed_rows"] = parsed.errors.size();
      if (!parsed.checkins.empty())
        j["preprocessing"] = preprocessing_summary(parsed.checkins, stats_rows, stats_cols, stats_split);
      const std::string text = dump_json(j) + "\n";
      if (stats_out.empty()) std::cout << text;
      else write_file(stats_out, text);
    } else if (*cluster) {
      const auto c = cluster_args.load();
      auto data = prepare_data(c);
      for (auto seed : c.seeds) {
        if (c.cluster.space == ClusterSpace::Semantic) semantic_stage(c, data.profiles, seed);
        const auto cl = cluster_stage(c, data.profiles, seed);
        const auto path = fs::path(run_directory(c, seed)) / "clustering.json";
        write_file(path, dump_json(clustering_to_json(cl)) + "\n");
        std::cout << "seed " << seed << ": K=" << cl.k << " silhouette="
                  << (cl.silhouette ? std::to_string(*cl.silhouette) : std::string("undefined")) << " -> " << path.string() << '\n';
      }
    } else if (*train_cmd) {
      const auto c = train_args.load();
      const auto data = prepare_data(c);
      for (auto seed : c.seeds) {
        train_only(c, data, seed);
        std::cout << "seed " << seed << ": checkpoint in " << run_directory(c, seed) << '\n';
      }
    } else if (*eval_cmd) {
      const auto c = eval_args.load();
      const auto data = prepare_data(c);
      std::vector<std::pair<std::uint64_t, EvalReport>> runs;
      for (auto seed : c.seeds) {
        runs.emplace_back(seed, evaluate_persisted(c, data, seed));
        print_report(seed, runs.back().second);
      }
      write_file(fs::path(c.output_dir) / "summary.json", dump_json(summary_to_json(summarize(runs))) + "\n");
    } else if (*run_cmd) {
      const auto c = run_args.load();
      const auto s = run_seeds(c);
      for (const auto& [seed, r] : s.runs) print_report(seed, r);
      std::cout << "mean geo_bleu=" << s.geo_bleu_mean << " accuracy=" << s.accuracy_mean << '\n';
    } else if (*sweep) {
      const auto c = sweep_args.load();
      const auto axis = sweep_axis_from_string(axis_name);
      use_defaults = values_opt->count() == 0;
      const auto values = use_defaults ? default_axis_values(axis) : axis_values;
      const auto result = sweep->count("--reload") ? reload_sweep(c, axis, values) : run_sweep(c, axis, values);
      std::cout << sweep_csv(result);
      for (const auto& cell : result.cells)
        if (!cell.report) return 1;
    } else if (*replay_cmd) {
      const auto r = replay(replay_dir);
      std::cout << r.message << '\n';
      return r.identical ? 0 : 1;
    } else if (*synth) {
      write_file(synth_out, synthesize_tsv(sc));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
