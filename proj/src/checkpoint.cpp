#include "mobility/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mobility/util.hpp"

namespace mobility {

namespace {

constexpr const char* kMagic = "mobility-checkpoint 1";

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainedModel& tm, const GateParams* gate) {
  const auto& ctx = tm.context;
  Json meta;
  meta["version"] = MOBILITY_VERSION;
  meta["config"] = model_config_to_json(tm.config);
  meta["grid"] = grid_to_json(ctx.grid);
  meta["vocab_cells"] = ctx.vocab.cells();
  meta["distance_edges"] = ctx.distance.edges;
  meta["duration_edges"] = ctx.duration.edges;
  meta["steps"] = tm.steps;
  meta["loss_curve"] = tm.loss_curve;
  meta["gate"] = gate ? gate_to_json(*gate) : Json(nullptr);

  std::ostringstream out;
  out << kMagic << '\n' << meta.dump() << '\n';
  for (const auto* p : tm.model.parameters()) {
    out << "tensor " << p->name << ' ' << p->value.rows << ' ' << p->value.cols << '\n';
    for (std::size_t i = 0; i < p->value.size(); ++i) out << (i ? " " : "") << hexfloat(p->value.data[i]);
    out << '\n';
  }
  write_file(path, out.str());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw ParseError(path + ": not a checkpoint file");
  if (!std::getline(in, line)) throw ParseError(path + ": missing metadata");
  Checkpoint ck;
  try {
    const Json meta = Json::parse(line);
    auto& tm = ck.model;
    tm.config = model_config_from_json(meta.at("config"));
    tm.context.grid = grid_from_json(meta.at("grid"));
    const auto cells = meta.at("vocab_cells").get<std::vector<int>>();
    tm.context.vocab = tm.config.vocab_mode == VocabMode::Full ? CellVocab::full(tm.context.grid.cell_count())
                                                               : CellVocab::observed(cells, tm.context.grid.cell_count());
    if (tm.context.vocab.cells() != cells) throw ParseError(path + ": vocabulary mismatch");
    tm.context.distance.edges = meta.at("distance_edges").get<std::vector<double>>();
    tm.context.duration.edges = meta.at("duration_edges").get<std::vector<double>>();
    tm.steps = meta.at("steps").get<long>();
    tm.loss_curve = meta.at("loss_curve").get<std::vector<double>>();
    if (!meta.at("gate").is_null()) ck.gate = gate_from_json(meta.at("gate"));
  } catch (const Json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }

  auto& tm = ck.model;
  tm.model = SequenceModel(tm.config, tm.context.vocab.size());
  auto params = tm.model.parameters();
  std::size_t loaded = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream head(line);
    std::string tag, name;
    int rows = 0, cols = 0;
    if (!(head >> tag >> name >> rows >> cols) || tag != "tensor") throw ParseError(path + ": bad tensor header");
    nn::Parameter* target = nullptr;
    for (auto* p : params)
      if (p->name == name) target = p;
    if (!target) throw ParseError(path + ": unexpected tensor " + name);
    if (target->value.rows != rows || target->value.cols != cols) throw ParseError(path + ": shape mismatch for " + name);
    if (!std::getline(in, line)) throw ParseError(path + ": missing values for " + name);
    const char* s = line.c_str();
    for (auto& v : target->value.data) {
      char* end = nullptr;
      v = std::strtod(s, &end);
      if (end == s) throw ParseError(path + ": short tensor " + name);
      s = end;
    }
    ++loaded;
  }
  if (loaded != params.size()) throw ParseError(path + ": missing tensors");
  return ck;
}

std::string loss_curve_csv(std::span<const double> losses) {
  std::ostringstream out;
  out.precision(17);
  out << "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) out << i << ',' << losses[i] << '\n';
  return out.str();
}

}  // namespace mobility
