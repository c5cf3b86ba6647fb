#include "mobility/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>

#include "mobility/util.hpp"

namespace mobility {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

std::string format_double(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  T out{};
  in >> out;
  if (!in || !(in >> std::ws).eof()) throw ConfigError(key + ": cannot parse '" + v + "'");
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> out;
  for (const auto& part : split(v, ',')) {
    const auto t = trim(part);
    if (!t.empty()) out.push_back(parse_number<std::uint64_t>(key, std::string(t)));
  }
  return out;
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

// Ordered key table; to_ini() walks it in order.
const std::vector<std::pair<std::string, Field>>& fields() {
  using C = ExperimentConfig;
  auto str = [](std::string C::*m) {
    return Field{[m](C& c, const std::string& v) { c.*m = v; }, [m](const C& c) { return c.*m; }};
  };
  auto dbl = [](auto get_ref) {
    return Field{[get_ref](C& c, const std::string& v) { get_ref(c) = parse_number<double>("value", v); },
                 [get_ref](const C& c) { return format_double(get_ref(c)); }};
  };
  auto integer = [](auto get_ref) {
    return Field{[get_ref](C& c, const std::string& v) { get_ref(c) = parse_number<int>("value", v); },
                 [get_ref](const C& c) { return std::to_string(get_ref(c)); }};
  };
  auto flag = [](auto get_ref) {
    return Field{[get_ref](C& c, const std::string& v) { get_ref(c) = parse_bool("value", v); },
                 [get_ref](const C& c) { return std::string(get_ref(c) ? "true" : "false"); }};
  };
  static const std::vector<std::pair<std::string, Field>> table{
      {"data.path", str(&C::data_path)},
      {"data.city", str(&C::city)},
      {"data.delimiter", str(&C::delimiter)},
      {"data.columns", str(&C::columns)},
      {"data.subsample", dbl([](auto& c) -> auto& { return c.subsample; })},
      {"grid.rows", integer([](auto& c) -> auto& { return c.grid_rows; })},
      {"grid.cols", integer([](auto& c) -> auto& { return c.grid_cols; })},
      {"split.train_days", integer([](auto& c) -> auto& { return c.split.train_days; })},
      {"split.test_days", integer([](auto& c) -> auto& { return c.split.test_days; })},
      {"model.arch", Field{[](C& c, const std::string& v) { c.model.arch = arch_from_string(v); },
                           [](const C& c) { return to_string(c.model.arch); }}},
      {"model.d_model", integer([](auto& c) -> auto& { return c.model.d_model; })},
      {"model.layers", integer([](auto& c) -> auto& { return c.model.layers; })},
      {"model.heads", integer([](auto& c) -> auto& { return c.model.heads; })},
      {"model.window_len", integer([](auto& c) -> auto& { return c.model.window_len; })},
      {"model.vocab", Field{[](C& c, const std::string& v) {
                              if (v == "full") c.model.vocab_mode = VocabMode::Full;
                              else if (v == "observed") c.model.vocab_mode = VocabMode::Observed;
                              else throw ConfigError("model.vocab: expected full or observed");
                            },
                            [](const C& c) {
                              return std::string(c.model.vocab_mode == VocabMode::Full ? "full" : "observed");
                            }}},
      {"model.lr", dbl([](auto& c) -> auto& { return c.model.lr; })},
      {"model.batch_size", integer([](auto& c) -> auto& { return c.model.batch_size; })},
      {"model.epochs", integer([](auto& c) -> auto& { return c.model.epochs; })},
      {"model.micro_batch", integer([](auto& c) -> auto& { return c.model.micro_batch; })},
      {"model.buckets", integer([](auto& c) -> auto& { return c.model.buckets; })},
      {"sampling.strategy", Field{[](C& c, const std::string& v) { c.sampling = sampling_from_string(v); },
                                  [](const C& c) { return to_string(c.sampling); }}},
      {"features.ext_spatiotemporal", flag([](auto& c) -> auto& { return c.model.flags.ext_spatiotemporal; })},
      {"features.user_semantic", flag([](auto& c) -> auto& { return c.model.flags.user_semantic; })},
      {"features.fusion", flag([](auto& c) -> auto& { return c.model.flags.fusion; })},
      {"semantics.top_k", integer([](auto& c) -> auto& { return c.top_k; })},
      {"semantics.k_min", integer([](auto& c) -> auto& { return c.cluster.k_min; })},
      {"semantics.k_max", integer([](auto& c) -> auto& { return c.cluster.k_max; })},
      {"semantics.max_iterations", integer([](auto& c) -> auto& { return c.cluster.max_iterations; })},
      {"semantics.cluster_space",
       Field{[](C& c, const std::string& v) {
               if (v == "centroid") c.cluster.space = ClusterSpace::Centroid;
               else if (v == "semantic") c.cluster.space = ClusterSpace::Semantic;
               else throw ConfigError("semantics.cluster_space: expected centroid or semantic");
             },
             [](const C& c) { return std::string(c.cluster.space == ClusterSpace::Centroid ? "centroid" : "semantic"); }}},
      {"semantics.embeddings", str(&C::embeddings_path)},
      {"semantics.autoencoder_epochs", integer([](auto& c) -> auto& { return c.autoencoder_epochs; })},
      {"semantics.autoencoder_lr", dbl([](auto& c) -> auto& { return c.autoencoder_lr; })},
      {"gate.lr", dbl([](auto& c) -> auto& { return c.gate.lr; })},
      {"gate.epochs", integer([](auto& c) -> auto& { return c.gate.epochs; })},
      {"gate.batch_size", integer([](auto& c) -> auto& { return c.gate.batch_size; })},
      {"gate.tail_fraction", dbl([](auto& c) -> auto& { return c.gate_tail_fraction; })},
      {"metrics.max_n", integer([](auto& c) -> auto& { return c.metric.max_n; })},
      {"metrics.beta_per_km", dbl([](auto& c) -> auto& { return c.metric.beta_per_km; })},
      {"run.seeds", Field{[](C& c, const std::string& v) { c.seeds = parse_seeds("run.seeds", v); },
                          [](const C& c) {
                            std::string s;
                            for (std::size_t i = 0; i < c.seeds.size(); ++i) s += (i ? "," : "") + std::to_string(c.seeds[i]);
                            return s;
                          }}},
      {"run.output", str(&C::output_dir)},
  };
  return table;
}

void set_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name != key) continue;
    try {
      field.set(c, value);
    } catch (const ConfigError& e) {
      throw ConfigError(key + ": " + e.what());
    } catch (const DomainError& e) {
      throw ConfigError(key + ": " + e.what());
    }
    return;
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

}  // namespace

CheckInSchema ExperimentConfig::schema() const {
  char delim;
  if (delimiter == "tab" || delimiter == "\\t") delim = '\t';
  else if (delimiter == "comma" || delimiter == ",") delim = ',';
  else if (delimiter.size() == 1) delim = delimiter[0];
  else throw ConfigError("data.delimiter: expected tab, comma or a single character");
  if (columns.empty()) {
    CheckInSchema s;
    s.delimiter = delim;
    return s;
  }
  return CheckInSchema::from_column_names(columns, delim);
}

std::string ExperimentConfig::resolved_data_path() const {
  if (data_path.empty() || fs::exists(data_path)) return data_path;
  if (const char* dir = std::getenv(kDataDirEnv); dir && fs::path(data_path).is_relative()) {
    const auto candidate = fs::path(dir) / data_path;
    if (fs::exists(candidate)) return candidate.string();
  }
  return data_path;
}

void ExperimentConfig::validate(bool require_data) const {
  if (require_data) {
    if (data_path.empty()) throw ConfigError("data.path is required");
    if (!fs::exists(resolved_data_path())) throw ConfigError("dataset not found: " + data_path);
  }
  if (!embeddings_path.empty() && !fs::exists(embeddings_path))
    throw ConfigError("embedding file not found: " + embeddings_path);
  if (!(subsample > 0.0 && subsample <= 1.0)) throw ConfigError("data.subsample must be in (0, 1]");
  if (grid_rows < 1 || grid_cols < 1) throw ConfigError("grid dimensions must be positive");
  if (split.train_days < 1 || split.test_days < 1) throw ConfigError("split days must be positive");
  if (top_k < 1) throw ConfigError("semantics.top_k must be positive");
  if (cluster.k_min < 2 || cluster.k_max < cluster.k_min) throw ConfigError("invalid K range");
  if (autoencoder_epochs < 0 || !(autoencoder_lr > 0.0)) throw ConfigError("invalid autoencoder settings");
  if (gate.epochs < 0 || gate.batch_size < 1 || !(gate.lr > 0.0)) throw ConfigError("invalid gate settings");
  if (!(gate_tail_fraction > 0.0 && gate_tail_fraction < 1.0)) throw ConfigError("gate.tail_fraction must be in (0, 1)");
  if (metric.max_n < 1 || !(metric.beta_per_km > 0.0)) throw ConfigError("invalid metric settings");
  if (seeds.empty()) throw ConfigError("run.seeds must not be empty");
  if (output_dir.empty()) throw ConfigError("run.output is required");
  schema();
  try {
    model.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

std::string ExperimentConfig::to_ini() const {
  std::ostringstream out;
  std::string section;
  for (const auto& [name, field] : fields()) {
    const auto dot = name.find('.');
    const auto sec = name.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << '\n';
      out << '[' << sec << "]\n";
      section = sec;
    }
    out << name.substr(dot + 1) << " = " << field.get(*this) << '\n';
  }
  return out.str();
}

std::string ExperimentConfig::digest() const {
  // Seeds and the output location do not change what a single run computes.
  ExperimentConfig c = *this;
  c.seeds = {0};
  c.output_dir = "-";
  return hex64(fnv1a64(c.to_ini()));
}

std::string ExperimentConfig::fingerprint(std::uint64_t seed) const {
  return "config=" + digest() + ";seed=" + std::to_string(seed) + ";version=" + MOBILITY_VERSION;
}

ExperimentConfig parse_config(const std::string& ini_text, const std::vector<std::string>& overrides) {
  ExperimentConfig c;
  pt::ptree tree;
  try {
    std::istringstream in(ini_text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config: key '" + section + "' outside a section");
    for (const auto& [key, value] : body) set_key(c, section + "." + key, std::string(trim(value.data())));
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    set_key(c, std::string(trim(o.substr(0, eq))), std::string(trim(o.substr(eq + 1))));
  }
  return c;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
  return parse_config(read_file(path), overrides);
}

ModelConfig model_config_for_seed(const ExperimentConfig& c, std::uint64_t seed) {
  ModelConfig m = c.model;
  m.seed = seed;
  return m;
}

}  // namespace mobility
