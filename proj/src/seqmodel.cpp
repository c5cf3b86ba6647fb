#include "mobility/seqmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "mobility/nn/kernels.hpp"

namespace mobility {

std::string to_string(Arch a) {
  switch (a) {
    case Arch::LSTM: return "lstm";
    case Arch::Transformer: return "transformer";
    case Arch::HV: return "hv";
  }
  return "?";
}

Arch arch_from_string(std::string_view s) {
  if (s == "lstm" || s == "LSTM") return Arch::LSTM;
  if (s == "transformer" || s == "Transformer") return Arch::Transformer;
  if (s == "hv" || s == "HV") return Arch::HV;
  throw ConfigError("unknown architecture '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  if (d_model < 1 || layers < 1 || window_len < 1) throw ConfigError("model dimensions must be positive");
  if (arch == Arch::Transformer && (heads < 1 || d_model % heads != 0))
    throw ConfigError("d_model must be divisible by heads");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (micro_batch < 1) throw ConfigError("micro_batch must be at least 1");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (buckets < 2) throw ConfigError("need at least two buckets");
  if (semantic_dim < 1) throw ConfigError("semantic_dim must be positive");
}

Json model_config_to_json(const ModelConfig& c) {
  Json j;
  j["arch"] = to_string(c.arch);
  j["d_model"] = c.d_model;
  j["layers"] = c.layers;
  j["heads"] = c.heads;
  j["window_len"] = c.window_len;
  j["vocab_mode"] = c.vocab_mode == VocabMode::Full ? "full" : "observed";
  j["lr"] = c.lr;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["ext_spatiotemporal"] = c.flags.ext_spatiotemporal;
  j["user_semantic"] = c.flags.user_semantic;
  j["fusion"] = c.flags.fusion;
  j["semantic_dim"] = c.semantic_dim;
  j["buckets"] = c.buckets;
  j["micro_batch"] = c.micro_batch;
  return j;
}

ModelConfig model_config_from_json(const Json& j) {
  ModelConfig c;
  c.arch = arch_from_string(j.at("arch").get<std::string>());
  c.d_model = j.at("d_model").get<int>();
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.window_len = j.at("window_len").get<int>();
  c.vocab_mode = j.at("vocab_mode").get<std::string>() == "full" ? VocabMode::Full : VocabMode::Observed;
  c.lr = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.flags.ext_spatiotemporal = j.at("ext_spatiotemporal").get<bool>();
  c.flags.user_semantic = j.at("user_semantic").get<bool>();
  c.flags.fusion = j.at("fusion").get<bool>();
  c.semantic_dim = j.at("semantic_dim").get<int>();
  c.buckets = j.at("buckets").get<int>();
  c.micro_batch = j.at("micro_batch").get<int>();
  return c;
}

CellVocab CellVocab::full(int cell_count) {
  CellVocab v;
  v.cells_.resize(static_cast<std::size_t>(cell_count));
  v.token_of_cell_.resize(static_cast<std::size_t>(cell_count));
  for (int i = 0; i < cell_count; ++i) {
    v.cells_[i] = i;
    v.token_of_cell_[i] = i + 2;
  }
  return v;
}

CellVocab CellVocab::observed(std::span<const int> flat_cells, int cell_count) {
  CellVocab v;
  v.token_of_cell_.assign(static_cast<std::size_t>(cell_count), kUnk);
  std::vector<int> sorted(flat_cells.begin(), flat_cells.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (int c : sorted) {
    if (c < 0 || c >= cell_count) throw DomainError("cell outside vocabulary range");
    v.token_of_cell_[c] = static_cast<int>(v.cells_.size()) + 2;
    v.cells_.push_back(c);
  }
  return v;
}

int CellVocab::token(int flat_cell) const {
  if (flat_cell < 0 || flat_cell >= static_cast<int>(token_of_cell_.size())) return kUnk;
  return token_of_cell_[flat_cell];
}

Buckets Buckets::fit(std::vector<double> values, int count) {
  if (count < 2) throw ConfigError("need at least two buckets");
  Buckets b;
  b.edges.assign(static_cast<std::size_t>(count - 1), 0.0);
  if (values.empty()) return b;
  for (auto& x : values) x = std::log1p(std::max(0.0, x));
  const std::size_t n = values.size();
  for (int j = 1; j < count; ++j) {
    const std::size_t idx = std::min(n - 1, static_cast<std::size_t>(j) * n / static_cast<std::size_t>(count));
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(idx), values.end());
    b.edges[j - 1] = values[idx];
  }
  return b;
}

int Buckets::bucket(double x) const {
  const double lx = std::log1p(std::max(0.0, x));
  return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), lx) - edges.begin());
}

EncodedSequence encode_inputs(std::span<const EnrichedPoint> window, const FeatureContext& ctx, int window_len) {
  if (window.size() > static_cast<std::size_t>(window_len) + 1)
    throw DomainError("window longer than window_len + 1 points");
  EncodedSequence seq;
  seq.steps.resize(static_cast<std::size_t>(window_len));
  for (std::size_t i = 1; i < window.size(); ++i) {
    const auto& prev = window[i - 1];
    const auto& cur = window[i];
    TokenFeatures& f = seq.steps[i - 1];
    f.cell = ctx.vocab.token(prev.cell.flat);
    f.dist_bucket = ctx.distance.bucket(prev.travel_distance_m);
    f.hour = cur.local_hour;
    f.dow = cur.day_of_week;
    f.segment = static_cast<int>(cur.segment);
    f.dur_bucket = ctx.duration.bucket(cur.duration_min);
    f.target = ctx.vocab.token(cur.cell.flat);
    // UNK targets cannot be learned; they stay as inputs only.
    if (f.target == CellVocab::kUnk) f.target = -1;
  }
  seq.length = window.empty() ? 0 : static_cast<int>(window.size()) - 1;
  return seq;
}

Batch make_batch(std::span<const EncodedSequence* const> sequences, std::span<const std::vector<double>* const> user_vectors,
                 int semantic_dim) {
  Batch b;
  b.batch = static_cast<int>(sequences.size());
  for (const auto* s : sequences) b.seq = std::max(b.seq, s->length);
  b.seq = std::max(b.seq, 1);
  b.steps.resize(static_cast<std::size_t>(b.batch) * b.seq);
  for (int i = 0; i < b.batch; ++i)
    for (int t = 0; t < b.seq && t < static_cast<int>(sequences[i]->steps.size()); ++t)
      b.steps[static_cast<std::size_t>(i) * b.seq + t] = sequences[i]->steps[t];
  if (!user_vectors.empty()) {
    b.user_vectors = nn::Matrix(b.batch, semantic_dim);
    for (int i = 0; i < b.batch; ++i) {
      const auto* v = user_vectors[i];
      if (!v) continue;
      if (static_cast<int>(v->size()) != semantic_dim) throw DomainError("user vector width mismatch");
      std::copy(v->begin(), v->end(), b.user_vectors.row(i));
    }
  }
  return b;
}

namespace {
nn::Parameter make_param(std::string name, int rows, int cols) { return nn::Parameter(std::move(name), rows, cols); }
}  // namespace

SequenceModel::SequenceModel(const ModelConfig& config, int vocab_size) : config_(config), vocab_size_(vocab_size) {
  config_.validate();
  if (config_.arch == Arch::HV) throw ConfigError("the HV baseline has no trainable model");
  if (vocab_size < 3) throw ConfigError("vocabulary must contain at least one cell");
  const int d = config_.d_model;
  std::mt19937_64 rng(config_.seed);
  auto normal = [&](nn::Parameter& p, double sd) { nn::init_normal(p.value, rng, sd); };

  cell_emb_ = make_param("cell_emb", vocab_size, d);
  hour_emb_ = make_param("hour_emb", 24, d);
  dow_emb_ = make_param("dow_emb", 7, d);
  seg_emb_ = make_param("seg_emb", 2, d);
  dist_emb_ = make_param("dist_emb", config_.buckets, d);
  dur_emb_ = make_param("dur_emb", config_.buckets, d);
  normal(cell_emb_, 0.1);
  normal(hour_emb_, 0.1);
  normal(dow_emb_, 0.1);
  normal(seg_emb_, 0.1);
  normal(dist_emb_, 0.1);
  normal(dur_emb_, 0.1);
  user_proj_ = make_param("user_proj", config_.semantic_dim, d);
  user_bias_ = make_param("user_bias", 1, d);
  normal(user_proj_, 1.0 / std::sqrt(static_cast<double>(config_.semantic_dim)));

  if (config_.arch == Arch::Transformer) {
    pos_emb_ = make_param("pos_emb", config_.window_len, d);
    normal(pos_emb_, 0.1);
    const double sd = 1.0 / std::sqrt(static_cast<double>(d));
    for (int l = 0; l < config_.layers; ++l) {
      const std::string pre = "layer" + std::to_string(l) + ".";
      TransformerLayer t{make_param(pre + "ln1_g", 1, d),     make_param(pre + "ln1_b", 1, d),
                         make_param(pre + "wqkv", d, 3 * d),  make_param(pre + "bqkv", 1, 3 * d),
                         make_param(pre + "wo", d, d),        make_param(pre + "bo", 1, d),
                         make_param(pre + "ln2_g", 1, d),     make_param(pre + "ln2_b", 1, d),
                         make_param(pre + "w1", d, 4 * d),    make_param(pre + "b1", 1, 4 * d),
                         make_param(pre + "w2", 4 * d, d),    make_param(pre + "b2", 1, d)};
      t.ln1_g.value.fill(1.0);
      t.ln2_g.value.fill(1.0);
      normal(t.wqkv, sd);
      normal(t.wo, sd / std::sqrt(2.0 * config_.layers));
      normal(t.w1, sd);
      normal(t.w2, 0.5 * sd / std::sqrt(2.0 * config_.layers));
      transformer_.push_back(std::move(t));
    }
  } else {
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    for (int l = 0; l < config_.layers; ++l) {
      const std::string pre = "lstm" + std::to_string(l) + ".";
      LstmLayer layer{make_param(pre + "wx", d, 4 * d), make_param(pre + "wh", d, 4 * d), make_param(pre + "b", 1, 4 * d)};
      nn::init_uniform(layer.wx.value, rng, bound);
      nn::init_uniform(layer.wh.value, rng, bound);
      for (int j = d; j < 2 * d; ++j) layer.b.value(0, j) = 1.0;  // forget gate
      lstm_.push_back(std::move(layer));
    }
  }
  lnf_g_ = make_param("lnf_g", 1, d);
  lnf_b_ = make_param("lnf_b", 1, d);
  lnf_g_.value.fill(1.0);
  head_w_ = make_param("head_w", d, vocab_size);
  head_b_ = make_param("head_b", 1, vocab_size);
  normal(head_w_, 0.02);
}

std::vector<nn::Parameter*> SequenceModel::parameters() {
  std::vector<nn::Parameter*> out{&cell_emb_, &hour_emb_, &dow_emb_};
  if (config_.flags.ext_spatiotemporal) {
    out.push_back(&seg_emb_);
    out.push_back(&dist_emb_);
    out.push_back(&dur_emb_);
  }
  if (config_.flags.user_semantic) {
    out.push_back(&user_proj_);
    out.push_back(&user_bias_);
  }
  if (config_.arch == Arch::Transformer) {
    out.push_back(&pos_emb_);
    for (auto& t : transformer_)
      for (auto* p : {&t.ln1_g, &t.ln1_b, &t.wqkv, &t.bqkv, &t.wo, &t.bo, &t.ln2_g, &t.ln2_b, &t.w1, &t.b1, &t.w2, &t.b2})
        out.push_back(p);
  } else {
    for (auto& l : lstm_)
      for (auto* p : {&l.wx, &l.wh, &l.b}) out.push_back(p);
  }
  for (auto* p : {&lnf_g_, &lnf_b_, &head_w_, &head_b_}) out.push_back(p);
  return out;
}

std::vector<const nn::Parameter*> SequenceModel::parameters() const {
  auto ps = const_cast<SequenceModel*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

std::size_t SequenceModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->value.size();
  return n;
}

nn::Var SequenceModel::input_representation(nn::Graph& g, const Batch& batch) {
  const std::size_t n = batch.steps.size();
  std::vector<int> cells(n), hours(n), dows(n);
  for (std::size_t i = 0; i < n; ++i) {
    cells[i] = batch.steps[i].cell;
    hours[i] = batch.steps[i].hour;
    dows[i] = batch.steps[i].dow;
  }
  nn::Var x = nn::add(g, nn::embedding(g, cell_emb_, std::move(cells)), nn::embedding(g, hour_emb_, std::move(hours)));
  x = nn::add(g, x, nn::embedding(g, dow_emb_, std::move(dows)));
  if (config_.flags.ext_spatiotemporal) {
    std::vector<int> segs(n), dist(n), dur(n);
    for (std::size_t i = 0; i < n; ++i) {
      segs[i] = batch.steps[i].segment;
      dist[i] = batch.steps[i].dist_bucket;
      dur[i] = batch.steps[i].dur_bucket;
    }
    x = nn::add(g, x, nn::embedding(g, seg_emb_, std::move(segs)));
    x = nn::add(g, x, nn::embedding(g, dist_emb_, std::move(dist)));
    x = nn::add(g, x, nn::embedding(g, dur_emb_, std::move(dur)));
  }
  if (config_.flags.user_semantic) {
    if (batch.user_vectors.rows != batch.batch || batch.user_vectors.cols != config_.semantic_dim)
      throw DomainError("user-semantic model needs a user vector per sequence");
    nn::Var u = nn::matmul(g, g.constant(batch.user_vectors), g.param(user_proj_));
    u = nn::add_row(g, u, g.param(user_bias_));
    x = nn::add(g, x, nn::repeat_rows(g, u, batch.seq));
  }
  if (config_.arch == Arch::Transformer) {
    std::vector<int> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[i] = static_cast<int>(i % static_cast<std::size_t>(batch.seq));
    x = nn::add(g, x, nn::embedding(g, pos_emb_, std::move(pos)));
  }
  return x;
}

nn::Var SequenceModel::lstm_forward(nn::Graph& g, nn::Var x, const Batch& batch) {
  const int d = config_.d_model;
  const int B = batch.batch, T = batch.seq;
  for (auto& layer : lstm_) {
    nn::Var xw = nn::add_row(g, nn::matmul(g, x, g.param(layer.wx)), g.param(layer.b));
    const nn::Var wh = g.param(layer.wh);
    std::vector<nn::Var> hs;
    hs.reserve(static_cast<std::size_t>(T));
    nn::Var h{}, c{};
    for (int t = 0; t < T; ++t) {
      std::vector<int> rows(static_cast<std::size_t>(B));
      for (int b = 0; b < B; ++b) rows[b] = b * T + t;
      nn::Var gates = nn::gather_rows(g, xw, std::move(rows));
      if (t > 0) gates = nn::add(g, gates, nn::matmul(g, h, wh));
      nn::Var i_g = nn::sigmoid(g, nn::slice_cols(g, gates, 0, d));
      nn::Var f_g = nn::sigmoid(g, nn::slice_cols(g, gates, d, d));
      nn::Var c_g = nn::tanh(g, nn::slice_cols(g, gates, 2 * d, d));
      nn::Var o_g = nn::sigmoid(g, nn::slice_cols(g, gates, 3 * d, d));
      c = t > 0 ? nn::add(g, nn::mul(g, f_g, c), nn::mul(g, i_g, c_g)) : nn::mul(g, i_g, c_g);
      h = nn::mul(g, o_g, nn::tanh(g, c));
      hs.push_back(h);
    }
    x = nn::stack_steps(g, hs);
  }
  return x;
}

nn::Var SequenceModel::transformer_forward(nn::Graph& g, nn::Var x, const Batch& batch) {
  const int d = config_.d_model;
  for (auto& t : transformer_) {
    nn::Var a = nn::layer_norm(g, x, g.param(t.ln1_g), g.param(t.ln1_b));
    nn::Var qkv = nn::add_row(g, nn::matmul(g, a, g.param(t.wqkv)), g.param(t.bqkv));
    nn::Var att = nn::causal_attention(g, nn::slice_cols(g, qkv, 0, d), nn::slice_cols(g, qkv, d, d),
                                       nn::slice_cols(g, qkv, 2 * d, d), batch.batch, batch.seq, config_.heads);
    x = nn::add(g, x, nn::add_row(g, nn::matmul(g, att, g.param(t.wo)), g.param(t.bo)));
    nn::Var m = nn::layer_norm(g, x, g.param(t.ln2_g), g.param(t.ln2_b));
    m = nn::gelu(g, nn::add_row(g, nn::matmul(g, m, g.param(t.w1)), g.param(t.b1)));
    x = nn::add(g, x, nn::add_row(g, nn::matmul(g, m, g.param(t.w2)), g.param(t.b2)));
  }
  return x;
}

nn::Var SequenceModel::hidden(nn::Graph& g, const Batch& batch) {
  if (batch.seq > config_.window_len) throw DomainError("batch longer than window_len");
  nn::Var x = input_representation(g, batch);
  x = config_.arch == Arch::Transformer ? transformer_forward(g, x, batch) : lstm_forward(g, x, batch);
  return nn::layer_norm(g, x, g.param(lnf_g_), g.param(lnf_b_));
}

nn::Var SequenceModel::logits(nn::Graph& g, nn::Var hidden) {
  return nn::add_row(g, nn::matmul(g, hidden, g.param(head_w_)), g.param(head_b_));
}

nn::Var SequenceModel::loss(nn::Graph& g, const Batch& batch, double denom) {
  std::vector<int> targets(batch.steps.size());
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = batch.steps[i].target;
  return nn::softmax_cross_entropy(g, logits(g, hidden(g, batch)), std::move(targets), denom);
}

std::vector<double> SequenceModel::log_probs(std::span<const double> hidden_row) const {
  const int d = config_.d_model;
  std::vector<double> z(head_b_.value.data);
  for (int p = 0; p < d; ++p) {
    const double hp = hidden_row[p];
    const double* w = head_w_.value.row(p);
    for (int j = 0; j < vocab_size_; ++j) z[j] += hp * w[j];
  }
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  for (auto& v : z) v -= lse;
  return z;
}

std::vector<PredictionCandidate> predict_sequence(TrainedModel& tm, std::span<const EnrichedPoint> history,
                                                  std::span<const EpochSeconds> target_times,
                                                  const std::vector<double>* user_vector) {
  std::vector<PredictionCandidate> out;
  if (history.empty() || target_times.empty()) return out;
  const auto& ctx = tm.context;
  const int L = tm.config.window_len;

  // Decoding state: rolling list of positions, last cell/time/position.
  std::vector<TokenFeatures> context;
  const std::size_t first = history.size() > static_cast<std::size_t>(L) + 1 ? history.size() - (L + 1) : 0;
  auto hist_window = history.subspan(first);
  auto enc = encode_inputs(hist_window, ctx, L);
  context.assign(enc.steps.begin(), enc.steps.begin() + enc.length);

  int prev_flat = history.back().cell.flat;
  double prev_dist = history.back().travel_distance_m;
  EpochSeconds prev_time = history.back().local_time;
  LatLon prev_pos = centroid_of(history.back().cell, ctx.grid);

  for (EpochSeconds t : target_times) {
    TokenFeatures f;
    f.cell = ctx.vocab.token(prev_flat);
    f.dist_bucket = ctx.distance.bucket(prev_dist);
    f.hour = hour_of_day(t);
    f.dow = day_of_week(t);
    f.segment = static_cast<int>(time_segment(f.hour));
    f.dur_bucket = ctx.duration.bucket(std::max<double>(0.0, static_cast<double>(t - prev_time) / 60.0));
    context.push_back(f);
    if (context.size() > static_cast<std::size_t>(L)) context.erase(context.begin());

    EncodedSequence seq;
    seq.steps = context;
    seq.length = static_cast<int>(context.size());
    const EncodedSequence* sp = &seq;
    std::vector<const std::vector<double>*> uv;
    if (tm.config.flags.user_semantic) uv.push_back(user_vector);
    Batch batch = make_batch(std::span<const EncodedSequence* const>(&sp, 1), uv, tm.config.semantic_dim);
    nn::Graph g;
    nn::Var h = tm.model.hidden(g, batch);
    const auto lp = tm.model.log_probs(g.value(h).row_span(batch.seq - 1));
    int best = -1;
    for (int tok = 2; tok < static_cast<int>(lp.size()); ++tok)
      if (best < 0 || lp[tok] > lp[best]) best = tok;
    const CellId cell = ctx.grid.cell(ctx.vocab.cell(best));
    const LatLon pos = centroid_of(cell, ctx.grid);
    out.push_back({cell, pos, t, lp[best], CandidateSource::Model});

    prev_dist = haversine_m(prev_pos, pos);
    prev_pos = pos;
    prev_flat = cell.flat;
    prev_time = t;
  }
  return out;
}

std::vector<TestDay> test_days_of(std::span<const EnrichedPoint> test_points) {
  std::map<int, TestDay> days;
  for (const auto& p : test_points)
    days.try_emplace(p.day_index,
                     TestDay{p.day_index, p.day_of_week, day_number(p.local_time) * kSecondsPerDay});
  std::vector<TestDay> out;
  for (auto& [d, td] : days) out.push_back(td);
  return out;
}

std::vector<PredictionCandidate> hv_predict(std::span<const EnrichedPoint> history, std::span<const TestDay> test_days,
                                            const GridSpec& grid) {
  std::vector<PredictionCandidate> out;
  if (history.empty()) return out;
  // Points of each history day, in time order.
  std::map<int, std::vector<const EnrichedPoint*>> by_day;
  for (const auto& p : history) by_day[p.day_index].push_back(&p);
  for (auto& [d, pts] : by_day)
    std::stable_sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->local_time < b->local_time; });

  for (const auto& td : test_days) {
    const std::vector<const EnrichedPoint*>* source = nullptr;
    for (auto it = by_day.rbegin(); it != by_day.rend(); ++it) {
      if (it->first >= td.day_index) continue;
      if (it->second.front()->day_of_week == td.day_of_week) {
        source = &it->second;
        break;
      }
    }
    if (!source) {
      for (auto it = by_day.rbegin(); it != by_day.rend(); ++it)
        if (it->first < td.day_index) {
          source = &it->second;
          break;
        }
    }
    if (!source) continue;
    for (const auto* p : *source) {
      const EpochSeconds tod = p->local_time - day_number(p->local_time) * kSecondsPerDay;
      out.push_back({p->cell, centroid_of(p->cell, grid), td.day_start + tod, 0.0, CandidateSource::History});
    }
  }
  return out;
}

}  // namespace mobility
