#include "mobility/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mobility/geo.hpp"
#include "mobility/nn/adam.hpp"
#include "mobility/nn/graph.hpp"
#include "mobility/util.hpp"

namespace mobility {

GateParams gate_from_model(const SequenceModel& model) {
  GateParams p;
  p.cell_emb = model.cell_embedding().value;
  p.hour_emb = model.hour_embedding().value;
  p.dow_emb = model.dow_embedding().value;
  p.weights.assign(static_cast<std::size_t>(2 * p.dim()), 0.0);
  return p;
}

std::vector<double> candidate_embedding(const GateParams& params, int token, int hour, int dow) {
  if (token < 0 || token >= params.cell_emb.rows || hour < 0 || hour >= 24 || dow < 0 || dow >= 7)
    throw DomainError("candidate embedding index out of range");
  std::vector<double> e(static_cast<std::size_t>(params.dim()));
  for (int d = 0; d < params.dim(); ++d)
    e[static_cast<std::size_t>(d)] = params.cell_emb(token, d) + params.hour_emb(hour, d) + params.dow_emb(dow, d);
  return e;
}

std::vector<double> candidate_embedding(const GateParams& params, const CellVocab& vocab, const PredictionCandidate& c) {
  return candidate_embedding(params, vocab.token(c.cell.flat), hour_of_day(c.time), day_of_week(c.time));
}

double gate(std::span<const double> e_model, std::span<const double> e_history, std::span<const double> weights,
            double bias) {
  if (e_model.size() != e_history.size() || weights.size() != 2 * e_model.size())
    throw DomainError("gate: embedding and weight widths disagree");
  double z = bias;
  for (std::size_t i = 0; i < e_model.size(); ++i) z += weights[i] * e_model[i];
  for (std::size_t i = 0; i < e_history.size(); ++i) z += weights[e_model.size() + i] * e_history[i];
  return 1.0 / (1.0 + std::exp(-z));
}

double gate(const GateParams& params, const CellVocab& vocab, const PredictionCandidate& model_candidate,
            const PredictionCandidate& history_candidate) {
  return gate(candidate_embedding(params, vocab, model_candidate), candidate_embedding(params, vocab, history_candidate),
              params.weights, params.bias);
}

const PredictionCandidate& select(const PredictionCandidate& model_candidate,
                                  const PredictionCandidate& history_candidate, double f_g) {
  return f_g > 0.5 ? model_candidate : history_candidate;
}

int gate_label(const GateExample& e) {
  return haversine_m(e.model.coords, e.truth) < haversine_m(e.history.coords, e.truth) ? 1 : 0;
}

GateParams train_gate(GateParams init, const CellVocab& vocab, std::span<const GateExample> examples,
                      const GateTrainConfig& config) {
  if (examples.empty()) throw StateError("gate training has no supervision pairs");
  if (config.batch_size < 1 || config.epochs < 0) throw ConfigError("invalid gate training configuration");
  const int d = init.dim();
  const int n = static_cast<int>(examples.size());
  nn::Matrix features(n, 2 * d);
  std::vector<double> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& ex = examples[static_cast<std::size_t>(i)];
    const auto em = candidate_embedding(init, vocab, ex.model);
    const auto eh = candidate_embedding(init, vocab, ex.history);
    std::copy(em.begin(), em.end(), features.row(i));
    std::copy(eh.begin(), eh.end(), features.row(i) + d);
    labels[static_cast<std::size_t>(i)] = gate_label(ex);
  }

  nn::Parameter w("gate.w", 2 * d, 1), b("gate.b", 1, 1);
  std::copy(init.weights.begin(), init.weights.end(), w.value.data.begin());
  b.value(0, 0) = init.bias;
  nn::Adam adam(nn::AdamConfig{config.lr});
  std::vector<nn::Parameter*> params{&w, &b};
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed);
  for (int e = 0; e < config.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int s = 0; s < n; s += config.batch_size) {
      const int m = std::min(config.batch_size, n - s);
      nn::Matrix xb(m, 2 * d);
      std::vector<double> yb(static_cast<std::size_t>(m));
      for (int r = 0; r < m; ++r) {
        const int i = order[static_cast<std::size_t>(s + r)];
        std::copy_n(features.row(i), 2 * d, xb.row(r));
        yb[static_cast<std::size_t>(r)] = labels[static_cast<std::size_t>(i)];
      }
      nn::Graph g;
      nn::Var z = nn::add_row(g, nn::matmul(g, g.constant(std::move(xb)), g.param(w)), g.param(b));
      g.backward(nn::bce_with_logits(g, z, std::move(yb), m));
      adam.step(params);
    }
  }
  init.weights = w.value.data;
  init.bias = b.value(0, 0);
  return init;
}

std::vector<GateExample> gate_examples(TrainedModel& model, const SplitDataset& data,
                                       const std::map<UserId, std::vector<double>>& user_vectors,
                                       double tail_fraction) {
  if (!(tail_fraction > 0.0 && tail_fraction < 1.0)) throw ConfigError("gate tail fraction must be in (0, 1)");
  const int tail_days = std::max(1, static_cast<int>(std::ceil(tail_fraction * data.t_split)));
  const int cutoff = data.t_split - tail_days;
  std::vector<GateExample> out;
  for (const auto& u : data.users) {
    auto mid = std::find_if(u.train.begin(), u.train.end(), [&](const EnrichedPoint& p) { return p.day_index >= cutoff; });
    const std::span<const EnrichedPoint> base(u.train.data(), static_cast<std::size_t>(mid - u.train.begin()));
    const std::span<const EnrichedPoint> tail(u.train.data() + base.size(), u.train.size() - base.size());
    if (base.empty() || tail.empty()) continue;
    const std::vector<double>* uv = nullptr;
    if (model.config.flags.user_semantic) {
      auto it = user_vectors.find(u.user_id);
      if (it == user_vectors.end()) continue;
      uv = &it->second;
    }
    std::vector<EpochSeconds> times;
    for (const auto& p : tail) times.push_back(p.local_time);
    const auto preds = predict_sequence(model, base, times, uv);
    const HistoryIndex hist(base, model.context.grid);
    for (std::size_t i = 0; i < preds.size(); ++i)
      out.push_back({preds[i], hist.candidate(times[i]), tail[i].position()});
  }
  return out;
}

FusedSequence fuse(const GateParams& params, const CellVocab& vocab, std::span<const PredictionCandidate> model_sequence,
                   const HistoryIndex& history) {
  FusedSequence out;
  for (const auto& pt : model_sequence) {
    const auto ph = history.candidate(pt.time);
    const auto& chosen = select(pt, ph, gate(params, vocab, pt, ph));
    (chosen.source == CandidateSource::Model ? out.routed_model : out.routed_history)++;
    out.predictions.push_back(chosen);
  }
  return out;
}

namespace {

Json matrix_json(const nn::Matrix& m) {
  return Json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

nn::Matrix matrix_from(const Json& j) {
  nn::Matrix m(j.at("rows").get<int>(), j.at("cols").get<int>());
  m.data = j.at("data").get<std::vector<double>>();
  if (m.data.size() != static_cast<std::size_t>(m.rows) * m.cols) throw ParseError("gate matrix size mismatch");
  return m;
}

}  // namespace

Json gate_to_json(const GateParams& p) {
  return Json{{"cell_emb", matrix_json(p.cell_emb)},
              {"hour_emb", matrix_json(p.hour_emb)},
              {"dow_emb", matrix_json(p.dow_emb)},
              {"weights", p.weights},
              {"bias", p.bias}};
}

GateParams gate_from_json(const Json& j) {
  try {
    GateParams p;
    p.cell_emb = matrix_from(j.at("cell_emb"));
    p.hour_emb = matrix_from(j.at("hour_emb"));
    p.dow_emb = matrix_from(j.at("dow_emb"));
    p.weights = j.at("weights").get<std::vector<double>>();
    p.bias = j.at("bias").get<double>();
    if (p.weights.size() != static_cast<std::size_t>(2 * p.dim())) throw ParseError("gate weight width mismatch");
    return p;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("gate json: ") + e.what());
  }
}

}  // namespace mobility
