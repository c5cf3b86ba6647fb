#include "mobility/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "mobility/nn/adam.hpp"

namespace mobility {

std::vector<std::pair<std::size_t, std::size_t>> window_bounds(std::size_t n, int window_len) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (n < 2) return out;
  const std::size_t span = static_cast<std::size_t>(window_len) + 1;
  const std::size_t stride = std::max<std::size_t>(1, static_cast<std::size_t>(window_len) / 2);
  for (std::size_t s = 0;; s += stride) {
    const std::size_t e = std::min(n, s + span);
    out.emplace_back(s, e);
    if (e == n) break;
  }
  return out;
}

const EncodedSequence& WindowSet::at(const SampleRef& r) const {
  auto it = index.find(r);
  if (it == index.end())
    throw DomainError("no window " + std::to_string(r.window) + " for user " + std::to_string(r.user));
  return sequences[it->second];
}

FeatureContext fit_feature_context(const SplitDataset& data, const GridSpec& grid, VocabMode mode, int buckets) {
  std::vector<int> cells;
  std::vector<double> distances, durations;
  for (const auto& u : data.users)
    for (const auto& p : u.train) {
      cells.push_back(p.cell.flat);
      distances.push_back(p.travel_distance_m);
      durations.push_back(p.duration_min);
    }
  FeatureContext ctx;
  ctx.grid = grid;
  ctx.vocab = mode == VocabMode::Full ? CellVocab::full(grid.cell_count()) : CellVocab::observed(cells, grid.cell_count());
  ctx.distance = Buckets::fit(std::move(distances), buckets);
  ctx.duration = Buckets::fit(std::move(durations), buckets);
  return ctx;
}

WindowSet build_windows(const SplitDataset& data, const FeatureContext& ctx, int window_len) {
  WindowSet ws;
  for (const auto& u : data.users) {
    const auto bounds = window_bounds(u.train.size(), window_len);
    for (std::size_t w = 0; w < bounds.size(); ++w) {
      const auto [b, e] = bounds[w];
      SampleRef ref{u.user_id, static_cast<int>(w)};
      ws.index[ref] = ws.sequences.size();
      ws.refs.push_back(ref);
      ws.sequences.push_back(
          encode_inputs(std::span<const EnrichedPoint>(u.train).subspan(b, e - b), ctx, window_len));
    }
  }
  return ws;
}

TrainedModel train(const ModelConfig& config, const BatchSchedule& schedule, const WindowSet& windows,
                   const FeatureContext& context) {
  config.validate();
  TrainedModel tm{config, context, SequenceModel(config, context.vocab.size()), {}, 0};
  nn::Adam adam(nn::AdamConfig{config.lr});
  auto params = tm.model.parameters();
  for (auto* p : params) p->zero_grad();

  for (std::size_t e = 0; e < schedule.epochs.size(); ++e) {
    for (std::size_t bi = 0; bi < schedule.epochs[e].size(); ++bi) {
      const auto& refs = schedule.epochs[e][bi];
      std::vector<const EncodedSequence*> seqs;
      std::vector<const std::vector<double>*> uvecs;
      double targets = 0.0;
      for (const auto& r : refs) {
        const auto& s = windows.at(r);
        seqs.push_back(&s);
        for (int t = 0; t < s.length; ++t) targets += s.steps[t].target >= 0 ? 1.0 : 0.0;
        if (config.flags.user_semantic) {
          auto it = windows.user_vectors.find(r.user);
          if (it == windows.user_vectors.end())
            throw DomainError("missing semantic vector for user " + std::to_string(r.user));
          uvecs.push_back(&it->second);
        }
      }
      if (targets == 0.0) continue;

      double batch_loss = 0.0;
      for (std::size_t m = 0; m < seqs.size(); m += static_cast<std::size_t>(config.micro_batch)) {
        const std::size_t end = std::min(seqs.size(), m + static_cast<std::size_t>(config.micro_batch));
        std::span<const EncodedSequence* const> chunk(seqs.data() + m, end - m);
        std::span<const std::vector<double>* const> uchunk;
        if (!uvecs.empty()) uchunk = std::span<const std::vector<double>* const>(uvecs.data() + m, end - m);
        const Batch batch = make_batch(chunk, uchunk, config.semantic_dim);
        nn::Graph g;
        nn::Var loss = tm.model.loss(g, batch, targets);
        batch_loss += g.value(loss)(0, 0);
        g.backward(loss);
      }
      if (!std::isfinite(batch_loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at step " << tm.steps << " (epoch " << e << ", batch " << bi << "; samples";
        for (const auto& r : refs) msg << ' ' << r.user << ':' << r.window;
        msg << ')';
        throw TrainingError(msg.str());
      }
      adam.step(params);
      tm.loss_curve.push_back(batch_loss);
      ++tm.steps;
    }
  }
  return tm;
}

GradientCheckResult gradient_check(SequenceModel& model, const Batch& batch, int samples, std::uint64_t seed,
                                   double h, double floor) {
  double denom = 0.0;
  for (const auto& s : batch.steps) denom += s.target >= 0 ? 1.0 : 0.0;
  if (denom == 0.0) throw DomainError("gradient check batch has no targets");
  auto params = model.parameters();
  for (auto* p : params) p->zero_grad();
  {
    nn::Graph g;
    g.backward(model.loss(g, batch, denom));
  }
  auto eval = [&] {
    nn::Graph g;
    return g.value(model.loss(g, batch, denom))(0, 0);
  };

  std::size_t total = 0;
  for (auto* p : params) total += p->value.size();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  GradientCheckResult r;
  for (int s = 0; s < samples; ++s) {
    std::size_t k = pick(rng);
    nn::Parameter* p = nullptr;
    for (auto* q : params) {
      if (k < q->value.size()) {
        p = q;
        break;
      }
      k -= q->value.size();
    }
    double& x = p->value.data[k];
    const double saved = x;
    x = saved + h;
    const double up = eval();
    x = saved - h;
    const double down = eval();
    x = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = p->grad.data[k];
    const double abs_err = std::abs(analytic - numeric);
    const double rel = abs_err / std::max({std::abs(analytic), std::abs(numeric), floor});
    r.max_absolute_error = std::max(r.max_absolute_error, abs_err);
    r.max_relative_error = std::max(r.max_relative_error, rel);
    ++r.checked;
  }
  for (auto* p : params) p->zero_grad();
  return r;
}

}  // namespace mobility
