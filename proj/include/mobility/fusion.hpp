#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "mobility/features.hpp"
#include "mobility/history.hpp"
#include "mobility/nn/matrix.hpp"
#include "mobility/seqmodel.hpp"

namespace mobility {

// Candidate embeddings (cell + hour + weekday tables copied from the base
// model and kept fixed) and the learned affine gate over [e_model, e_history].
struct GateParams {
  nn::Matrix cell_emb;  // vocab x d, indexed by token
  nn::Matrix hour_emb;  // 24 x d
  nn::Matrix dow_emb;   // 7 x d
  std::vector<double> weights;  // 2d
  double bias = 0.0;

  int dim() const { return cell_emb.cols; }
};

// Zero gate over the model's embedding tables.
GateParams gate_from_model(const SequenceModel& model);

std::vector<double> candidate_embedding(const GateParams& params, int token, int hour, int dow);
std::vector<double> candidate_embedding(const GateParams& params, const CellVocab& vocab,
                                        const PredictionCandidate& c);

// sigmoid(weights . [e_model, e_history] + bias)
double gate(std::span<const double> e_model, std::span<const double> e_history, std::span<const double> weights,
            double bias);
double gate(const GateParams& params, const CellVocab& vocab, const PredictionCandidate& model_candidate,
            const PredictionCandidate& history_candidate);

// Model candidate when f_g > 0.5, otherwise the history candidate.
const PredictionCandidate& select(const PredictionCandidate& model_candidate,
                                  const PredictionCandidate& history_candidate, double f_g);

struct GateExample {
  PredictionCandidate model;
  PredictionCandidate history;
  LatLon truth;
};

// 1 when the model candidate is strictly nearer the truth.
int gate_label(const GateExample& e);

struct GateTrainConfig {
  double lr = 1e-3;
  int epochs = 5;
  int batch_size = 32;
  std::uint64_t seed = 1;
};

// BCE on gate_label; only weights and bias are updated. Throws StateError
// when there are no examples.
GateParams train_gate(GateParams init, const CellVocab& vocab, std::span<const GateExample> examples,
                      const GateTrainConfig& config = {});

// Supervision from the last `tail_fraction` of training days: the model and
// the history index see only the days before the tail and predict the tail
// points at their known times.
std::vector<GateExample> gate_examples(TrainedModel& model, const SplitDataset& data,
                                       const std::map<UserId, std::vector<double>>& user_vectors,
                                       double tail_fraction = 0.1);

struct FusedSequence {
  std::vector<PredictionCandidate> predictions;
  std::size_t routed_model = 0;
  std::size_t routed_history = 0;
};

FusedSequence fuse(const GateParams& params, const CellVocab& vocab, std::span<const PredictionCandidate> model_sequence,
                   const HistoryIndex& history);

Json gate_to_json(const GateParams& p);
GateParams gate_from_json(const Json& j);

}  // namespace mobility
