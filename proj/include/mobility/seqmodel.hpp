#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mobility/features.hpp"
#include "mobility/grid.hpp"
#include "mobility/nn/graph.hpp"
#include "mobility/nn/matrix.hpp"

namespace mobility {

enum class Arch { LSTM, Transformer, HV };
std::string to_string(Arch a);
Arch arch_from_string(std::string_view s);

struct FeatureFlags {
  bool ext_spatiotemporal = false;
  bool user_semantic = false;
  bool fusion = false;
  friend bool operator==(const FeatureFlags&, const FeatureFlags&) = default;
};

enum class VocabMode {
  Full,      // every grid cell is a token
  Observed,  // only cells seen in training; others map to UNK
};

struct ModelConfig {
  Arch arch = Arch::Transformer;
  int d_model = 64;
  int layers = 2;
  int heads = 4;
  int window_len = 128;
  VocabMode vocab_mode = VocabMode::Observed;
  double lr = 2e-5;
  int batch_size = 4;
  int epochs = 10;
  std::uint64_t seed = 1;
  FeatureFlags flags;
  int semantic_dim = 512;
  int buckets = 16;
  // Sequences per forward/backward pass; gradients of a batch are summed over
  // micro-batches before the single optimizer step, so results do not depend
  // on this value beyond floating-point summation order.
  int micro_batch = 16;

  void validate() const;
};

Json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const Json& j);

class CellVocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  static CellVocab full(int cell_count);
  static CellVocab observed(std::span<const int> flat_cells, int cell_count);

  int token(int flat_cell) const;
  // Flat cell of a token, or -1 for PAD/UNK.
  int cell(int token) const { return token >= 2 ? cells_[static_cast<std::size_t>(token - 2)] : -1; }
  int size() const { return static_cast<int>(cells_.size()) + 2; }
  int cell_count() const { return static_cast<int>(token_of_cell_.size()); }
  const std::vector<int>& cells() const { return cells_; }

 private:
  std::vector<int> cells_;          // token - 2 -> flat cell
  std::vector<int> token_of_cell_;  // flat cell -> token (kUnk when absent)
};

// Quantile buckets over log1p(x). edges[j] is the j-th of (count - 1)
// boundaries; bucket(x) counts the edges <= log1p(x).
struct Buckets {
  std::vector<double> edges;

  static Buckets fit(std::vector<double> values, int count);
  int bucket(double x) const;
  int count() const { return static_cast<int>(edges.size()) + 1; }
};

// Everything fixed at training time that encoding needs.
struct FeatureContext {
  GridSpec grid;
  CellVocab vocab;
  Buckets distance;
  Buckets duration;
};

// One input position. The position carries the previous point's cell and
// travel distance together with the target point's time features; `target`
// is the token to predict (-1 at padding).
struct TokenFeatures {
  int cell = CellVocab::kPad;
  int hour = 0;
  int dow = 0;
  int segment = 0;
  int dist_bucket = 0;
  int dur_bucket = 0;
  int target = -1;
};

struct EncodedSequence {
  std::vector<TokenFeatures> steps;  // exactly window_len entries
  int length = 0;                    // non-padding prefix
};

// A window of n <= window_len + 1 points yields n - 1 positions.
EncodedSequence encode_inputs(std::span<const EnrichedPoint> window, const FeatureContext& ctx, int window_len);

struct Batch {
  int batch = 0;
  int seq = 0;
  std::vector<TokenFeatures> steps;  // batch-major: row b * seq + t
  nn::Matrix user_vectors;           // batch x semantic_dim, empty when unused
};

Batch make_batch(std::span<const EncodedSequence* const> sequences, std::span<const std::vector<double>* const> user_vectors,
                 int semantic_dim);

class SequenceModel {
 public:
  SequenceModel() = default;
  SequenceModel(const ModelConfig& config, int vocab_size);

  const ModelConfig& config() const { return config_; }
  int vocab_size() const { return vocab_size_; }

  // Summed input embeddings (batch * seq) x d_model.
  nn::Var input_representation(nn::Graph& g, const Batch& batch);
  // Final hidden states (batch * seq) x d_model.
  nn::Var hidden(nn::Graph& g, const Batch& batch);
  nn::Var logits(nn::Graph& g, nn::Var hidden);
  // Mean next-cell cross-entropy over non-padding positions, scaled by
  // (positions in this batch) / denom.
  nn::Var loss(nn::Graph& g, const Batch& batch, double denom);

  // Log-softmax over the vocabulary for one hidden row.
  std::vector<double> log_probs(std::span<const double> hidden_row) const;

  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
  std::size_t parameter_count() const;

  const nn::Parameter& cell_embedding() const { return cell_emb_; }
  const nn::Parameter& hour_embedding() const { return hour_emb_; }
  const nn::Parameter& dow_embedding() const { return dow_emb_; }

 private:
  struct LstmLayer {
    nn::Parameter wx, wh, b;
  };
  struct TransformerLayer {
    nn::Parameter ln1_g, ln1_b, wqkv, bqkv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
  };

  nn::Var lstm_forward(nn::Graph& g, nn::Var x, const Batch& batch);
  nn::Var transformer_forward(nn::Graph& g, nn::Var x, const Batch& batch);

  ModelConfig config_;
  int vocab_size_ = 0;
  nn::Parameter cell_emb_, hour_emb_, dow_emb_, seg_emb_, dist_emb_, dur_emb_, pos_emb_;
  nn::Parameter user_proj_, user_bias_;
  std::vector<LstmLayer> lstm_;
  std::vector<TransformerLayer> transformer_;
  nn::Parameter lnf_g_, lnf_b_;
  nn::Parameter head_w_, head_b_;
};

enum class CandidateSource { Model, History };

struct PredictionCandidate {
  CellId cell;
  LatLon coords;
  EpochSeconds time = 0;
  double score = 0.0;
  CandidateSource source = CandidateSource::Model;
};

struct TrainedModel {
  ModelConfig config;
  FeatureContext context;
  SequenceModel model;
  std::vector<double> loss_curve;
  long steps = 0;
};

// Greedy autoregressive decoding over the given local timestamps (ascending).
// Returns an empty sequence for an empty history.
std::vector<PredictionCandidate> predict_sequence(TrainedModel& model, std::span<const EnrichedPoint> history,
                                                  std::span<const EpochSeconds> target_times,
                                                  const std::vector<double>* user_vector = nullptr);

struct TestDay {
  int day_index = 0;
  int day_of_week = 0;
  EpochSeconds day_start = 0;  // local midnight
};

// Distinct days of a user's test points, ascending.
std::vector<TestDay> test_days_of(std::span<const EnrichedPoint> test_points);

// Historical-visit baseline: each test day replays the most recent training
// day with the same weekday (else the most recent non-empty day).
std::vector<PredictionCandidate> hv_predict(std::span<const EnrichedPoint> history, std::span<const TestDay> test_days,
                                            const GridSpec& grid);

}  // namespace mobility
