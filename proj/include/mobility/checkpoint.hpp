#pragma once

#include <optional>
#include <span>
#include <string>

#include "mobility/fusion.hpp"
#include "mobility/seqmodel.hpp"

namespace mobility {

struct Checkpoint {
  TrainedModel model;
  std::optional<GateParams> gate;
};

// Text format: a magic line, one JSON metadata line (config, grid, vocabulary,
// buckets, loss curve, gate), then one "tensor name rows cols" line per
// parameter followed by a line of hexfloat values.
void save_checkpoint(const std::string& path, const TrainedModel& model, const GateParams* gate = nullptr);
Checkpoint load_checkpoint(const std::string& path);

// "step,loss" rows, steps numbered from 0.
std::string loss_curve_csv(std::span<const double> losses);

}  // namespace mobility
