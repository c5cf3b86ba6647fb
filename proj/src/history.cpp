#include "mobility/history.hpp"

#include "mobility/util.hpp"

namespace mobility {

HistoryIndex::HistoryIndex(std::span<const EnrichedPoint> history, const GridSpec& grid) : grid_(grid) {
  auto bump = [](CellTally& t, const EnrichedPoint& p) {
    auto& e = t[p.cell.flat];
    ++e.count;
    if (e.count == 1 || p.local_time > e.last) e.last = p.local_time;
  };
  for (const auto& p : history) {
    bump(by_slot_[{p.day_of_week, p.local_hour}], p);
    bump(by_hour_[p.local_hour], p);
    bump(global_, p);
  }
}

int HistoryIndex::best_cell(const CellTally& t) {
  int best = -1;
  Tally bt;
  for (const auto& [cell, tally] : t) {
    if (best < 0 || tally.count > bt.count || (tally.count == bt.count && tally.last > bt.last) ||
        (tally.count == bt.count && tally.last == bt.last && cell < best)) {
      best = cell;
      bt = tally;
    }
  }
  return best;
}

PredictionCandidate HistoryIndex::candidate(EpochSeconds t) const {
  if (global_.empty()) throw DomainError("historical candidate needs a non-empty history");
  const int hour = hour_of_day(t), dow = day_of_week(t);
  int cell = -1;
  if (auto it = by_slot_.find({dow, hour}); it != by_slot_.end()) {
    cell = best_cell(it->second);
  } else if (auto ih = by_hour_.find(hour); ih != by_hour_.end()) {
    cell = best_cell(ih->second);
  } else {
    cell = best_cell(global_);
  }
  const CellId id = grid_.cell(cell);
  return {id, centroid_of(id, grid_), t, 0.0, CandidateSource::History};
}

PredictionCandidate historical_candidate(std::span<const EnrichedPoint> history, EpochSeconds t, const GridSpec& grid) {
  return HistoryIndex(history, grid).candidate(t);
}

}  // namespace mobility
