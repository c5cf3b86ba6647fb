#pragma once

#include <map>
#include <span>
#include <unordered_map>

#include "mobility/features.hpp"
#include "mobility/grid.hpp"
#include "mobility/seqmodel.hpp"

namespace mobility {

// Visit counts of a user's history keyed by (weekday, hour), by hour alone,
// and overall. Lookups return the cell with the most visits in the first
// non-empty level; ties go to the most recently visited cell.
class HistoryIndex {
 public:
  HistoryIndex(std::span<const EnrichedPoint> history, const GridSpec& grid);

  PredictionCandidate candidate(EpochSeconds target_local_time) const;
  bool empty() const { return global_.empty(); }

 private:
  struct Tally {
    int count = 0;
    EpochSeconds last = 0;
  };
  using CellTally = std::unordered_map<int, Tally>;

  static int best_cell(const CellTally& t);

  GridSpec grid_;
  std::map<std::pair<int, int>, CellTally> by_slot_;
  std::map<int, CellTally> by_hour_;
  CellTally global_;
};

// Throws DomainError on an empty history.
PredictionCandidate historical_candidate(std::span<const EnrichedPoint> history, EpochSeconds target_local_time,
                                         const GridSpec& grid);

}  // namespace mobility
