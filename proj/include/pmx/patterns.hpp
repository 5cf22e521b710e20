#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "pmx/types.hpp"

namespace pmx {

// Mask over the four response positions in (1A, 1B, 2A, 2B) order.
struct ObservationMask {
  std::array<bool, 4> observed;

  bool any() const { return observed[0] || observed[1] || observed[2] || observed[3]; }
  int count() const {
    int r = 0;
    for (bool b : observed) r += b ? 1 : 0;
    return r;
  }
  bool operator==(const ObservationMask&) const = default;
};

// One of the 15 non-empty missingness patterns. 0-7 are monotone within
// subject, 8-14 are not.
struct PatternId {
  int p = 0;
  bool operator==(const PatternId&) const = default;
  auto operator<=>(const PatternId&) const = default;
};

inline constexpr int kNumPatterns = 15;

ObservationMask mask_of(PatternId p);
bool monotone_within_subject(PatternId p);

// Unique pattern matching the mask. Throws NoObservations on the empty mask.
PatternId classify(const ObservationMask& mask);

inline ObservationMask mask_of(const PairRecord& rec) {
  return ObservationMask{{rec.observed(0), rec.observed(1), rec.observed(2), rec.observed(3)}};
}

// r x 4 identity submatrix extracting the observed positions, rows in
// ascending position order. Depends only on the pattern's mask.
Eigen::MatrixXd selection_matrix(PatternId p);

// Observed position indices, ascending.
std::vector<int> observed_positions(PatternId p);

struct GroupingScheme {
  std::array<GroupLabel, kNumPatterns> group_of;
  // Ordered group labels; the last one is the proportion eliminated by the
  // simplex constraint in delta-method inference.
  std::vector<GroupLabel> groups;
  int min_pairs_per_group = 3;

  static GroupingScheme default_scheme();  // C / D / P
  static GroupingScheme merged_dp();       // C / D+P
  static GroupingScheme naive();           // single group ALL

  int group_index(PatternId p) const;
};

GroupLabel assign_group(PatternId p, const GroupingScheme& scheme);

struct PatternCounts {
  // n_ps indexed [pattern][sequence]
  std::array<std::array<int, kNumSequences>, kNumPatterns> n_ps{};
  std::array<int, kNumSequences> n_s{};
  std::map<GroupLabel, int> n_g;
  std::vector<GroupLabel> group_order;
  int total = 0;
  int rejected_all_missing = 0;
};

PatternCounts tabulate(const std::vector<PairRecord>& records, const GroupingScheme& scheme);

}  // namespace pmx
