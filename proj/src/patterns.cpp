#include "pmx/patterns.hpp"

#include <algorithm>

namespace pmx {

namespace {

// Frozen mask table in pattern order. Row order follows the reference
// taxonomy: patterns 0-7 monotone within subject, 8-14 non-monotone.
constexpr std::array<std::array<bool, 4>, kNumPatterns> kMaskTable = {{
    {true, true, true, true},     // 0
    {true, true, true, false},    // 1
    {true, false, true, true},    // 2
    {true, false, true, false},   // 3
    {true, true, false, false},   // 4
    {false, false, true, true},   // 5
    {true, false, false, false},  // 6
    {false, false, true, false},  // 7
    {false, false, false, true},  // 8
    {false, true, false, false},  // 9
    {false, true, true, true},    // 10
    {true, true, false, true},    // 11
    {false, true, false, true},   // 12
    {false, true, true, false},   // 13
    {true, false, false, true},   // 14
}};

}  // namespace

ObservationMask mask_of(PatternId p) {
  return ObservationMask{kMaskTable[static_cast<size_t>(p.p)]};
}

bool monotone_within_subject(PatternId p) { return p.p <= 7; }

PatternId classify(const ObservationMask& mask) {
  if (!mask.any()) throw NoObservations{};
  for (int p = 0; p < kNumPatterns; ++p) {
    if (kMaskTable[static_cast<size_t>(p)] == mask.observed) return PatternId{p};
  }
  throw PmxError("unreachable: mask table is exhaustive");
}

std::vector<int> observed_positions(PatternId p) {
  std::vector<int> out;
  const auto& m = kMaskTable[static_cast<size_t>(p.p)];
  for (int i = 0; i < kNumPositions; ++i) {
    if (m[static_cast<size_t>(i)]) out.push_back(i);
  }
  return out;
}

Eigen::MatrixXd selection_matrix(PatternId p) {
  const auto obs = observed_positions(p);
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(obs.size()), 4);
  for (size_t i = 0; i < obs.size(); ++i) {
    e(static_cast<Eigen::Index>(i), obs[i]) = 1.0;
  }
  return e;
}

GroupingScheme GroupingScheme::default_scheme() {
  GroupingScheme s;
  s.groups = {"C", "D", "P"};
  for (int p : {0, 10, 11, 12}) s.group_of[static_cast<size_t>(p)] = "C";
  for (int p : {1, 2, 3, 6, 7, 13, 14}) s.group_of[static_cast<size_t>(p)] = "D";
  for (int p : {4, 5, 8, 9}) s.group_of[static_cast<size_t>(p)] = "P";
  return s;
}

GroupingScheme GroupingScheme::merged_dp() {
  GroupingScheme s = default_scheme();
  s.groups = {"C", "D+P"};
  for (auto& g : s.group_of) {
    if (g != "C") g = "D+P";
  }
  return s;
}

GroupingScheme GroupingScheme::naive() {
  GroupingScheme s;
  s.groups = {"ALL"};
  s.group_of.fill("ALL");
  return s;
}

int GroupingScheme::group_index(PatternId p) const {
  const auto& label = group_of[static_cast<size_t>(p.p)];
  auto it = std::find(groups.begin(), groups.end(), label);
  if (it == groups.end()) throw PmxError("pattern mapped to unknown group: " + label);
  return static_cast<int>(it - groups.begin());
}

GroupLabel assign_group(PatternId p, const GroupingScheme& scheme) {
  return scheme.group_of[static_cast<size_t>(p.p)];
}

PatternCounts tabulate(const std::vector<PairRecord>& records, const GroupingScheme& scheme) {
  PatternCounts counts;
  counts.group_order = scheme.groups;
  for (const auto& g : scheme.groups) counts.n_g[g] = 0;
  for (const auto& rec : records) {
    const auto mask = mask_of(rec);
    if (!mask.any()) {
      ++counts.rejected_all_missing;
      continue;
    }
    const PatternId p = classify(mask);
    const int s = seq_index(rec.sequence);
    ++counts.n_ps[static_cast<size_t>(p.p)][static_cast<size_t>(s)];
    ++counts.n_s[static_cast<size_t>(s)];
    ++counts.n_g[assign_group(p, scheme)];
    ++counts.total;
  }
  return counts;
}

}  // namespace pmx
