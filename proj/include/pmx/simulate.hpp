#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <vector>

#include "pmx/estimation.hpp"
#include "pmx/model.hpp"
#include "pmx/types.hpp"

namespace pmx {

// A (pattern, sequence) cell with its probability mass within a group.
struct PatternCell {
  PatternId pattern;
  SequenceId sequence;
  double prob = 0.0;
};

struct SimScenario {
  std::vector<GroupLabel> groups;  // estimation-group order
  std::map<GroupLabel, GroupEffects> true_betas;
  Eigen::Matrix4d true_sigma = Eigen::Matrix4d::Identity();
  std::vector<double> group_probs;  // simplex over groups
  std::map<GroupLabel, std::vector<PatternCell>> pattern_probs;  // per-group simplex
  int n_pairs = 100;
  uint64_t seed = 0;

  void validate(const GroupingScheme& scheme) const;

  // Population truth implied by the scenario.
  Eigen::Vector4d population_means() const;
  double true_gamma() const;
};

struct CalibrationReport {
  int replicates = 0;
  int failures = 0;  // non-converged fits, excluded from the summaries
  double gamma_true = 0.0;
  double gamma_bias = 0.0;
  double gamma_mean = 0.0;
  double gamma_empirical_sd = 0.0;
  double mean_reported_se = 0.0;
  double coverage_95 = 0.0;
  Eigen::Vector4d pooled_mean_bias = Eigen::Vector4d::Zero();
  std::vector<std::string> warnings;
};

// Draws group, then (pattern, sequence), then the quadrivariate normal, then
// blanks the unobserved positions. `replicate` selects the RNG stream.
std::vector<PairRecord> simulate_dataset(const SimScenario& scn, const GroupingScheme& scheme,
                                         uint64_t replicate = 0);

// `analysis` lets the fits use a different grouping than the one the scenario
// was written against (e.g. a pattern-ignoring analysis of pattern-mixture
// data); by default the generation scheme is used.
CalibrationReport run_calibration(const SimScenario& scn, const GroupingScheme& scheme, int reps,
                                  FitOptions::Method method, int threads = 1,
                                  const GroupingScheme* analysis = nullptr);

// Built-in default: N pairs, three groups at the reference frequencies
// (0.725/0.15/0.125), diagonal covariance at SD 50 L/min.
SimScenario default_scenario(int n_pairs = 200, uint64_t seed = 1);

}  // namespace pmx
