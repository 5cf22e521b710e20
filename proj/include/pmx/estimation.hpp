#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <vector>

#include "pmx/model.hpp"
#include "pmx/patterns.hpp"
#include "pmx/types.hpp"

namespace pmx {

inline constexpr int kNumThetaParams = 10;

// Per-sequence multinomial proportions plus pooled group proportions.
struct Proportions {
  std::array<std::array<double, kNumSequences>, kNumPatterns> pi_ps{};
  std::array<bool, kNumSequences> seq_available{};
  std::map<GroupLabel, double> pi_g;
  std::vector<GroupLabel> group_order;
  int total = 0;

  // Throws EmptySequence when the sequence had no pairs.
  double pi_seq(PatternId p, SequenceId s) const;
};

Proportions estimate_proportions(const PatternCounts& counts);

// One pair's contribution to the stacked GLS system: reduced design E X_s,
// observed response, and the Sigma indices of the observed positions.
struct PairBlock {
  int group = 0;
  std::vector<int> obs;
  Eigen::MatrixXd design;  // r x k
  Eigen::VectorXd y;       // r
};

struct GlsProblem {
  std::vector<PairBlock> blocks;
  int n_groups = 1;
  int k = kEffectsPerGroup;  // parameters per group

  int n_params() const { return n_groups * k; }
  int n_obs() const;
};

// Groups with zero records are dropped; retained labels returned in scheme
// order via *groups_out.
GlsProblem build_problem(const std::vector<PairRecord>& records, const GroupingScheme& scheme,
                         std::vector<GroupLabel>* groups_out = nullptr);

struct GlsResult {
  Eigen::VectorXd beta;                   // stacked, n_groups*k
  Eigen::MatrixXd beta_cov;               // block-diagonal (X' Omega^-1 X)^+
  std::vector<Eigen::MatrixXd> info;      // per-group X' Omega^-1 X
  std::vector<Eigen::MatrixXd> info_inv;  // per-group pseudo-inverse
  double log_det_info = 0.0;              // sum of log pseudo-determinants
  // (group index, unit direction in parameter space) for each direction the
  // group's design cannot identify.
  std::vector<std::pair<int, Eigen::VectorXd>> deficient;
};

GlsResult gls_beta(const GlsProblem& problem, const Eigen::Matrix4d& sigma);

// Normal part of the log-likelihood (with 2*pi constants); the multinomial
// term lives in estimate_proportions / joint_loglik.
double ml_value(const GlsProblem& problem, const Eigen::Ref<const Eigen::VectorXd>& beta,
                const Eigen::Ref<const Eigen::VectorXd>& theta);

// Gradient with respect to (beta, theta), stacked in that order.
Eigen::VectorXd ml_gradient(const GlsProblem& problem,
                            const Eigen::Ref<const Eigen::VectorXd>& beta,
                            const Eigen::Ref<const Eigen::VectorXd>& theta);

double reml_value(const GlsProblem& problem, const Eigen::Ref<const Eigen::VectorXd>& theta);
Eigen::VectorXd reml_gradient(const GlsProblem& problem,
                              const Eigen::Ref<const Eigen::VectorXd>& theta);

// ML objective profiled over beta (beta set to its GLS value).
double profile_ml_value(const GlsProblem& problem, const Eigen::Ref<const Eigen::VectorXd>& theta);

struct FitOptions {
  enum class Method { ML, REML };
  Method method = Method::REML;
  int max_iter = 200;
  double grad_tol = 1e-6;
  double step_tol = 1e-12;
  double obj_tol = 1e-10;
  std::optional<Eigen::VectorXd> init_theta;  // default: moment start
  bool trace = false;
};

struct TraceEntry {
  int iteration;
  double objective;
  double grad_norm;
  double step_size;
};

struct ModelFit {
  FitOptions::Method method = FitOptions::Method::REML;
  std::vector<GroupLabel> groups;  // retained, in scheme order
  std::map<GroupLabel, GroupEffects> betas;
  Eigen::VectorXd beta_stacked;
  Eigen::VectorXd theta;
  CovarianceUnstructured cov;
  Proportions proportions;
  double loglik = 0.0;  // active objective at the optimum
  Eigen::MatrixXd beta_cov;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;  // scaled, see fit()
  std::vector<std::string> warnings;
  std::vector<TraceEntry> trace;
  int n_pairs = 0;

  const GroupEffects& effects(const GroupLabel& g) const;
  int group_index(const GroupLabel& g) const;
};

ModelFit fit(const std::vector<PairRecord>& records, const GroupingScheme& scheme,
             const FitOptions& opts);

// Normal log-likelihood plus the multinomial pattern term at the fitted
// proportions.
double joint_loglik(const ModelFit& mf, const PatternCounts& counts);

struct ScoreReport {
  double max_rel_err = 0.0;
  double grad_norm = 0.0;
  bool ill_conditioned = false;
  double sigma_condition = 0.0;
};

// Compares the analytic gradient of the active objective against central
// finite differences at (beta, theta).
ScoreReport score_check(const GlsProblem& problem, const Eigen::Ref<const Eigen::VectorXd>& beta,
                        const Eigen::Ref<const Eigen::VectorXd>& theta, FitOptions::Method method,
                        double step = 1e-6);

// Maximizers over a caller-supplied problem (the fit() path builds its own).
Eigen::VectorXd maximize_reml(const GlsProblem& problem, const Eigen::VectorXd& theta0,
                              const FitOptions& opts, bool* converged = nullptr);
Eigen::VectorXd maximize_profile_ml(const GlsProblem& problem, const Eigen::VectorXd& theta0,
                                    const FitOptions& opts, bool* converged = nullptr);

// Moment-based starting value: log-Cholesky of the diagonal matrix of
// available-case per-position sample variances.
Eigen::VectorXd moment_start_theta(const std::vector<PairRecord>& records);

}  // namespace pmx
