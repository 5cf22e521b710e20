#pragma once

#include <Eigen/Dense>

#include "pmx/patterns.hpp"
#include "pmx/types.hpp"

namespace pmx {

inline constexpr int kNumEffects = 10;  // free covariance parameters
inline constexpr int kEffectsPerGroup = 8;

// The 8-vector beta = (mu_1A, mu_1B, mu_2A, mu_2B, rho_1, rho_2, nu_1, nu_2)
// for one estimation group.
struct GroupEffects {
  double mu_1A = 0, mu_1B = 0, mu_2A = 0, mu_2B = 0;
  double rho_1 = 0, rho_2 = 0;
  double nu_1 = 0, nu_2 = 0;

  Eigen::Matrix<double, 8, 1> as_vector() const;
  static GroupEffects from_vector(const Eigen::Ref<const Eigen::VectorXd>& v);
  Eigen::Vector4d cell_means() const { return {mu_1A, mu_1B, mu_2A, mu_2B}; }
};

inline constexpr std::array<const char*, 8> kEffectNames = {
    "mu_1A", "mu_1B", "mu_2A", "mu_2B", "rho_1", "rho_2", "nu_1", "nu_2"};

// Unstructured 4x4 covariance with a log-Cholesky unconstrained
// parameterization: theta holds the lower triangle of L (Sigma = L L') in
// row-major order, diagonal entries stored as logs.
struct CovarianceUnstructured {
  Eigen::Matrix4d sigma;

  static CovarianceUnstructured from_theta(const Eigen::Ref<const Eigen::VectorXd>& theta);
  Eigen::VectorXd to_theta() const;  // requires sigma PD
  static Eigen::Matrix4d chol_from_theta(const Eigen::Ref<const Eigen::VectorXd>& theta);
};

// 4x8 fixed-effects design matrix for a sequence, rows in (1A,1B,2A,2B)
// order. Seq1 = AB, Seq2 = BA; period enters through the rho/nu signs.
Eigen::Matrix<double, 4, 8> design_matrix(SequenceId s);

// Mean and covariance of the observed subvector for a pattern:
// E_p X_s beta and E_p Sigma E_p'.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> reduced_moments(PatternId p, SequenceId s,
                                                            const GroupEffects& beta_g,
                                                            const CovarianceUnstructured& cov);

}  // namespace pmx
