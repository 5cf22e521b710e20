#include "pmx/model.hpp"

#include <cmath>

namespace pmx {

Eigen::Matrix<double, 8, 1> GroupEffects::as_vector() const {
  Eigen::Matrix<double, 8, 1> v;
  v << mu_1A, mu_1B, mu_2A, mu_2B, rho_1, rho_2, nu_1, nu_2;
  return v;
}

GroupEffects GroupEffects::from_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
  GroupEffects b;
  b.mu_1A = v(0);
  b.mu_1B = v(1);
  b.mu_2A = v(2);
  b.mu_2B = v(3);
  b.rho_1 = v(4);
  b.rho_2 = v(5);
  b.nu_1 = v(6);
  b.nu_2 = v(7);
  return b;
}

Eigen::Matrix4d CovarianceUnstructured::chol_from_theta(
    const Eigen::Ref<const Eigen::VectorXd>& theta) {
  Eigen::Matrix4d L = Eigen::Matrix4d::Zero();
  int k = 0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < i; ++j) L(i, j) = theta(k++);
    L(i, i) = std::exp(theta(k++));
  }
  return L;
}

CovarianceUnstructured CovarianceUnstructured::from_theta(
    const Eigen::Ref<const Eigen::VectorXd>& theta) {
  const Eigen::Matrix4d L = chol_from_theta(theta);
  return CovarianceUnstructured{L * L.transpose()};
}

Eigen::VectorXd CovarianceUnstructured::to_theta() const {
  Eigen::LLT<Eigen::Matrix4d> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw PmxError("covariance is not positive definite");
  }
  const Eigen::Matrix4d L = llt.matrixL();
  Eigen::VectorXd theta(kNumEffects);
  int k = 0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < i; ++j) theta(k++) = L(i, j);
    theta(k++) = std::log(L(i, i));
  }
  return theta;
}

Eigen::Matrix<double, 4, 8> design_matrix(SequenceId s) {
  Eigen::Matrix<double, 4, 8> x = Eigen::Matrix<double, 4, 8>::Zero();
  const double sign = (s == SequenceId::Seq1) ? 1.0 : -1.0;
  // Columns: mu_1A, mu_1B, mu_2A, mu_2B, rho_1, rho_2, nu_1, nu_2.
  // Seq1: treatment A falls in period 1 for both subjects; Seq2 flips the
  // period, so rho and nu change sign.
  x(Pos1A, 0) = 1.0;
  x(Pos1A, 4) = sign;
  x(Pos1A, 6) = sign;
  x(Pos1B, 1) = 1.0;
  x(Pos1B, 4) = -sign;
  x(Pos1B, 6) = sign;
  x(Pos2A, 2) = 1.0;
  x(Pos2A, 5) = sign;
  x(Pos2A, 7) = sign;
  x(Pos2B, 3) = 1.0;
  x(Pos2B, 5) = -sign;
  x(Pos2B, 7) = sign;
  return x;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> reduced_moments(PatternId p, SequenceId s,
                                                            const GroupEffects& beta_g,
                                                            const CovarianceUnstructured& cov) {
  const auto obs = observed_positions(p);
  const Eigen::Vector4d full_mean = design_matrix(s) * beta_g.as_vector();
  const auto r = static_cast<Eigen::Index>(obs.size());
  Eigen::VectorXd mean(r);
  Eigen::MatrixXd var(r, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    mean(i) = full_mean(obs[static_cast<size_t>(i)]);
    for (Eigen::Index j = 0; j < r; ++j) {
      var(i, j) = cov.sigma(obs[static_cast<size_t>(i)], obs[static_cast<size_t>(j)]);
    }
  }
  return {mean, var};
}

}  // namespace pmx
