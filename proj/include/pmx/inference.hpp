#pragma once

#include <Eigen/Dense>

#include "pmx/estimation.hpp"

namespace pmx {

struct PooledMeans {
  Eigen::Vector4d means;       // (1A, 1B, 2A, 2B)
  Eigen::Matrix4d covariance;  // J V J'
};

struct InferenceResult {
  double gamma_hat = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p_two_sided = 1.0;
  std::array<double, 2> ci_95{};
  Eigen::Vector4d contrast;
  bool degenerate = false;
};

// Delta-method pieces, exposed for inspection and testing. Free proportions
// are all groups but the last; V is block-diagonal over (pi, mu).
struct DeltaComponents {
  Eigen::VectorXd pi_free;   // G-1 group proportions
  Eigen::MatrixXd v_pi;      // (Diag(pi) - pi pi') / N
  Eigen::VectorXd mu_vec;    // 4 cells x G groups, cell-major
  Eigen::MatrixXd v_mu;      // from (X' Omega^-1 X)^-1
  Eigen::MatrixXd j1;        // 4 x (G-1): mean differences against last group
  Eigen::MatrixXd j2;        // 4 x 4G: proportions against each cell's means
};

DeltaComponents delta_components(const ModelFit& fit);

// Proportion-weighted average of the group cell means, with delta-method
// covariance.
PooledMeans pooled_means(const ModelFit& fit);

Eigen::Vector4d interaction_contrast();  // (1, -1, -1, 1)

InferenceResult delta_variance(const ModelFit& fit, const Eigen::Vector4d& c);

std::pair<double, double> wald_p(double gamma_hat, double se);

inline constexpr double kZ975 = 1.959964;

}  // namespace pmx
