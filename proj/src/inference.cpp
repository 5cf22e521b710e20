#include "pmx/inference.hpp"

#include <cmath>

namespace pmx {

namespace {

// Standard normal upper tail via erfc.
double two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

}  // namespace

DeltaComponents delta_components(const ModelFit& fit) {
  const auto g_count = static_cast<int>(fit.groups.size());
  if (g_count < 1) throw PmxError("fit has no groups");
  DeltaComponents d;

  Eigen::VectorXd pi(g_count);
  for (int g = 0; g < g_count; ++g) pi(g) = fit.proportions.pi_g.at(fit.groups[static_cast<size_t>(g)]);

  const int free = g_count - 1;
  d.pi_free = pi.head(free);
  d.v_pi = (Eigen::MatrixXd(d.pi_free.asDiagonal()) - d.pi_free * d.pi_free.transpose()) /
           static_cast<double>(fit.n_pairs);

  // Cell-major stacking: (mu_1A^(g1), ..., mu_1A^(gG), mu_1B^(g1), ...).
  d.mu_vec.resize(4 * g_count);
  d.v_mu = Eigen::MatrixXd::Zero(4 * g_count, 4 * g_count);
  for (int cell = 0; cell < 4; ++cell) {
    for (int g = 0; g < g_count; ++g) {
      const Eigen::Index row = cell * g_count + g;
      d.mu_vec(row) = fit.beta_stacked(g * kEffectsPerGroup + cell);
      for (int cell2 = 0; cell2 < 4; ++cell2) {
        // Cross-group covariance is zero: the GLS information is
        // block-diagonal by group.
        d.v_mu(row, cell2 * g_count + g) =
            fit.beta_cov(g * kEffectsPerGroup + cell, g * kEffectsPerGroup + cell2);
      }
    }
  }

  d.j1.resize(4, free);
  for (int cell = 0; cell < 4; ++cell) {
    const double mu_last = d.mu_vec(cell * g_count + (g_count - 1));
    for (int g = 0; g < free; ++g) {
      d.j1(cell, g) = d.mu_vec(cell * g_count + g) - mu_last;
    }
  }

  d.j2 = Eigen::MatrixXd::Zero(4, 4 * g_count);
  for (int cell = 0; cell < 4; ++cell) {
    for (int g = 0; g < g_count; ++g) {
      d.j2(cell, cell * g_count + g) = pi(g);
    }
  }
  return d;
}

PooledMeans pooled_means(const ModelFit& fit) {
  const DeltaComponents d = delta_components(fit);
  PooledMeans pm;
  pm.means = d.j2 * d.mu_vec;
  const auto free = d.pi_free.size();
  Eigen::MatrixXd j(4, free + d.mu_vec.size());
  j << d.j1, d.j2;
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(j.cols(), j.cols());
  v.topLeftCorner(free, free) = d.v_pi;
  v.bottomRightCorner(d.mu_vec.size(), d.mu_vec.size()) = d.v_mu;
  pm.covariance = j * v * j.transpose();
  return pm;
}

Eigen::Vector4d interaction_contrast() { return {1.0, -1.0, -1.0, 1.0}; }

std::pair<double, double> wald_p(double gamma_hat, double se) {
  if (se <= 0.0) throw DegenerateVariance("standard error must be positive");
  const double z = gamma_hat / se;
  return {z, two_sided_p(z)};
}

InferenceResult delta_variance(const ModelFit& fit, const Eigen::Vector4d& c) {
  const PooledMeans pm = pooled_means(fit);
  InferenceResult res;
  res.contrast = c;
  res.gamma_hat = c.dot(pm.means);
  const double var = c.dot(pm.covariance * c);
  if (!(var > 0.0) || std::sqrt(var) < 1e-300) {
    res.degenerate = true;
    res.se = std::sqrt(std::max(var, 0.0));
    res.z = 0.0;
    res.p_two_sided = std::numeric_limits<double>::quiet_NaN();
    res.ci_95 = {res.gamma_hat, res.gamma_hat};
    return res;
  }
  res.se = std::sqrt(var);
  std::tie(res.z, res.p_two_sided) = wald_p(res.gamma_hat, res.se);
  res.ci_95 = {res.gamma_hat - kZ975 * res.se, res.gamma_hat + kZ975 * res.se};
  return res;
}

}  // namespace pmx
