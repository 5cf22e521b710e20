#include "pmx/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

namespace pmx {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// r x r principal submatrix of sigma at the observed indices.
Eigen::MatrixXd sub_sigma(const Eigen::Matrix4d& sigma, const std::vector<int>& obs) {
  const auto r = static_cast<Eigen::Index>(obs.size());
  Eigen::MatrixXd s(r, r);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j)
      s(i, j) = sigma(obs[static_cast<size_t>(i)], obs[static_cast<size_t>(j)]);
  return s;
}

struct BlockWork {
  Eigen::MatrixXd sigma_inv;  // r x r
  double log_det = 0.0;       // log |Sigma*|
};

BlockWork decompose(const Eigen::Matrix4d& sigma, const std::vector<int>& obs) {
  const Eigen::MatrixXd s = sub_sigma(sigma, obs);
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) {
    throw SingularSubcovariance("observed-position covariance block is not positive definite");
  }
  BlockWork w;
  const Eigen::MatrixXd l = llt.matrixL();
  w.log_det = 2.0 * l.diagonal().array().log().sum();
  w.sigma_inv = llt.solve(Eigen::MatrixXd::Identity(s.rows(), s.cols()));
  return w;
}

// Scatter an r x r matrix back into a 4x4 at the observed indices
// (the E' M E operation).
void scatter_add(Eigen::Matrix4d& target, const Eigen::MatrixXd& m, const std::vector<int>& obs) {
  const auto r = static_cast<Eigen::Index>(obs.size());
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j)
      target(obs[static_cast<size_t>(i)], obs[static_cast<size_t>(j)]) += m(i, j);
}

// Gradient with respect to the log-Cholesky parameters given the gradient
// matrix G with df = tr(G dSigma), G symmetric: dSigma = dL L' + L dL'
// gives dF/dL = 2 G L on the lower triangle, diagonal scaled by L_ii.
Eigen::VectorXd chain_to_theta(const Eigen::Matrix4d& g,
                               const Eigen::Ref<const Eigen::VectorXd>& theta) {
  const Eigen::Matrix4d l = CovarianceUnstructured::chol_from_theta(theta);
  const Eigen::Matrix4d gl = 2.0 * g * l;
  Eigen::VectorXd out(kNumThetaParams);
  int k = 0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < i; ++j) out(k++) = gl(i, j);
    out(k++) = gl(i, i) * l(i, i);
  }
  return out;
}

double rank_tolerance(const Eigen::VectorXd& eigvals) {
  const double lmax = eigvals.size() ? eigvals.cwiseAbs().maxCoeff() : 0.0;
  return std::max(static_cast<double>(eigvals.size()) * std::numeric_limits<double>::epsilon() *
                      lmax,
                  1e-300);
}

}  // namespace

int GlsProblem::n_obs() const {
  int n = 0;
  for (const auto& b : blocks) n += static_cast<int>(b.y.size());
  return n;
}

double Proportions::pi_seq(PatternId p, SequenceId s) const {
  const int si = seq_index(s);
  if (!seq_available[static_cast<size_t>(si)]) throw EmptySequence(si);
  return pi_ps[static_cast<size_t>(p.p)][static_cast<size_t>(si)];
}

Proportions estimate_proportions(const PatternCounts& counts) {
  if (counts.total < 1) throw PmxError("cannot estimate proportions from an empty dataset");
  Proportions pr;
  pr.total = counts.total;
  pr.group_order = counts.group_order;
  for (int s = 0; s < kNumSequences; ++s) {
    const int ns = counts.n_s[static_cast<size_t>(s)];
    pr.seq_available[static_cast<size_t>(s)] = ns > 0;
    for (int p = 0; p < kNumPatterns; ++p) {
      pr.pi_ps[static_cast<size_t>(p)][static_cast<size_t>(s)] =
          ns > 0 ? static_cast<double>(counts.n_ps[static_cast<size_t>(p)][static_cast<size_t>(s)]) /
                       ns
                 : std::numeric_limits<double>::quiet_NaN();
    }
  }
  for (const auto& [g, n] : counts.n_g) {
    pr.pi_g[g] = static_cast<double>(n) / counts.total;
  }
  return pr;
}

GlsProblem build_problem(const std::vector<PairRecord>& records, const GroupingScheme& scheme,
                         std::vector<GroupLabel>* groups_out) {
  // Retain only groups with data, preserving scheme order.
  std::map<GroupLabel, int> seen;
  for (const auto& rec : records) {
    const auto mask = mask_of(rec);
    if (!mask.any()) continue;
    ++seen[assign_group(classify(mask), scheme)];
  }
  std::vector<GroupLabel> retained;
  for (const auto& g : scheme.groups) {
    if (seen.count(g)) retained.push_back(g);
  }
  std::map<GroupLabel, int> index_of;
  for (size_t i = 0; i < retained.size(); ++i) index_of[retained[i]] = static_cast<int>(i);

  GlsProblem problem;
  problem.n_groups = static_cast<int>(retained.size());
  problem.k = kEffectsPerGroup;
  for (const auto& rec : records) {
    const auto mask = mask_of(rec);
    if (!mask.any()) continue;
    const PatternId p = classify(mask);
    const auto obs = observed_positions(p);
    const Eigen::Matrix<double, 4, 8> x = design_matrix(rec.sequence);
    PairBlock block;
    block.group = index_of.at(assign_group(p, scheme));
    block.obs = obs;
    block.design.resize(static_cast<Eigen::Index>(obs.size()), kEffectsPerGroup);
    block.y.resize(static_cast<Eigen::Index>(obs.size()));
    for (size_t i = 0; i < obs.size(); ++i) {
      block.design.row(static_cast<Eigen::Index>(i)) = x.row(obs[i]);
      block.y(static_cast<Eigen::Index>(i)) = *rec.y[static_cast<size_t>(obs[i])];
    }
    problem.blocks.push_back(std::move(block));
  }
  if (groups_out) *groups_out = retained;
  return problem;
}

GlsResult gls_beta(const GlsProblem& problem, const Eigen::Matrix4d& sigma) {
  const int g_count = problem.n_groups;
  const int k = problem.k;
  std::vector<Eigen::MatrixXd> info(static_cast<size_t>(g_count), Eigen::MatrixXd::Zero(k, k));
  std::vector<Eigen::VectorXd> rhs(static_cast<size_t>(g_count), Eigen::VectorXd::Zero(k));
  for (const auto& b : problem.blocks) {
    const BlockWork w = decompose(sigma, b.obs);
    const Eigen::MatrixXd xt_si = b.design.transpose() * w.sigma_inv;
    info[static_cast<size_t>(b.group)].noalias() += xt_si * b.design;
    rhs[static_cast<size_t>(b.group)].noalias() += xt_si * b.y;
  }

  GlsResult res;
  res.beta.resize(g_count * k);
  res.beta_cov = Eigen::MatrixXd::Zero(g_count * k, g_count * k);
  res.info = info;
  for (int g = 0; g < g_count; ++g) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info[static_cast<size_t>(g)]);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double tol = rank_tolerance(ev);
    Eigen::VectorXd inv_ev = Eigen::VectorXd::Zero(k);
    for (int i = 0; i < k; ++i) {
      if (ev(i) > tol) {
        inv_ev(i) = 1.0 / ev(i);
        res.log_det_info += std::log(ev(i));
      } else {
        res.deficient.emplace_back(g, es.eigenvectors().col(i));
      }
    }
    const Eigen::MatrixXd pinv =
        es.eigenvectors() * inv_ev.asDiagonal() * es.eigenvectors().transpose();
    res.info_inv.push_back(pinv);
    res.beta.segment(g * k, k) = pinv * rhs[static_cast<size_t>(g)];
    res.beta_cov.block(g * k, g * k, k, k) = pinv;
  }
  return res;
}

double ml_value(const GlsProblem& problem, const Eigen::Ref<const Eigen::VectorXd>& beta,
                const Eigen::Ref<const Eigen::VectorXd>& theta) {
  const Eigen::Matrix4d sigma = CovarianceUnstructured::from_theta(theta).sigma;
  double ll = 0.0;
  for (const auto& b : problem.blocks) {
    const BlockWork w = decompose(sigma, b.obs);
    const Eigen::VectorXd e = b.y - b.design * beta.segment(b.group * problem.k, problem.k);
    const auto r = static_cast<double>(b.y.size());
    ll += -0.5 * (r * kLog2Pi + w.log_det + e.dot(w.sigma_inv * e));
  }
  return ll;
}

Eigen::VectorXd ml_gradient(const GlsProblem& problem,
                            const Eigen::Ref<const Eigen::VectorXd>& beta,
                            const Eigen::Ref<const Eigen::VectorXd>& theta) {
  const Eigen::Matrix4d sigma = CovarianceUnstructured::from_theta(theta).sigma;
  Eigen::VectorXd grad_beta = Eigen::VectorXd::Zero(problem.n_params());
  Eigen::Matrix4d g_sigma = Eigen::Matrix4d::Zero();
  for (const auto& b : problem.blocks) {
    const BlockWork w = decompose(sigma, b.obs);
    const Eigen::VectorXd e = b.y - b.design * beta.segment(b.group * problem.k, problem.k);
    const Eigen::VectorXd q = w.sigma_inv * e;
    grad_beta.segment(b.group * problem.k, problem.k).noalias() += b.design.transpose() * q;
    scatter_add(g_sigma, 0.5 * (q * q.transpose() - w.sigma_inv), b.obs);
  }
  Eigen::VectorXd out(problem.n_params() + kNumThetaParams);
  out.head(problem.n_params()) = grad_beta;
  out.tail(kNumThetaParams) = chain_to_theta(g_sigma, theta);
  return out;
}

double reml_value(const GlsProblem& problem, const Eigen::Ref<const Eigen::VectorXd>& theta) {
  const Eigen::Matrix4d sigma = CovarianceUnstructured::from_theta(theta).sigma;
  const GlsResult gls = gls_beta(problem, sigma);
  double ll = -0.5 * gls.log_det_info;
  int n_obs = 0;
  for (const auto& b : problem.blocks) {
    const BlockWork w = decompose(sigma, b.obs);
    const Eigen::VectorXd e = b.y - b.design * gls.beta.segment(b.group * problem.k, problem.k);
    ll += -0.5 * (w.log_det + e.dot(w.sigma_inv * e));
    n_obs += static_cast<int>(b.y.size());
  }
  const int n_est = problem.n_params() - static_cast<int>(gls.deficient.size());
  ll += -0.5 * (n_obs - n_est) * kLog2Pi;
  return ll;
}

Eigen::VectorXd reml_gradient(const GlsProblem& problem,
                              const Eigen::Ref<const Eigen::VectorXd>& theta) {
  const Eigen::Matrix4d sigma = CovarianceUnstructured::from_theta(theta).sigma;
  const GlsResult gls = gls_beta(problem, sigma);
  Eigen::Matrix4d g_sigma = Eigen::Matrix4d::Zero();
  for (const auto& b : problem.blocks) {
    const BlockWork w = decompose(sigma, b.obs);
    const Eigen::VectorXd e = b.y - b.design * gls.beta.segment(b.group * problem.k, problem.k);
    const Eigen::VectorXd q = w.sigma_inv * e;
    // -1/2 tr(P_jj dOmega_j) + 1/2 q' dOmega_j q with
    // P_jj = Sigma*^-1 - Sigma*^-1 X_j A_g^+ X_j' Sigma*^-1.
    const Eigen::MatrixXd si_x = w.sigma_inv * b.design;
    const Eigen::MatrixXd hat =
        si_x * gls.info_inv[static_cast<size_t>(b.group)] * si_x.transpose();
    scatter_add(g_sigma, 0.5 * (q * q.transpose() - w.sigma_inv + hat), b.obs);
  }
  return chain_to_theta(g_sigma, theta);
}

double profile_ml_value(const GlsProblem& problem,
                        const Eigen::Ref<const Eigen::VectorXd>& theta) {
  const Eigen::Matrix4d sigma = CovarianceUnstructured::from_theta(theta).sigma;
  const GlsResult gls = gls_beta(problem, sigma);
  return ml_value(problem, gls.beta, theta);
}

namespace {

// Gradient of the profiled ML objective; equals the theta block of the joint
// gradient at the GLS beta (the beta block vanishes there).
Eigen::VectorXd profile_ml_gradient(const GlsProblem& problem,
                                    const Eigen::Ref<const Eigen::VectorXd>& theta) {
  const Eigen::Matrix4d sigma = CovarianceUnstructured::from_theta(theta).sigma;
  const GlsResult gls = gls_beta(problem, sigma);
  return ml_gradient(problem, gls.beta, theta).tail(kNumThetaParams);
}

struct OptimOutcome {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
  double grad_scaled = 0.0;
  std::vector<TraceEntry> trace;
};

double scaled_grad_norm(const Eigen::VectorXd& g, const Eigen::VectorXd& x, double f) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    m = std::max(m, std::abs(g(i)) * std::max(1.0, std::abs(x(i))));
  }
  return m / std::max(1.0, std::abs(f));
}

void newton_polish(const std::function<double(const Eigen::VectorXd&)>& value,
                   const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
                   OptimOutcome& out, const FitOptions& opts);

// BFGS maximizer with Armijo backtracking. Objective evaluations that throw
// (theta wandered to a numerically indefinite region) reject the step.
OptimOutcome bfgs_maximize(const std::function<double(const Eigen::VectorXd&)>& value,
                           const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
                           Eigen::VectorXd x0, const FitOptions& opts) {
  OptimOutcome out;
  const auto n = x0.size();
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd x = std::move(x0);
  double f = value(x);
  Eigen::VectorXd g = gradient(x);
  bool h_scaled = false;
  bool last_was_reset = false;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    out.iterations = iter;
    const double gnorm = scaled_grad_norm(g, x, f);
    out.grad_scaled = gnorm;
    if (opts.trace) out.trace.push_back({iter, f, gnorm, 0.0});
    if (gnorm <= opts.grad_tol) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd dir = h_inv * g;  // ascent direction
    if (dir.dot(g) <= 0.0) {
      h_inv = Eigen::MatrixXd::Identity(n, n);
      dir = g;
    }
    double t = 1.0;
    double f_new = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd x_new;
    bool accepted = false;
    const double slope = dir.dot(g);
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + t * dir;
      try {
        f_new = value(x_new);
      } catch (const PmxError&) {
        f_new = -std::numeric_limits<double>::infinity();
      }
      if (std::isfinite(f_new) && f_new >= f + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // a corrupted curvature approximation can point the search into a wall;
      // fall back to steepest ascent once before giving up
      if (last_was_reset) break;
      h_inv = Eigen::MatrixXd::Identity(n, n);
      h_scaled = false;
      last_was_reset = true;
      continue;
    }
    last_was_reset = false;
    const Eigen::VectorXd g_new = gradient(x_new);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd yv = g_new - g;  // note: gradient of -f changes sign twice
    const double sy = -s.dot(yv);          // curvature for the maximization form
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      if (!h_scaled) {
        h_inv *= sy / yv.dot(yv);
        h_scaled = true;
      }
      // BFGS update on the inverse Hessian of -f.
      const Eigen::VectorXd hy = h_inv * (-yv);
      const double yhy = (-yv).dot(hy);
      h_inv += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) -
               (hy * s.transpose() + s * hy.transpose()) / sy;
    }
    const double df = f_new - f;
    x = x_new;
    f = f_new;
    g = g_new;
    if (opts.trace && !out.trace.empty()) out.trace.back().step_size = t;
    if (std::abs(df) <= opts.obj_tol * std::max(1.0, std::abs(f)) &&
        s.norm() <= opts.step_tol * std::max(1.0, x.norm())) {
      break;
    }
  }
  out.x = x;
  out.f = f;
  out.grad_scaled = scaled_grad_norm(gradient(x), x, f);
  if (out.grad_scaled <= opts.grad_tol) out.converged = true;
  if (!out.converged) newton_polish(value, gradient, out, opts);
  return out;
}

// Newton refinement on the stationarity system g(x) = 0. Near the optimum the
// line search stalls once objective improvements fall below rounding noise;
// the analytic gradient is still accurate there, so a few Newton steps with a
// finite-difference Jacobian recover the remaining digits.
void newton_polish(const std::function<double(const Eigen::VectorXd&)>& value,
                   const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
                   OptimOutcome& out, const FitOptions& opts) {
  const auto n = out.x.size();
  for (int round = 0; round < 5 && !out.converged; ++round) {
    Eigen::VectorXd g, x_new, g_new;
    double f_new = 0.0;
    try {
      g = gradient(out.x);
      Eigen::MatrixXd j(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(out.x(i)));
        Eigen::VectorXd xp = out.x, xm = out.x;
        xp(i) += h;
        xm(i) -= h;
        j.col(i) = (gradient(xp) - gradient(xm)) / (2.0 * h);
      }
      const Eigen::VectorXd step = j.fullPivLu().solve(-g);
      if (!step.allFinite()) return;
      x_new = out.x + step;
      g_new = gradient(x_new);
      f_new = value(x_new);
    } catch (const PmxError&) {
      return;
    }
    const double new_norm = scaled_grad_norm(g_new, x_new, f_new);
    if (!(new_norm < out.grad_scaled)) return;
    out.x = x_new;
    out.f = f_new;
    out.grad_scaled = new_norm;
    if (new_norm <= opts.grad_tol) out.converged = true;
  }
}

std::string describe_direction(const Eigen::VectorXd& dir) {
  // Name the dominant parameter in a non-estimable direction.
  Eigen::Index imax = 0;
  dir.cwiseAbs().maxCoeff(&imax);
  return kEffectNames[static_cast<size_t>(imax % kEffectsPerGroup)];
}

}  // namespace

Eigen::VectorXd maximize_reml(const GlsProblem& problem, const Eigen::VectorXd& theta0,
                              const FitOptions& opts, bool* converged) {
  auto value = [&problem](const Eigen::VectorXd& th) { return reml_value(problem, th); };
  auto gradient = [&problem](const Eigen::VectorXd& th) { return reml_gradient(problem, th); };
  OptimOutcome out = bfgs_maximize(value, gradient, theta0, opts);
  if (converged) *converged = out.converged;
  return out.x;
}

Eigen::VectorXd maximize_profile_ml(const GlsProblem& problem, const Eigen::VectorXd& theta0,
                                    const FitOptions& opts, bool* converged) {
  auto value = [&problem](const Eigen::VectorXd& th) { return profile_ml_value(problem, th); };
  auto gradient = [&problem](const Eigen::VectorXd& th) { return profile_ml_gradient(problem, th); };
  OptimOutcome out = bfgs_maximize(value, gradient, theta0, opts);
  if (converged) *converged = out.converged;
  return out.x;
}

const GroupEffects& ModelFit::effects(const GroupLabel& g) const { return betas.at(g); }

int ModelFit::group_index(const GroupLabel& g) const {
  auto it = std::find(groups.begin(), groups.end(), g);
  if (it == groups.end()) throw PmxError("group not in fit: " + g);
  return static_cast<int>(it - groups.begin());
}

Eigen::VectorXd moment_start_theta(const std::vector<PairRecord>& records) {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(kNumThetaParams);
  std::array<int, 4> diag_idx = {0, 2, 5, 9};
  for (int pos = 0; pos < kNumPositions; ++pos) {
    double sum = 0.0, sumsq = 0.0;
    int n = 0;
    for (const auto& rec : records) {
      if (rec.observed(pos)) {
        sum += *rec.y[static_cast<size_t>(pos)];
        sumsq += *rec.y[static_cast<size_t>(pos)] * *rec.y[static_cast<size_t>(pos)];
        ++n;
      }
    }
    double var = 1.0;
    if (n > 1) {
      const double mean = sum / n;
      var = std::max((sumsq - n * mean * mean) / n, 1e-8);
    }
    theta(diag_idx[static_cast<size_t>(pos)]) = 0.5 * std::log(var);
  }
  return theta;
}

ModelFit fit(const std::vector<PairRecord>& records, const GroupingScheme& scheme,
             const FitOptions& opts) {
  if (opts.max_iter < 1 || opts.grad_tol <= 0 || opts.obj_tol <= 0 || opts.step_tol <= 0) {
    throw PmxError("invalid fit options");
  }
  ModelFit mf;
  mf.method = opts.method;
  const PatternCounts counts = tabulate(records, scheme);
  if (counts.total < 1) throw PmxError("no usable records");
  GlsProblem problem = build_problem(records, scheme, &mf.groups);
  mf.n_pairs = counts.total;

  for (const auto& g : mf.groups) {
    if (counts.n_g.at(g) < scheme.min_pairs_per_group) {
      mf.warnings.push_back("group " + g + " has only " + std::to_string(counts.n_g.at(g)) +
                            " pairs; estimates may be unstable (consider merging groups)");
    }
  }

  const Eigen::VectorXd theta0 = opts.init_theta ? *opts.init_theta : moment_start_theta(records);

  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  if (opts.method == FitOptions::Method::ML) {
    value = [&problem](const Eigen::VectorXd& th) { return profile_ml_value(problem, th); };
    gradient = [&problem](const Eigen::VectorXd& th) { return profile_ml_gradient(problem, th); };
  } else {
    value = [&problem](const Eigen::VectorXd& th) { return reml_value(problem, th); };
    gradient = [&problem](const Eigen::VectorXd& th) { return reml_gradient(problem, th); };
  }

  OptimOutcome opt = bfgs_maximize(value, gradient, theta0, opts);

  mf.theta = opt.x;
  mf.cov = CovarianceUnstructured::from_theta(opt.x);
  const GlsResult gls = gls_beta(problem, mf.cov.sigma);
  mf.beta_stacked = gls.beta;
  mf.beta_cov = gls.beta_cov;
  for (size_t g = 0; g < mf.groups.size(); ++g) {
    mf.betas[mf.groups[g]] = GroupEffects::from_vector(
        gls.beta.segment(static_cast<Eigen::Index>(g) * kEffectsPerGroup, kEffectsPerGroup));
  }
  for (const auto& [g, dir] : gls.deficient) {
    mf.warnings.push_back("group " + mf.groups[static_cast<size_t>(g)] +
                          ": design is rank deficient; " + describe_direction(dir) +
                          " not estimable (consider merging groups)");
  }
  mf.proportions = estimate_proportions(counts);
  mf.loglik = opts.method == FitOptions::Method::ML ? ml_value(problem, gls.beta, opt.x) : opt.f;
  mf.converged = opt.converged;
  mf.iterations = opt.iterations;
  mf.grad_norm = opt.grad_scaled;
  mf.trace = std::move(opt.trace);
  return mf;
}

double joint_loglik(const ModelFit& mf, const PatternCounts& counts) {
  double ll = mf.loglik;
  for (int p = 0; p < kNumPatterns; ++p) {
    for (int s = 0; s < kNumSequences; ++s) {
      const int n = counts.n_ps[static_cast<size_t>(p)][static_cast<size_t>(s)];
      if (n > 0) {
        ll += n * std::log(mf.proportions.pi_ps[static_cast<size_t>(p)][static_cast<size_t>(s)]);
      }
    }
  }
  return ll;
}

ScoreReport score_check(const GlsProblem& problem, const Eigen::Ref<const Eigen::VectorXd>& beta,
                        const Eigen::Ref<const Eigen::VectorXd>& theta, FitOptions::Method method,
                        double step) {
  ScoreReport rep;
  const Eigen::Matrix4d sigma = CovarianceUnstructured::from_theta(theta).sigma;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(sigma);
  rep.sigma_condition = es.eigenvalues().maxCoeff() / std::max(es.eigenvalues().minCoeff(), 1e-300);
  if (rep.sigma_condition > 1e10) rep.ill_conditioned = true;

  Eigen::VectorXd analytic;
  std::function<double(const Eigen::VectorXd&)> f;
  Eigen::VectorXd x;
  if (method == FitOptions::Method::ML) {
    analytic = ml_gradient(problem, beta, theta);
    x.resize(beta.size() + theta.size());
    x << beta, theta;
    const auto nb = beta.size();
    f = [&problem, nb](const Eigen::VectorXd& v) {
      return ml_value(problem, v.head(nb), v.tail(kNumThetaParams));
    };
  } else {
    analytic = reml_gradient(problem, theta);
    x = theta;
    f = [&problem](const Eigen::VectorXd& v) { return reml_value(problem, v); };
  }
  rep.grad_norm = analytic.cwiseAbs().maxCoeff();
  const double fscale = std::max(1.0, std::abs(f(x)));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(x(i)));
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    const double fd = (f(xp) - f(xm)) / (2.0 * h);
    const double denom = std::max({std::abs(analytic(i)), std::abs(fd), 1e-8 * fscale});
    rep.max_rel_err = std::max(rep.max_rel_err, std::abs(fd - analytic(i)) / denom);
  }
  return rep;
}

}  // namespace pmx
