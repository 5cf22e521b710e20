#include "pmx/simulate.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "pmx/inference.hpp"
#include "pmx/rng.hpp"

namespace pmx {

void SimScenario::validate(const GroupingScheme& scheme) const {
  if (n_pairs < 1) throw InvalidScenario("n_pairs must be positive");
  if (groups.empty() || groups.size() != group_probs.size()) {
    throw InvalidScenario("group_probs must match the group list");
  }
  double total = 0.0;
  for (double p : group_probs) {
    if (p < 0.0 || p > 1.0) throw InvalidScenario("group probability outside [0, 1]");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidScenario("group probabilities must sum to 1");
  Eigen::LLT<Eigen::Matrix4d> llt(true_sigma);
  if (llt.info() != Eigen::Success) throw InvalidScenario("true_sigma is not positive definite");
  for (const auto& g : groups) {
    if (!true_betas.count(g)) throw InvalidScenario("missing effects for group " + g);
    auto it = pattern_probs.find(g);
    if (it == pattern_probs.end() || it->second.empty()) {
      throw InvalidScenario("missing pattern distribution for group " + g);
    }
    double mass = 0.0;
    for (const auto& cell : it->second) {
      if (cell.prob < 0.0) throw InvalidScenario("negative pattern probability");
      if (assign_group(cell.pattern, scheme) != g) {
        throw InvalidScenario("pattern " + std::to_string(cell.pattern.p) +
                              " does not belong to group " + g);
      }
      mass += cell.prob;
    }
    if (std::abs(mass - 1.0) > 1e-9) {
      throw InvalidScenario("pattern probabilities for group " + g + " must sum to 1");
    }
  }
}

Eigen::Vector4d SimScenario::population_means() const {
  Eigen::Vector4d m = Eigen::Vector4d::Zero();
  for (size_t g = 0; g < groups.size(); ++g) {
    m += group_probs[g] * true_betas.at(groups[g]).cell_means();
  }
  return m;
}

double SimScenario::true_gamma() const {
  const Eigen::Vector4d m = population_means();
  return (m(0) - m(1)) - (m(2) - m(3));
}

std::vector<PairRecord> simulate_dataset(const SimScenario& scn, const GroupingScheme& scheme,
                                         uint64_t replicate) {
  scn.validate(scheme);
  const Eigen::Matrix4d chol = Eigen::LLT<Eigen::Matrix4d>(scn.true_sigma).matrixL();
  std::vector<PairRecord> records;
  records.reserve(static_cast<size_t>(scn.n_pairs));
  for (int i = 0; i < scn.n_pairs; ++i) {
    Rng rng(derive_key(scn.seed, replicate, static_cast<uint64_t>(i) + 1));

    // Group, then (pattern, sequence) within the group.
    double u = rng.uniform();
    size_t g = 0;
    for (; g + 1 < scn.groups.size(); ++g) {
      if (u < scn.group_probs[g]) break;
      u -= scn.group_probs[g];
    }
    const auto& cells = scn.pattern_probs.at(scn.groups[g]);
    double v = rng.uniform();
    size_t c = 0;
    for (; c + 1 < cells.size(); ++c) {
      if (v < cells[c].prob) break;
      v -= cells[c].prob;
    }
    const PatternCell& cell = cells[c];

    Eigen::Vector4d z;
    for (int j = 0; j < 4; ++j) z(j) = rng.normal();
    const Eigen::Vector4d y = design_matrix(cell.sequence) *
                                  scn.true_betas.at(scn.groups[g]).as_vector() +
                              chol * z;

    PairRecord rec;
    rec.pair_id = "sim" + std::to_string(i + 1);
    rec.sequence = cell.sequence;
    const auto mask = mask_of(cell.pattern);
    for (int pos = 0; pos < kNumPositions; ++pos) {
      if (mask.observed[static_cast<size_t>(pos)]) rec.y[static_cast<size_t>(pos)] = y(pos);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

CalibrationReport run_calibration(const SimScenario& scn, const GroupingScheme& scheme, int reps,
                                  FitOptions::Method method, int threads,
                                  const GroupingScheme* analysis) {
  if (reps < 1) throw InvalidScenario("reps must be positive");
  scn.validate(scheme);
  const GroupingScheme& fit_scheme = analysis ? *analysis : scheme;

  struct RepResult {
    bool ok = false;
    double gamma = 0.0;
    double se = 0.0;
    bool covered = false;
    Eigen::Vector4d pooled = Eigen::Vector4d::Zero();
  };
  std::vector<RepResult> results(static_cast<size_t>(reps));
  const double gamma_true = scn.true_gamma();
  const Eigen::Vector4d pop_means = scn.population_means();

  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int rep = next.fetch_add(1);
      if (rep >= reps) return;
      RepResult& rr = results[static_cast<size_t>(rep)];
      try {
        const auto records = simulate_dataset(scn, scheme, static_cast<uint64_t>(rep));
        FitOptions opts;
        opts.method = method;
        const ModelFit mf = fit(records, fit_scheme, opts);
        if (!mf.converged) continue;
        const InferenceResult inf = delta_variance(mf, interaction_contrast());
        if (inf.degenerate) continue;
        rr.ok = true;
        rr.gamma = inf.gamma_hat;
        rr.se = inf.se;
        rr.covered = inf.ci_95[0] <= gamma_true && gamma_true <= inf.ci_95[1];
        rr.pooled = pooled_means(mf).means;
      } catch (const PmxError&) {
        // counted as a failure below
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Fixed-order reduction: identical reports at any thread count.
  CalibrationReport rep;
  rep.replicates = reps;
  rep.gamma_true = gamma_true;
  double sum_g = 0.0, sum_g2 = 0.0, sum_se = 0.0;
  int covered = 0, ok = 0;
  Eigen::Vector4d pooled_sum = Eigen::Vector4d::Zero();
  for (const auto& rr : results) {
    if (!rr.ok) continue;
    ++ok;
    sum_g += rr.gamma;
    sum_g2 += rr.gamma * rr.gamma;
    sum_se += rr.se;
    covered += rr.covered ? 1 : 0;
    pooled_sum += rr.pooled;
  }
  rep.failures = reps - ok;
  if (ok > 0) {
    rep.gamma_mean = sum_g / ok;
    rep.gamma_bias = rep.gamma_mean - gamma_true;
    rep.mean_reported_se = sum_se / ok;
    rep.coverage_95 = static_cast<double>(covered) / ok;
    rep.pooled_mean_bias = pooled_sum / ok - pop_means;
    if (ok > 1) {
      rep.gamma_empirical_sd = std::sqrt((sum_g2 - ok * rep.gamma_mean * rep.gamma_mean) / (ok - 1));
    }
  }
  if (rep.failures > 0) {
    rep.warnings.push_back(std::to_string(rep.failures) +
                           " replicate(s) failed to converge and were excluded");
  }
  return rep;
}

SimScenario default_scenario(int n_pairs, uint64_t seed) {
  SimScenario scn;
  scn.groups = {"C", "D", "P"};
  scn.group_probs = {0.725, 0.15, 0.125};
  scn.n_pairs = n_pairs;
  scn.seed = seed;
  scn.true_sigma = 2500.0 * Eigen::Matrix4d::Identity();

  GroupEffects c;
  c.mu_1A = 8.1;
  c.mu_1B = 20.4;
  c.mu_2A = 22.3;
  c.mu_2B = 12.6;
  c.rho_1 = 5.0;
  c.rho_2 = -5.0;
  c.nu_1 = 3.0;
  c.nu_2 = -3.0;
  GroupEffects d;
  d.mu_1A = 12.0;
  d.mu_1B = -23.7;
  d.mu_2A = -46.4;
  d.mu_2B = -66.8;
  d.rho_1 = 5.0;
  d.rho_2 = -5.0;
  d.nu_1 = 3.0;
  d.nu_2 = -3.0;
  GroupEffects p;
  p.mu_1A = 10.0;
  p.mu_1B = -20.0;
  p.mu_2A = -40.0;
  p.mu_2B = -60.0;
  p.rho_1 = 5.0;
  p.rho_2 = -5.0;
  p.nu_1 = 3.0;
  p.nu_2 = -3.0;
  scn.true_betas = {{"C", c}, {"D", d}, {"P", p}};

  auto both_seqs = [](std::initializer_list<std::pair<int, double>> pats) {
    std::vector<PatternCell> cells;
    for (const auto& [pat, prob] : pats) {
      cells.push_back({PatternId{pat}, SequenceId::Seq1, prob / 2.0});
      cells.push_back({PatternId{pat}, SequenceId::Seq2, prob / 2.0});
    }
    return cells;
  };
  scn.pattern_probs["C"] = both_seqs({{0, 1.0}});
  scn.pattern_probs["D"] = both_seqs({{1, 0.3}, {2, 0.3}, {6, 0.1}, {7, 0.3}});
  scn.pattern_probs["P"] = both_seqs({{4, 0.6}, {5, 0.4}});
  return scn;
}

}  // namespace pmx
