#include <doctest.h>

#include <cmath>
#include <map>

#include "oracles.hpp"
#include "pmx/simulate.hpp"

using namespace pmx;

namespace {
const GroupingScheme kDefault = GroupingScheme::default_scheme();
}

TEST_CASE("simulation is deterministic in (seed, replicate)") {
  const SimScenario scn = default_scenario(50, 42);
  const auto a = simulate_dataset(scn, kDefault, 3);
  const auto b = simulate_dataset(scn, kDefault, 3);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].pair_id == b[i].pair_id);
    CHECK(a[i].sequence == b[i].sequence);
    for (int j = 0; j < 4; ++j) {
      CHECK(a[i].y[static_cast<size_t>(j)].has_value() ==
            b[i].y[static_cast<size_t>(j)].has_value());
      if (a[i].y[static_cast<size_t>(j)]) {
        CHECK(*a[i].y[static_cast<size_t>(j)] == *b[i].y[static_cast<size_t>(j)]);
      }
    }
  }
  // different replicate or seed: at least one value differs
  const auto c = simulate_dataset(scn, kDefault, 4);
  bool differs = false;
  for (size_t i = 0; i < a.size() && !differs; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (a[i].y[static_cast<size_t>(j)].has_value() != c[i].y[static_cast<size_t>(j)].has_value()) {
        differs = true;
      } else if (a[i].y[static_cast<size_t>(j)] &&
                 *a[i].y[static_cast<size_t>(j)] != *c[i].y[static_cast<size_t>(j)]) {
        differs = true;
      }
    }
  }
  CHECK(differs);
}

TEST_CASE("group frequencies and pattern cells match the scenario") {
  SimScenario scn = default_scenario(20000, 7);
  const auto records = simulate_dataset(scn, kDefault, 0);
  std::map<GroupLabel, int> n_g;
  std::map<std::pair<int, int>, int> n_cell;
  for (const auto& rec : records) {
    const auto pat = classify(mask_of(rec));
    ++n_g[assign_group(pat, kDefault)];
    ++n_cell[{pat.p, seq_index(rec.sequence)}];
  }
  for (size_t g = 0; g < scn.groups.size(); ++g) {
    const double freq = static_cast<double>(n_g[scn.groups[g]]) / scn.n_pairs;
    CHECK(std::abs(freq - scn.group_probs[g]) < 0.01);
  }

  // chi-square goodness of fit over the 14 populated (pattern, sequence)
  // cells; 13 degrees of freedom, 99.9% critical value 34.528
  double chi2 = 0.0;
  int cells = 0;
  for (size_t g = 0; g < scn.groups.size(); ++g) {
    for (const auto& cell : scn.pattern_probs.at(scn.groups[g])) {
      const double expected = scn.n_pairs * scn.group_probs[g] * cell.prob;
      const double observed = n_cell[{cell.pattern.p, seq_index(cell.sequence)}];
      chi2 += (observed - expected) * (observed - expected) / expected;
      ++cells;
    }
  }
  CHECK(cells == 14);
  CHECK(chi2 < 34.528);
}

TEST_CASE("sample moments converge to the scenario truth") {
  SimScenario scn = default_scenario(0, 11);
  scn.n_pairs = 10000;
  // complete data in one group isolates the quadrivariate moments
  scn.groups = {"C"};
  scn.group_probs = {1.0};
  scn.pattern_probs = {{"C", {{PatternId{0}, SequenceId::Seq1, 0.5},
                              {PatternId{0}, SequenceId::Seq2, 0.5}}}};
  Eigen::Matrix4d sigma;
  sigma << 2500, 800, 600, 400, 800, 2500, 500, 700, 600, 500, 2500, 900, 400, 700, 900, 2500;
  scn.true_sigma = sigma;

  auto moments = [&](int n, uint64_t rep) {
    SimScenario s = scn;
    s.n_pairs = n;
    const auto records = simulate_dataset(s, kDefault, rep);
    std::array<Eigen::Vector4d, 2> mean = {Eigen::Vector4d::Zero(), Eigen::Vector4d::Zero()};
    std::array<int, 2> ns{};
    for (const auto& r : records) {
      const int si = seq_index(r.sequence);
      for (int j = 0; j < 4; ++j) mean[static_cast<size_t>(si)](j) += *r.y[static_cast<size_t>(j)];
      ++ns[static_cast<size_t>(si)];
    }
    for (int si = 0; si < 2; ++si) mean[static_cast<size_t>(si)] /= ns[static_cast<size_t>(si)];
    Eigen::Matrix4d s_hat = Eigen::Matrix4d::Zero();
    for (const auto& r : records) {
      Eigen::Vector4d e;
      for (int j = 0; j < 4; ++j) {
        e(j) = *r.y[static_cast<size_t>(j)] - mean[static_cast<size_t>(seq_index(r.sequence))](j);
      }
      s_hat += e * e.transpose();
    }
    s_hat /= (n - 2);
    return s_hat;
  };

  // covariance error shrinks with n (median over replicates)
  std::vector<double> err_small, err_big;
  for (uint64_t rep = 0; rep < 21; ++rep) {
    err_small.push_back((moments(100, rep) - sigma).norm());
    err_big.push_back((moments(10000, rep) - sigma).norm());
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  CHECK(median(err_big) < median(err_small));
  CHECK(median(err_big) < 0.1 * sigma.norm());
}

TEST_CASE("population truth of the default scenario") {
  const SimScenario scn = default_scenario();
  const Eigen::Vector4d m = scn.population_means();
  Eigen::Vector4d want = Eigen::Vector4d::Zero();
  const std::map<GroupLabel, double> pi = {{"C", 0.725}, {"D", 0.15}, {"P", 0.125}};
  for (const auto& [g, p] : pi) {
    const auto& b = scn.true_betas.at(g);
    want += p * Eigen::Vector4d(b.mu_1A, b.mu_1B, b.mu_2A, b.mu_2B);
  }
  CHECK((m - want).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(scn.true_gamma() ==
        doctest::Approx((want(0) - want(1)) - (want(2) - want(3))).epsilon(1e-12));
}

TEST_CASE("calibration reports are identical across thread counts") {
  const SimScenario scn = default_scenario(120, 5);
  const auto serial = run_calibration(scn, kDefault, 12, FitOptions::Method::ML, 1);
  const auto parallel = run_calibration(scn, kDefault, 12, FitOptions::Method::ML, 4);
  CHECK(serial.replicates == parallel.replicates);
  CHECK(serial.failures == parallel.failures);
  CHECK(serial.gamma_mean == parallel.gamma_mean);
  CHECK(serial.gamma_empirical_sd == parallel.gamma_empirical_sd);
  CHECK(serial.mean_reported_se == parallel.mean_reported_se);
  CHECK(serial.coverage_95 == parallel.coverage_95);
  CHECK((serial.pooled_mean_bias - parallel.pooled_mean_bias).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("invalid scenarios are rejected") {
  SimScenario scn = default_scenario(50, 1);
  SUBCASE("group probabilities off the simplex") {
    scn.group_probs = {0.9, 0.15, 0.125};
    CHECK_THROWS_AS(simulate_dataset(scn, kDefault, 0), InvalidScenario);
  }
  SUBCASE("missing effects") {
    scn.true_betas.erase("P");
    CHECK_THROWS_AS(simulate_dataset(scn, kDefault, 0), InvalidScenario);
  }
  SUBCASE("pattern assigned to the wrong group") {
    scn.pattern_probs["D"] = {{PatternId{0}, SequenceId::Seq1, 1.0}};
    CHECK_THROWS_AS(simulate_dataset(scn, kDefault, 0), InvalidScenario);
  }
  SUBCASE("pattern probabilities not normalized") {
    scn.pattern_probs["P"] = {{PatternId{4}, SequenceId::Seq1, 0.6},
                              {PatternId{5}, SequenceId::Seq2, 0.6}};
    CHECK_THROWS_AS(simulate_dataset(scn, kDefault, 0), InvalidScenario);
  }
  SUBCASE("indefinite covariance") {
    scn.true_sigma = -Eigen::Matrix4d::Identity();
    CHECK_THROWS_AS(simulate_dataset(scn, kDefault, 0), InvalidScenario);
  }
  SUBCASE("non-positive sample size") {
    scn.n_pairs = 0;
    CHECK_THROWS_AS(simulate_dataset(scn, kDefault, 0), InvalidScenario);
  }
}

TEST_CASE("equal group means: pooled estimate is unbiased under any grouping") {
  SimScenario scn = default_scenario(150, 9);
  // same effects everywhere, so missingness carries no information about the
  // means and even the single-group analysis is unbiased
  scn.true_betas["D"] = scn.true_betas["C"];
  scn.true_betas["P"] = scn.true_betas["C"];
  const GroupingScheme naive = GroupingScheme::naive();
  const auto pm_rep = run_calibration(scn, kDefault, 30, FitOptions::Method::ML, 4);
  const auto naive_rep = run_calibration(scn, kDefault, 30, FitOptions::Method::ML, 4, &naive);
  const double mcse_pm = pm_rep.gamma_empirical_sd /
                         std::sqrt(static_cast<double>(pm_rep.replicates - pm_rep.failures));
  const double mcse_naive =
      naive_rep.gamma_empirical_sd /
      std::sqrt(static_cast<double>(naive_rep.replicates - naive_rep.failures));
  CHECK(std::abs(pm_rep.gamma_bias) < 4.0 * mcse_pm);
  CHECK(std::abs(naive_rep.gamma_bias) < 4.0 * mcse_naive);
}
