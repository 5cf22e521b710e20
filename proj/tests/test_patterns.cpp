#include <doctest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "pmx/patterns.hpp"

using namespace pmx;

namespace {

PairRecord record_for(int pattern, SequenceId s, const std::string& id = "x") {
  PairRecord rec;
  rec.pair_id = id;
  rec.sequence = s;
  const auto mask = mask_of(PatternId{pattern});
  for (int i = 0; i < 4; ++i) {
    if (mask.observed[static_cast<size_t>(i)]) rec.y[static_cast<size_t>(i)] = 1.0;
  }
  return rec;
}

}  // namespace

TEST_CASE("classify matches the frozen pattern rows") {
  CHECK(classify({{true, true, true, true}}).p == 0);
  CHECK(classify({{true, false, true, true}}).p == 2);
  CHECK(classify({{false, true, true, true}}).p == 10);
  CHECK_THROWS_AS(classify({{false, false, false, false}}), NoObservations);
}

TEST_CASE("classify is a bijection over the 15 non-empty masks") {
  std::set<int> seen;
  for (int p = 0; p < kNumPatterns; ++p) {
    const auto mask = mask_of(PatternId{p});
    CHECK(mask.any());
    CHECK(classify(mask).p == p);
    seen.insert(p);
  }
  CHECK(seen.size() == 15);
  // every non-empty 4-bit mask classifies to some pattern and round-trips
  for (int bits = 1; bits < 16; ++bits) {
    ObservationMask m{{(bits & 1) != 0, (bits & 2) != 0, (bits & 4) != 0, (bits & 8) != 0}};
    const PatternId p = classify(m);
    CHECK(mask_of(p) == m);
  }
}

TEST_CASE("monotone flag splits patterns 0-7 from 8-14") {
  for (int p = 0; p < kNumPatterns; ++p) {
    CHECK(monotone_within_subject(PatternId{p}) == (p <= 7));
  }
}

TEST_CASE("selection matrix worked examples") {
  const Eigen::MatrixXd e2 = selection_matrix(PatternId{2});
  Eigen::MatrixXd want(3, 4);
  want << 1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1;
  CHECK(e2 == want);
  CHECK(selection_matrix(PatternId{0}) == Eigen::MatrixXd::Identity(4, 4));
  const Eigen::MatrixXd e7 = selection_matrix(PatternId{7});
  CHECK(e7.rows() == 1);
  CHECK(e7(0, 2) == 1.0);
  CHECK(e7.sum() == 1.0);
}

TEST_CASE("selection matrix extracts the observed subvector") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  for (int p = 0; p < kNumPatterns; ++p) {
    Eigen::Vector4d v;
    for (int i = 0; i < 4; ++i) v(i) = nd(rng);
    const Eigen::VectorXd sub = selection_matrix(PatternId{p}) * v;
    const auto obs = observed_positions(PatternId{p});
    REQUIRE(sub.size() == static_cast<Eigen::Index>(obs.size()));
    for (size_t i = 0; i < obs.size(); ++i) {
      CHECK(sub(static_cast<Eigen::Index>(i)) == v(obs[i]));
    }
  }
}

TEST_CASE("E Sigma E' is the principal submatrix and stays PD") {
  std::mt19937_64 rng(11);
  const Eigen::Matrix4d sigma = oracle::random_pd4(rng);
  for (int p = 0; p < kNumPatterns; ++p) {
    const Eigen::MatrixXd e = selection_matrix(PatternId{p});
    const Eigen::MatrixXd s = e * sigma * e.transpose();
    CHECK((s - s.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const auto obs = observed_positions(PatternId{p});
    for (size_t i = 0; i < obs.size(); ++i) {
      for (size_t j = 0; j < obs.size(); ++j) {
        CHECK(s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ==
              sigma(obs[i], obs[j]));
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("default grouping") {
  const auto scheme = GroupingScheme::default_scheme();
  CHECK(assign_group(PatternId{0}, scheme) == "C");
  CHECK(assign_group(PatternId{7}, scheme) == "D");
  CHECK(assign_group(PatternId{5}, scheme) == "P");
  for (int p = 0; p < kNumPatterns; ++p) {
    CHECK(!scheme.group_of[static_cast<size_t>(p)].empty());
  }
  const auto merged = GroupingScheme::merged_dp();
  CHECK(merged.groups == std::vector<GroupLabel>{"C", "D+P"});
  CHECK(assign_group(PatternId{4}, merged) == "D+P");
  CHECK(assign_group(PatternId{12}, merged) == "C");
}

TEST_CASE("tabulate reproduces the reference study counts") {
  std::vector<PairRecord> records;
  const std::vector<std::pair<int, int>> table4 = {{0, 29}, {1, 1}, {2, 1}, {4, 3},
                                                   {5, 2},  {6, 1}, {7, 3}};
  int id = 0;
  for (const auto& [pat, count] : table4) {
    for (int i = 0; i < count; ++i) {
      records.push_back(record_for(pat, id % 2 == 0 ? SequenceId::Seq1 : SequenceId::Seq2,
                                   "p" + std::to_string(++id)));
    }
  }
  const auto counts = tabulate(records, GroupingScheme::default_scheme());
  CHECK(counts.total == 40);
  CHECK(counts.n_g.at("C") == 29);
  CHECK(counts.n_g.at("D") == 6);
  CHECK(counts.n_g.at("P") == 5);
}

TEST_CASE("tabulate edge cases and sum consistency") {
  const auto scheme = GroupingScheme::default_scheme();
  CHECK(tabulate({}, scheme).total == 0);

  std::vector<PairRecord> one_each;
  for (int p = 0; p < kNumPatterns; ++p) {
    one_each.push_back(record_for(p, SequenceId::Seq1, "q" + std::to_string(p)));
  }
  const auto counts = tabulate(one_each, scheme);
  for (int p = 0; p < kNumPatterns; ++p) {
    CHECK(counts.n_ps[static_cast<size_t>(p)][0] == 1);
  }

  for (const auto& sch :
       {GroupingScheme::default_scheme(), GroupingScheme::merged_dp(), GroupingScheme::naive()}) {
    const auto c = tabulate(one_each, sch);
    int sum_ps = 0, sum_g = 0;
    for (int p = 0; p < kNumPatterns; ++p)
      for (int s = 0; s < kNumSequences; ++s)
        sum_ps += c.n_ps[static_cast<size_t>(p)][static_cast<size_t>(s)];
    for (const auto& [g, n] : c.n_g) sum_g += n;
    CHECK(sum_ps == c.total);
    CHECK(c.n_s[0] + c.n_s[1] == c.total);
    CHECK(sum_g == c.total);
  }
}
