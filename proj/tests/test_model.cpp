#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles.hpp"
#include "sbm/model.hpp"

using namespace sbm;

namespace {

SbmParams random_params(int q, std::mt19937_64& rng, const ExpFamily& f = ExpFamily::bernoulli()) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Vector p(q);
  for (int k = 0; k < q; ++k) p(k) = u(rng);
  p /= p.sum();
  Matrix m(q, q);
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b) m(a, b) = u(rng);
  return SbmParams::from_means(p, m, f);
}

Assignment random_assignment(int n, int q, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, q - 1);
  std::vector<int> z(static_cast<std::size_t>(n));
  for (auto& v : z) v = pick(rng);
  return Assignment(z, q);
}

Permutation random_permutation(int q, std::mt19937_64& rng) {
  Permutation s = identity_permutation(q);
  std::shuffle(s.begin(), s.end(), rng);
  return s;
}

// Symmetry example: proportions (1/6, 1/6, 2/3) and a 3x3 mean matrix whose
// first two blocks are exchangeable.
SbmParams symmetric_example(const ExpFamily& f) {
  Vector p(3);
  p << 1.0 / 6, 1.0 / 6, 2.0 / 3;
  Matrix m(3, 3);
  m << 0, 0.7, 0.2, 0.7, 0, 0.2, 0.2, 0.2, 0.2;
  SbmParams out{p, Matrix(3, 3), f};
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) out.conn(a, b) = f.clamped_natural_from_mean(m(a, b));
  return out;
}

Assignment one_based(std::vector<int> z, int q) { return Assignment::from_one_based(z, q); }

}  // namespace

TEST(Params, ValidateChecksInvariants) {
  std::mt19937_64 rng(1);
  SbmParams p = random_params(3, rng);
  EXPECT_NO_THROW(p.validate());
  SbmParams bad = p;
  bad.props(0) += 1e-6;
  EXPECT_THROW(bad.validate(), DomainError);
  bad = p;
  bad.conn(1, 2) = 20.0;
  EXPECT_THROW(bad.validate(), DomainError);
  bad = p;
  bad.conn.resize(2, 2);
  EXPECT_THROW(bad.validate(), SizeError);
  Vector q2(2);
  q2 << 0.01, 0.99;
  SbmParams low{q2, Matrix::Zero(2, 2), ExpFamily::bernoulli()};
  EXPECT_NO_THROW(low.validate(0.01));
  EXPECT_THROW(low.validate(0.05), DomainError);
}

TEST(Params, SstarHoldsMeans) {
  std::mt19937_64 rng(2);
  for (const auto& f : {ExpFamily::bernoulli(), ExpFamily::poisson(), ExpFamily::gaussian()}) {
    const SbmParams p = random_params(3, rng, f);
    const Matrix s = sstar_matrix(p);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) EXPECT_NEAR(s(a, b), f.mean(p.conn(a, b)), 1e-12);
  }
}

TEST(Assignment, OneHotAndLabels) {
  const Assignment z = one_based({1, 3, 2, 3}, 3);
  EXPECT_EQ(z.labels(), (std::vector<int>{0, 2, 1, 2}));
  EXPECT_EQ(z.one_based(), (std::vector<int>{1, 3, 2, 3}));
  const Matrix h = z.one_hot();
  for (int i = 0; i < 4; ++i) EXPECT_EQ(h.row(i).sum(), 1.0);
  EXPECT_EQ(h(1, 2), 1.0);
  EXPECT_THROW(one_based({1, 4}, 3), DomainError);
  EXPECT_THROW(one_based({0, 1}, 3), DomainError);
}

TEST(Permutation, IdentityLeavesInputUnchanged) {
  std::mt19937_64 rng(3);
  const SbmParams p = random_params(4, rng);
  const SbmParams q = apply_permutation(p, identity_permutation(4));
  EXPECT_EQ(q.props, p.props);
  EXPECT_EQ(q.conn, p.conn);
  const Assignment z = random_assignment(20, 4, rng);
  EXPECT_EQ(apply_permutation(z, identity_permutation(4)), z);
}

TEST(Permutation, SwapOfTwoBlocks) {
  Vector p(2);
  p << 0.3, 0.7;
  Matrix c(2, 2);
  c << 1.0, 2.0, 3.0, 4.0;
  const SbmParams s = apply_permutation(SbmParams{p, c, ExpFamily::gaussian()}, Permutation{1, 0});
  EXPECT_EQ(s.props(0), 0.7);
  EXPECT_EQ(s.props(1), 0.3);
  Matrix expect(2, 2);
  expect << 4.0, 3.0, 2.0, 1.0;
  EXPECT_EQ(s.conn, expect);
}

TEST(Permutation, FollowsComposedDefinition) {
  // props^s_q = props_{s(q)}, conn^s_{ql} = conn_{s(q) s(l)}
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const SbmParams p = random_params(4, rng);
    const Permutation s = random_permutation(4, rng);
    const SbmParams ps = apply_permutation(p, s);
    for (int a = 0; a < 4; ++a) {
      EXPECT_EQ(ps.props(a), p.props(s[static_cast<std::size_t>(a)]));
      for (int b = 0; b < 4; ++b) EXPECT_EQ(ps.conn(a, b), p.conn(s[static_cast<std::size_t>(a)], s[static_cast<std::size_t>(b)]));
    }
  }
}

TEST(Permutation, InverseUndoes) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    const SbmParams p = random_params(5, rng);
    const Permutation s = random_permutation(5, rng);
    const SbmParams back = apply_permutation(apply_permutation(p, s), inverse(s));
    EXPECT_EQ(back.props, p.props);
    EXPECT_EQ(back.conn, p.conn);
    const Assignment z = random_assignment(30, 5, rng);
    EXPECT_EQ(apply_permutation(apply_permutation(z, s), inverse(s)), z);
  }
}

TEST(Permutation, JointRelabelingPreservesCellParameters) {
  // The cell parameter seen by a dyad is unchanged when labels and parameters
  // are permuted together.
  std::mt19937_64 rng(6);
  const SbmParams p = random_params(3, rng);
  const Assignment z = random_assignment(12, 3, rng);
  const Permutation s = random_permutation(3, rng);
  const SbmParams ps = apply_permutation(p, s);
  const Assignment zs = apply_permutation(z, s);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(ps.props(zs[i]), p.props(z[i]));
    for (std::size_t j = 0; j < 12; ++j) EXPECT_EQ(ps.conn(zs[i], zs[j]), p.conn(z[i], z[j]));
  }
}

TEST(Permutation, ThreeBlockTranspositionFixesParameters) {
  for (const auto& f : {ExpFamily::gaussian(), ExpFamily::bernoulli()}) {
    const SbmParams p = symmetric_example(f);
    EXPECT_EQ(param_discrepancy(apply_permutation(p, Permutation{1, 0, 2}), p), 0.0);
  }
}

TEST(Symmetry, GenericParametersOnlyIdentity) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    const auto g = symmetry_group(random_params(4, rng));
    ASSERT_EQ(g.size(), 1u);
    EXPECT_EQ(g[0], identity_permutation(4));
  }
}

TEST(Symmetry, ThreeBlockExampleHasCardinalityTwo) {
  for (const auto& f : {ExpFamily::gaussian(), ExpFamily::bernoulli()}) {
    const auto g = symmetry_group(symmetric_example(f));
    ASSERT_EQ(g.size(), 2u) << f.name();
    EXPECT_NE(std::find(g.begin(), g.end(), Permutation{1, 0, 2}), g.end());
    EXPECT_NE(std::find(g.begin(), g.end(), identity_permutation(3)), g.end());
  }
}

TEST(Symmetry, AffiliationWithEqualProportions) {
  Vector p(2);
  p << 0.5, 0.5;
  Matrix m(2, 2);
  m << 0.6, 0.1, 0.1, 0.6;
  const auto params = SbmParams::from_means(p, m, ExpFamily::bernoulli());
  // direct check of both permutations
  int count = 0;
  for (const auto& s : all_permutations(2)) count += param_discrepancy(apply_permutation(params, s), params) <= 1e-9;
  EXPECT_EQ(count, 2);
  EXPECT_EQ(symmetry_group(params).size(), 2u);
}

TEST(Symmetry, GroupClosedUnderCompositionAndInverse) {
  // Q = 4, blocks 0/1 and 2/3 exchangeable in pairs, plus the pair swap.
  Vector p = Vector::Constant(4, 0.25);
  Matrix m(4, 4);
  m << 0.5, 0.2, 0.1, 0.1, 0.2, 0.5, 0.1, 0.1, 0.1, 0.1, 0.5, 0.2, 0.1, 0.1, 0.2, 0.5;
  const auto params = SbmParams::from_means(p, m, ExpFamily::bernoulli());
  const auto g = symmetry_group(params);
  EXPECT_EQ(g.size(), 8u);
  std::set<Permutation> set(g.begin(), g.end());
  for (const auto& s : g) {
    EXPECT_TRUE(set.count(inverse(s)));
    for (const auto& t : g) EXPECT_TRUE(set.count(compose(s, t)));
  }
}

TEST(Symmetry, LargeQRejected) {
  SbmParams p{Vector::Constant(9, 1.0 / 9), Matrix::Zero(9, 9), ExpFamily::gaussian()};
  EXPECT_THROW(symmetry_group(p), SizeError);
  EXPECT_THROW(align(p, p), SizeError);
}

TEST(Confusion, Examples) {
  const Assignment zs = one_based({1, 1, 2, 2}, 2);
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 0.5, 0.5;
  EXPECT_EQ(confusion_matrix(zs, zs), d);

  Matrix e(2, 2);
  e << 1, 1, 0, 2;
  EXPECT_EQ(confusion_matrix(one_based({1, 2, 2, 2}, 2), zs), e / 4.0);

  std::mt19937_64 rng(8);
  const Assignment star = random_assignment(40, 3, rng);
  const Matrix r = confusion_matrix(Assignment(std::vector<int>(40, 0), 3), star);
  const auto sizes = star.block_sizes();
  for (int q = 0; q < 3; ++q) {
    EXPECT_DOUBLE_EQ(r(q, 0), sizes[static_cast<std::size_t>(q)] / 40.0);
    EXPECT_EQ(r(q, 1), 0.0);
    EXPECT_EQ(r(q, 2), 0.0);
  }
  EXPECT_THROW(confusion_matrix(one_based({1, 2}, 2), zs), SizeError);
}

TEST(Confusion, RowSumsAndTotal) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 30; ++t) {
    const Assignment zs = random_assignment(25, 3, rng), z = random_assignment(25, 3, rng);
    const Matrix r = confusion_matrix(z, zs);
    EXPECT_NEAR(r.sum(), 1.0, 1e-12);
    EXPECT_GE(r.minCoeff(), 0.0);
    const auto sizes = zs.block_sizes();
    for (int q = 0; q < 3; ++q) EXPECT_NEAR(r.row(q).sum(), sizes[static_cast<std::size_t>(q)] / 25.0, 1e-12);
  }
}

TEST(Hamming, Examples) {
  const Assignment zs = one_based({1, 1, 2, 2}, 2);
  EXPECT_EQ(hamming_distance_up_to_perm(one_based({2, 2, 1, 1}, 2), zs).distance, 0);
  const auto r = hamming_distance_up_to_perm(one_based({1, 2, 2, 2}, 2), zs);
  EXPECT_EQ(r.distance, 1);
  EXPECT_EQ(r.best_perm, identity_permutation(2));
}

TEST(Hamming, BestPermAttainsDistance) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 30; ++t) {
    const Assignment zs = random_assignment(30, 4, rng), z = random_assignment(30, 4, rng);
    const auto r = hamming_distance_up_to_perm(z, zs);
    const Assignment rel = apply_permutation(z, r.best_perm);
    int d = 0;
    for (std::size_t i = 0; i < 30; ++i) d += rel[i] != zs[i];
    EXPECT_EQ(d, r.distance);
    // exhaustive minimum
    int best = 1 << 30;
    for (const auto& s : all_permutations(4)) {
      const Assignment x = apply_permutation(z, s);
      int dd = 0;
      for (std::size_t i = 0; i < 30; ++i) dd += x[i] != zs[i];
      best = std::min(best, dd);
    }
    EXPECT_EQ(best, r.distance);
  }
}

TEST(Hamming, RandomAssignmentsNearHalf) {
  std::mt19937_64 rng(11);
  std::vector<int> half(1000);
  for (int i = 0; i < 1000; ++i) half[static_cast<std::size_t>(i)] = i < 500 ? 0 : 1;
  const Assignment zs(half, 2);
  const auto r = hamming_distance_up_to_perm(random_assignment(1000, 2, rng), zs);
  EXPECT_NEAR(r.distance / 1000.0, 0.5, 0.05);
}

TEST(Hamming, InvariantUnderRelabeling) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 100; ++t) {
    const Assignment zs = random_assignment(20, 3, rng), z = random_assignment(20, 3, rng);
    const Permutation s = random_permutation(3, rng);
    EXPECT_EQ(hamming_distance_up_to_perm(apply_permutation(z, s), zs).distance,
              hamming_distance_up_to_perm(z, zs).distance);
  }
}

TEST(Hamming, ConfusionTraceBound) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 200; ++t) {
    const Assignment zs = random_assignment(15, 3, rng);
    // perturb a few labels so the identity is usually the best relabeling
    std::vector<int> l = zs.labels();
    std::uniform_int_distribution<int> node(0, 14), lab(0, 2);
    for (int k = 0; k < 3; ++k) l[static_cast<std::size_t>(node(rng))] = lab(rng);
    const Assignment z(l, 3);
    const auto h = hamming_distance_up_to_perm(z, zs);
    const double lhs = 15.0 * (1.0 - confusion_matrix(z, zs).trace());
    EXPECT_GE(lhs, h.distance - 1e-9);
    if (h.best_perm == identity_permutation(3)) {
      EXPECT_NEAR(lhs, h.distance, 1e-9);
    }
  }
}

TEST(Regularity, Examples) {
  const Assignment z = one_based({1, 1, 1, 1, 1, 2, 2, 2, 2, 2}, 2);
  EXPECT_TRUE(is_c_regular(z, 0.5));
  EXPECT_FALSE(is_c_regular(z, 0.51));
  const Assignment missing = one_based({1, 2, 1, 2, 1, 2}, 3);
  for (double c : {1e-9, 0.1, 0.3}) EXPECT_FALSE(is_c_regular(missing, c));
}

TEST(Distinctness, Examples) {
  Vector p(2);
  p << 0.5, 0.5;
  Matrix same(2, 2);
  same << 0.3, 0.6, 0.3, 0.6;
  const auto d0 = class_distinctness_report(SbmParams::from_means(p, same, ExpFamily::bernoulli()));
  EXPECT_EQ(d0.delta, 0.0);
  EXPECT_TRUE(d0.degenerate);

  Matrix m(2, 2);
  m << 0.7, 0.2, 0.2, 0.7;
  const auto d = class_distinctness_report(SbmParams::from_means(p, m, ExpFamily::bernoulli()));
  EXPECT_FALSE(d.degenerate);
  EXPECT_NEAR(d.delta, oracle::kl_bernoulli(0.7, 0.2), 1e-12);
}

TEST(Distinctness, ShrinkingTowardCommonMeanDecreasesDelta) {
  Vector p(2);
  p << 0.5, 0.5;
  Matrix m(2, 2);
  m << 0.7, 0.2, 0.2, 0.7;
  const Matrix center = Matrix::Constant(2, 2, 0.45);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 20; ++k) {
    const double t = k / 20.0;
    const double d = class_distinctness(SbmParams::from_means(p, (1 - t) * m + t * center, ExpFamily::bernoulli()));
    EXPECT_LT(d, prev);
    prev = d;
  }
}

TEST(Distinctness, PermutationInvariant) {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 50; ++t) {
    const SbmParams p = random_params(4, rng);
    EXPECT_NEAR(class_distinctness(apply_permutation(p, random_permutation(4, rng))), class_distinctness(p), 1e-14);
  }
}

TEST(Align, RecoversPermutation) {
  std::mt19937_64 rng(15);
  for (int t = 0; t < 50; ++t) {
    const SbmParams star = random_params(4, rng);
    const Permutation s = random_permutation(4, rng);
    const SbmParams hat = apply_permutation(star, s);
    const Permutation a = align(hat, star);
    EXPECT_EQ(param_discrepancy(apply_permutation(hat, a), star), 0.0);
    EXPECT_EQ(a, inverse(s));
  }
}

TEST(Align, SmallNoiseGivesIdentity) {
  std::mt19937_64 rng(16);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const SbmParams star = random_params(3, rng);
    // half the smallest gap between any two parameter values
    std::vector<double> v(star.props.data(), star.props.data() + 3);
    v.insert(v.end(), star.conn.data(), star.conn.data() + 9);
    std::sort(v.begin(), v.end());
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < v.size(); ++k) gap = std::min(gap, v[k] - v[k - 1]);
    SbmParams hat = star;
    const double scale = 0.2 * gap;
    for (int k = 0; k < 3; ++k) hat.props(k) += std::clamp(noise(rng), -1.0, 1.0) * scale;
    for (int k = 0; k < 9; ++k) hat.conn.data()[k] += std::clamp(noise(rng), -1.0, 1.0) * scale;
    EXPECT_EQ(align(hat, star), identity_permutation(3));
  }
}

TEST(Align, SymmetricTruthTieBreaksLexicographically) {
  const SbmParams star = symmetric_example(ExpFamily::gaussian());
  // hat is an exact relabeling; both elements of the coset {(1 2), id} attain 0
  const SbmParams hat = apply_permutation(star, Permutation{1, 0, 2});
  EXPECT_EQ(align(hat, star), identity_permutation(3));
  EXPECT_EQ(align(star, star), identity_permutation(3));
  const SbmParams hat2 = apply_permutation(star, Permutation{2, 0, 1});
  const Permutation a = align(hat2, star);
  EXPECT_EQ(param_discrepancy(apply_permutation(hat2, a), star), 0.0);
  std::vector<Permutation> minimizers;
  for (const auto& t : all_permutations(3))
    if (param_discrepancy(apply_permutation(hat2, t), star) == 0.0) minimizers.push_back(t);
  ASSERT_EQ(minimizers.size(), 2u);
  EXPECT_EQ(a, *std::min_element(minimizers.begin(), minimizers.end()));
}
