#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "sbm/expfam.hpp"

using sbm::ExpFamily;

namespace {

std::vector<ExpFamily> all_families() { return {ExpFamily::bernoulli(), ExpFamily::poisson(), ExpFamily::gaussian()}; }

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

TEST(ExpFamily, LogDensityExamples) {
  EXPECT_NEAR(ExpFamily::bernoulli().log_density(1.0, 0.0), std::log(0.5), 1e-12);
  EXPECT_NEAR(ExpFamily::gaussian().log_density(0.0, 0.0), -0.5 * std::log(2.0 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(ExpFamily::poisson().log_density(2.0, 0.0), -1.0 - std::log(2.0), 1e-12);
  EXPECT_NEAR(ExpFamily::poisson().log_density(2.0, 0.0), oracle::poisson_logpmf(2.0, 1.0), 1e-12);
}

TEST(ExpFamily, LogDensityMatchesReferencePmfs) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int k = 0; k < 200; ++k) {
    const double a = u(rng);
    for (double y : {0.0, 1.0})
      EXPECT_NEAR(ExpFamily::bernoulli().log_density(y, a), oracle::bernoulli_logpmf(y, 1.0 / (1.0 + std::exp(-a))), 1e-12);
    for (double y : {0.0, 1.0, 3.0, 7.0})
      EXPECT_NEAR(ExpFamily::poisson().log_density(y, a), oracle::poisson_logpmf(y, std::exp(a)), 1e-10);
    EXPECT_NEAR(ExpFamily::gaussian().log_density(0.3, a), oracle::gaussian_logpdf(0.3, a), 1e-12);
  }
}

TEST(ExpFamily, LogDensityErrors) {
  EXPECT_THROW(ExpFamily::bernoulli().log_density(2.0, 0.0), sbm::SupportError);
  EXPECT_THROW(ExpFamily::bernoulli().log_density(0.5, 0.0), sbm::SupportError);
  EXPECT_THROW(ExpFamily::poisson().log_density(-1.0, 0.0), sbm::SupportError);
  EXPECT_THROW(ExpFamily::poisson().log_density(1.5, 0.0), sbm::SupportError);
  EXPECT_THROW(ExpFamily::gaussian().log_density(std::nan(""), 0.0), sbm::SupportError);
  const double inf = std::numeric_limits<double>::infinity();
  for (const auto& f : all_families()) {
    EXPECT_THROW(f.log_density(0.0, inf), sbm::DomainError);
    EXPECT_THROW(f.log_density(0.0, std::nan("")), sbm::DomainError);
  }
}

TEST(ExpFamily, MeanVarianceAndInverse) {
  EXPECT_DOUBLE_EQ(ExpFamily::bernoulli().mean(0.0), 0.5);
  EXPECT_DOUBLE_EQ(ExpFamily::bernoulli().variance(0.0), 0.25);
  EXPECT_DOUBLE_EQ(ExpFamily::poisson().natural_from_mean(1.0), 0.0);
  EXPECT_NEAR(ExpFamily::bernoulli().natural_from_mean(0.7), 0.847298, 1e-6);
  EXPECT_NEAR(ExpFamily::bernoulli().mean(0.8472978603872037), 0.7, 1e-12);
  EXPECT_DOUBLE_EQ(ExpFamily::gaussian().variance(3.0), 1.0);
}

TEST(ExpFamily, InverseRejectsBoundaryAndOutside) {
  const auto b = ExpFamily::bernoulli();
  for (double m : {0.0, 1.0, -0.1, 1.1}) EXPECT_THROW(b.natural_from_mean(m), sbm::RangeError) << m;
  for (double m : {0.0, -2.0}) EXPECT_THROW(ExpFamily::poisson().natural_from_mean(m), sbm::RangeError) << m;
  EXPECT_NO_THROW(ExpFamily::gaussian().natural_from_mean(-50.0));
}

TEST(ExpFamily, ClampedInverseStaysInClampInterval) {
  const auto b = ExpFamily::bernoulli();
  EXPECT_DOUBLE_EQ(b.clamped_natural_from_mean(1.0), 15.0);
  EXPECT_DOUBLE_EQ(b.clamped_natural_from_mean(0.0), -15.0);
  EXPECT_NEAR(b.clamped_natural_from_mean(0.3), logit(0.3), 1e-14);
  const auto p = ExpFamily::poisson();
  EXPECT_DOUBLE_EQ(p.clamped_natural_from_mean(0.0), -15.0);
  EXPECT_DOUBLE_EQ(p.clamped_natural_from_mean(1e6), 8.0);
}

TEST(ExpFamily, ClampIntervalsAndCurvature) {
  for (const auto& f : all_families()) {
    const auto c = f.clamp_interval();
    const auto d = f.natural_domain();
    EXPECT_GT(c.lo, d.lo);
    EXPECT_LT(c.hi, d.hi);
    for (int k = 0; k <= 100; ++k) EXPECT_GT(f.variance(c.lo + (c.hi - c.lo) * k / 100.0), 0.0);
  }
  EXPECT_EQ(ExpFamily::bernoulli().clamp_interval().lo, -15.0);
  EXPECT_EQ(ExpFamily::poisson().clamp_interval().hi, 8.0);
  EXPECT_EQ(ExpFamily::gaussian().clamp_interval().hi, 100.0);
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_THROW(ExpFamily(sbm::FamilyId::Bernoulli, sbm::Interval{-inf, 0.0}), sbm::DomainError);
}

TEST(ExpFamily, KlExamples) {
  for (const auto& f : all_families()) EXPECT_EQ(f.kl(0.4, 0.4), 0.0);
  EXPECT_NEAR(ExpFamily::bernoulli().kl(logit(0.7), logit(0.2)), 0.582685, 1e-6);
  EXPECT_NEAR(ExpFamily::bernoulli().kl(logit(0.7), logit(0.2)), oracle::kl_bernoulli(0.7, 0.2), 1e-12);
  EXPECT_NEAR(ExpFamily::poisson().kl(std::log(2.0), 0.0), 2.0 * std::log(2.0) - 1.0, 1e-12);
  EXPECT_NEAR(ExpFamily::poisson().kl(std::log(2.0), 0.0), oracle::kl_poisson(2.0, 1.0), 1e-12);
  EXPECT_NEAR(ExpFamily::gaussian().kl(1.5, -0.5), oracle::kl_gaussian(1.5, -0.5), 1e-12);
  EXPECT_THROW(ExpFamily::bernoulli().kl(std::nan(""), 0.0), sbm::DomainError);
}

TEST(ExpFamily, KlNonnegativeAndZeroOnlyOnDiagonal) {
  std::mt19937_64 rng(5);
  for (const auto& f : all_families()) {
    const auto c = f.clamp_interval();
    std::uniform_real_distribution<double> u(c.lo, c.hi);
    for (int k = 0; k < 2000; ++k) {
      const double a = u(rng), b = u(rng);
      const double d = f.kl(a, b);
      EXPECT_GE(d, 0.0);
      if (d == 0.0) EXPECT_LE(std::abs(a - b), 1e-10);
    }
  }
}

// Mean values near 1 are spaced eps apart, so (psi')^-1 cannot resolve a
// better than about eps / (m (1 - m)). The 1e-10 bound holds wherever that
// resolution allows it (|a| <= 12 for Bernoulli, the full interval otherwise).
TEST(ExpFamily, RoundtripNaturalMeanNatural) {
  std::mt19937_64 rng(17);
  for (const auto& f : all_families()) {
    auto c = f.clamp_interval();
    if (f.id() == sbm::FamilyId::Bernoulli) c = {-12.0, 12.0};
    std::uniform_real_distribution<double> u(c.lo, c.hi);
    for (int k = 0; k < 1000; ++k) {
      const double a = u(rng);
      EXPECT_LE(std::abs(f.natural_from_mean(f.mean(a)) - a), 1e-10) << f.name() << " a=" << a;
    }
  }
}

TEST(ExpFamily, BernoulliRoundtripWithinConditioningBound) {
  const auto f = ExpFamily::bernoulli();
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-15.0, 15.0);
  const double eps = std::numeric_limits<double>::epsilon();
  for (int k = 0; k < 1000; ++k) {
    const double a = u(rng);
    const double m = f.mean(a);
    EXPECT_LE(std::abs(f.natural_from_mean(m) - a), 4.0 * eps / (m * (1.0 - m)) + 1e-12) << a;
  }
}

TEST(ExpFamily, FiniteDifferenceDerivatives) {
  const double h = 1e-5;
  for (const auto& f : all_families()) {
    const auto c = f.clamp_interval();
    for (int k = 0; k <= 100; ++k) {
      const double a = c.lo + (c.hi - c.lo) * k / 100.0;
      const double d1 = (f.log_partition(a + h) - f.log_partition(a - h)) / (2 * h);
      const double d2 = (f.mean(a + h) - f.mean(a - h)) / (2 * h);
      EXPECT_LE(std::abs(f.mean(a) - d1), 1e-6) << f.name() << " a=" << a;
      EXPECT_LE(std::abs(f.variance(a) - d2), 1e-6) << f.name() << " a=" << a;
    }
  }
}

TEST(ExpFamily, SampleExamples) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 1000; ++k) EXPECT_EQ(ExpFamily::bernoulli().sample(30.0, rng), 1.0);

  const int m = 100000;
  double s = 0.0;
  for (int k = 0; k < m; ++k) s += ExpFamily::poisson().sample(std::log(4.0), rng);
  EXPECT_NEAR(s / m, 4.0, 0.05);

  double s1 = 0.0, s2 = 0.0;
  for (int k = 0; k < m; ++k) {
    const double y = ExpFamily::gaussian().sample(0.0, rng);
    s1 += y;
    s2 += y * y;
  }
  const double mean = s1 / m;
  EXPECT_NEAR((s2 - m * mean * mean) / (m - 1), 1.0, 0.03);
  EXPECT_THROW(ExpFamily::gaussian().sample(std::nan(""), rng), sbm::DomainError);
}

TEST(ExpFamily, SampleIsDeterministicForASeed) {
  for (const auto& f : all_families()) {
    std::mt19937_64 r1(99), r2(99);
    for (int k = 0; k < 50; ++k) EXPECT_EQ(f.sample(0.3, r1), f.sample(0.3, r2));
  }
}

TEST(ExpFamily, SamplerMomentsWithinFiveStandardErrors) {
  std::mt19937_64 rng(23);
  const int m = 100000;
  for (const auto& f : all_families()) {
    for (double a : {-1.0, 0.2, 1.5}) {
      std::vector<double> y(m);
      for (auto& v : y) v = f.sample(a, rng);
      double mean = 0.0;
      for (double v : y) mean += v;
      mean /= m;
      double var = 0.0, m4 = 0.0;
      for (double v : y) {
        var += (v - mean) * (v - mean);
        m4 += std::pow(v - mean, 4);
      }
      var /= (m - 1);
      m4 /= m;
      const double se_mean = std::sqrt(f.variance(a) / m);
      const double se_var = std::sqrt((m4 - var * var) / m);
      EXPECT_LE(std::abs(mean - f.mean(a)), 5 * se_mean) << f.name() << " a=" << a;
      EXPECT_LE(std::abs(var - f.variance(a)), 5 * se_var) << f.name() << " a=" << a;
    }
  }
}

TEST(ExpFamily, NamesRoundTrip) {
  for (const auto& f : all_families()) EXPECT_EQ(ExpFamily::from_name(f.name()), f);
  EXPECT_THROW(ExpFamily::from_name("binomial"), sbm::ConfigError);
}
