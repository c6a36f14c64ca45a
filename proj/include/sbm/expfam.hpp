#pragma once

// One-dimensional natural exponential families in canonical form,
//   phi(y, a) = b(y) exp(a y - psi(a)),
// with the derived maps (psi', psi'', (psi')^-1, KL) used by the estimators.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <string_view>

#include "sbm/errors.hpp"

namespace sbm {

enum class FamilyId { Bernoulli, Poisson, GaussianUnitVar };

struct Interval {
  double lo;
  double hi;

  constexpr bool contains(double x) const noexcept { return x >= lo && x <= hi; }
  constexpr double clamp(double x) const noexcept { return std::clamp(x, lo, hi); }
};

/// Empirical means are pushed at least this far inside the mean range before
/// inversion (all-ones or all-zero Bernoulli cells, zero Poisson cells).
inline constexpr double kMeanEpsilon = 1e-8;

class ExpFamily {
 public:
  explicit ExpFamily(FamilyId id) : ExpFamily(id, default_clamp(id)) {}

  ExpFamily(FamilyId id, Interval clamp) : id_(id), clamp_(clamp) {
    const Interval dom = natural_domain();
    if (!(clamp.lo < clamp.hi) || !(clamp.lo > dom.lo) || !(clamp.hi < dom.hi)) {
      throw DomainError("clamp interval must lie strictly inside the natural domain");
    }
  }

  static ExpFamily bernoulli() { return ExpFamily(FamilyId::Bernoulli); }
  static ExpFamily poisson() { return ExpFamily(FamilyId::Poisson); }
  static ExpFamily gaussian() { return ExpFamily(FamilyId::GaussianUnitVar); }

  static Interval default_clamp(FamilyId id) noexcept {
    switch (id) {
      case FamilyId::Bernoulli: return {-15.0, 15.0};
      case FamilyId::Poisson: return {-15.0, 8.0};
      case FamilyId::GaussianUnitVar: return {-100.0, 100.0};
    }
    return {0.0, 0.0};
  }

  FamilyId id() const noexcept { return id_; }

  /// All three supported families have natural domain R.
  Interval natural_domain() const noexcept {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {-inf, inf};
  }

  const Interval& clamp_interval() const noexcept { return clamp_; }

  /// Open mean range psi'(interior of the natural domain).
  Interval mean_range() const noexcept {
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (id_) {
      case FamilyId::Bernoulli: return {0.0, 1.0};
      case FamilyId::Poisson: return {0.0, inf};
      case FamilyId::GaussianUnitVar: return {-inf, inf};
    }
    return {0.0, 0.0};
  }

  void check_natural(double a) const {
    if (!std::isfinite(a)) throw DomainError("natural parameter outside the natural domain");
  }

  bool in_support(double y) const noexcept {
    switch (id_) {
      case FamilyId::Bernoulli: return y == 0.0 || y == 1.0;
      case FamilyId::Poisson: return y >= 0.0 && std::isfinite(y) && y == std::floor(y);
      case FamilyId::GaussianUnitVar: return std::isfinite(y);
    }
    return false;
  }

  void check_support(double y) const {
    if (!in_support(y)) throw SupportError("observation outside the family support");
  }

  /// log-partition psi(a)
  double log_partition(double a) const {
    check_natural(a);
    switch (id_) {
      case FamilyId::Bernoulli: return a > 0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
      case FamilyId::Poisson: return std::exp(a);
      case FamilyId::GaussianUnitVar: return 0.5 * a * a;
    }
    return 0.0;
  }

  /// log b(y); y must be in the support.
  double log_base(double y) const {
    check_support(y);
    switch (id_) {
      case FamilyId::Bernoulli: return 0.0;
      case FamilyId::Poisson: return -std::lgamma(y + 1.0);
      case FamilyId::GaussianUnitVar: return -0.5 * y * y - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    return 0.0;
  }

  double log_density(double y, double a) const { return log_base(y) + a * y - log_partition(a); }

  /// psi'(a)
  double mean(double a) const {
    check_natural(a);
    switch (id_) {
      case FamilyId::Bernoulli: return a >= 0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
      case FamilyId::Poisson: return std::exp(a);
      case FamilyId::GaussianUnitVar: return a;
    }
    return 0.0;
  }

  /// psi''(a)
  double variance(double a) const {
    check_natural(a);
    switch (id_) {
      case FamilyId::Bernoulli: {
        const double p = mean(a);
        return p * (1.0 - p);
      }
      case FamilyId::Poisson: return std::exp(a);
      case FamilyId::GaussianUnitVar: return 1.0;
    }
    return 0.0;
  }

  /// (psi')^-1(m). Throws RangeError unless m is strictly inside the mean range.
  double natural_from_mean(double m) const {
    const Interval r = mean_range();
    if (!(m > r.lo && m < r.hi)) throw RangeError("mean outside the open mean range");
    switch (id_) {
      case FamilyId::Bernoulli: return std::log(m) - std::log1p(-m);
      case FamilyId::Poisson: return std::log(m);
      case FamilyId::GaussianUnitVar: return m;
    }
    return 0.0;
  }

  /// Pushes an empirical mean into [eps, 1 - eps] (Bernoulli) or [eps, inf)
  /// (Poisson), inverts it, and clamps the result into the clamp interval.
  /// This is the constrained maximizer of m a - psi(a) over the clamp interval.
  double clamped_natural_from_mean(double m) const {
    switch (id_) {
      case FamilyId::Bernoulli: m = std::clamp(m, kMeanEpsilon, 1.0 - kMeanEpsilon); break;
      case FamilyId::Poisson: m = std::max(m, kMeanEpsilon); break;
      case FamilyId::GaussianUnitVar: break;
    }
    return clamp_.clamp(natural_from_mean(m));
  }

  /// KL(phi(., a) || phi(., a_prime)) = psi'(a)(a - a') + psi(a') - psi(a).
  double kl(double a, double a_prime) const {
    const double d = mean(a) * (a - a_prime) + log_partition(a_prime) - log_partition(a);
    return std::max(d, 0.0);
  }

  template <class URBG>
  double sample(double a, URBG& rng) const {
    check_natural(a);
    switch (id_) {
      case FamilyId::Bernoulli: return std::bernoulli_distribution(mean(a))(rng) ? 1.0 : 0.0;
      case FamilyId::Poisson: return static_cast<double>(std::poisson_distribution<long long>(std::exp(a))(rng));
      case FamilyId::GaussianUnitVar: return std::normal_distribution<double>(a, 1.0)(rng);
    }
    return 0.0;
  }

  std::string_view name() const noexcept { return family_name(id_); }

  static std::string_view family_name(FamilyId id) noexcept {
    switch (id) {
      case FamilyId::Bernoulli: return "bernoulli";
      case FamilyId::Poisson: return "poisson";
      case FamilyId::GaussianUnitVar: return "gaussian";
    }
    return "";
  }

  static ExpFamily from_name(std::string_view name) {
    if (name == "bernoulli") return bernoulli();
    if (name == "poisson") return poisson();
    if (name == "gaussian") return gaussian();
    throw ConfigError("unknown family '" + std::string(name) + "'");
  }

  friend bool operator==(const ExpFamily& x, const ExpFamily& y) noexcept {
    return x.id_ == y.id_ && x.clamp_.lo == y.clamp_.lo && x.clamp_.hi == y.clamp_.hi;
  }

 private:
  FamilyId id_;
  Interval clamp_;
};

}  // namespace sbm
