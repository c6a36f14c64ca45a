#pragma once

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "sbm/errors.hpp"
#include "sbm/model.hpp"

namespace sbm {

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

/// Unbiased sample variance.
inline double variance_of(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

inline double median_of(std::vector<double> x) {
  if (x.empty()) return std::nan("");
  const auto mid = x.begin() + static_cast<std::ptrdiff_t>(x.size() / 2);
  std::nth_element(x.begin(), mid, x.end());
  if (x.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(x.begin(), mid);
  return 0.5 * (lo + hi);
}

/// Unbiased sample covariance of the rows of `samples` (replicates x dims).
inline Matrix sample_covariance(const Matrix& samples) {
  const Eigen::RowVectorXd m = samples.colwise().mean();
  const Matrix c = samples.rowwise() - m;
  return (c.transpose() * c) / static_cast<double>(std::max<Eigen::Index>(samples.rows() - 1, 1));
}

/// sup_x |F_n(x) - Phi(x)|
inline double ks_distance_to_standard_normal(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = standard_normal_cdf(x[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

struct QqPoint {
  double theoretical;
  double sample;
};

struct NormalitySummary {
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  bool degenerate = false;
  std::optional<double> ks_distance;  // absent when degenerate
  std::vector<QqPoint> qq;            // standardized sample quantiles vs N(0, 1)
};

/// Residuals are divided by `reference_sd` (the theoretical standard deviation)
/// before the KS distance and QQ points are computed.
inline NormalitySummary normality_summary(std::span<const double> residuals, double reference_sd = 1.0) {
  if (residuals.size() < 100) throw SizeError("normality_summary: need at least 100 residuals");
  if (!(reference_sd > 0.0)) throw DomainError("normality_summary: reference sd must be positive");
  NormalitySummary s;
  s.count = residuals.size();
  s.mean = mean_of(residuals);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : residuals) {
    const double d = v - s.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  const double n = static_cast<double>(s.count);
  m2 /= n;
  m3 /= n;
  m4 /= n;
  s.sd = std::sqrt(m2 * n / (n - 1.0));
  if (m2 <= 1e-300 * (1.0 + s.mean * s.mean)) {
    s.degenerate = true;
    return s;
  }
  s.skewness = m3 / std::pow(m2, 1.5);
  s.excess_kurtosis = m4 / (m2 * m2) - 3.0;

  std::vector<double> z(residuals.begin(), residuals.end());
  for (double& v : z) v /= reference_sd;
  s.ks_distance = ks_distance_to_standard_normal(z);
  std::sort(z.begin(), z.end());
  const boost::math::normal_distribution<double> std_normal;
  s.qq.reserve(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double p = (static_cast<double>(i) + 0.5) / n;
    s.qq.push_back({boost::math::quantile(std_normal, p), z[i]});
  }
  return s;
}

}  // namespace sbm
