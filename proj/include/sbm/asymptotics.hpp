#pragma once

// Closed-form limit quantities for the complete-observed MLE and the expected
// log-likelihood ratio machinery: limit covariances, conditional expectation
// of the plug-in cell means, ELR and its profile over the connectivity.
//
// Two conventions appear for finite n. "Ordered pairs" sums over i != j as the
// likelihood does; the "_n2" variants use the n^2 form (diagonal pairs
// included). They agree asymptotically.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "sbm/errors.hpp"
#include "sbm/inference.hpp"
#include "sbm/model.hpp"
#include "sbm/simulate.hpp"

namespace sbm {

/// Diag(p) - p p^T
inline Matrix sigma_props(const Vector& p) {
  Matrix s = -p * p.transpose();
  s.diagonal() += p;
  return s;
}

/// Asymptotic variance of sqrt(n(n-1)) (a_hat_ql - a_ql): 1 / (rho p_q p_l psi''(a_ql)).
inline double sigma_conn_cell(const Vector& p, const Matrix& conn, double rho, const ExpFamily& family, int q, int l) {
  if (!(rho > 0.0)) throw DomainError("sigma_conn_cell: rho must be positive");
  return 1.0 / (rho * p(q) * p(l) * family.variance(conn(q, l)));
}

inline Matrix sigma_conn(const SbmParams& params, double rho) {
  const int q = params.num_blocks();
  Matrix s(q, q);
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b) s(a, b) = sigma_conn_cell(params.props, params.conn, rho, params.family, a, b);
  return s;
}

struct TheoreticalLimits {
  Matrix sigma_props;
  Matrix sigma_conn;
  double rho;
};

inline TheoreticalLimits theoretical_limits(const SbmParams& params, double rho) {
  return {sigma_props(params.props), sigma_conn(params, rho), rho};
}

namespace detail {

/// C_{q* q} = #{i : z*_i = q*, z_i = q}
inline Matrix cooccurrence_counts(const Assignment& z, const Assignment& z_star) {
  return confusion_matrix(z, z_star) * static_cast<double>(z.size());
}

}  // namespace detail

/// [R^T S* R]_ql / (pi_q(z) pi_l(z)), zero when block q or l of z is empty.
inline Matrix ybar_n2(const Assignment& z, const Assignment& z_star, const SbmParams& star) {
  const Matrix r = confusion_matrix(z, z_star);
  const Matrix num = r.transpose() * sstar_matrix(star) * r;
  const Vector pz = r.colwise().sum().transpose();
  Matrix out = Matrix::Zero(num.rows(), num.cols());
  for (Eigen::Index a = 0; a < num.rows(); ++a)
    for (Eigen::Index b = 0; b < num.cols(); ++b)
      if (pz(a) > 0.0 && pz(b) > 0.0) out(a, b) = num(a, b) / (pz(a) * pz(b));
  return out;
}

/// E[y_hat_ql(z) | z*, at least one observed dyad in (q, l)], exact at finite
/// n: the average of S*_{z*_i z*_j} over ordered pairs i != j with z_i = q,
/// z_j = l (rho integrates out). Zero for cells without any pair.
inline Matrix ybar(const Assignment& z, const Assignment& z_star, const SbmParams& star) {
  const Matrix c = detail::cooccurrence_counts(z, z_star);
  const Matrix s = sstar_matrix(star);
  Matrix num = c.transpose() * s * c;
  const Vector sizes = c.colwise().sum().transpose();
  Matrix pairs = sizes * sizes.transpose();
  for (Eigen::Index q = 0; q < c.cols(); ++q) {
    for (Eigen::Index qs = 0; qs < c.rows(); ++qs) num(q, q) -= c(qs, q) * s(qs, qs);
    pairs(q, q) -= sizes(q);
  }
  Matrix out = Matrix::Zero(num.rows(), num.cols());
  for (Eigen::Index a = 0; a < num.rows(); ++a)
    for (Eigen::Index b = 0; b < num.cols(); ++b)
      if (pairs(a, b) > 0.0) out(a, b) = num(a, b) / pairs(a, b);
  return out;
}

/// ELR(theta, z) = E[LR(theta, z) | z*] = -rho sum_{i != j} KL(a*_{z*_i z*_j}, a_{z_i z_j}).
inline double elr(const SbmParams& params, const Assignment& z, const Assignment& z_star, const SbmParams& star,
                  double rho) {
  if (z.size() != z_star.size() || params.num_blocks() != star.num_blocks()) throw SizeError("elr: dimension mismatch");
  const Matrix c = detail::cooccurrence_counts(z, z_star);
  const int q = params.num_blocks();
  double total = 0.0;
  for (int a = 0; a < q; ++a)
    for (int a2 = 0; a2 < q; ++a2) {
      if (c(a, a2) == 0.0) continue;
      for (int b = 0; b < q; ++b)
        for (int b2 = 0; b2 < q; ++b2) {
          if (c(b, b2) == 0.0) continue;
          double pairs = c(a, a2) * c(b, b2);
          if (a == b && a2 == b2) pairs -= c(a, a2);  // drop i == j
          if (pairs != 0.0) total += pairs * star.family.kl(star.conn(a, b), params.conn(a2, b2));
        }
    }
  return -rho * total;
}

/// The n^2 form: -rho n^2 sum R_{qq'} R_{ll'} KL(a*_ql, a_q'l').
inline double elr_n2(const SbmParams& params, const Assignment& z, const Assignment& z_star, const SbmParams& star,
                     double rho) {
  const Matrix r = confusion_matrix(z, z_star);
  const int q = params.num_blocks();
  const double n = z.size();
  double total = 0.0;
  for (int a = 0; a < q; ++a)
    for (int a2 = 0; a2 < q; ++a2)
      for (int b = 0; b < q; ++b)
        for (int b2 = 0; b2 < q; ++b2)
          if (r(a, a2) * r(b, b2) != 0.0) total += r(a, a2) * r(b, b2) * star.family.kl(star.conn(a, b), params.conn(a2, b2));
  return -rho * n * n * total;
}

namespace detail {

/// (psi')^-1 of the expected cell means; cells with no weight get 0 (they do
/// not enter the ELR).
inline SbmParams profile_params(const Matrix& means, const SbmParams& star, const Vector& props) {
  SbmParams p{props, Matrix::Zero(means.rows(), means.cols()), star.family};
  for (Eigen::Index a = 0; a < means.rows(); ++a)
    for (Eigen::Index b = 0; b < means.cols(); ++b) {
      const auto r = star.family.mean_range();
      if (means(a, b) > r.lo && means(a, b) < r.hi) p.conn(a, b) = star.family.natural_from_mean(means(a, b));
    }
  return p;
}

}  // namespace detail

/// Connectivity maximizing elr(., z): (psi')^-1(ybar(z)).
inline SbmParams profile_maximizer(const Assignment& z, const Assignment& z_star, const SbmParams& star) {
  const Matrix r = confusion_matrix(z, z_star);
  return detail::profile_params(ybar(z, z_star, star), star, r.colwise().sum().transpose());
}

/// Lambda~(z) = max over connectivity of elr(., z).
inline double profile_elr(const Assignment& z, const Assignment& z_star, const SbmParams& star, double rho) {
  return elr(profile_maximizer(z, z_star, star), z, z_star, star, rho);
}

inline double profile_elr_n2(const Assignment& z, const Assignment& z_star, const SbmParams& star, double rho) {
  const Matrix r = confusion_matrix(z, z_star);
  const SbmParams p = detail::profile_params(ybar_n2(z, z_star, star), star, r.colwise().sum().transpose());
  return elr_n2(p, z, z_star, star, rho);
}

// ---------------------------------------------------------------------------
// Local asymptotic normality

struct LanDirection {
  Vector s;  // proportions direction, scaled by 1/sqrt(n)
  Matrix u;  // connectivity direction, scaled by 1/sqrt(n(n-1))
};

struct LanResult {
  double linear;            // (f(1) - f(-1)) / 2
  double curvature;         // f(1) + f(-1), the second difference
  double theory_curvature;  // -(sum_q s_q^2 / p_q + sum_ql u_ql^2 rho p_q p_l psi''(a_ql))
  double discrepancy;       // curvature - theory_curvature
};

/// f(t) = L(theta* + t (s / sqrt(n), u / sqrt(n(n-1)))) - L(theta*) on the
/// complete-observed likelihood; central second differences at t = +-1.
/// The theoretical curvature is the Fisher information of the two blocks
/// (Diag(1/p) for proportions, rho p_q p_l psi'' per cell).
inline std::vector<LanResult> lan_curvature_check(const ObservedGraph& g, const Assignment& z_star,
                                                  const SbmParams& star, double rho,
                                                  const std::vector<LanDirection>& directions) {
  const double n = g.n();
  const double base = complete_log_likelihood_unchecked(g, z_star, star);
  std::vector<LanResult> out;
  for (const auto& d : directions) {
    if (d.s.size() != star.num_blocks() || d.u.rows() != star.num_blocks() || d.u.cols() != star.num_blocks())
      throw SizeError("lan_curvature_check: direction shape mismatch");
    auto f = [&](double t) {
      SbmParams p = star;
      p.props += t * d.s / std::sqrt(n);
      p.conn += t * d.u / std::sqrt(n * (n - 1.0));
      return complete_log_likelihood_unchecked(g, z_star, p) - base;
    };
    const double fp = f(1.0), fm = f(-1.0);
    double theory = 0.0;
    for (int a = 0; a < star.num_blocks(); ++a) {
      theory += d.s(a) * d.s(a) / star.props(a);
      for (int b = 0; b < star.num_blocks(); ++b)
        theory += d.u(a, b) * d.u(a, b) * rho * star.props(a) * star.props(b) * star.family.variance(star.conn(a, b));
    }
    const double curv = fp + fm;
    out.push_back({0.5 * (fp - fm), curv, -theory, curv + theory});
  }
  return out;
}

}  // namespace sbm
