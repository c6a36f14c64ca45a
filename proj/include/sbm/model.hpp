#pragma once

// SBM parameter and assignment containers, label permutations, symmetry
// detection, confusion matrices and permutation-invariant distances.
//
// Blocks are 0-based in memory (0..Q-1); files and the CLI use 1-based labels.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "sbm/errors.hpp"
#include "sbm/expfam.hpp"

namespace sbm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A permutation s of {0..Q-1}, stored as s[q] = s(q).
using Permutation = std::vector<int>;

inline constexpr int kMaxExhaustiveQ = 8;

struct SbmParams {
  Vector props;  // block proportions
  Matrix conn;   // natural parameters, conn(q, l) for blocks (q, l)
  ExpFamily family = ExpFamily::bernoulli();

  int num_blocks() const noexcept { return static_cast<int>(props.size()); }

  /// Builds parameters from a matrix of mean values.
  static SbmParams from_means(Vector props, const Matrix& means, ExpFamily family) {
    Matrix conn(means.rows(), means.cols());
    for (Eigen::Index q = 0; q < means.rows(); ++q)
      for (Eigen::Index l = 0; l < means.cols(); ++l) conn(q, l) = family.natural_from_mean(means(q, l));
    return SbmParams{std::move(props), std::move(conn), family};
  }

  Matrix means() const {
    Matrix m(conn.rows(), conn.cols());
    for (Eigen::Index q = 0; q < conn.rows(); ++q)
      for (Eigen::Index l = 0; l < conn.cols(); ++l) m(q, l) = family.mean(conn(q, l));
    return m;
  }

  /// Checks shapes, that props is a probability vector (within 1e-12) with
  /// entries in [c, 1 - c], and that every connectivity entry is in the clamp
  /// interval. c = 0 only requires nonnegativity; Q = 1 skips the upper bound.
  void validate(double c = 0.0) const {
    const auto q = props.size();
    if (q < 1 || conn.rows() != q || conn.cols() != q) throw SizeError("params: props/conn shape mismatch");
    if (std::abs(props.sum() - 1.0) > 1e-12) throw DomainError("params: proportions must sum to 1");
    for (Eigen::Index k = 0; k < q; ++k) {
      if (!(props(k) >= c) || (q > 1 && !(props(k) <= 1.0 - c)))
        throw DomainError("params: proportion outside [c, 1-c]");
    }
    for (Eigen::Index k = 0; k < conn.size(); ++k) {
      if (!family.clamp_interval().contains(conn.data()[k]))
        throw DomainError("params: connectivity outside the clamp interval");
    }
  }
};

/// The matrix S* = (psi'(conn_ql)) of mean parameters.
inline Matrix sstar_matrix(const SbmParams& p) { return p.means(); }

class Assignment {
 public:
  Assignment() = default;

  Assignment(std::vector<int> labels, int num_blocks) : labels_(std::move(labels)), q_(num_blocks) {
    if (q_ < 1) throw ConfigError("assignment: Q must be positive");
    for (int z : labels_)
      if (z < 0 || z >= q_) throw DomainError("assignment: label outside 0..Q-1");
  }

  static Assignment from_one_based(std::span<const int> labels, int num_blocks) {
    std::vector<int> z(labels.begin(), labels.end());
    for (int& v : z) --v;
    return Assignment(std::move(z), num_blocks);
  }

  std::vector<int> one_based() const {
    std::vector<int> out(labels_);
    for (int& v : out) ++v;
    return out;
  }

  int size() const noexcept { return static_cast<int>(labels_.size()); }
  int num_blocks() const noexcept { return q_; }
  int operator[](std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const noexcept { return labels_; }

  std::vector<int> block_sizes() const {
    std::vector<int> counts(static_cast<std::size_t>(q_), 0);
    for (int z : labels_) ++counts[static_cast<std::size_t>(z)];
    return counts;
  }

  Matrix one_hot() const {
    Matrix m = Matrix::Zero(size(), q_);
    for (int i = 0; i < size(); ++i) m(i, labels_[static_cast<std::size_t>(i)]) = 1.0;
    return m;
  }

  friend bool operator==(const Assignment&, const Assignment&) = default;

 private:
  std::vector<int> labels_;
  int q_ = 0;
};

// ---------------------------------------------------------------------------
// Permutations

inline bool is_permutation_of_q(const Permutation& s, int q) {
  if (static_cast<int>(s.size()) != q) return false;
  std::vector<char> seen(static_cast<std::size_t>(q), 0);
  for (int v : s) {
    if (v < 0 || v >= q || seen[static_cast<std::size_t>(v)]) return false;
    seen[static_cast<std::size_t>(v)] = 1;
  }
  return true;
}

inline Permutation identity_permutation(int q) {
  Permutation s(static_cast<std::size_t>(q));
  std::iota(s.begin(), s.end(), 0);
  return s;
}

inline Permutation inverse(const Permutation& s) {
  Permutation inv(s.size());
  for (std::size_t q = 0; q < s.size(); ++q) inv[static_cast<std::size_t>(s[q])] = static_cast<int>(q);
  return inv;
}

/// (s o t)(q) = s(t(q))
inline Permutation compose(const Permutation& s, const Permutation& t) {
  Permutation out(t.size());
  for (std::size_t q = 0; q < t.size(); ++q) out[q] = s[static_cast<std::size_t>(t[q])];
  return out;
}

/// All Q! permutations in lexicographic order.
inline std::vector<Permutation> all_permutations(int q) {
  if (q > kMaxExhaustiveQ) throw SizeError("exhaustive permutation search requires Q <= 8");
  std::vector<Permutation> out;
  Permutation s = identity_permutation(q);
  do out.push_back(s);
  while (std::next_permutation(s.begin(), s.end()));
  return out;
}

/// props^s_q = props_{s(q)}, conn^s_{ql} = conn_{s(q) s(l)}.
inline SbmParams apply_permutation(const SbmParams& p, const Permutation& s) {
  const int q = p.num_blocks();
  if (!is_permutation_of_q(s, q)) throw SizeError("apply_permutation: not a permutation of the blocks");
  SbmParams out = p;
  for (int a = 0; a < q; ++a) {
    out.props(a) = p.props(s[static_cast<std::size_t>(a)]);
    for (int b = 0; b < q; ++b) out.conn(a, b) = p.conn(s[static_cast<std::size_t>(a)], s[static_cast<std::size_t>(b)]);
  }
  return out;
}

/// Column permutation of the one-hot matrix: z^s_{iq} = z_{i s(q)}, so a node
/// with label k moves to label s^-1(k). (params^s, z^s) is then a label switch
/// of (params, z).
inline Assignment apply_permutation(const Assignment& z, const Permutation& s) {
  if (!is_permutation_of_q(s, z.num_blocks())) throw SizeError("apply_permutation: not a permutation of the blocks");
  const Permutation inv = inverse(s);
  std::vector<int> labels(z.labels());
  for (int& v : labels) v = inv[static_cast<std::size_t>(v)];
  return Assignment(std::move(labels), z.num_blocks());
}

/// Max-norm distance between (props, conn) of two parameter sets.
inline double param_discrepancy(const SbmParams& x, const SbmParams& y) {
  if (x.num_blocks() != y.num_blocks()) throw SizeError("param_discrepancy: Q mismatch");
  return std::max((x.props - y.props).cwiseAbs().maxCoeff(), (x.conn - y.conn).cwiseAbs().maxCoeff());
}

inline constexpr double kSymmetryTol = 1e-9;

/// Sym(params): every permutation that leaves (props, conn) unchanged within tol.
inline std::vector<Permutation> symmetry_group(const SbmParams& p, double tol = kSymmetryTol) {
  std::vector<Permutation> out;
  for (const auto& s : all_permutations(p.num_blocks()))
    if (param_discrepancy(apply_permutation(p, s), p) <= tol) out.push_back(s);
  return out;
}

/// R(z)_{q q'} = (1/n) sum_i z*_{iq} z_{iq'}.
inline Matrix confusion_matrix(const Assignment& z, const Assignment& z_star) {
  if (z.size() != z_star.size() || z.num_blocks() != z_star.num_blocks())
    throw SizeError("confusion_matrix: dimension mismatch");
  const int n = z.size();
  Matrix r = Matrix::Zero(z.num_blocks(), z.num_blocks());
  if (n == 0) return r;
  for (int i = 0; i < n; ++i) r(z_star[static_cast<std::size_t>(i)], z[static_cast<std::size_t>(i)]) += 1.0;
  return r / static_cast<double>(n);
}

struct PermutedDistance {
  int distance;
  Permutation best_perm;  // apply_permutation(z, best_perm) attains the distance
};

/// ||z - z*||_{0,~}: number of mismatched nodes minimized over relabelings of z.
/// Ties keep the lexicographically smallest permutation.
inline PermutedDistance hamming_distance_up_to_perm(const Assignment& z, const Assignment& z_star) {
  if (z.size() != z_star.size() || z.num_blocks() != z_star.num_blocks())
    throw SizeError("hamming_distance_up_to_perm: dimension mismatch");
  PermutedDistance best{std::numeric_limits<int>::max(), {}};
  for (const auto& s : all_permutations(z.num_blocks())) {
    // relabeled label of node i is s^-1(z_i); compare without materializing
    const Permutation inv = inverse(s);
    int d = 0;
    for (int i = 0; i < z.size(); ++i)
      d += inv[static_cast<std::size_t>(z[static_cast<std::size_t>(i)])] != z_star[static_cast<std::size_t>(i)];
    if (d < best.distance) best = {d, s};
  }
  return best;
}

inline bool is_c_regular(const Assignment& z, double c) {
  const auto sizes = z.block_sizes();
  const int smallest = *std::min_element(sizes.begin(), sizes.end());
  return static_cast<double>(smallest) >= c * static_cast<double>(z.size());
}

struct Distinctness {
  double delta;
  bool degenerate;  // two identical connectivity rows
};

/// delta = min over q != q' of max over l of KL(conn_ql, conn_q'l).
inline Distinctness class_distinctness_report(const SbmParams& p) {
  const int q = p.num_blocks();
  if (q < 2) return {std::numeric_limits<double>::infinity(), false};
  double delta = std::numeric_limits<double>::infinity();
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b) {
      if (a == b) continue;
      double best = 0.0;
      for (int l = 0; l < q; ++l) best = std::max(best, p.family.kl(p.conn(a, l), p.conn(b, l)));
      delta = std::min(delta, best);
    }
  return {delta, delta == 0.0};
}

inline double class_distinctness(const SbmParams& p) { return class_distinctness_report(p).delta; }

/// The permutation t minimizing param_discrepancy(apply_permutation(hat, t), star).
/// Ties keep the lexicographically smallest t.
inline Permutation align(const SbmParams& hat, const SbmParams& star) {
  if (hat.num_blocks() != star.num_blocks()) throw SizeError("align: Q mismatch");
  Permutation best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& t : all_permutations(hat.num_blocks())) {
    const double d = param_discrepancy(apply_permutation(hat, t), star);
    if (d < best_d) {
      best_d = d;
      best = t;
    }
  }
  return best;
}

}  // namespace sbm
