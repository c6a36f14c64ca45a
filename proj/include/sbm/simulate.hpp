#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "sbm/model.hpp"
#include "sbm/rng.hpp"
#include "sbm/sampling.hpp"

namespace sbm {

/// Marks the diagonal and unobserved dyads in memory; written as NA on disk.
inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

struct ObservedGraph {
  Matrix values;  // meaningful only where mask(i, j) is true
  Mask mask;
  ExpFamily family = ExpFamily::bernoulli();

  int n() const noexcept { return mask.n(); }

  bool observed(int i, int j) const { return mask(i, j); }

  /// Value of an observed dyad. Callers must test observed() first.
  double value(int i, int j) const { return values(i, j); }
};

struct GroundTruth {
  SbmParams params_star;
  Assignment z_star;
  Matrix full_values;  // diagonal undefined
  MaskDesign design;
  std::uint64_t seed = 0;
};

template <class URBG>
Assignment sample_assignment(const Vector& props, int n, URBG& rng) {
  std::discrete_distribution<int> pick(props.data(), props.data() + props.size());
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (auto& z : labels) z = pick(rng);
  return Assignment(std::move(labels), static_cast<int>(props.size()));
}

/// y_ij ~ phi(., conn_{z_i z_j}) independently for i != j. In symmetric mode
/// only i < j is drawn and mirrored.
template <class URBG>
Matrix sample_graph(const SbmParams& params, const Assignment& z, URBG& rng, bool symmetric = false) {
  if (z.num_blocks() != params.num_blocks()) throw SizeError("sample_graph: Q mismatch");
  const int n = z.size();
  Matrix y(n, n);
  for (int i = 0; i < n; ++i) {
    y(i, i) = kUndefined;
    for (int j = symmetric ? i + 1 : 0; j < n; ++j) {
      if (i == j) continue;
      y(i, j) = params.family.sample(params.conn(z[static_cast<std::size_t>(i)], z[static_cast<std::size_t>(j)]), rng);
      if (symmetric) y(j, i) = y(i, j);
    }
  }
  return y;
}

inline ObservedGraph observe(const Matrix& full, const Mask& mask, const ExpFamily& family) {
  ObservedGraph g{Matrix::Constant(mask.n(), mask.n(), kUndefined), mask, family};
  for (int i = 0; i < mask.n(); ++i)
    for (int j = 0; j < mask.n(); ++j)
      if (mask(i, j)) g.values(i, j) = full(i, j);
  return g;
}

/// Draws z*, the full graph, then the mask; MCAR designs never see y.
inline std::pair<ObservedGraph, GroundTruth> simulate_observed(const SbmParams& params, const MaskDesign& design, int n,
                                                               std::uint64_t seed) {
  params.validate();
  design.validate();
  Rng rng(seed);
  Assignment z = sample_assignment(params.props, n, rng);
  Matrix full = sample_graph(params, z, rng, design.symmetric);
  const Mask mask = sample_mask(design, design.is_mcar() ? nullptr : &full, n, rng);
  ObservedGraph g = observe(full, mask, params.family);
  return {std::move(g), GroundTruth{params, std::move(z), std::move(full), design, seed}};
}

}  // namespace sbm
