#pragma once

// Observation masks for the random dyad, random node and double standard
// sampling designs.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "sbm/errors.hpp"

namespace sbm {

/// Square boolean observation matrix with a permanently false diagonal.
class Mask {
 public:
  Mask() = default;
  explicit Mask(int n, bool fill = false) : n_(n), bits_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), fill) {
    for (int i = 0; i < n_; ++i) bits_[index(i, i)] = false;
  }

  static Mask full(int n) { return Mask(n, true); }

  int n() const noexcept { return n_; }

  bool operator()(int i, int j) const { return bits_[index(i, j)] != 0; }

  void set(int i, int j, bool observed) {
    if (i == j) {
      if (observed) throw DomainError("mask: self-dyads cannot be observed");
      return;
    }
    bits_[index(i, j)] = observed;
  }

  long long count_observed() const {
    long long c = 0;
    for (auto b : bits_) c += b;
    return c;
  }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j);
  }

  int n_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct RandomDyad {
  double rho;
};
struct RandomNode {
  double rho;
};
struct DoubleStandard {
  double rho0;
  double rho1;
};

struct MaskDesign {
  std::variant<RandomDyad, RandomNode, DoubleStandard> variant;
  bool symmetric = false;  // r_ij = r_ji (undirected studies)

  bool is_mcar() const noexcept { return !std::holds_alternative<DoubleStandard>(variant); }

  void validate() const {
    auto in_unit = [](double p, bool allow_zero) { return (allow_zero ? p >= 0.0 : p > 0.0) && p <= 1.0; };
    std::visit(
        [&](const auto& d) {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, DoubleStandard>) {
            // (0, 1] per design; 0 is admitted so the extreme edge-indicator design is expressible.
            if (!in_unit(d.rho0, true) || !in_unit(d.rho1, true))
              throw DomainError("double standard probabilities must lie in [0, 1]");
          } else {
            if (!in_unit(d.rho, false)) throw DomainError("sampling rate must lie in (0, 1]");
          }
        },
        variant);
  }

  std::string name() const {
    switch (variant.index()) {
      case 0: return "dyad";
      case 1: return "node";
      default: return "double";
    }
  }

  /// Probability that a given off-diagonal dyad is observed, when it does not
  /// depend on the value.
  std::optional<double> dyad_rate() const {
    if (auto* d = std::get_if<RandomDyad>(&variant)) return d->rho;
    if (auto* d = std::get_if<RandomNode>(&variant)) return 1.0 - (1.0 - d->rho) * (1.0 - d->rho);
    return std::nullopt;
  }
};

/// Random node sampling: node i is selected with probability rho.
template <class URBG>
std::vector<int> sample_node_selection(double rho, int n, URBG& rng) {
  std::bernoulli_distribution pick(rho);
  std::vector<int> selected;
  for (int i = 0; i < n; ++i)
    if (pick(rng)) selected.push_back(i);
  return selected;
}

/// Rows and columns of the selected nodes.
inline Mask mask_from_nodes(const std::vector<int>& selected, int n) {
  Mask m(n);
  for (int i : selected)
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      m.set(i, j, true);
      m.set(j, i, true);
    }
  return m;
}

/// Draws r for the design. `values` is required for DoubleStandard (binary)
/// and never read by the MCAR designs.
template <class URBG>
Mask sample_mask(const MaskDesign& design, const Eigen::MatrixXd* values, int n, URBG& rng) {
  design.validate();
  Mask m(n);
  auto fill = [&](auto&& prob_of) {
    for (int i = 0; i < n; ++i) {
      for (int j = design.symmetric ? i + 1 : 0; j < n; ++j) {
        if (i == j) continue;
        const bool obs = std::bernoulli_distribution(prob_of(i, j))(rng);
        m.set(i, j, obs);
        if (design.symmetric) m.set(j, i, obs);
      }
    }
  };
  if (const auto* d = std::get_if<RandomDyad>(&design.variant)) {
    fill([&](int, int) { return d->rho; });
  } else if (const auto* d = std::get_if<RandomNode>(&design.variant)) {
    m = mask_from_nodes(sample_node_selection(d->rho, n, rng), n);
  } else {
    const auto& ds = std::get<DoubleStandard>(design.variant);
    if (values == nullptr || values->rows() != n || values->cols() != n)
      throw UnsupportedDesignError("double standard sampling needs the full value matrix");
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const double y = (*values)(i, j);
        if (y != 0.0 && y != 1.0) throw UnsupportedDesignError("double standard sampling requires binary values");
      }
    fill([&](int i, int j) { return (*values)(i, j) == 1.0 ? ds.rho1 : ds.rho0; });
  }
  return m;
}

/// Fraction of observed dyads among the n(n-1) off-diagonal positions. For
/// random node sampling this is the effective dyad rate, not an estimate of rho.
inline double rho_hat(const Mask& m) {
  const int n = m.n();
  if (n < 2) throw SizeError("rho_hat: need at least two nodes");
  return static_cast<double>(m.count_observed()) / (static_cast<double>(n) * (n - 1));
}

/// Nodes with no observed incident dyad (row or column).
inline std::vector<int> isolated_nodes(const Mask& m) {
  std::vector<int> out;
  for (int i = 0; i < m.n(); ++i) {
    bool any = false;
    for (int j = 0; j < m.n() && !any; ++j) any = m(i, j) || m(j, i);
    if (!any) out.push_back(i);
  }
  return out;
}

inline bool check_no_isolated_node(const Mask& m) { return isolated_nodes(m).empty(); }

}  // namespace sbm
