#pragma once

// Complete-data MLE and mean-field variational EM on the observed dyads of a
// partially sampled weighted SBM. Unobserved entries of the value matrix are
// never read.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "sbm/errors.hpp"
#include "sbm/expfam.hpp"
#include "sbm/model.hpp"
#include "sbm/rng.hpp"
#include "sbm/simulate.hpp"

namespace sbm {

/// n x Q matrix of variational posteriors; rows sum to 1.
using Tau = Matrix;

inline constexpr double kTauFloor = 1e-10;
inline constexpr double kEmptyCellWeight = 1e-12;
inline constexpr double kElboSlack = 1e-9;

struct Cell {
  int q;
  int l;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Dense observed-dyad statistics: r (0/1) and r*y with zeros where unobserved.
struct ObservedStats {
  Matrix r;
  Matrix ry;
  double log_base_sum = 0.0;  // sum of log b(y_ij) over observed dyads
  long long n_observed = 0;
  double value_sum = 0.0;

  ObservedStats(const ObservedGraph& g, const ExpFamily& family) : r(Matrix::Zero(g.n(), g.n())), ry(Matrix::Zero(g.n(), g.n())) {
    for (int j = 0; j < g.n(); ++j)
      for (int i = 0; i < g.n(); ++i) {
        if (!g.observed(i, j)) continue;
        const double y = g.value(i, j);
        log_base_sum += family.log_base(y);  // also enforces the support
        r(i, j) = 1.0;
        ry(i, j) = y;
        value_sum += y;
        ++n_observed;
      }
  }

  std::optional<double> global_mean() const {
    if (n_observed == 0) return std::nullopt;
    return value_sum / static_cast<double>(n_observed);
  }
};

/// Complete-observed log-likelihood log p(Y^o, z; theta), without validating params.
inline double complete_log_likelihood_unchecked(const ObservedGraph& g, const Assignment& z, const SbmParams& p) {
  const int n = g.n();
  double ll = 0.0;
  for (int i = 0; i < n; ++i) ll += std::log(p.props(z[static_cast<std::size_t>(i)]));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j || !g.observed(i, j)) continue;
      ll += p.family.log_density(g.value(i, j), p.conn(z[static_cast<std::size_t>(i)], z[static_cast<std::size_t>(j)]));
    }
  return ll;
}

inline double complete_log_likelihood(const ObservedGraph& g, const Assignment& z, const SbmParams& p) {
  if (z.size() != g.n() || z.num_blocks() != p.num_blocks()) throw SizeError("complete_log_likelihood: dimension mismatch");
  p.validate();
  return complete_log_likelihood_unchecked(g, z, p);
}

struct MStepResult {
  SbmParams params;
  std::vector<Cell> empty_cells;
  std::vector<int> floored_blocks;
};

/// Closed-form MLE with known labels: block frequencies and the inverted
/// observed within-cell mean. Empty cells fall back to the global observed mean.
inline MStepResult complete_mle_detailed(const ObservedGraph& g, const Assignment& z) {
  if (z.size() != g.n()) throw SizeError("complete_mle: dimension mismatch");
  const int q = z.num_blocks();
  const int n = g.n();
  Matrix sum = Matrix::Zero(q, q);
  Matrix count = Matrix::Zero(q, q);
  double total = 0.0;
  long long total_count = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j || !g.observed(i, j)) continue;
      const double y = g.value(i, j);
      g.family.check_support(y);
      sum(z[static_cast<std::size_t>(i)], z[static_cast<std::size_t>(j)]) += y;
      count(z[static_cast<std::size_t>(i)], z[static_cast<std::size_t>(j)]) += 1.0;
      total += y;
      ++total_count;
    }
  if (total_count == 0) throw EstimationError("complete_mle: no observed dyad in any cell");

  MStepResult out{SbmParams{Vector(q), Matrix(q, q), g.family}, {}, {}};
  const auto sizes = z.block_sizes();
  for (int k = 0; k < q; ++k) out.params.props(k) = static_cast<double>(sizes[static_cast<std::size_t>(k)]) / n;
  const double fallback = g.family.clamped_natural_from_mean(total / static_cast<double>(total_count));
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b) {
      if (count(a, b) == 0.0) {
        out.params.conn(a, b) = fallback;
        out.empty_cells.push_back({a, b});
      } else {
        out.params.conn(a, b) = g.family.clamped_natural_from_mean(sum(a, b) / count(a, b));
      }
    }
  return out;
}

inline SbmParams complete_mle(const ObservedGraph& g, const Assignment& z) { return complete_mle_detailed(g, z).params; }

/// Normalizes a nonnegative row, clamps it into [1e-10, 1 - 1e-10], and
/// hands the rounding residual to the largest entry so the row sums to 1.
template <class Row>
void clamp_row(Row&& t) {
  t /= t.sum();
  Eigen::Index top = 0;
  for (Eigen::Index k = 0; k < t.size(); ++k) {
    t(k) = std::clamp(t(k), kTauFloor, 1.0 - kTauFloor);
    if (t(k) > t(top)) top = k;
  }
  t(top) = 0.0;
  t(top) = 1.0 - t.sum();
}

inline void normalize_tau(Tau& tau) {
  for (Eigen::Index i = 0; i < tau.rows(); ++i) clamp_row(tau.row(i));
}

inline Tau tau_from_assignment(const Assignment& z, bool clamp = true) {
  Tau t = z.one_hot();
  if (clamp) normalize_tau(t);
  return t;
}

/// Row-wise argmax of tau, ties to the smallest block index.
inline Assignment map_assignment(const Tau& tau) {
  std::vector<int> labels(static_cast<std::size_t>(tau.rows()));
  for (Eigen::Index i = 0; i < tau.rows(); ++i) {
    int best = 0;
    for (int k = 1; k < tau.cols(); ++k)
      if (tau(i, k) > tau(i, best)) best = k;
    labels[static_cast<std::size_t>(i)] = best;
  }
  return Assignment(std::move(labels), static_cast<int>(tau.cols()));
}

namespace detail {

inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

inline double entropy(const Tau& tau) {
  double h = 0.0;
  for (Eigen::Index k = 0; k < tau.size(); ++k) h -= xlogx(tau.data()[k]);
  return h;
}

/// Weighted cell sums S = tau' (r*y) tau and counts N = tau' r tau.
struct CellSums {
  Matrix s;
  Matrix count;
};

inline CellSums cell_sums(const ObservedStats& st, const Tau& tau) {
  return {tau.transpose() * st.ry * tau, tau.transpose() * st.r * tau};
}

inline double props_term(const Vector& block_mass, const Vector& props) {
  double t = 0.0;
  for (Eigen::Index k = 0; k < props.size(); ++k)
    if (block_mass(k) > 0.0) t += block_mass(k) * std::log(props(k));
  return t;
}

inline double cell_term(const ExpFamily& f, double s, double count, double a) {
  return a * s - f.log_partition(a) * count;
}

}  // namespace detail

/// The variational objective, with the observed-dyad statistics cached.
class VariationalProblem {
 public:
  VariationalProblem(const ObservedGraph& g, ExpFamily family) : family_(family), stats_(g, family) {}

  int n() const noexcept { return static_cast<int>(stats_.r.rows()); }
  const ExpFamily& family() const noexcept { return family_; }
  const ObservedStats& stats() const noexcept { return stats_; }

  /// J(tau, theta) = E_tau[complete-observed log-likelihood] + H(tau).
  double elbo(const Tau& tau, const SbmParams& p) const {
    check(tau, p.num_blocks());
    const auto sums = detail::cell_sums(stats_, tau);
    const Vector mass = tau.colwise().sum().transpose();
    double j = detail::props_term(mass, p.props) + stats_.log_base_sum + detail::entropy(tau);
    for (int a = 0; a < p.num_blocks(); ++a)
      for (int b = 0; b < p.num_blocks(); ++b) j += detail::cell_term(family_, sums.s(a, b), sums.count(a, b), p.conn(a, b));
    return j;
  }

  /// One sequential sweep of mean-field updates over the nodes. Each row is
  /// replaced by the clamped softmax of its linear coefficients only when that
  /// does not lower J; the rows of the other nodes are held fixed.
  Tau e_step(const Tau& tau_in, const SbmParams& p) const {
    check(tau_in, p.num_blocks());
    const int q = p.num_blocks();
    Tau tau = tau_in;
    Vector log_props(q);
    for (int k = 0; k < q; ++k) log_props(k) = std::log(p.props(k));
    Matrix log_partition(q, q);
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b) log_partition(a, b) = family_.log_partition(p.conn(a, b));

    Vector coef(q), cand(q);
    for (int i = 0; i < n(); ++i) {
      // Dyads (i, j) and (j, i), j != i; the zero diagonal of r drops j = i.
      const Eigen::RowVectorXd out_s = stats_.ry.row(i) * tau;
      const Eigen::RowVectorXd out_n = stats_.r.row(i) * tau;
      const Eigen::RowVectorXd in_s = stats_.ry.col(i).transpose() * tau;
      const Eigen::RowVectorXd in_n = stats_.r.col(i).transpose() * tau;
      for (int a = 0; a < q; ++a) {
        double c = log_props(a);
        for (int l = 0; l < q; ++l) {
          c += p.conn(a, l) * out_s(l) - log_partition(a, l) * out_n(l);
          c += p.conn(l, a) * in_s(l) - log_partition(l, a) * in_n(l);
        }
        coef(a) = c;
      }
      const double mx = coef.maxCoeff();
      for (int a = 0; a < q; ++a) cand(a) = std::exp(coef(a) - mx);
      clamp_row(cand);

      auto row_objective = [&](const auto& t) {
        double v = 0.0;
        for (int a = 0; a < q; ++a) v += t(a) * coef(a) - detail::xlogx(t(a));
        return v;
      };
      if (row_objective(cand) >= row_objective(tau.row(i))) tau.row(i) = cand.transpose();
    }
    return tau;
  }

  /// tau-weighted closed forms. Proportions are floored at `floor` and
  /// renormalized; cell means are clamped into the family's clamp interval.
  /// With `previous`, any component whose closed form would lower J is kept.
  MStepResult m_step(const Tau& tau, int q, double floor = 1e-4, const SbmParams* previous = nullptr) const {
    check(tau, q);
    const auto sums = detail::cell_sums(stats_, tau);
    const Vector mass = tau.colwise().sum().transpose();
    MStepResult out{SbmParams{Vector(q), Matrix(q, q), family_}, {}, {}};

    Vector props = mass / static_cast<double>(std::max(n(), 1));
    for (int k = 0; k < q; ++k)
      if (props(k) < floor) {
        props(k) = floor;
        out.floored_blocks.push_back(k);
      }
    props /= props.sum();
    if (previous != nullptr && detail::props_term(mass, props) < detail::props_term(mass, previous->props))
      props = previous->props;
    out.params.props = props;

    const auto gm = stats_.global_mean();
    const double fallback = gm ? family_.clamped_natural_from_mean(*gm) : 0.0;
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b) {
        double c;
        if (sums.count(a, b) <= kEmptyCellWeight) {
          c = fallback;
          out.empty_cells.push_back({a, b});
        } else {
          c = family_.clamped_natural_from_mean(sums.s(a, b) / sums.count(a, b));
        }
        if (previous != nullptr) {
          const double old = previous->conn(a, b);
          if (detail::cell_term(family_, sums.s(a, b), sums.count(a, b), c) <
              detail::cell_term(family_, sums.s(a, b), sums.count(a, b), old))
            c = old;
        }
        out.params.conn(a, b) = c;
      }
    return out;
  }

 private:
  void check(const Tau& tau, int q) const {
    if (tau.rows() != n() || tau.cols() != q) throw SizeError("tau has the wrong shape");
  }

  ExpFamily family_;
  ObservedStats stats_;
};

inline Tau e_step(const ObservedGraph& g, const Tau& tau, const SbmParams& p) {
  return VariationalProblem(g, p.family).e_step(tau, p);
}

inline SbmParams m_step(const ObservedGraph& g, const Tau& tau, double floor = 1e-4) {
  return VariationalProblem(g, g.family).m_step(tau, static_cast<int>(tau.cols()), floor).params;
}

inline double elbo(const ObservedGraph& g, const Tau& tau, const SbmParams& p) {
  return VariationalProblem(g, p.family).elbo(tau, p);
}

/// log sum_z p(Y^o, z; theta) by enumeration of all Q^n assignments.
inline double exact_observed_loglik(const ObservedGraph& g, const SbmParams& p) {
  const int n = g.n();
  const int q = p.num_blocks();
  double total = 1.0;
  for (int i = 0; i < n; ++i) {
    total *= q;
    if (total > 1e6) throw SizeError("exact_observed_loglik: Q^n exceeds 1e6");
  }
  p.validate();
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(total));
  while (true) {
    terms.push_back(complete_log_likelihood_unchecked(g, Assignment(labels, q), p));
    int pos = 0;
    while (pos < n && ++labels[static_cast<std::size_t>(pos)] == q) labels[static_cast<std::size_t>(pos++)] = 0;
    if (pos == n) break;
  }
  const double mx = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - mx);
  return mx + std::log(acc);
}

// ---------------------------------------------------------------------------
// Variational EM driver

enum class InitKind { KMeansOnRows, Random, Warm };

struct FitConfig {
  int n_restarts = 10;
  int max_iters = 200;
  double elbo_rel_tol = 1e-6;
  InitKind init = InitKind::KMeansOnRows;
  std::optional<Tau> warm_tau;  // used when init == Warm
  double prop_floor = 1e-4;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_restarts < 1 || max_iters < 1 || !(elbo_rel_tol > 0.0) || !(prop_floor > 0.0) || prop_floor >= 1.0)
      throw ConfigError("fit config: counts and tolerances must be positive");
    if (init == InitKind::Warm && !warm_tau) throw ConfigError("fit config: warm start needs a tau");
  }
};

struct FitResult {
  SbmParams params;
  Tau tau;
  std::vector<double> elbo_trace;
  int n_iters = 0;
  bool converged = false;
  int restart_id = 0;
  Assignment map_labels;
  std::vector<Cell> empty_cells;     // in the final M-step
  std::vector<int> floored_blocks;   // in the final M-step
  int floor_events = 0;              // M-steps, over the whole run, that floored a block
  // ELBO steps and decreases beyond kElboSlack, summed over every restart.
  int elbo_steps = 0;
  int elbo_decreases = 0;

  double final_elbo() const { return elbo_trace.empty() ? -std::numeric_limits<double>::infinity() : elbo_trace.back(); }
};

namespace detail {

/// Node profiles for k-means: out- and in-values, with missing entries (and
/// the diagonal) replaced by the node's observed mean.
inline Matrix node_profiles(const ObservedStats& st) {
  const Eigen::Index n = st.r.rows();
  const double gm = st.global_mean().value_or(0.0);
  Matrix x(n, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double cnt = st.r.row(i).sum() + st.r.col(i).sum();
    const double fill = cnt > 0 ? (st.ry.row(i).sum() + st.ry.col(i).sum()) / cnt : gm;
    for (Eigen::Index j = 0; j < n; ++j) {
      x(i, j) = st.r(i, j) != 0.0 ? st.ry(i, j) : fill;
      x(i, n + j) = st.r(j, i) != 0.0 ? st.ry(j, i) : fill;
    }
  }
  return x;
}

/// Lloyd's algorithm with k-means++ seeding.
inline std::vector<int> kmeans(const Matrix& x, int k, Rng& rng, int max_iter = 50) {
  const Eigen::Index n = x.rows();
  std::vector<int> label(static_cast<std::size_t>(n), 0);
  if (k == 1 || n == 0) return label;
  Matrix centers(k, x.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centers.row(0) = x.row(first(rng));
  Vector d2(n);
  for (int c = 1; c < k; ++c) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int e = 0; e < c; ++e) best = std::min(best, (x.row(i) - centers.row(e)).squaredNorm());
      d2(i) = best;
    }
    if (d2.sum() <= 0.0) {
      centers.row(c) = x.row(first(rng));
    } else {
      std::discrete_distribution<Eigen::Index> pick(d2.data(), d2.data() + n);
      centers.row(c) = x.row(pick(rng));
    }
  }
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (x.row(i) - centers.row(c)).squaredNorm();
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      changed |= label[static_cast<std::size_t>(i)] != best;
      label[static_cast<std::size_t>(i)] = best;
    }
    if (!changed && it > 0) break;  // first pass always recomputes centers
    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(label[static_cast<std::size_t>(i)]) += x.row(i);
      ++counts[static_cast<std::size_t>(label[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0) centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
  }
  return label;
}

inline Tau random_tau(int n, int q, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, q - 1);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (auto& v : labels) v = pick(rng);
  return tau_from_assignment(Assignment(std::move(labels), q));
}

}  // namespace detail

/// Runs one VEM from tau0: M-step, then alternating E/M until the relative
/// ELBO change drops below tol or max_iters is reached.
inline FitResult vem_run(const VariationalProblem& prob, Tau tau, int q, const FitConfig& cfg, int restart_id = 0) {
  FitResult r;
  r.restart_id = restart_id;
  normalize_tau(tau);
  auto ms = prob.m_step(tau, q, cfg.prop_floor);
  r.floor_events += !ms.floored_blocks.empty();
  SbmParams params = ms.params;
  r.elbo_trace.push_back(prob.elbo(tau, params));
  for (int it = 0; it < cfg.max_iters; ++it) {
    tau = prob.e_step(tau, params);
    ms = prob.m_step(tau, q, cfg.prop_floor, &params);
    r.floor_events += !ms.floored_blocks.empty();
    params = ms.params;
    const double prev = r.elbo_trace.back();
    const double cur = prob.elbo(tau, params);
    r.elbo_trace.push_back(cur);
    r.n_iters = it + 1;
    ++r.elbo_steps;
    r.elbo_decreases += cur < prev - kElboSlack;
    if (std::abs(cur - prev) <= cfg.elbo_rel_tol * std::abs(prev)) {
      r.converged = true;
      break;
    }
  }
  r.empty_cells = ms.empty_cells;
  r.floored_blocks = ms.floored_blocks;
  r.map_labels = map_assignment(tau);
  r.params = std::move(params);
  r.tau = std::move(tau);
  return r;
}

/// Variational EM with restarts; returns the restart with the best final ELBO
/// (ties to the earliest restart). With KMeansOnRows, even restarts use
/// k-means on node profiles and odd restarts use random hard labels.
inline FitResult vem_fit(const ObservedGraph& g, int q, const ExpFamily& family, const FitConfig& cfg) {
  cfg.validate();
  if (q < 1) throw ConfigError("vem_fit: Q must be positive");
  if (q > g.n()) throw ConfigError("vem_fit: Q exceeds the number of nodes");
  const VariationalProblem prob(g, family);
  std::optional<Matrix> profiles;
  std::optional<FitResult> best;
  int steps = 0, decreases = 0;
  for (int rs = 0; rs < cfg.n_restarts; ++rs) {
    Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(rs));
    Tau tau0;
    if (cfg.init == InitKind::Warm && rs == 0) {
      tau0 = *cfg.warm_tau;
      if (tau0.rows() != g.n() || tau0.cols() != q) throw ConfigError("vem_fit: warm tau has the wrong shape");
    } else if (cfg.init == InitKind::KMeansOnRows && rs % 2 == 0) {
      if (!profiles) profiles = detail::node_profiles(prob.stats());
      tau0 = tau_from_assignment(Assignment(detail::kmeans(*profiles, q, rng), q));
    } else {
      tau0 = detail::random_tau(g.n(), q, rng);
    }
    FitResult r = vem_run(prob, std::move(tau0), q, cfg, rs);
    steps += r.elbo_steps;
    decreases += r.elbo_decreases;
    if (!best || r.final_elbo() > best->final_elbo()) best = std::move(r);
  }
  best->elbo_steps = steps;
  best->elbo_decreases = decreases;
  return std::move(*best);
}

}  // namespace sbm
