#pragma once

// Monte Carlo studies of the complete-data MLE and the variational estimator
// under random dyad sampling: proportion and connectivity CLTs, the 1/rho
// variance inflation, the log(n)/n sampling threshold and label recovery.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "sbm/asymptotics.hpp"
#include "sbm/inference.hpp"
#include "sbm/io.hpp"
#include "sbm/model.hpp"
#include "sbm/rng.hpp"
#include "sbm/sampling.hpp"
#include "sbm/simulate.hpp"
#include "sbm/stats.hpp"

namespace sbm {

enum class Study { CltProps, CltConn, RhoInflation, ThresholdSweep, VemRecovery };
enum class Estimator { CompleteMLE, VEM };

inline std::string to_string(Study s) {
  switch (s) {
    case Study::CltProps: return "clt_props";
    case Study::CltConn: return "clt_conn";
    case Study::RhoInflation: return "rho_inflation";
    case Study::ThresholdSweep: return "threshold_sweep";
    case Study::VemRecovery: return "vem_recovery";
  }
  return "";
}

inline Study study_from_string(const std::string& s) {
  for (Study v : {Study::CltProps, Study::CltConn, Study::RhoInflation, Study::ThresholdSweep, Study::VemRecovery})
    if (to_string(v) == s) return v;
  throw ConfigError("unknown study '" + s + "'");
}

inline std::string to_string(Estimator e) { return e == Estimator::CompleteMLE ? "complete_mle" : "vem"; }

inline Estimator estimator_from_string(const std::string& s) {
  if (s == "complete_mle") return Estimator::CompleteMLE;
  if (s == "vem") return Estimator::VEM;
  throw ConfigError("unknown estimator '" + s + "'");
}

struct GridPoint {
  int n;
  double rho;
};

struct ExperimentConfig {
  Study study = Study::CltProps;
  std::vector<int> n_grid;
  std::vector<double> rho_grid;               // fixed rates, crossed with n_grid
  std::optional<double> rho_log_constant;     // rho_n = min(1, c log(n) / n), one per n
  SbmParams params_star;
  int replicates = 100;
  std::uint64_t master_seed = 0;
  Estimator estimator = Estimator::CompleteMLE;
  std::string design = "dyad";  // "dyad" | "node"
  int vem_restarts = 3;
  int vem_max_iters = 200;
  double vem_tol = 1e-6;
  double hamming_threshold = 0.02;

  void validate() const {
    if (n_grid.empty() || replicates < 1 || vem_restarts < 1 || vem_max_iters < 1)
      throw ConfigError("experiment: empty grid or non-positive counts");
    for (int n : n_grid)
      if (n < 2) throw ConfigError("experiment: n must be at least 2");
    if (rho_grid.empty() == !rho_log_constant.has_value())
      throw ConfigError("experiment: give exactly one of rho_grid or rho_log_constant");
    for (double r : rho_grid)
      if (!(r > 0.0 && r <= 1.0)) throw ConfigError("experiment: rho must lie in (0, 1]");
    if (rho_log_constant && !(*rho_log_constant > 0.0)) throw ConfigError("experiment: rho constant must be positive");
    if (design != "dyad" && design != "node") throw ConfigError("experiment: design must be dyad or node");
    params_star.validate();
  }

  std::vector<GridPoint> grid() const {
    std::vector<GridPoint> out;
    for (int n : n_grid) {
      if (rho_log_constant) {
        out.push_back({n, std::min(1.0, *rho_log_constant * std::log(static_cast<double>(n)) / n)});
      } else {
        for (double r : rho_grid) out.push_back({n, r});
      }
    }
    return out;
  }

  MaskDesign mask_design(double rho) const {
    MaskDesign d;
    if (design == "node")
      d.variant = RandomNode{rho};
    else
      d.variant = RandomDyad{rho};
    return d;
  }
};

enum class ReplicateStatus { Ok, IsolatedNodes, EmptyCell, NonConverged, Error };

inline std::string to_string(ReplicateStatus s) {
  switch (s) {
    case ReplicateStatus::Ok: return "ok";
    case ReplicateStatus::IsolatedNodes: return "isolated_nodes";
    case ReplicateStatus::EmptyCell: return "empty_cell";
    case ReplicateStatus::NonConverged: return "nonconverged";
    case ReplicateStatus::Error: return "error";
  }
  return "";
}

/// Per-replicate outcome. Flagged replicates keep their estimates; only
/// `Error` replicates carry none.
struct ReplicateResult {
  ReplicateStatus status = ReplicateStatus::Ok;
  std::uint64_t seed = 0;
  Vector props_residual;   // sqrt(n) (p_hat - p*) after alignment
  Matrix conn_residual;    // sqrt(n(n-1)) (a_hat - a*) after alignment
  double conn_error = 0.0; // max_ql |a_hat - a*|
  Permutation alignment;
  std::optional<double> hamming;  // normalized, VEM only
  int elbo_steps = 0;
  int elbo_decreases = 0;
  int isolated_count = 0;
  std::string error;

  bool has_estimate() const noexcept { return status != ReplicateStatus::Error; }
};

struct CellSummary {
  double mean_residual = 0.0;
  double empirical_variance = 0.0;
  double theory_variance = 0.0;
  double relative_error = 0.0;  // |empirical / theory - 1|
  double median_abs_error = 0.0;
  std::optional<NormalitySummary> normality;
};

struct PointReport {
  GridPoint point;
  int replicates = 0;
  int ok = 0;
  int isolated_nodes = 0;
  int empty_cell = 0;
  int nonconverged = 0;
  int errors = 0;
  double isolated_rate = 0.0;
  Vector props_mean_residual;
  Matrix props_covariance;
  Matrix props_theory;
  double props_rel_frobenius = 0.0;
  std::vector<std::vector<CellSummary>> cells;
  double median_conn_error = 0.0;
  std::optional<double> mean_hamming;
  int hamming_within_threshold = 0;
  int elbo_steps = 0;
  int elbo_decreases = 0;
  std::vector<ReplicateResult> replicate_results;
};

struct RhoRatio {
  int n;
  double rho_ref;
  double rho;
  double theory_ratio;   // rho_ref / rho
  Matrix cell_ratios;    // var(rho) / var(rho_ref)
  double pooled_ratio;   // mean of the cell ratios
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<PointReport> points;
  std::vector<RhoRatio> rho_ratios;
  // Median connectivity error per point in grid order.
  std::vector<double> median_conn_errors;
  bool conn_error_strictly_decreasing = false;
};

// ---------------------------------------------------------------------------

/// Worker count: hardware concurrency, capped by SBM_MAX_WORKERS if set.
inline unsigned worker_count() {
  unsigned w = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SBM_MAX_WORKERS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) w = std::min<unsigned>(w, static_cast<unsigned>(cap));
  }
  return w;
}

/// Runs fn(i) for i in [0, count) on a pool; results must be written by index.
template <class Fn>
void parallel_for(int count, Fn&& fn) {
  const unsigned workers = std::min<unsigned>(worker_count(), static_cast<unsigned>(std::max(count, 1)));
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

inline ReplicateResult run_replicate(const ExperimentConfig& cfg, const GridPoint& pt, std::uint64_t seed) {
  ReplicateResult rr;
  rr.seed = seed;
  try {
    const auto [g, truth] = simulate_observed(cfg.params_star, cfg.mask_design(pt.rho), pt.n, seed);
    rr.isolated_count = static_cast<int>(isolated_nodes(g.mask).size());
    const int q = cfg.params_star.num_blocks();
    SbmParams est;
    bool empty = false, converged = true;
    if (cfg.estimator == Estimator::CompleteMLE) {
      auto m = complete_mle_detailed(g, truth.z_star);
      empty = !m.empty_cells.empty();
      est = std::move(m.params);
    } else {
      FitConfig fc;
      fc.n_restarts = cfg.vem_restarts;
      fc.max_iters = cfg.vem_max_iters;
      fc.elbo_rel_tol = cfg.vem_tol;
      fc.seed = derive_seed(seed, 0xf17);
      FitResult fit = vem_fit(g, q, cfg.params_star.family, fc);
      empty = !fit.empty_cells.empty();
      converged = fit.converged;
      rr.elbo_steps = fit.elbo_steps;
      rr.elbo_decreases = fit.elbo_decreases;
      rr.hamming = static_cast<double>(hamming_distance_up_to_perm(fit.map_labels, truth.z_star).distance) / pt.n;
      est = std::move(fit.params);
    }
    rr.alignment = align(est, cfg.params_star);
    const SbmParams aligned = apply_permutation(est, rr.alignment);
    const double n = pt.n;
    rr.props_residual = std::sqrt(n) * (aligned.props - cfg.params_star.props);
    rr.conn_residual = std::sqrt(n * (n - 1.0)) * (aligned.conn - cfg.params_star.conn);
    rr.conn_error = (aligned.conn - cfg.params_star.conn).cwiseAbs().maxCoeff();
    if (rr.isolated_count > 0)
      rr.status = ReplicateStatus::IsolatedNodes;
    else if (empty)
      rr.status = ReplicateStatus::EmptyCell;
    else if (!converged)
      rr.status = ReplicateStatus::NonConverged;
  } catch (const std::exception& e) {
    rr.status = ReplicateStatus::Error;
    rr.error = e.what();
  }
  return rr;
}

inline PointReport summarize_point(const ExperimentConfig& cfg, const GridPoint& pt, std::vector<ReplicateResult> results) {
  PointReport pr;
  pr.point = pt;
  pr.replicates = static_cast<int>(results.size());
  const int q = cfg.params_star.num_blocks();
  std::vector<const ReplicateResult*> est;
  int with_isolated = 0;
  for (const auto& r : results) {
    switch (r.status) {
      case ReplicateStatus::Ok: ++pr.ok; break;
      case ReplicateStatus::IsolatedNodes: ++pr.isolated_nodes; break;
      case ReplicateStatus::EmptyCell: ++pr.empty_cell; break;
      case ReplicateStatus::NonConverged: ++pr.nonconverged; break;
      case ReplicateStatus::Error: ++pr.errors; break;
    }
    with_isolated += r.isolated_count > 0;
    pr.elbo_steps += r.elbo_steps;
    pr.elbo_decreases += r.elbo_decreases;
    if (r.has_estimate()) est.push_back(&r);
  }
  pr.isolated_rate = static_cast<double>(with_isolated) / std::max(pr.replicates, 1);

  const auto m = static_cast<Eigen::Index>(est.size());
  Matrix props_samples(m, q);
  for (Eigen::Index k = 0; k < m; ++k) props_samples.row(k) = est[static_cast<std::size_t>(k)]->props_residual.transpose();
  pr.props_theory = sigma_props(cfg.params_star.props);
  if (m >= 2) {
    pr.props_mean_residual = props_samples.colwise().mean().transpose();
    pr.props_covariance = sample_covariance(props_samples);
    pr.props_rel_frobenius = (pr.props_covariance - pr.props_theory).norm() / pr.props_theory.norm();
  }

  const Matrix theory = sigma_conn(cfg.params_star, pt.rho);
  const double scale = std::sqrt(static_cast<double>(pt.n) * (pt.n - 1.0));
  pr.cells.assign(static_cast<std::size_t>(q), std::vector<CellSummary>(static_cast<std::size_t>(q)));
  std::vector<double> errs;
  for (const auto* r : est) errs.push_back(r->conn_error);
  pr.median_conn_error = median_of(errs);
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b) {
      std::vector<double> x, absx;
      for (const auto* r : est) {
        x.push_back(r->conn_residual(a, b));
        absx.push_back(std::abs(r->conn_residual(a, b)) / scale);
      }
      CellSummary& cs = pr.cells[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
      cs.mean_residual = mean_of(x);
      cs.empirical_variance = variance_of(x);
      cs.theory_variance = theory(a, b);
      cs.relative_error = std::abs(cs.empirical_variance / cs.theory_variance - 1.0);
      cs.median_abs_error = median_of(absx);
      if (x.size() >= 100) cs.normality = normality_summary(x, std::sqrt(cs.theory_variance));
    }

  int within = 0;
  std::vector<double> hs;
  for (const auto* r : est)
    if (r->hamming) {
      hs.push_back(*r->hamming);
      within += *r->hamming <= cfg.hamming_threshold;
    }
  if (!hs.empty()) {
    pr.mean_hamming = mean_of(hs);
    pr.hamming_within_threshold = within;
  }
  pr.replicate_results = std::move(results);
  return pr;
}

/// Deterministic given the master seed: replicate r of grid point k uses
/// derive_seed(derive_seed(master, k), r) regardless of scheduling.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentReport rep;
  rep.config = cfg;
  const auto grid = cfg.grid();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const std::uint64_t point_seed = derive_seed(cfg.master_seed, k);
    std::vector<ReplicateResult> results(static_cast<std::size_t>(cfg.replicates));
    parallel_for(cfg.replicates, [&](int r) {
      results[static_cast<std::size_t>(r)] = run_replicate(cfg, grid[k], derive_seed(point_seed, static_cast<std::uint64_t>(r)));
    });
    rep.points.push_back(summarize_point(cfg, grid[k], std::move(results)));
  }

  for (const auto& p : rep.points) rep.median_conn_errors.push_back(p.median_conn_error);
  rep.conn_error_strictly_decreasing = rep.median_conn_errors.size() >= 2;
  for (std::size_t k = 1; k < rep.median_conn_errors.size(); ++k)
    rep.conn_error_strictly_decreasing &= rep.median_conn_errors[k] < rep.median_conn_errors[k - 1];

  // Variance ratios against the first rho at the same n.
  for (std::size_t k = 0; k < rep.points.size(); ++k) {
    const auto& ref = rep.points[k];
    for (std::size_t k2 = k + 1; k2 < rep.points.size(); ++k2) {
      const auto& other = rep.points[k2];
      if (other.point.n != ref.point.n) continue;
      if (k > 0 && rep.points[k - 1].point.n == ref.point.n) continue;  // ref must be the first rho at this n
      const int q = cfg.params_star.num_blocks();
      RhoRatio rr{ref.point.n, ref.point.rho, other.point.rho, ref.point.rho / other.point.rho, Matrix(q, q), 0.0};
      for (int a = 0; a < q; ++a)
        for (int b = 0; b < q; ++b)
          rr.cell_ratios(a, b) = other.cells[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)].empirical_variance /
                                 ref.cells[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)].empirical_variance;
      rr.pooled_ratio = rr.cell_ratios.mean();
      rep.rho_ratios.push_back(std::move(rr));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// JSON

inline ExperimentConfig config_from_json(const json& j) {
  check_schema(j);
  ExperimentConfig c;
  c.study = study_from_string(j.at("study").get<std::string>());
  c.n_grid = j.at("n_grid").get<std::vector<int>>();
  if (j.contains("rho_grid")) c.rho_grid = j.at("rho_grid").get<std::vector<double>>();
  if (j.contains("rho_log_constant")) c.rho_log_constant = j.at("rho_log_constant").get<double>();
  c.params_star = params_from_json(j.at("params_star"));
  c.replicates = j.at("replicates").get<int>();
  c.master_seed = j.value("master_seed", std::uint64_t{0});
  c.estimator = estimator_from_string(j.value("estimator", std::string("complete_mle")));
  c.design = j.value("design", std::string("dyad"));
  c.vem_restarts = j.value("vem_restarts", 3);
  c.vem_max_iters = j.value("vem_max_iters", 200);
  c.vem_tol = j.value("vem_tol", 1e-6);
  c.hamming_threshold = j.value("hamming_threshold", 0.02);
  c.validate();
  return c;
}

inline json config_to_json(const ExperimentConfig& c) {
  json j{{"schema_version", kSchemaVersion},
         {"study", to_string(c.study)},
         {"n_grid", c.n_grid},
         {"params_star", params_to_json(c.params_star)},
         {"replicates", c.replicates},
         {"master_seed", c.master_seed},
         {"estimator", to_string(c.estimator)},
         {"design", c.design},
         {"vem_restarts", c.vem_restarts},
         {"vem_max_iters", c.vem_max_iters},
         {"vem_tol", c.vem_tol},
         {"hamming_threshold", c.hamming_threshold}};
  if (c.rho_log_constant)
    j["rho_log_constant"] = *c.rho_log_constant;
  else
    j["rho_grid"] = c.rho_grid;
  return j;
}

inline json normality_to_json(const NormalitySummary& s) {
  json qq = json::array();
  for (const auto& p : s.qq) qq.push_back({p.theoretical, p.sample});
  json j{{"count", s.count},       {"mean", s.mean}, {"sd", s.sd}, {"skewness", s.skewness},
         {"excess_kurtosis", s.excess_kurtosis}, {"degenerate", s.degenerate}, {"qq", qq}};
  j["ks_distance"] = s.ks_distance ? json(*s.ks_distance) : json(nullptr);
  return j;
}

inline json report_to_json(const ExperimentReport& r) {
  json points = json::array();
  for (const auto& p : r.points) {
    json cells = json::array();
    for (std::size_t a = 0; a < p.cells.size(); ++a)
      for (std::size_t b = 0; b < p.cells[a].size(); ++b) {
        const auto& c = p.cells[a][b];
        json cj{{"q", a + 1},
                {"l", b + 1},
                {"mean_residual", c.mean_residual},
                {"empirical_variance", c.empirical_variance},
                {"theory_variance", c.theory_variance},
                {"relative_error", c.relative_error},
                {"median_abs_error", c.median_abs_error}};
        if (c.normality) cj["normality"] = normality_to_json(*c.normality);
        cells.push_back(std::move(cj));
      }
    json reps = json::array();
    for (const auto& rr : p.replicate_results) {
      json x{{"status", to_string(rr.status)}, {"seed", rr.seed}, {"isolated_count", rr.isolated_count}};
      if (rr.has_estimate()) {
        std::vector<int> perm(rr.alignment);
        for (int& v : perm) ++v;
        x["alignment"] = perm;
        x["props_residual"] = vector_to_json(rr.props_residual);
        x["conn_residual"] = matrix_to_json(rr.conn_residual);
        x["conn_error"] = rr.conn_error;
        if (rr.hamming) x["hamming"] = *rr.hamming;
        x["elbo_steps"] = rr.elbo_steps;
        x["elbo_decreases"] = rr.elbo_decreases;
      } else {
        x["error"] = rr.error;
      }
      reps.push_back(std::move(x));
    }
    json pj{{"n", p.point.n},
            {"rho", p.point.rho},
            {"replicates", p.replicates},
            {"accounting",
             {{"ok", p.ok},
              {"isolated_nodes", p.isolated_nodes},
              {"empty_cell", p.empty_cell},
              {"nonconverged", p.nonconverged},
              {"error", p.errors}}},
            {"isolated_rate", p.isolated_rate},
            {"props",
             {{"mean_residual", p.props_mean_residual.size() ? vector_to_json(p.props_mean_residual) : json::array()},
              {"empirical_covariance", matrix_to_json(p.props_covariance)},
              {"theory_covariance", matrix_to_json(p.props_theory)},
              {"relative_frobenius_error", p.props_rel_frobenius}}},
            {"conn_cells", cells},
            {"median_conn_error", p.median_conn_error},
            {"elbo", {{"steps", p.elbo_steps}, {"decreases", p.elbo_decreases}}},
            {"replicate_results", reps}};
    if (p.mean_hamming) {
      pj["hamming"] = {{"mean", *p.mean_hamming}, {"within_threshold", p.hamming_within_threshold}};
    }
    points.push_back(std::move(pj));
  }
  json ratios = json::array();
  for (const auto& rr : r.rho_ratios)
    ratios.push_back({{"n", rr.n},
                      {"rho_ref", rr.rho_ref},
                      {"rho", rr.rho},
                      {"theory_ratio", rr.theory_ratio},
                      {"cell_ratios", matrix_to_json(rr.cell_ratios)},
                      {"pooled_ratio", rr.pooled_ratio}});
  return {{"schema_version", kSchemaVersion},
          {"config", config_to_json(r.config)},
          {"points", points},
          {"rho_ratios", ratios},
          {"median_conn_errors", r.median_conn_errors},
          {"conn_error_strictly_decreasing", r.conn_error_strictly_decreasing}};
}

}  // namespace sbm
