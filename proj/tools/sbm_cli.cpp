// sbm: simulate, fit and diagnose block models observed under dyad sampling,
// and run the Monte Carlo studies.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "sbm/sbm.hpp"

namespace {

using namespace sbm;

SbmParams default_params(int q, const ExpFamily& family) {
  double on = 0.7, off = 0.2;
  if (family.id() == FamilyId::Poisson) {
    on = 8.0;
    off = 1.0;
  } else if (family.id() == FamilyId::GaussianUnitVar) {
    on = 2.0;
    off = 0.0;
  }
  Matrix means = Matrix::Constant(q, q, off);
  means.diagonal().setConstant(on);
  return SbmParams::from_means(Vector::Constant(q, 1.0 / q), means, family);
}

std::string truth_path_for(const std::string& out) {
  std::filesystem::path p(out);
  p.replace_extension(".truth.json");
  return p.string();
}

json perms_to_json(const std::vector<Permutation>& perms) {
  json out = json::array();
  for (auto s : perms) {
    for (int& v : s) ++v;
    out.push_back(s);
  }
  return out;
}

struct SimulateArgs {
  int n = 0, q = 2;
  std::string family = "bernoulli", design = "dyad", params, out;
  double rho = 1.0, rho0 = 1.0, rho1 = 1.0;
  std::uint64_t seed = 0;
  bool symmetric = false;
};

int run_simulate(const SimulateArgs& a) {
  const ExpFamily family = ExpFamily::from_name(a.family);
  SbmParams params = a.params.empty() ? default_params(a.q, family) : params_from_json(read_json(a.params));
  if (params.family != family) throw ConfigError("--family does not match the parameter file");
  MaskDesign design;
  if (a.design == "dyad")
    design.variant = RandomDyad{a.rho};
  else if (a.design == "node")
    design.variant = RandomNode{a.rho};
  else if (a.design == "double")
    design.variant = DoubleStandard{a.rho0, a.rho1};
  else
    throw ConfigError("unknown design '" + a.design + "'");
  design.symmetric = a.symmetric;

  const auto [g, truth] = simulate_observed(params, design, a.n, a.seed);
  write_graph(a.out, g);
  const std::string tp = truth_path_for(a.out);
  write_json(tp, truth_to_json(truth));
  std::cout << "simulated n=" << a.n << " Q=" << params.num_blocks() << " family=" << family.name()
            << " design=" << design.name() << "\n"
            << "observed dyads: " << g.mask.count_observed() << " (rate " << rho_hat(g.mask) << ")\n"
            << "isolated nodes: " << isolated_nodes(g.mask).size() << "\n"
            << "wrote " << a.out << " and " << tp << "\n";
  return 0;
}

struct FitArgs {
  std::string input, family = "bernoulli", out;
  int q = 2, restarts = 10, max_iters = 200;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

int run_fit(const FitArgs& a) {
  const ExpFamily family = ExpFamily::from_name(a.family);
  const ObservedGraph g = read_graph(a.input, family);
  FitConfig cfg;
  cfg.n_restarts = a.restarts;
  cfg.max_iters = a.max_iters;
  cfg.elbo_rel_tol = a.tol;
  cfg.seed = a.seed;
  const FitResult f = vem_fit(g, a.q, family, cfg);
  write_json(a.out, fit_to_json(f));
  std::cout << "fit n=" << g.n() << " Q=" << a.q << " restarts=" << a.restarts << "\n"
            << "best restart " << f.restart_id << ": elbo " << f.final_elbo() << " after " << f.n_iters
            << " iterations" << (f.converged ? "" : " (not converged)") << "\n"
            << "props:";
  for (Eigen::Index k = 0; k < f.params.props.size(); ++k) std::cout << ' ' << f.params.props(k);
  std::cout << "\nwrote " << a.out << "\n";
  return 0;
}

struct DiagnoseArgs {
  std::string fit, truth, input, out;
};

int run_diagnose(const DiagnoseArgs& a) {
  const FitResult f = fit_from_json(read_json(a.fit));
  const GroundTruth t = truth_from_json(read_json(a.truth));
  if (f.map_labels.size() != t.z_star.size() || f.params.num_blocks() != t.params_star.num_blocks())
    throw SizeError("diagnose: fit and truth disagree on n or Q");
  double rho;
  if (!a.input.empty()) {
    rho = rho_hat(read_graph(a.input, t.params_star.family).mask);
  } else if (auto r = t.design.dyad_rate()) {
    rho = *r;
  } else {
    throw ConfigError("diagnose: design has no dyad rate; pass --input");
  }
  const SbmParams& star = t.params_star;
  const auto ham = hamming_distance_up_to_perm(f.map_labels, t.z_star);
  const Permutation perm = align(f.params, star);
  const auto d_star = class_distinctness_report(star);
  std::vector<int> perm1(perm);
  for (int& v : perm1) ++v;
  std::vector<int> hperm(ham.best_perm);
  for (int& v : hperm) ++v;

  json report{{"schema_version", kSchemaVersion},
              {"rho", rho},
              {"elr", elr(f.params, f.map_labels, t.z_star, star, rho)},
              {"elr_n2", elr_n2(f.params, f.map_labels, t.z_star, star, rho)},
              {"profile_elr", profile_elr(f.map_labels, t.z_star, star, rho)},
              {"profile_elr_n2", profile_elr_n2(f.map_labels, t.z_star, star, rho)},
              {"symmetry", {{"cardinality", symmetry_group(star).size()}, {"group", perms_to_json(symmetry_group(star))}}},
              {"class_distinctness", {{"truth", d_star.delta}, {"truth_degenerate", d_star.degenerate},
                                      {"fit", class_distinctness(f.params)}}},
              {"alignment", {{"permutation", perm1},
                             {"discrepancy", param_discrepancy(apply_permutation(f.params, perm), star)}}},
              {"hamming", {{"distance", ham.distance},
                           {"normalized", static_cast<double>(ham.distance) / t.z_star.size()},
                           {"permutation", hperm}}},
              {"confusion", matrix_to_json(confusion_matrix(f.map_labels, t.z_star))}};
  write_json(a.out, report);
  std::cout << "hamming " << ham.distance << "/" << t.z_star.size() << ", profile elr " << report["profile_elr"].get<double>()
            << ", |Sym| " << report["symmetry"]["cardinality"].get<std::size_t>() << "\nwrote " << a.out << "\n";
  return 0;
}

struct ExperimentArgs {
  std::string config, out;
  std::uint64_t seed = 0;
};

int run_experiment_cmd(const ExperimentArgs& a) {
  ExperimentConfig cfg = config_from_json(read_json(a.config));
  cfg.master_seed = a.seed;
  const ExperimentReport rep = run_experiment(cfg);
  write_json(a.out, report_to_json(rep));
  std::cout << "study " << to_string(cfg.study) << ", estimator " << to_string(cfg.estimator) << ", "
            << cfg.replicates << " replicates per point\n";
  for (const auto& p : rep.points) {
    std::cout << "n=" << p.point.n << " rho=" << p.point.rho << ": ok " << p.ok << ", isolated " << p.isolated_nodes
              << ", empty " << p.empty_cell << ", nonconverged " << p.nonconverged << ", error " << p.errors
              << "; props frob err " << p.props_rel_frobenius << ", median |a-a*| " << p.median_conn_error;
    if (p.mean_hamming) std::cout << ", mean hamming " << *p.mean_hamming;
    std::cout << "\n";
  }
  for (const auto& r : rep.rho_ratios)
    std::cout << "variance ratio rho " << r.rho_ref << " -> " << r.rho << ": " << r.pooled_ratio << " (theory "
              << r.theory_ratio << ")\n";
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted block models under missing dyads"};
  app.require_subcommand(1);

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "draw a graph and its observation mask");
  sim->add_option("--n", sa.n, "number of nodes")->required()->check(CLI::PositiveNumber);
  sim->add_option("--q", sa.q, "number of blocks (default parameters)")->check(CLI::PositiveNumber);
  sim->add_option("--family", sa.family, "bernoulli|poisson|gaussian");
  sim->add_option("--design", sa.design, "dyad|node|double");
  sim->add_option("--rho", sa.rho, "sampling rate for dyad/node designs");
  sim->add_option("--rho0", sa.rho0, "P(observed | y = 0) for the double design");
  sim->add_option("--rho1", sa.rho1, "P(observed | y = 1) for the double design");
  sim->add_option("--seed", sa.seed, "random seed")->required();
  sim->add_option("--params", sa.params, "parameter JSON");
  sim->add_flag("--symmetric", sa.symmetric, "undirected mode (y and r mirrored)");
  sim->add_option("--out", sa.out, "graph CSV; truth goes next to it")->required();

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "variational EM");
  fit->add_option("--input", fa.input, "graph CSV")->required();
  fit->add_option("--q", fa.q, "number of blocks")->required()->check(CLI::PositiveNumber);
  fit->add_option("--family", fa.family, "bernoulli|poisson|gaussian");
  fit->add_option("--restarts", fa.restarts)->check(CLI::PositiveNumber);
  fit->add_option("--max-iters", fa.max_iters)->check(CLI::PositiveNumber);
  fit->add_option("--tol", fa.tol, "relative ELBO tolerance")->check(CLI::PositiveNumber);
  fit->add_option("--seed", fa.seed);
  fit->add_option("--out", fa.out, "fit JSON")->required();

  DiagnoseArgs da;
  auto* diag = app.add_subcommand("diagnose", "compare a fit with the ground truth");
  diag->add_option("--fit", da.fit)->required();
  diag->add_option("--truth", da.truth)->required();
  diag->add_option("--input", da.input, "graph CSV, used for the empirical dyad rate");
  diag->add_option("--out", da.out)->required();

  ExperimentArgs ea;
  auto* exp = app.add_subcommand("experiment", "run a Monte Carlo study");
  exp->add_option("--config", ea.config)->required();
  exp->add_option("--seed", ea.seed, "master seed")->required();
  exp->add_option("--out", ea.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (*sim) return run_simulate(sa);
    if (*fit) return run_fit(fa);
    if (*diag) return run_diagnose(da);
    return run_experiment_cmd(ea);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
