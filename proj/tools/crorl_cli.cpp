// crorl: command-line front end for the offline RL pipeline.
#include "crorl/adversary.hpp"
#include "crorl/dataset.hpp"
#include "crorl/envs.hpp"
#include "crorl/eval.hpp"
#include "crorl/harness.hpp"
#include "crorl/io.hpp"
#include "crorl/plot.hpp"
#include "crorl/solver.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>

using namespace crorl;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  bool seed_set = false;
  std::string out;
  int jobs = 1;
  std::string config;
};

LinearMDP load_linear(const std::string& path) {
  auto loaded = load_mdp(path);
  if (loaded.phi) {
    LinearMDP lin;
    lin.base = std::move(loaded.mdp);
    lin.d = static_cast<int>(loaded.phi->cols());
    lin.phi = std::move(*loaded.phi);
    return lin;
  }
  return tabular_as_linear(loaded.mdp);
}

void require_out(const Globals& g, const char* what) {
  if (g.out.empty()) throw std::runtime_error(fmt::format("{}: --out is required", what));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crorl: corruption-robust offline RL experiments"};
  app.require_subcommand(1);
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Seed (master seed for sweep)");
  app.add_option("--out", g.out, "Output file, prefix or directory");
  app.add_option("--jobs", g.jobs, "Worker threads for sweep")->check(CLI::PositiveNumber);
  app.add_option("--config", g.config, "Sweep config file");

  // gen-mdp
  auto* gen = app.add_subcommand("gen-mdp", "Generate a random MDP as JSON")->fallthrough();
  std::string kind = "linear";
  int d = 4, S = 8, A = 2, H = 3;
  double reward_noise = 0.0;
  gen->add_option("--kind", kind)->check(CLI::IsMember({"linear", "tabular"}));
  gen->add_option("--d", d);
  gen->add_option("--S", S);
  gen->add_option("--A", A);
  gen->add_option("--H", H);
  gen->add_option("--reward-noise", reward_noise);

  // collect
  auto* col = app.add_subcommand("collect", "Roll out a behavior policy")->fallthrough();
  std::string mdp_path, behavior = "uniform", attack_mode, timing = "post_hoc";
  int n = 100;
  double explore = 0.3, c = 0.0, eps = 1.0;
  col->add_option("--mdp", mdp_path)->required();
  col->add_option("--n", n)->required();
  col->add_option("--behavior", behavior)->check(CLI::IsMember({"uniform", "eps_greedy"}));
  col->add_option("--explore", explore);
  col->add_option("--attack", attack_mode, "Corrupt during collection");
  col->add_option("--c", c);
  col->add_option("--eps", eps);
  col->add_option("--timing", timing);

  // corrupt
  auto* cor = app.add_subcommand("corrupt", "Post-hoc attack on a saved dataset")->fallthrough();
  std::string data_prefix;
  cor->add_option("--mdp", mdp_path)->required();
  cor->add_option("--data", data_prefix)->required();
  cor->add_option("--mode", attack_mode)->required();
  cor->add_option("--c", c)->required();
  cor->add_option("--eps", eps)->required();

  // solve
  auto* sol = app.add_subcommand("solve", "Run an offline RL solver")->fallthrough();
  std::string algorithm = "cr_pevi", beta_mode = "plugin";
  SolverConfig scfg;
  double rho = 1.0;
  sol->add_option("--mdp", mdp_path, "MDP JSON (features)")->required();
  sol->add_option("--data", data_prefix)->required();
  sol->add_option("--algorithm", algorithm);
  sol->add_option("--alpha", scfg.alpha);
  sol->add_option("--lambda", scfg.lambda);
  sol->add_option("--beta-scale", scfg.beta_scale);
  sol->add_option("--delta", scfg.delta);
  sol->add_option("--beta-mode", beta_mode);
  sol->add_option("--rho", rho, "Constant shift for cords_pevi");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a solver report")->fallthrough();
  std::string report_path;
  ev->add_option("--mdp", mdp_path)->required();
  ev->add_option("--report", report_path)->required();
  ev->add_option("--data", data_prefix, "Dataset for coverage coefficients");
  ev->add_option("--alpha", scfg.alpha);
  ev->add_option("--lambda", scfg.lambda);

  auto* sweep = app.add_subcommand("sweep", "Run an experiment grid")->fallthrough();
  auto* plot = app.add_subcommand("plot", "Render SVG plots from results.csv")->fallthrough();
  std::string csv_path;
  plot->add_option("--csv", csv_path)->required();

  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;

  try {
    if (*gen) {
      require_out(g, "gen-mdp");
      if (kind == "linear") {
        auto lin = build_linear_mdp(d, S, A, H, g.seed);
        lin.base.reward_noise = reward_noise;
        save_mdp(g.out, lin.base, &lin.phi);
      } else {
        auto mdp = build_random_tabular(S, A, H, g.seed);
        mdp.reward_noise = reward_noise;
        save_mdp(g.out, mdp);
      }
    } else if (*col) {
      require_out(g, "collect");
      const auto lin = load_linear(mdp_path);
      const auto opt = solve_optimal(lin.base);
      const Policy pi = behavior == "uniform" ? Policy::uniform(lin.base.H, lin.base.S, lin.base.A)
                                              : epsilon_greedy(opt.policy, explore);
      std::optional<AttackSpec> adv;
      if (!attack_mode.empty()) {
        AttackSpec a;
        a.mode = parse_attack_mode(attack_mode);
        a.c = c;
        a.eps = eps;
        a.timing = parse_attack_timing(timing);
        a.seed = mix_seed(g.seed, 2);
        adv = a;
      }
      const auto res = collect(lin.base, pi, n, g.seed, adv, &opt.values);
      serialize_dataset(res.data, &res.truth, g.out);
      const auto rep = account_corruption(lin.base, res.data, res.truth);
      fmt::print("records {} corrupted {} zeta_exact {:.17g} zeta_approx {:.17g}\n", res.data.size(),
                 rep.num_corrupted, rep.zeta_exact(), rep.zeta_approx);
    } else if (*cor) {
      require_out(g, "corrupt");
      const auto lin = load_linear(mdp_path);
      const auto loaded = load_dataset(data_prefix);
      AttackSpec a;
      a.mode = parse_attack_mode(attack_mode);
      a.c = c;
      a.eps = eps;
      a.timing = AttackTiming::post_hoc;
      a.seed = g.seed;
      const auto opt = solve_optimal(lin.base);
      const auto res = corrupt(loaded.data, loaded.truth ? &*loaded.truth : nullptr, a, lin.base, &opt.values);
      serialize_dataset(res.data, &res.truth, g.out);
      fmt::print("corrupted {} zeta_exact {:.17g} zeta_approx {:.17g}\n", res.report.num_corrupted,
                 res.report.zeta_exact(), res.report.zeta_approx);
    } else if (*sol) {
      require_out(g, "solve");
      const auto lin = load_linear(mdp_path);
      const auto loaded = load_dataset(data_prefix);
      const auto backend = FunctionClassBackend::linear(lin.phi, lin.base.S, lin.base.A);
      const Algorithm alg = parse_algorithm(algorithm);
      scfg.beta_mode = parse_beta_mode(beta_mode);
      if (alg == Algorithm::cords_pevi) scfg.rho.assign(static_cast<std::size_t>(loaded.data.n), rho);
      const auto rep = solve(alg, loaded.data, backend, scfg);
      write_file(g.out, report_to_json(rep, alg));
      fmt::print("suboptimality {:.17g}\n", suboptimality(lin.base, rep.policy));
    } else if (*ev) {
      const auto lin = load_linear(mdp_path);
      const auto& m = lin.base;
      const Policy pi = policy_from_report(read_file(report_path), m.S, m.A, m.H);
      fmt::print("value {:.17g}\nsuboptimality {:.17g}\n", evaluate_policy(m, pi), suboptimality(m, pi));
      if (!data_prefix.empty()) {
        const auto loaded = load_dataset(data_prefix);
        const auto backend = FunctionClassBackend::linear(lin.phi, m.S, m.A);
        const auto cov = coverage_coefficient(m, loaded.data, backend, scfg);
        fmt::print("cc_weighted {:.17g}\ncc_unweighted {:.17g}\n", cov.cc_weighted, cov.cc_unweighted);
      }
    } else if (*sweep) {
      if (g.config.empty()) throw std::runtime_error("sweep: --config is required");
      require_out(g, "sweep");
      auto cfg = Config::load(g.config);
      if (g.seed_set) cfg.set("master_seed", std::to_string(g.seed));
      const auto spec = parse_experiment(cfg);
      std::filesystem::create_directories(g.out);
      const auto outcome = run_sweep_to_dir(spec, g.jobs, g.out);
      for (const auto& e : outcome.errors) fmt::print(stderr, "{}\n", e);
      return outcome.exit_code;
    } else if (*plot) {
      require_out(g, "plot");
      for (const auto& p : emit_plots(csv_path, g.out)) fmt::print("{}\n", p);
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
