#include "crorl/adversary.hpp"
#include "crorl/dataset.hpp"
#include "crorl/envs.hpp"
#include "crorl/eval.hpp"
#include "crorl/function_class.hpp"
#include "crorl/harness.hpp"
#include "crorl/io.hpp"
#include "crorl/solver.hpp"
#include "crorl/weights.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace crorl;

namespace {

std::vector<Point> to_points(const std::vector<std::pair<int, int>>& pts) {
  std::vector<Point> out;
  out.reserve(pts.size());
  for (auto [s, a] : pts) out.push_back({s, a});
  return out;
}

}  // namespace

PYBIND11_MODULE(_crorl, m) {
  m.doc() = "Corruption-robust offline RL: environments, weights, solvers, evaluation";

  py::class_<TabularMDP>(m, "TabularMDP")
      .def(py::init<>())
      .def_readwrite("S", &TabularMDP::S)
      .def_readwrite("A", &TabularMDP::A)
      .def_readwrite("H", &TabularMDP::H)
      .def_readwrite("P", &TabularMDP::P)
      .def_readwrite("R", &TabularMDP::R)
      .def_readwrite("x1", &TabularMDP::x1)
      .def_readwrite("reward_noise", &TabularMDP::reward_noise)
      .def_readwrite("bernoulli_scale", &TabularMDP::bernoulli_scale)
      .def("validate", &TabularMDP::validate)
      .def("to_json", [](const TabularMDP& mdp) { return mdp_to_json(mdp); });

  py::class_<LinearMDP>(m, "LinearMDP")
      .def_readonly("base", &LinearMDP::base)
      .def_readonly("d", &LinearMDP::d)
      .def_readonly("phi", &LinearMDP::phi);

  py::class_<ValueTables>(m, "ValueTables")
      .def_readonly("H", &ValueTables::H)
      .def_readonly("S", &ValueTables::S)
      .def_readonly("A", &ValueTables::A)
      .def_readonly("V", &ValueTables::V)
      .def_readonly("Q", &ValueTables::Q)
      .def("v", py::overload_cast<int, int>(&ValueTables::v, py::const_))
      .def("q", py::overload_cast<int, int, int>(&ValueTables::q, py::const_));

  py::class_<Policy>(m, "Policy")
      .def_readonly("H", &Policy::H)
      .def_readonly("S", &Policy::S)
      .def_readonly("A", &Policy::A)
      .def_readonly("prob", &Policy::prob)
      .def("action", &Policy::action)
      .def("is_deterministic", &Policy::is_deterministic)
      .def_static("uniform", &Policy::uniform)
      .def_static("deterministic", [](int H, int S, int A, const std::vector<int>& actions) {
        return Policy::deterministic(H, S, A, actions);
      });

  py::class_<OptimalSolution>(m, "OptimalSolution")
      .def_readonly("policy", &OptimalSolution::policy)
      .def_readonly("values", &OptimalSolution::values);

  m.def("build_random_tabular", &build_random_tabular, py::arg("S"), py::arg("A"), py::arg("H"), py::arg("seed"));
  m.def("build_linear_mdp", &build_linear_mdp, py::arg("d"), py::arg("S"), py::arg("A"), py::arg("H"),
        py::arg("seed"));
  m.def("solve_optimal", &solve_optimal);
  m.def("evaluate_policy", py::overload_cast<const TabularMDP&, const Policy&>(&evaluate_policy));
  m.def("suboptimality", py::overload_cast<const TabularMDP&, const Policy&>(&suboptimality));
  m.def("epsilon_greedy", &epsilon_greedy, py::arg("base"), py::arg("explore"));

  py::enum_<AttackMode>(m, "AttackMode")
      .value("random_reward", AttackMode::random_reward)
      .value("random_dynamics", AttackMode::random_dynamics)
      .value("adversarial_reward", AttackMode::adversarial_reward)
      .value("adversarial_dynamics", AttackMode::adversarial_dynamics);
  py::enum_<AttackTiming>(m, "AttackTiming")
      .value("on_the_fly", AttackTiming::on_the_fly)
      .value("post_hoc", AttackTiming::post_hoc);

  py::class_<AttackSpec>(m, "AttackSpec")
      .def(py::init([](AttackMode mode, double c, double eps, AttackTiming timing, std::uint64_t seed) {
             return AttackSpec{mode, c, eps, timing, seed};
           }),
           py::arg("mode"), py::arg("c"), py::arg("eps"), py::arg("timing") = AttackTiming::post_hoc,
           py::arg("seed") = 0)
      .def_readwrite("mode", &AttackSpec::mode)
      .def_readwrite("c", &AttackSpec::c)
      .def_readwrite("eps", &AttackSpec::eps)
      .def_readwrite("timing", &AttackSpec::timing)
      .def_readwrite("seed", &AttackSpec::seed);

  py::class_<TransitionRecord>(m, "TransitionRecord")
      .def_readonly("episode", &TransitionRecord::episode)
      .def_readonly("h", &TransitionRecord::h)
      .def_readonly("x", &TransitionRecord::x)
      .def_readonly("a", &TransitionRecord::a)
      .def_readonly("r", &TransitionRecord::r)
      .def_readonly("x_next", &TransitionRecord::x_next);

  py::class_<OfflineDataset>(m, "OfflineDataset")
      .def_readonly("n", &OfflineDataset::n)
      .def_readonly("H", &OfflineDataset::H)
      .def_readonly("S", &OfflineDataset::S)
      .def_readonly("A", &OfflineDataset::A)
      .def_readonly("records", &OfflineDataset::records)
      .def("__len__", &OfflineDataset::size)
      .def("validate", &OfflineDataset::validate);

  py::class_<SidecarEntry>(m, "SidecarEntry")
      .def_readonly("clean_r", &SidecarEntry::clean_r)
      .def_readonly("clean_x_next", &SidecarEntry::clean_x_next)
      .def_readonly("corrupted", &SidecarEntry::corrupted)
      .def_readonly("zeta", &SidecarEntry::zeta);
  py::class_<TruthSidecar>(m, "TruthSidecar").def_readonly("entries", &TruthSidecar::entries);

  py::class_<CollectResult>(m, "CollectResult")
      .def_readonly("data", &CollectResult::data)
      .def_readonly("truth", &CollectResult::truth);

  m.def(
      "collect",
      [](const TabularMDP& mdp, const Policy& behavior, int n, std::uint64_t seed,
         std::optional<AttackSpec> adversary) { return collect(mdp, behavior, n, seed, adversary); },
      py::arg("mdp"), py::arg("behavior"), py::arg("n"), py::arg("seed"), py::arg("adversary") = py::none());

  py::class_<CorruptionReport>(m, "CorruptionReport")
      .def_readonly("num_corrupted", &CorruptionReport::num_corrupted)
      .def_readonly("zeta_approx", &CorruptionReport::zeta_approx)
      .def_readonly("zeta_exact_per_h", &CorruptionReport::zeta_exact_per_h)
      .def("zeta_exact", &CorruptionReport::zeta_exact);
  py::class_<CorruptResult>(m, "CorruptResult")
      .def_readonly("data", &CorruptResult::data)
      .def_readonly("truth", &CorruptResult::truth)
      .def_readonly("report", &CorruptResult::report);

  m.def(
      "corrupt",
      [](const CollectResult& clean, const AttackSpec& spec, const TabularMDP& mdp) {
        const auto opt = solve_optimal(mdp);
        return corrupt(clean.data, &clean.truth, spec, mdp, &opt.values);
      },
      py::arg("clean"), py::arg("spec"), py::arg("mdp"));
  m.def("account_corruption", &account_corruption);
  m.def("zeta_approx", &zeta_approx, py::arg("num_records"), py::arg("c"), py::arg("eps"));

  py::class_<FunctionClassBackend>(m, "FunctionClassBackend")
      .def_static("linear", &FunctionClassBackend::linear, py::arg("phi"), py::arg("S"), py::arg("A"),
                  py::arg("covering_constant") = 1.0)
      .def_static("finite", &FunctionClassBackend::finite, py::arg("tables"), py::arg("S"), py::arg("A"))
      .def("log_covering", &FunctionClassBackend::log_covering);

  py::class_<WeightVector>(m, "WeightVector")
      .def_readonly("sigma_sq", &WeightVector::sigma_sq)
      .def_readonly("alpha", &WeightVector::alpha)
      .def_readonly("lambda_", &WeightVector::lambda)
      .def_readonly("iterations", &WeightVector::iterations);

  m.def(
      "uncertainty",
      [](std::pair<int, int> z, const std::vector<std::pair<int, int>>& points, const std::vector<double>& sigma_sq,
         const FunctionClassBackend& backend, double lambda) {
        const auto pts = to_points(points);
        return uncertainty({z.first, z.second}, pts, sigma_sq, backend, lambda);
      },
      py::arg("z"), py::arg("points"), py::arg("sigma_sq"), py::arg("backend"), py::arg("lambda_"));
  m.def(
      "iterate_weights",
      [](const std::vector<std::pair<int, int>>& points, const FunctionClassBackend& backend, double alpha,
         double lambda) {
        const auto pts = to_points(points);
        return iterate_weights(pts, backend, alpha, lambda);
      },
      py::arg("points"), py::arg("backend"), py::arg("alpha"), py::arg("lambda_"));

  py::enum_<Weighting>(m, "Weighting").value("uncertainty", Weighting::uncertainty).value("unit", Weighting::unit);
  py::enum_<BetaMode>(m, "BetaMode").value("plugin", BetaMode::plugin).value("theory", BetaMode::theory);
  py::enum_<Algorithm>(m, "Algorithm")
      .value("cr_pevi", Algorithm::cr_pevi)
      .value("pevi", Algorithm::pevi)
      .value("cords_pevi", Algorithm::cords_pevi);

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("alpha", &SolverConfig::alpha)
      .def_readwrite("lambda_", &SolverConfig::lambda)
      .def_readwrite("beta_scale", &SolverConfig::beta_scale)
      .def_readwrite("delta", &SolverConfig::delta)
      .def_readwrite("zeta_per_h", &SolverConfig::zeta_per_h)
      .def_readwrite("weighting", &SolverConfig::weighting)
      .def_readwrite("rho", &SolverConfig::rho)
      .def_readwrite("beta_mode", &SolverConfig::beta_mode)
      .def_readwrite("gamma", &SolverConfig::gamma);

  py::class_<SolveReport>(m, "SolveReport")
      .def_readonly("policy", &SolveReport::policy)
      .def_readonly("f", &SolveReport::f)
      .def_readonly("beta", &SolveReport::beta)
      .def_readonly("weights", &SolveReport::weights);

  m.def("solve", &solve, py::arg("algorithm"), py::arg("data"), py::arg("backend"), py::arg("config"));

  py::class_<CoverageReport>(m, "CoverageReport")
      .def_readonly("cc_weighted", &CoverageReport::cc_weighted)
      .def_readonly("cc_unweighted", &CoverageReport::cc_unweighted)
      .def_readonly("min_eig_per_h", &CoverageReport::min_eig_per_h);
  m.def(
      "coverage_coefficient",
      [](const TabularMDP& mdp, const OfflineDataset& ds, const FunctionClassBackend& backend,
         const SolverConfig& cfg) { return coverage_coefficient(mdp, ds, backend, cfg); },
      py::arg("mdp"), py::arg("data"), py::arg("backend"), py::arg("config"));

  m.def(
      "run_sweep_csv",
      [](const std::string& config_text, int jobs) {
        const auto spec = parse_experiment(Config::parse(config_text));
        const auto out = run_sweep(spec, jobs);
        std::string csv = csv_header() + "\n";
        for (const auto& r : out.rows) csv += csv_line(r) + "\n";
        return py::make_tuple(csv, out.errors);
      },
      py::arg("config_text"), py::arg("jobs") = 1,
      "Runs a sweep from config text; returns (csv_text, errors).");
}
