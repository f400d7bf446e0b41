#pragma once

#include "crorl/dataset.hpp"
#include "crorl/envs.hpp"
#include "crorl/function_class.hpp"
#include "crorl/solver.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace crorl {

constexpr double kInfiniteCoverage = std::numeric_limits<double>::infinity();

/// V*(x1) - V_pi(x1) in the given (clean) MDP.
double suboptimality(const TabularMDP& mdp, const Policy& pi, std::span<const double> x1);
double suboptimality(const TabularMDP& mdp, const Policy& pi, int x1);
double suboptimality(const TabularMDP& mdp, const Policy& pi);

/// f[h](s, a) - (R + P max_a' f[h+1])(s, a), with f[H] taken as zero.
double bellman_residual(const TabularMDP& mdp, const ValueTables& f, int h0, int s, int a);

struct CoverageReport {
  double cc_weighted = 0.0;
  double cc_unweighted = 0.0;
  std::vector<double> per_h_weighted;
  std::vector<double> per_h_unweighted;
  int mc_episodes = 0;
  std::vector<double> min_eig_per_h;
  double C_est = 0.0;
};

struct WellExplored {
  std::vector<double> min_eig_per_h;  // smallest eigenvalue of (1/n) sum phi phi'
  double C_est = 0.0;        // inf over pairs of E_mu[(f - g)^2] / ||f - g||_inf^2, minimized over steps
  double C_eig_bound = 0.0;  // min_h min_eig_h (linear backend)
  bool rank_deficient = false;
};

/// Per-step quantities of the coverage coefficient, with the optimal
/// occupancy propagated exactly in the clean MDP.
CoverageReport coverage_coefficient(const TabularMDP& mdp, const OfflineDataset& ds,
                                    const FunctionClassBackend& backend, const SolverConfig& cfg, int mc_episodes = 0,
                                    std::uint64_t seed = 0);

/// Variant with explicit per-step data weights (e.g. all ones).
CoverageReport coverage_coefficient_with_weights(const TabularMDP& mdp, const OfflineDataset& ds,
                                                 const FunctionClassBackend& backend, const SolverConfig& cfg,
                                                 const std::vector<std::vector<double>>& sigma_sq_per_h,
                                                 bool unit_query_weight);

/// For the linear backend C_est is exact: the infimum of
/// w' Lbar w / max_z (w' phi_z)^2 equals 1 / max_z phi_z' Lbar^-1 phi_z.
/// For a finite class every pair is enumerated.
WellExplored well_explored_diagnostics(const OfflineDataset& ds, const FunctionClassBackend& backend);

/// Largest c with Lambda_h - I >= c n E_pi*[phi phi'] for all steps, where
/// Lambda_h = lambda I + sum phi phi'. Returns 0 when Lambda_h - I is not
/// positive definite at some step (the domination check fails).
double domination_constant(const TabularMDP& mdp, const OfflineDataset& ds, const FunctionClassBackend& backend,
                           double lambda);

/// Episodes rolled out under pi; Monte Carlo estimate of the occupancy.
std::vector<double> occupancy_monte_carlo(const TabularMDP& mdp, const Policy& pi, int episodes, std::uint64_t seed);

}  // namespace crorl
