#pragma once

#include "crorl/dataset.hpp"
#include "crorl/envs.hpp"
#include "crorl/function_class.hpp"
#include "crorl/weights.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace crorl {

enum class Weighting { uncertainty, unit };
enum class BetaMode { plugin, theory };
enum class Algorithm { cr_pevi, pevi, cords_pevi };

std::string to_string(Weighting w);
std::string to_string(BetaMode m);
std::string to_string(Algorithm a);
Weighting parse_weighting(std::string_view text);
BetaMode parse_beta_mode(std::string_view text);
Algorithm parse_algorithm(std::string_view text);

struct SolverConfig {
  double alpha = 1.0;
  double lambda = 1.0;
  double beta_scale = 1.0;
  double delta = 0.1;
  std::vector<double> zeta_per_h;  // known budget per 0-based step; empty means 0
  Weighting weighting = Weighting::uncertainty;
  std::vector<double> rho;  // per episode (length n) or per record (length n*H); empty = none
  BetaMode beta_mode = BetaMode::plugin;
  double gamma = 0.0;  // covering scale; 0 selects 1/n
  double eta = 1.0;    // noise scale in the theory radius

  void validate() const;
  double zeta(int h0) const { return zeta_per_h.empty() ? 0.0 : zeta_per_h[static_cast<std::size_t>(h0)]; }
};

struct LinearFit {
  Eigen::VectorXd w;
  Eigen::MatrixXd Lambda;
  double residual_norm = 0.0;  // sqrt(sum (w.phi_i - y_i)^2 / sigma_i^2)
};

/// Closed-form weighted ridge: w = Lambda^-1 sum phi_i y_i / sigma_i^2.
LinearFit weighted_ridge(std::span<const Point> points, std::span<const double> targets,
                         std::span<const double> sigma_sq, const FunctionClassBackend& backend, double lambda);

/// The bonus is the uncertainty of the same backend.
double bonus(Point z, std::span<const Point> points, std::span<const double> sigma_sq,
             const FunctionClassBackend& backend, double lambda);

/// beta_scale * (alpha * zeta_h + sqrt(ln H + logN + ln(1/delta))).
double confidence_radius(int h0, int H, const SolverConfig& cfg, double logN);

/// Radius with explicit constants, for the theory mode. `beta_next` is the
/// radius of the following step (0 at the last step).
double confidence_radius_theory(int h0, int H, int n, const SolverConfig& cfg, double logN, double gamma,
                                double beta_next);

/// All per-step radii for the configured mode.
std::vector<double> confidence_radii(int H, int n, const SolverConfig& cfg, double logN, double gamma);

/// Budget-driven parameter choice: lambda = ln N(gamma),
/// alpha = H sqrt(ln N) / zeta (1/sqrt(n) when zeta = 0), and
/// gamma = 1 / (n max_h beta_h zeta_h) resolved by one fixed-point pass
/// starting from gamma = 1/n.
SolverConfig theorem_defaults(int n, int H, const FunctionClassBackend& backend, std::vector<double> zeta_per_h,
                              double delta, double beta_scale, BetaMode mode = BetaMode::plugin);

struct StepDiagnostics {
  double weighted_error = 0.0;  // sqrt(lambda + sum (fhat_i - y_i)^2 / sigma_i^2)
  double bonus_min = 0.0;
  double bonus_mean = 0.0;
  double bonus_max = 0.0;
  int weight_iterations = 0;
  double max_sigma_sq = 1.0;
  int samples = 0;
};

struct SolveReport {
  Policy policy;
  ValueTables f;       // pessimistic tables, clamped to [0, 1]
  ValueTables fitted;  // regression output before the bonus
  ValueTables bonus;   // b^h(s, a)
  std::vector<double> beta;
  std::vector<WeightVector> weights;  // one per 0-based step, aligned with step_records
  std::vector<std::vector<std::size_t>> step_records;  // dataset indices used at each step
  std::vector<LinearFit> fits;        // linear backend only
  std::vector<StepDiagnostics> diagnostics;
  double log_covering = 0.0;
  double gamma = 0.0;
  double lambda = 0.0;
  double wall_time_ms = 0.0;
};

/// Weighted pessimistic value iteration. Uses uncertainty weights, unit weights
/// (cfg.weighting = unit) or shifted weights (cfg.rho non-empty).
SolveReport cr_pevi(const OfflineDataset& ds, const FunctionClassBackend& backend, const SolverConfig& cfg);

/// Unit-weight baseline.
SolveReport pevi(const OfflineDataset& ds, const FunctionClassBackend& backend, SolverConfig cfg);

/// Shifted-weight variant; requires cfg.rho.
SolveReport cords_pevi(const OfflineDataset& ds, const FunctionClassBackend& backend, const SolverConfig& cfg);

SolveReport solve(Algorithm algorithm, const OfflineDataset& ds, const FunctionClassBackend& backend,
                  const SolverConfig& cfg);

}  // namespace crorl
