#include "crorl/dataset.hpp"
#include "crorl/envs.hpp"
#include "crorl/eval.hpp"
#include "crorl/rng.hpp"
#include "crorl/solver.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace crorl;

namespace {

// Two states, two actions, two steps. Action 0 in state 0 at step 1 pays 1,
// everything else pays 0.
TabularMDP two_state_chain() {
  TabularMDP m;
  m.S = 2;
  m.A = 2;
  m.H = 2;
  m.P.assign(static_cast<std::size_t>(m.H) * 2 * 2 * 2, 0.0);
  m.R.assign(static_cast<std::size_t>(m.H) * 2 * 2, 0.0);
  for (int h = 0; h < 2; ++h)
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a) m.next(h, s, a)[a] = 1.0;
  m.r(0, 0, 0) = 1.0;
  m.x1 = {1.0, 0.0};
  return m;
}

// Single-step MDP on S*A cells with a uniform start, used with one-hot features.
TabularMDP one_step(int S, int A, std::uint64_t seed) {
  auto m = build_random_tabular(S, A, 1, seed);
  m.x1.assign(static_cast<std::size_t>(S), 1.0 / S);
  return m;
}

OfflineDataset single_step_dataset(int S, int A, const std::vector<Point>& pts) {
  OfflineDataset ds;
  ds.H = 1;
  ds.S = S;
  ds.A = A;
  ds.n = static_cast<int>(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    ds.records.push_back({static_cast<int>(i), 1, pts[i].s, pts[i].a, 0.0, 0});
  return ds;
}

SolverConfig cfg_with(double lambda, double alpha = 1.0) {
  SolverConfig cfg;
  cfg.lambda = lambda;
  cfg.alpha = alpha;
  return cfg;
}

}  // namespace

TEST(Suboptimality, OptimalPolicyIsZero) {
  const auto lin = build_linear_mdp(3, 6, 2, 3, 4);
  const auto opt = solve_optimal(lin.base);
  EXPECT_EQ(suboptimality(lin.base, opt.policy), 0.0);
}

TEST(Suboptimality, ZeroRewardIsZeroForAnyPolicy) {
  auto m = build_random_tabular(4, 3, 3, 2);
  std::fill(m.R.begin(), m.R.end(), 0.0);
  EXPECT_EQ(suboptimality(m, Policy::uniform(3, 4, 3)), 0.0);
  EXPECT_EQ(suboptimality(m, Policy::deterministic(3, 4, 3, std::vector<int>(12, 2))), 0.0);
}

TEST(Suboptimality, WrongArmOnChainLosesOne) {
  const auto m = two_state_chain();
  const auto pi = Policy::deterministic(2, 2, 2, std::vector<int>{1, 1, 0, 0});
  EXPECT_DOUBLE_EQ(suboptimality(m, pi, 0), 1.0);
  EXPECT_THROW(suboptimality(m, pi, 2), std::invalid_argument);
}

TEST(Suboptimality, NeverNegative) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto m = build_random_tabular(5, 3, 3, seed);
    EXPECT_GE(suboptimality(m, Policy::uniform(3, 5, 3)), 0.0);
  }
}

TEST(BellmanResidual, OptimalValuesHaveZeroResidual) {
  const auto lin = build_linear_mdp(3, 6, 2, 4, 8);
  const auto opt = solve_optimal(lin.base);
  for (int h = 0; h < 4; ++h)
    for (int s = 0; s < 6; ++s)
      for (int a = 0; a < 2; ++a) EXPECT_NEAR(bellman_residual(lin.base, opt.values, h, s, a), 0.0, 1e-12);
}

TEST(BellmanResidual, ZeroTableGivesNegativeReward) {
  const auto m = build_random_tabular(4, 2, 3, 6);
  const ValueTables zero(3, 4, 2);
  for (int h = 0; h < 3; ++h)
    for (int s = 0; s < 4; ++s)
      for (int a = 0; a < 2; ++a) EXPECT_EQ(bellman_residual(m, zero, h, s, a), -m.r(h, s, a));
}

TEST(Coverage, OneHotUniformDataApproachesDimension) {
  const auto m = one_step(2, 2, 3);
  const auto lin = tabular_as_linear(m);
  const auto backend = FunctionClassBackend::linear(lin.phi, 2, 2);
  const auto data = collect(lin.base, Policy::uniform(1, 2, 2), 40000, 5);
  auto cfg = cfg_with(1e-3);
  cfg.weighting = Weighting::unit;
  const auto rep = coverage_coefficient(lin.base, data.data, backend, cfg);
  EXPECT_NEAR(rep.cc_unweighted, 4.0, 0.15);
}

TEST(Coverage, UncoveredOptimalPathIsInfinite) {
  const auto m = one_step(2, 2, 3);
  const auto lin = tabular_as_linear(m);
  const auto backend = FunctionClassBackend::linear(lin.phi, 2, 2);
  const auto opt = solve_optimal(lin.base);
  // Behavior always takes the other action.
  std::vector<int> other{1 - opt.policy.action(0, 0), 1 - opt.policy.action(0, 1)};
  const auto data = collect(lin.base, Policy::deterministic(1, 2, 2, other), 200, 5);
  const auto rep = coverage_coefficient(lin.base, data.data, backend, cfg_with(1.0));
  EXPECT_EQ(rep.cc_unweighted, kInfiniteCoverage);
  EXPECT_EQ(rep.cc_weighted, kInfiniteCoverage);
}

TEST(Coverage, UnitWeightsReduceToUnweighted) {
  const auto lin = build_linear_mdp(4, 8, 2, 3, 2);
  const auto backend = FunctionClassBackend::linear(lin.phi, 8, 2);
  const auto data = collect(lin.base, Policy::uniform(3, 8, 2), 300, 7);
  std::vector<std::vector<double>> ones(3);
  for (const auto& rec : data.data.records) ones[static_cast<std::size_t>(rec.h - 1)].push_back(1.0);
  const auto rep = coverage_coefficient_with_weights(lin.base, data.data, backend, cfg_with(1.0, 0.1), ones, true);
  EXPECT_EQ(rep.cc_weighted, rep.cc_unweighted);
  EXPECT_EQ(rep.per_h_weighted, rep.per_h_unweighted);
  auto cfg = cfg_with(1.0, 0.1);
  cfg.weighting = Weighting::unit;
  const auto unit = coverage_coefficient(lin.base, data.data, backend, cfg);
  EXPECT_EQ(unit.cc_weighted, unit.cc_unweighted);
}

TEST(Coverage, WeightedNeverExceedsUnweighted) {
  const auto lin = build_linear_mdp(4, 8, 2, 3, 2);
  const auto backend = FunctionClassBackend::linear(lin.phi, 8, 2);
  const auto data = collect(lin.base, Policy::uniform(3, 8, 2), 300, 7);
  const auto rep = coverage_coefficient(lin.base, data.data, backend, cfg_with(1.0, 0.05));
  EXPECT_GE(rep.cc_weighted, 0.0);
  EXPECT_LE(rep.cc_weighted, rep.cc_unweighted + 1e-12);
}

TEST(Coverage, UnweightedBoundedByDominationConstant) {
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto lin = build_linear_mdp(4, 8, 2, 3, seed);
    const auto backend = FunctionClassBackend::linear(lin.phi, 8, 2);
    const auto data = collect(lin.base, Policy::uniform(3, 8, 2), 500, seed);
    const double c = domination_constant(lin.base, data.data, backend, 1.0);
    if (!(c > 0.0)) continue;
    ++checked;
    const auto rep = coverage_coefficient(lin.base, data.data, backend, cfg_with(1.0));
    EXPECT_LE(rep.cc_unweighted, 4.0 / c + 1e-6) << "seed " << seed;
  }
  EXPECT_GT(checked, 0);
}

TEST(WellExplored, UniformOneHotHasEigenvalueOneOverD) {
  std::vector<Point> pts;
  for (int rep = 0; rep < 25; ++rep)
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a) pts.push_back({s, a});
  const auto ds = single_step_dataset(2, 2, pts);
  const auto backend = FunctionClassBackend::linear(Eigen::MatrixXd::Identity(4, 4), 2, 2);
  const auto diag = well_explored_diagnostics(ds, backend);
  ASSERT_EQ(diag.min_eig_per_h.size(), 1u);
  EXPECT_NEAR(diag.min_eig_per_h[0], 0.25, 1e-15);
  EXPECT_NEAR(diag.C_est, 0.25, 1e-15);
  EXPECT_FALSE(diag.rank_deficient);
}

TEST(WellExplored, SingleCellIsRankDeficient) {
  const auto ds = single_step_dataset(2, 2, std::vector<Point>(30, Point{1, 0}));
  const auto backend = FunctionClassBackend::linear(Eigen::MatrixXd::Identity(4, 4), 2, 2);
  const auto diag = well_explored_diagnostics(ds, backend);
  EXPECT_EQ(diag.min_eig_per_h[0], 0.0);
  EXPECT_TRUE(diag.rank_deficient);
  EXPECT_EQ(diag.C_est, 0.0);
}

TEST(WellExplored, LinearEstimateIsExactInfimum) {
  // Ratio w' Lbar w / max_z (w' phi_z)^2 for many directions never drops below C_est.
  const auto lin = build_linear_mdp(3, 6, 2, 1, 9);
  const auto backend = FunctionClassBackend::linear(lin.phi, 6, 2);
  const auto data = collect(lin.base, Policy::uniform(1, 6, 2), 400, 3);
  const auto diag = well_explored_diagnostics(data.data, backend);
  Eigen::Matrix3d bar = Eigen::Matrix3d::Zero();
  for (const auto& rec : data.data.records) {
    const Eigen::Vector3d f = backend.feature({rec.x, rec.a});
    bar += f * f.transpose();
  }
  bar /= 400.0;
  Rng rng(1);
  double best = kInfiniteCoverage;
  for (int t = 0; t < 20000; ++t) {
    const Eigen::Vector3d w(rng.normal(), rng.normal(), rng.normal());
    double top = 0.0;
    for (int k = 0; k < 12; ++k) top = std::max(top, std::pow(lin.phi.row(k).dot(w), 2));
    best = std::min(best, w.dot(bar * w) / top);
  }
  EXPECT_GE(best, diag.C_est - 1e-12);
  EXPECT_LE(best, diag.C_est * 1.05);
}

TEST(WellExplored, FiniteClassRatio) {
  // Two tables differing by 1 on cell 0 only; data puts 1/4 of its mass there.
  const auto backend = FunctionClassBackend::finite({{0.0, 0.5, 0.5, 0.5}, {1.0, 0.5, 0.5, 0.5}}, 2, 2);
  const auto ds = single_step_dataset(2, 2, {{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  EXPECT_DOUBLE_EQ(well_explored_diagnostics(ds, backend).C_est, 0.25);
}

TEST(WellExplored, RandomInstancesScaleLikeInverseDimension) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const int d = 4;
    const auto lin = build_linear_mdp(d, 8, 2, 3, seed);
    const auto backend = FunctionClassBackend::linear(lin.phi, 8, 2);
    const auto data = collect(lin.base, Policy::uniform(3, 8, 2), 2000, seed);
    const auto diag = well_explored_diagnostics(data.data, backend);
    EXPECT_GE(diag.C_est, 0.5 / d) << "seed " << seed;
    EXPECT_LE(diag.C_est, 2.0 / d) << "seed " << seed;
  }
}

TEST(WellExplored, WeightedCoverageBelowInverseConstant) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto lin = build_linear_mdp(4, 8, 2, 3, seed);
    const auto backend = FunctionClassBackend::linear(lin.phi, 8, 2);
    const auto data = collect(lin.base, Policy::uniform(3, 8, 2), 1000, seed);
    const auto rep = coverage_coefficient(lin.base, data.data, backend, cfg_with(1.0, 0.1));
    ASSERT_GT(rep.C_est, 0.0);
    EXPECT_LE(rep.cc_weighted, 1.05 / rep.C_est) << "seed " << seed;
  }
}

TEST(Occupancy, MonteCarloAgreesWithExact) {
  const auto m = build_random_tabular(3, 2, 2, 5);
  const auto pi = Policy::uniform(2, 3, 2);
  const auto exact = occupancy(m, pi);
  const auto mc = occupancy_monte_carlo(m, pi, 40000, 3);
  for (std::size_t i = 0; i < exact.size(); ++i) EXPECT_NEAR(mc[i], exact[i], 0.01);
}
