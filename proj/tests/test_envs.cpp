#include "crorl/envs.hpp"
#include "crorl/io.hpp"
#include "crorl/rng.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numeric>

using namespace crorl;

namespace {

// Expected value of a policy by expanding every trajectory, no memoization.
double tree_value(const TabularMDP& m, const Policy& pi, int h, int s) {
  if (h == m.H) return 0.0;
  double v = 0.0;
  for (int a = 0; a < m.A; ++a) {
    const double p = pi.pr(h, s, a);
    if (p == 0.0) continue;
    double q = m.r(h, s, a);
    const auto row = m.next(h, s, a);
    for (int s2 = 0; s2 < m.S; ++s2)
      if (row[s2] > 0.0) q += row[s2] * tree_value(m, pi, h + 1, s2);
    v += p * q;
  }
  return v;
}

double tree_value(const TabularMDP& m, const Policy& pi) {
  double v = 0.0;
  for (int s = 0; s < m.S; ++s)
    if (m.x1[s] > 0.0) v += m.x1[s] * tree_value(m, pi, 0, s);
  return v;
}

Policy random_policy(int H, int S, int A, Rng& rng) {
  Policy pi{H, S, A, std::vector<double>(static_cast<std::size_t>(H) * S * A)};
  for (std::size_t i = 0; i < pi.prob.size(); i += A) {
    double sum = 0.0;
    for (int a = 0; a < A; ++a) sum += pi.prob[i + a] = rng.uniform() + 1e-3;
    for (int a = 0; a < A; ++a) pi.prob[i + a] /= sum;
  }
  return pi;
}

TabularMDP chain_mdp() {
  // State 0 = on track, 1 = off track. Action 0 keeps you on track; reward 1
  // only for action 0 on track at the last step.
  TabularMDP m;
  m.S = 2;
  m.A = 2;
  m.H = 3;
  m.P.assign(static_cast<std::size_t>(m.H) * 2 * 2 * 2, 0.0);
  m.R.assign(static_cast<std::size_t>(m.H) * 2 * 2, 0.0);
  for (int h = 0; h < m.H; ++h) {
    m.next(h, 0, 0)[0] = 1.0;
    m.next(h, 0, 1)[1] = 1.0;
    m.next(h, 1, 0)[1] = 1.0;
    m.next(h, 1, 1)[1] = 1.0;
  }
  m.r(m.H - 1, 0, 0) = 1.0;
  m.x1 = {1.0, 0.0};
  return m;
}

double max_backup_residual(const LinearMDP& lin, int tables, std::uint64_t seed) {
  Rng rng(seed);
  const auto& m = lin.base;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(lin.phi);
  double worst = 0.0;
  for (int t = 0; t < tables; ++t) {
    std::vector<double> g(static_cast<std::size_t>(m.S));
    for (auto& v : g) v = rng.uniform();
    for (int h = 0; h < m.H; ++h) {
      const auto backup = bellman_backup(m, h, g);
      const Eigen::Map<const Eigen::VectorXd> y(backup.data(), static_cast<Eigen::Index>(backup.size()));
      const Eigen::VectorXd w = qr.solve(y);
      worst = std::max(worst, (lin.phi * w - y).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

}  // namespace

TEST(LinearMdp, DeterministicInSeed) {
  const auto a = build_linear_mdp(2, 4, 2, 3, 7);
  const auto b = build_linear_mdp(2, 4, 2, 3, 7);
  EXPECT_EQ(a.base.P, b.base.P);
  EXPECT_EQ(a.base.R, b.base.R);
  EXPECT_EQ(a.base.x1, b.base.x1);
  EXPECT_EQ(mdp_to_json(a.base, &a.phi), mdp_to_json(b.base, &b.phi));
  const auto c = build_linear_mdp(2, 4, 2, 3, 8);
  EXPECT_NE(a.base.P, c.base.P);
}

TEST(LinearMdp, RejectsRankAboveStateActionCount) {
  EXPECT_THROW(build_linear_mdp(9, 4, 2, 3, 1), std::invalid_argument);
  EXPECT_THROW(build_linear_mdp(0, 4, 2, 3, 1), std::invalid_argument);
  EXPECT_NO_THROW(build_linear_mdp(8, 4, 2, 3, 1));
}

TEST(LinearMdp, BackupsLieInFeatureSpan) {
  const auto lin = build_linear_mdp(3, 6, 2, 4, 1);
  EXPECT_LT(max_backup_residual(lin, 100, 99), 1e-10);
}

TEST(LinearMdp, BackupsLieInFeatureSpanAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto lin = build_linear_mdp(4, 8, 3, 3, seed);
    EXPECT_LT(max_backup_residual(lin, 20, seed + 100), 1e-10) << "seed " << seed;
  }
}

TEST(LinearMdp, OneHotFeaturesHaveZeroResidual) {
  const auto tab = build_random_tabular(4, 3, 3, 5);
  const auto lin = tabular_as_linear(tab);
  EXPECT_EQ(lin.d, 12);
  EXPECT_EQ(max_backup_residual(lin, 10, 3), 0.0);
}

TEST(LinearMdp, StructuralInvariants) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto lin = build_linear_mdp(4, 10, 3, 4, seed);
    const auto& m = lin.base;
    EXPECT_NO_THROW(m.validate());
    for (Eigen::Index i = 0; i < lin.phi.rows(); ++i) EXPECT_LE(lin.phi.row(i).norm(), 1.0 + 1e-12);
    for (int h = 0; h < m.H; ++h)
      for (int s = 0; s < m.S; ++s)
        for (int a = 0; a < m.A; ++a) {
          const auto row = m.next(h, s, a);
          EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-12);
          EXPECT_GE(m.r(h, s, a), 0.0);
        }
    EXPECT_LE(max_trajectory_reward(m), 1.0 + 1e-12);
    EXPECT_NEAR(std::accumulate(m.x1.begin(), m.x1.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(TabularMdp, ValidateRejectsBadRows) {
  auto m = build_random_tabular(3, 2, 2, 1);
  m.next(0, 0, 0)[0] += 0.01;
  EXPECT_THROW(m.validate(), std::invalid_argument);
  auto m2 = build_random_tabular(3, 2, 2, 1);
  m2.x1[0] += 1e-6;
  EXPECT_THROW(m2.validate(), std::invalid_argument);
}

TEST(NormalizeRewards, ScalesToUnitTrajectoryReward) {
  auto m = chain_mdp();
  for (int h = 0; h < m.H; ++h) m.r(h, 0, 0) = 1.0;
  const double factor = normalize_rewards(m);
  EXPECT_DOUBLE_EQ(factor, 1.0 / 3.0);
  EXPECT_NEAR(max_trajectory_reward(m), 1.0, 1e-12);
}

TEST(LowerBoundPair, SharedTransitionsSingleRewardDifference) {
  const auto lb = build_lower_bound_pair(3, 2, 2, 0.1);
  EXPECT_EQ(lb.m.P, lb.m_prime.P);
  int differing = 0;
  for (int s = 0; s < lb.m.S; ++s)
    for (int a = 0; a < lb.m.A; ++a) {
      bool diff = false;
      for (int h = 0; h < lb.m.H; ++h) diff = diff || lb.m.r(h, s, a) != lb.m_prime.r(h, s, a);
      if (diff) {
        ++differing;
        EXPECT_EQ(s, lb.s_prime);
        EXPECT_EQ(a, lb.a_prime);
      }
    }
  EXPECT_EQ(differing, 1);
  EXPECT_NE(lb.s_star, lb.s_prime);
}

TEST(LowerBoundPair, RejectsInvalidParameters) {
  EXPECT_THROW(build_lower_bound_pair(2, 2, 2, 0.1), std::invalid_argument);
  EXPECT_THROW(build_lower_bound_pair(3, 3, 2, 0.1), std::invalid_argument);
  EXPECT_THROW(build_lower_bound_pair(3, 2, 2, 0.0), std::invalid_argument);
}

TEST(LowerBoundPair, LeavesAbsorbAndBernoulliMeansInRange) {
  const auto lb = build_lower_bound_pair(3, 3, 4, 0.1);
  EXPECT_EQ(lb.m.S, 13);
  for (int leaf = 4; leaf < 13; ++leaf)
    for (int a = 0; a < 3; ++a) EXPECT_EQ(lb.m.next(0, leaf, a)[leaf], 1.0);
  EXPECT_NO_THROW(lb.m.validate());
  EXPECT_NO_THROW(lb.m_prime.validate());
  EXPECT_DOUBLE_EQ(lb.bound, (4 - 3 + 1) * 9 * 0.1 / 16.0);
}

TEST(TreeNodeCount, GeometricSum) {
  EXPECT_EQ(tree_node_count(3, 3), 13);
  EXPECT_EQ(tree_node_count(2, 3), 7);
  EXPECT_EQ(tree_node_count(4, 1), 1);
}

TEST(SolveOptimal, ChainOnlyRewardingPath) {
  const auto m = chain_mdp();
  const auto opt = solve_optimal(m);
  EXPECT_DOUBLE_EQ(opt.values.v(0, 0), 1.0);
  for (int h = 0; h < m.H; ++h) EXPECT_EQ(opt.policy.action(h, 0), 0);
}

TEST(SolveOptimal, ZeroRewardsGiveZeroValuesAndFirstAction) {
  auto m = build_random_tabular(4, 3, 3, 2);
  std::fill(m.R.begin(), m.R.end(), 0.0);
  const auto opt = solve_optimal(m);
  for (double v : opt.values.V) EXPECT_EQ(v, 0.0);
  for (int h = 0; h < m.H; ++h)
    for (int s = 0; s < m.S; ++s) EXPECT_EQ(opt.policy.action(h, s), 0);
}

TEST(SolveOptimal, MatchesTrajectoryTreeAndDominatesRandomPolicies) {
  const auto m = build_random_tabular(5, 3, 4, 11);
  const auto opt = solve_optimal(m);
  for (int s = 0; s < m.S; ++s) EXPECT_NEAR(opt.values.v(0, s), tree_value(m, opt.policy, 0, s), 1e-12);
  // Every deterministic deviation at a single (h, s) cannot help.
  std::vector<int> acts(static_cast<std::size_t>(m.H) * m.S);
  for (int h = 0; h < m.H; ++h)
    for (int s = 0; s < m.S; ++s) acts[static_cast<std::size_t>(h) * m.S + s] = opt.policy.action(h, s);
  for (std::size_t i = 0; i < acts.size(); ++i)
    for (int a = 0; a < m.A; ++a) {
      auto dev = acts;
      dev[i] = a;
      const auto pi = Policy::deterministic(m.H, m.S, m.A, dev);
      for (int s = 0; s < m.S; ++s) EXPECT_LE(tree_value(m, pi, 0, s), opt.values.v(0, s) + 1e-12);
    }
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const auto pi = random_policy(m.H, m.S, m.A, rng);
    EXPECT_LE(tree_value(m, pi), evaluate_policy(m, opt.policy) + 1e-12);
  }
}

TEST(SolveOptimal, QTablesSatisfyBellmanOptimality) {
  const auto m = build_random_tabular(6, 3, 4, 3);
  const auto opt = solve_optimal(m);
  for (int h = 0; h < m.H; ++h)
    for (int s = 0; s < m.S; ++s) {
      double best = -1.0;
      for (int a = 0; a < m.A; ++a) best = std::max(best, opt.values.q(h, s, a));
      EXPECT_EQ(opt.values.v(h, s), best);
    }
  for (int s = 0; s < m.S; ++s) EXPECT_EQ(opt.values.v(m.H, s), 0.0);
}

TEST(EvaluatePolicy, SelfConsistentWithOptimum) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto lin = build_linear_mdp(3, 6, 2, 4, seed);
    const auto opt = solve_optimal(lin.base);
    for (int s = 0; s < lin.base.S; ++s)
      EXPECT_NEAR(evaluate_policy(lin.base, opt.policy, s), opt.values.v(0, s), 1e-12);
  }
}

TEST(EvaluatePolicy, UniformOnZeroRewardIsZero) {
  auto m = build_random_tabular(3, 2, 3, 1);
  std::fill(m.R.begin(), m.R.end(), 0.0);
  EXPECT_EQ(evaluate_policy(m, Policy::uniform(m.H, m.S, m.A)), 0.0);
}

TEST(EvaluatePolicy, MatchesTrajectoryTreeOnSmallInstance) {
  const auto m = build_random_tabular(3, 2, 2, 21);
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const auto pi = random_policy(m.H, m.S, m.A, rng);
    for (int s = 0; s < m.S; ++s) EXPECT_NEAR(evaluate_policy(m, pi, s), tree_value(m, pi, 0, s), 1e-12);
    EXPECT_NEAR(evaluate_policy(m, pi), tree_value(m, pi), 1e-12);
  }
}

TEST(EvaluatePolicy, DimensionMismatchThrows) {
  const auto m = build_random_tabular(3, 2, 2, 21);
  EXPECT_THROW(evaluate_policy(m, Policy::uniform(2, 4, 2)), std::invalid_argument);
}

TEST(Occupancy, SumsToOnePerStep) {
  const auto m = build_random_tabular(5, 3, 4, 2);
  const auto opt = solve_optimal(m);
  const auto occ = occupancy(m, opt.policy);
  const std::size_t per_h = static_cast<std::size_t>(m.S) * m.A;
  ASSERT_EQ(occ.size(), per_h * m.H);
  for (int h = 0; h < m.H; ++h)
    EXPECT_NEAR(std::accumulate(occ.begin() + h * per_h, occ.begin() + (h + 1) * per_h, 0.0), 1.0, 1e-12);
}

TEST(ArgmaxFirst, SmallestIndexOnTies) {
  const std::vector<double> v{0.5, 1.0, 1.0, 0.2};
  EXPECT_EQ(argmax_first(v), 1);
}

TEST(MdpJson, RoundTripIsExact) {
  const auto lin = build_linear_mdp(3, 5, 2, 3, 4);
  const auto text = mdp_to_json(lin.base, &lin.phi);
  const auto back = mdp_from_json(text);
  EXPECT_EQ(back.mdp.P, lin.base.P);
  EXPECT_EQ(back.mdp.R, lin.base.R);
  EXPECT_EQ(back.mdp.x1, lin.base.x1);
  ASSERT_TRUE(back.phi.has_value());
  EXPECT_EQ(*back.phi, lin.phi);
  EXPECT_EQ(text.find("{\"S\":5,\"A\":2,\"H\":3,\"P\":"), 0u);
  EXPECT_LT(text.find("\"phi\""), text.find("\"x1\""));
}
