#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace crorl {

/// Finite-horizon tabular MDP. Steps are 0-based in every in-memory API
/// (h = 0 .. H-1); the dataset file format is the only place that uses 1-based steps.
struct TabularMDP {
  int S = 0;
  int A = 0;
  int H = 0;
  std::vector<double> P;   // [h][s][a][s'], flattened
  std::vector<double> R;   // [h][s][a], mean rewards
  std::vector<double> x1;  // initial state distribution
  double reward_noise = 0.0;     // half-width of symmetric uniform reward noise
  double bernoulli_scale = 0.0;  // > 0: observed reward = scale * Bernoulli(R / scale)

  std::size_t pair(int s, int a) const { return static_cast<std::size_t>(s) * A + a; }
  std::size_t num_pairs() const { return static_cast<std::size_t>(S) * A; }

  std::size_t r_index(int h, int s, int a) const {
    return (static_cast<std::size_t>(h) * S + s) * A + a;
  }
  double r(int h, int s, int a) const { return R[r_index(h, s, a)]; }
  double& r(int h, int s, int a) { return R[r_index(h, s, a)]; }

  std::span<const double> next(int h, int s, int a) const {
    return {P.data() + r_index(h, s, a) * S, static_cast<std::size_t>(S)};
  }
  std::span<double> next(int h, int s, int a) {
    return {P.data() + r_index(h, s, a) * S, static_cast<std::size_t>(S)};
  }

  /// Throws std::invalid_argument when a structural invariant is violated.
  void validate() const;
};

struct LinearMDP {
  TabularMDP base;
  int d = 0;
  Eigen::MatrixXd phi;  // (S*A) x d, row = feature of pair (s, a)
};

/// V is (H+1) x S and Q is (H+1) x S x A; the terminal step H is identically zero.
struct ValueTables {
  int H = 0;
  int S = 0;
  int A = 0;
  std::vector<double> V;
  std::vector<double> Q;

  ValueTables() = default;
  ValueTables(int horizon, int states, int actions)
      : H(horizon), S(states), A(actions),
        V(static_cast<std::size_t>(horizon + 1) * states, 0.0),
        Q(static_cast<std::size_t>(horizon + 1) * states * actions, 0.0) {}

  double v(int h, int s) const { return V[static_cast<std::size_t>(h) * S + s]; }
  double& v(int h, int s) { return V[static_cast<std::size_t>(h) * S + s]; }
  double q(int h, int s, int a) const { return Q[(static_cast<std::size_t>(h) * S + s) * A + a]; }
  double& q(int h, int s, int a) { return Q[(static_cast<std::size_t>(h) * S + s) * A + a]; }

  /// Recompute V[h][s] = max_a Q[h][s][a] for every step.
  void refresh_values();
};

/// Stochastic policy table [h][s][a]; deterministic policies are one-hot rows.
struct Policy {
  int H = 0;
  int S = 0;
  int A = 0;
  std::vector<double> prob;

  static Policy deterministic(int H, int S, int A, std::span<const int> actions);
  static Policy uniform(int H, int S, int A);

  double pr(int h, int s, int a) const { return prob[(static_cast<std::size_t>(h) * S + s) * A + a]; }
  /// Most likely action, smallest index on ties.
  int action(int h, int s) const;
  bool is_deterministic() const;
  void validate() const;

  bool operator==(const Policy&) const = default;
};

/// Index of the largest entry, smallest index on ties.
int argmax_first(std::span<const double> values);

/// Largest cumulative mean reward over all trajectories (transition support only).
double max_trajectory_reward(const TabularMDP& mdp);

/// Rescale R (and the Bernoulli scale) so that every trajectory has cumulative
/// mean reward at most 1. Returns the factor applied (1 when nothing changed).
double normalize_rewards(TabularMDP& mdp);

/// Dirichlet-random transitions and uniform rewards, normalized.
TabularMDP build_random_tabular(int S, int A, int H, std::uint64_t seed);

/// Low-rank MDP whose transitions and rewards are linear in simplex features.
/// Every Bellman backup of a bounded value table is then linear in phi.
LinearMDP build_linear_mdp(int d, int S, int A, int H, std::uint64_t seed);

/// One-hot features for an arbitrary tabular MDP (d = S*A).
LinearMDP tabular_as_linear(const TabularMDP& mdp);

struct LowerBoundPair {
  TabularMDP m;
  TabularMDP m_prime;
  int levels = 0;
  int s_star = 0;
  int a_star = 0;
  int s_prime = 0;
  int a_prime = 0;
  double bound = 0.0;  // (H - L + 1) * A^(L-1) * eps / (4H)
};

/// Depth-L tree with A^l nodes at level l. Interior action a moves to child a;
/// leaves are absorbing under every action. Rewards are Bernoulli(p) / H.
LowerBoundPair build_lower_bound_pair(int A, int L, int H, double eps);

/// (A^L - 1) / (A - 1).
int tree_node_count(int A, int L);

/// (R + P g)(s, a) at step h for a next-step value table g over states.
std::vector<double> bellman_backup(const TabularMDP& mdp, int h, std::span<const double> g);

struct OptimalSolution {
  Policy policy;
  ValueTables values;
};

OptimalSolution solve_optimal(const TabularMDP& mdp);

/// Exact Q/V tables of a policy by backward evaluation.
ValueTables evaluate_policy_tables(const TabularMDP& mdp, const Policy& pi);

double evaluate_policy(const TabularMDP& mdp, const Policy& pi, std::span<const double> x1);
double evaluate_policy(const TabularMDP& mdp, const Policy& pi, int x1);
double evaluate_policy(const TabularMDP& mdp, const Policy& pi);

/// State-action occupancy [h][s][a] of a policy started from mdp.x1.
std::vector<double> occupancy(const TabularMDP& mdp, const Policy& pi);

/// FNV-1a hash of the MDP's numeric content.
std::uint64_t hash_mdp(const TabularMDP& mdp);
std::uint64_t hash_policy(const Policy& pi);

}  // namespace crorl
