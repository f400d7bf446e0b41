#include "crorl/envs.hpp"

#include "crorl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>
#include <string>

namespace crorl {

namespace {

constexpr double kSumTol = 1e-12;

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

std::vector<double> dirichlet(Rng& rng, int k, double concentration) {
  std::vector<double> out(static_cast<std::size_t>(k));
  double total = 0.0;
  for (auto& v : out) {
    v = rng.gamma(concentration);
    total += v;
  }
  if (!(total > 0.0)) {
    std::fill(out.begin(), out.end(), 1.0 / k);
    return out;
  }
  for (auto& v : out) v /= total;
  return out;
}

class Fnv1a {
 public:
  void add(const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= bytes[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void add(int v) { add(&v, sizeof v); }
  void add(double v) { add(&v, sizeof v); }
  void add(std::span<const double> v) { add(v.data(), v.size() * sizeof(double)); }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace

void TabularMDP::validate() const {
  require(S >= 1 && A >= 1 && H >= 1, "TabularMDP: S, A, H must be >= 1");
  const std::size_t cells = static_cast<std::size_t>(H) * S * A;
  require(P.size() == cells * S, "TabularMDP: P has wrong size");
  require(R.size() == cells, "TabularMDP: R has wrong size");
  require(x1.size() == static_cast<std::size_t>(S), "TabularMDP: x1 has wrong size");
  require(reward_noise >= 0.0 && std::isfinite(reward_noise), "TabularMDP: reward_noise must be >= 0");
  require(bernoulli_scale >= 0.0 && std::isfinite(bernoulli_scale),
          "TabularMDP: bernoulli_scale must be >= 0");
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        double sum = 0.0;
        for (double p : next(h, s, a)) {
          require(p >= 0.0 && std::isfinite(p), "TabularMDP: negative or non-finite transition probability");
          sum += p;
        }
        require(std::abs(sum - 1.0) <= kSumTol, "TabularMDP: transition row does not sum to 1");
        const double rew = r(h, s, a);
        require(rew >= 0.0 && std::isfinite(rew), "TabularMDP: rewards must be finite and nonnegative");
        if (bernoulli_scale > 0.0)
          require(rew <= bernoulli_scale * (1.0 + kSumTol), "TabularMDP: Bernoulli mean exceeds scale");
      }
  double x1_sum = 0.0;
  for (double p : x1) {
    require(p >= 0.0 && std::isfinite(p), "TabularMDP: negative initial probability");
    x1_sum += p;
  }
  require(std::abs(x1_sum - 1.0) <= kSumTol, "TabularMDP: x1 does not sum to 1");
  require(max_trajectory_reward(*this) <= 1.0 + kSumTol,
          "TabularMDP: cumulative reward exceeds 1 on some trajectory");
}

void ValueTables::refresh_values() {
  for (int h = 0; h <= H; ++h)
    for (int s = 0; s < S; ++s) {
      double best = q(h, s, 0);
      for (int a = 1; a < A; ++a) best = std::max(best, q(h, s, a));
      v(h, s) = best;
    }
}

Policy Policy::deterministic(int H, int S, int A, std::span<const int> actions) {
  require(actions.size() == static_cast<std::size_t>(H) * S, "Policy::deterministic: wrong action count");
  Policy pi{H, S, A, std::vector<double>(static_cast<std::size_t>(H) * S * A, 0.0)};
  for (std::size_t i = 0; i < actions.size(); ++i) {
    require(actions[i] >= 0 && actions[i] < A, "Policy::deterministic: action out of range");
    pi.prob[i * A + actions[i]] = 1.0;
  }
  return pi;
}

Policy Policy::uniform(int H, int S, int A) {
  return Policy{H, S, A, std::vector<double>(static_cast<std::size_t>(H) * S * A, 1.0 / A)};
}

int Policy::action(int h, int s) const {
  return argmax_first({prob.data() + (static_cast<std::size_t>(h) * S + s) * A, static_cast<std::size_t>(A)});
}

bool Policy::is_deterministic() const {
  return std::all_of(prob.begin(), prob.end(), [](double p) { return p == 0.0 || p == 1.0; });
}

void Policy::validate() const {
  require(H >= 1 && S >= 1 && A >= 1, "Policy: dimensions must be >= 1");
  require(prob.size() == static_cast<std::size_t>(H) * S * A, "Policy: table has wrong size");
  for (std::size_t row = 0; row < static_cast<std::size_t>(H) * S; ++row) {
    double sum = 0.0;
    for (int a = 0; a < A; ++a) {
      const double p = prob[row * A + a];
      require(p >= 0.0 && std::isfinite(p), "Policy: negative probability");
      sum += p;
    }
    require(std::abs(sum - 1.0) <= kSumTol, "Policy: row does not sum to 1");
  }
}

int argmax_first(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = static_cast<int>(i);
  return best;
}

double max_trajectory_reward(const TabularMDP& mdp) {
  std::vector<double> next_best(static_cast<std::size_t>(mdp.S), 0.0);
  std::vector<double> best(static_cast<std::size_t>(mdp.S), 0.0);
  for (int h = mdp.H - 1; h >= 0; --h) {
    for (int s = 0; s < mdp.S; ++s) {
      double m = 0.0;
      for (int a = 0; a < mdp.A; ++a) {
        double future = 0.0;
        const auto row = mdp.next(h, s, a);
        for (int s2 = 0; s2 < mdp.S; ++s2)
          if (row[s2] > 0.0) future = std::max(future, next_best[s2]);
        m = std::max(m, mdp.r(h, s, a) + future);
      }
      best[s] = m;
    }
    std::swap(best, next_best);
  }
  double total = 0.0;
  for (int s = 0; s < mdp.S; ++s)
    if (mdp.x1[s] > 0.0) total = std::max(total, next_best[s]);
  return total;
}

double normalize_rewards(TabularMDP& mdp) {
  const double m = max_trajectory_reward(mdp);
  if (m <= 1.0) return 1.0;
  const double factor = 1.0 / m;
  for (auto& r : mdp.R) r *= factor;
  mdp.bernoulli_scale *= factor;
  mdp.reward_noise *= factor;
  return factor;
}

TabularMDP build_random_tabular(int S, int A, int H, std::uint64_t seed) {
  require(S >= 1 && A >= 1 && H >= 1, "build_random_tabular: S, A, H must be >= 1");
  Rng rng(mix_seed(seed, 0x7ab));
  TabularMDP mdp;
  mdp.S = S;
  mdp.A = A;
  mdp.H = H;
  mdp.P.resize(static_cast<std::size_t>(H) * S * A * S);
  mdp.R.resize(static_cast<std::size_t>(H) * S * A);
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const auto row = dirichlet(rng, S, 1.0);
        std::copy(row.begin(), row.end(), mdp.next(h, s, a).begin());
        mdp.r(h, s, a) = rng.uniform();
      }
  mdp.x1.assign(static_cast<std::size_t>(S), 1.0 / S);
  normalize_rewards(mdp);
  return mdp;
}

LinearMDP build_linear_mdp(int d, int S, int A, int H, std::uint64_t seed) {
  require(S >= 1 && A >= 1 && H >= 1, "build_linear_mdp: S, A, H must be >= 1");
  require(d >= 1, "build_linear_mdp: d must be >= 1");
  require(static_cast<long>(d) <= static_cast<long>(S) * A, "build_linear_mdp: d > S*A, rank impossible");
  Rng rng(mix_seed(seed, 0x11));

  LinearMDP lin;
  lin.d = d;
  const int pairs = S * A;
  lin.phi = Eigen::MatrixXd::Zero(pairs, d);

  // d anchor pairs carry one-hot features so phi has full column rank; the
  // remaining pairs get sparse-ish simplex mixtures.
  std::vector<int> order(static_cast<std::size_t>(pairs));
  std::iota(order.begin(), order.end(), 0);
  for (int i = pairs - 1; i > 0; --i)
    std::swap(order[i], order[rng.index(static_cast<std::size_t>(i) + 1)]);
  for (int k = 0; k < pairs; ++k) {
    const int j = order[k];
    if (k < d) {
      lin.phi(j, k) = 1.0;
    } else {
      const auto w = dirichlet(rng, d, 0.5);
      for (int c = 0; c < d; ++c) lin.phi(j, c) = w[c];
    }
  }

  TabularMDP& mdp = lin.base;
  mdp.S = S;
  mdp.A = A;
  mdp.H = H;
  mdp.P.assign(static_cast<std::size_t>(H) * S * A * S, 0.0);
  mdp.R.assign(static_cast<std::size_t>(H) * S * A, 0.0);
  for (int h = 0; h < H; ++h) {
    std::vector<std::vector<double>> mu;
    mu.reserve(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) mu.push_back(dirichlet(rng, S, 0.5));
    std::vector<double> theta(static_cast<std::size_t>(d));
    for (auto& t : theta) t = rng.uniform();
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const int j = S > 0 ? s * A + a : 0;
        auto row = mdp.next(h, s, a);
        double rew = 0.0;
        for (int k = 0; k < d; ++k) {
          const double w = lin.phi(j, k);
          if (w == 0.0) continue;
          for (int s2 = 0; s2 < S; ++s2) row[s2] += w * mu[k][s2];
          rew += w * theta[k];
        }
        mdp.r(h, s, a) = rew;
      }
  }
  mdp.x1.assign(static_cast<std::size_t>(S), 1.0 / S);
  normalize_rewards(mdp);
  return lin;
}

LinearMDP tabular_as_linear(const TabularMDP& mdp) {
  LinearMDP lin;
  lin.base = mdp;
  lin.d = mdp.S * mdp.A;
  lin.phi = Eigen::MatrixXd::Identity(lin.d, lin.d);
  return lin;
}

int tree_node_count(int A, int L) {
  int count = 0;
  int level = 1;
  for (int l = 0; l < L; ++l) {
    count += level;
    level *= A;
  }
  return count;
}

LowerBoundPair build_lower_bound_pair(int A, int L, int H, double eps) {
  require(A > 2, "build_lower_bound_pair: requires A > 2");
  require(L >= 1, "build_lower_bound_pair: requires L >= 1");
  require(H >= L, "build_lower_bound_pair: requires H >= L");
  require(eps > 0.0 && eps < 1.0, "build_lower_bound_pair: eps must lie in (0, 1)");
  const double leaves = std::pow(static_cast<double>(A), L - 1);
  require(leaves * eps <= 1.0, "build_lower_bound_pair: A^(L-1) * eps must be <= 1 (Bernoulli mean)");

  const int S = tree_node_count(A, L);
  std::vector<int> offset(static_cast<std::size_t>(L) + 1, 0);
  int width = 1;
  for (int l = 0; l < L; ++l) {
    offset[l + 1] = offset[l] + width;
    width *= A;
  }

  TabularMDP m;
  m.S = S;
  m.A = A;
  m.H = H;
  m.P.assign(static_cast<std::size_t>(H) * S * A * S, 0.0);
  m.R.assign(static_cast<std::size_t>(H) * S * A, 0.0);
  for (int h = 0; h < H; ++h)
    for (int l = 0; l < L; ++l)
      for (int k = 0; k < offset[l + 1] - offset[l]; ++k) {
        const int s = offset[l] + k;
        for (int a = 0; a < A; ++a) {
          const int target = (l + 1 < L) ? offset[l + 1] + k * A + a : s;
          m.next(h, s, a)[target] = 1.0;
        }
      }
  m.x1.assign(static_cast<std::size_t>(S), 0.0);
  m.x1[0] = 1.0;
  m.bernoulli_scale = 1.0 / H;

  LowerBoundPair out;
  out.levels = L;
  out.s_star = offset[L - 1];
  out.a_star = 0;
  out.s_prime = offset[L] - 1;
  out.a_prime = A - 1;
  for (int h = 0; h < H; ++h) m.r(h, out.s_star, out.a_star) = leaves * eps / 2.0 / H;
  out.m_prime = m;
  for (int h = 0; h < H; ++h) out.m_prime.r(h, out.s_prime, out.a_prime) = leaves * eps / H;
  out.m = std::move(m);
  out.bound = (H - L + 1) * leaves * eps / (4.0 * H);
  return out;
}

std::vector<double> bellman_backup(const TabularMDP& mdp, int h, std::span<const double> g) {
  require(g.size() == static_cast<std::size_t>(mdp.S), "bellman_backup: value table has wrong size");
  std::vector<double> out(mdp.num_pairs());
  for (int s = 0; s < mdp.S; ++s)
    for (int a = 0; a < mdp.A; ++a) {
      const auto row = mdp.next(h, s, a);
      double acc = mdp.r(h, s, a);
      for (int s2 = 0; s2 < mdp.S; ++s2) acc += row[s2] * g[s2];
      out[mdp.pair(s, a)] = acc;
    }
  return out;
}

OptimalSolution solve_optimal(const TabularMDP& mdp) {
  mdp.validate();
  ValueTables vt(mdp.H, mdp.S, mdp.A);
  std::vector<int> actions(static_cast<std::size_t>(mdp.H) * mdp.S);
  for (int h = mdp.H - 1; h >= 0; --h) {
    const auto q = bellman_backup(mdp, h, {vt.V.data() + static_cast<std::size_t>(h + 1) * mdp.S,
                                           static_cast<std::size_t>(mdp.S)});
    for (int s = 0; s < mdp.S; ++s) {
      for (int a = 0; a < mdp.A; ++a) vt.q(h, s, a) = q[mdp.pair(s, a)];
      const int best = argmax_first({q.data() + mdp.pair(s, 0), static_cast<std::size_t>(mdp.A)});
      actions[static_cast<std::size_t>(h) * mdp.S + s] = best;
      vt.v(h, s) = q[mdp.pair(s, best)];
    }
  }
  return {Policy::deterministic(mdp.H, mdp.S, mdp.A, actions), std::move(vt)};
}

ValueTables evaluate_policy_tables(const TabularMDP& mdp, const Policy& pi) {
  require(pi.H == mdp.H && pi.S == mdp.S && pi.A == mdp.A, "evaluate_policy: policy dimensions do not match MDP");
  require(pi.prob.size() == static_cast<std::size_t>(mdp.H) * mdp.S * mdp.A, "evaluate_policy: malformed policy");
  ValueTables vt(mdp.H, mdp.S, mdp.A);
  for (int h = mdp.H - 1; h >= 0; --h) {
    const auto q = bellman_backup(mdp, h, {vt.V.data() + static_cast<std::size_t>(h + 1) * mdp.S,
                                           static_cast<std::size_t>(mdp.S)});
    for (int s = 0; s < mdp.S; ++s) {
      double v = 0.0;
      for (int a = 0; a < mdp.A; ++a) {
        vt.q(h, s, a) = q[mdp.pair(s, a)];
        v += pi.pr(h, s, a) * q[mdp.pair(s, a)];
      }
      vt.v(h, s) = v;
    }
  }
  return vt;
}

double evaluate_policy(const TabularMDP& mdp, const Policy& pi, std::span<const double> x1) {
  require(x1.size() == static_cast<std::size_t>(mdp.S), "evaluate_policy: x1 has wrong size");
  const auto vt = evaluate_policy_tables(mdp, pi);
  double total = 0.0;
  for (int s = 0; s < mdp.S; ++s) total += x1[s] * vt.v(0, s);
  return total;
}

double evaluate_policy(const TabularMDP& mdp, const Policy& pi, int x1) {
  require(x1 >= 0 && x1 < mdp.S, "evaluate_policy: initial state out of range");
  return evaluate_policy_tables(mdp, pi).v(0, x1);
}

double evaluate_policy(const TabularMDP& mdp, const Policy& pi) { return evaluate_policy(mdp, pi, mdp.x1); }

std::vector<double> occupancy(const TabularMDP& mdp, const Policy& pi) {
  require(pi.H == mdp.H && pi.S == mdp.S && pi.A == mdp.A, "occupancy: policy dimensions do not match MDP");
  std::vector<double> occ(static_cast<std::size_t>(mdp.H) * mdp.S * mdp.A, 0.0);
  std::vector<double> state(mdp.x1);
  for (int h = 0; h < mdp.H; ++h) {
    std::vector<double> next_state(static_cast<std::size_t>(mdp.S), 0.0);
    for (int s = 0; s < mdp.S; ++s) {
      if (state[s] == 0.0) continue;
      for (int a = 0; a < mdp.A; ++a) {
        const double w = state[s] * pi.pr(h, s, a);
        occ[mdp.r_index(h, s, a)] = w;
        if (w == 0.0) continue;
        const auto row = mdp.next(h, s, a);
        for (int s2 = 0; s2 < mdp.S; ++s2) next_state[s2] += w * row[s2];
      }
    }
    state = std::move(next_state);
  }
  return occ;
}

std::uint64_t hash_mdp(const TabularMDP& mdp) {
  Fnv1a f;
  f.add(mdp.S);
  f.add(mdp.A);
  f.add(mdp.H);
  f.add(mdp.P);
  f.add(mdp.R);
  f.add(mdp.x1);
  f.add(mdp.reward_noise);
  f.add(mdp.bernoulli_scale);
  return f.value();
}

std::uint64_t hash_policy(const Policy& pi) {
  Fnv1a f;
  f.add(pi.H);
  f.add(pi.S);
  f.add(pi.A);
  f.add(pi.prob);
  return f.value();
}

}  // namespace crorl
