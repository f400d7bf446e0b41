#include "crorl/eval.hpp"

#include "crorl/rng.hpp"
#include "crorl/weights.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crorl {

namespace {

constexpr double kSpanTol = 1e-9;

std::vector<std::vector<Point>> points_by_step(const OfflineDataset& ds) {
  std::vector<std::vector<Point>> out(static_cast<std::size_t>(ds.H));
  for (const auto& rec : ds.records) out[static_cast<std::size_t>(rec.h - 1)].push_back({rec.x, rec.a});
  return out;
}

void check_dims(const TabularMDP& mdp, const OfflineDataset& ds, const FunctionClassBackend& backend) {
  if (ds.S != mdp.S || ds.A != mdp.A || ds.H != mdp.H)
    throw std::invalid_argument("coverage: dataset dimensions do not match MDP");
  if (backend.S() != mdp.S || backend.A() != mdp.A)
    throw std::invalid_argument("coverage: backend dimensions do not match MDP");
}

/// True when z carries information the data at this step cannot see.
class SupportCheck {
 public:
  SupportCheck(const FunctionClassBackend& backend, std::span<const Point> points) : backend_(&backend) {
    if (backend.is_linear()) {
      const int d = backend.d();
      Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
      for (const auto& z : points) {
        const Eigen::VectorXd f = backend.feature(z);
        gram.noalias() += f * f.transpose();
      }
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
      const double top = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
      for (int k = 0; k < d; ++k)
        if (eig.eigenvalues()[k] <= kSpanTol * top) null_.push_back(eig.eigenvectors().col(k));
    } else {
      for (int f = 0; f < backend.size(); ++f)
        for (int g = f + 1; g < backend.size(); ++g) {
          bool same = true;
          for (const auto& z : points)
            if (backend.value(f, z) != backend.value(g, z)) {
              same = false;
              break;
            }
          if (same) blind_.emplace_back(f, g);
        }
    }
  }

  bool uncovered(Point z) const {
    if (backend_->is_linear()) {
      const Eigen::VectorXd f = backend_->feature(z);
      for (const auto& v : null_)
        if (std::abs(v.dot(f)) > kSpanTol) return true;
      return false;
    }
    for (const auto& [f, g] : blind_)
      if (backend_->value(f, z) != backend_->value(g, z)) return true;
    return false;
  }

 private:
  const FunctionClassBackend* backend_;
  std::vector<Eigen::VectorXd> null_;
  std::vector<std::pair<int, int>> blind_;
};

}  // namespace

double suboptimality(const TabularMDP& mdp, const Policy& pi, std::span<const double> x1) {
  const auto opt = solve_optimal(mdp);
  double v_star = 0.0;
  for (int s = 0; s < mdp.S; ++s) v_star += x1[s] * opt.values.v(0, s);
  // Clamp round-off: the optimal value dominates every policy.
  return std::max(0.0, v_star - evaluate_policy(mdp, pi, x1));
}

double suboptimality(const TabularMDP& mdp, const Policy& pi, int x1) {
  if (x1 < 0 || x1 >= mdp.S) throw std::invalid_argument("suboptimality: initial state out of range");
  const auto opt = solve_optimal(mdp);
  return std::max(0.0, opt.values.v(0, x1) - evaluate_policy(mdp, pi, x1));
}

double suboptimality(const TabularMDP& mdp, const Policy& pi) { return suboptimality(mdp, pi, mdp.x1); }

double bellman_residual(const TabularMDP& mdp, const ValueTables& f, int h0, int s, int a) {
  if (f.S != mdp.S || f.A != mdp.A || f.H != mdp.H)
    throw std::invalid_argument("bellman_residual: table dimensions do not match MDP");
  double backup = mdp.r(h0, s, a);
  if (h0 + 1 < mdp.H) {
    const auto row = mdp.next(h0, s, a);
    for (int s2 = 0; s2 < mdp.S; ++s2) {
      if (row[s2] == 0.0) continue;
      double best = f.q(h0 + 1, s2, 0);
      for (int b = 1; b < mdp.A; ++b) best = std::max(best, f.q(h0 + 1, s2, b));
      backup += row[s2] * best;
    }
  }
  return f.q(h0, s, a) - backup;
}

CoverageReport coverage_coefficient_with_weights(const TabularMDP& mdp, const OfflineDataset& ds,
                                                 const FunctionClassBackend& backend, const SolverConfig& cfg,
                                                 const std::vector<std::vector<double>>& sigma_sq_per_h,
                                                 bool unit_query_weight) {
  check_dims(mdp, ds, backend);
  cfg.validate();
  const auto pts = points_by_step(ds);
  if (sigma_sq_per_h.size() != pts.size()) throw std::invalid_argument("coverage: one weight vector per step required");
  const auto opt = solve_optimal(mdp);
  const auto occ = occupancy(mdp, opt.policy);

  CoverageReport rep;
  rep.per_h_weighted.assign(static_cast<std::size_t>(ds.H), 0.0);
  rep.per_h_unweighted.assign(static_cast<std::size_t>(ds.H), 0.0);
  for (int h0 = 0; h0 < ds.H; ++h0) {
    const auto& p = pts[h0];
    const double n = static_cast<double>(p.size());
    const std::vector<double> ones(p.size(), 1.0);
    const SupportCheck support(backend, p);
    const UncertaintyOracle weighted(backend, p, sigma_sq_per_h[h0], cfg.lambda);
    const UncertaintyOracle plain(backend, p, ones, cfg.lambda);
    double acc_w = 0.0;
    double acc_u = 0.0;
    bool infinite = false;
    for (int s = 0; s < mdp.S && !infinite; ++s)
      for (int a = 0; a < mdp.A; ++a) {
        const double d = occ[mdp.r_index(h0, s, a)];
        if (d <= 0.0) continue;
        if (support.uncovered({s, a})) {
          infinite = true;
          break;
        }
        const double uw = weighted({s, a});
        const double sigma_q = unit_query_weight ? 1.0 : std::max(1.0, uw / cfg.alpha);
        acc_w += d * n * uw * uw / sigma_q;
        const double uu = plain({s, a});
        acc_u += d * n * uu * uu;
      }
    rep.per_h_weighted[h0] = infinite ? kInfiniteCoverage : acc_w;
    rep.per_h_unweighted[h0] = infinite ? kInfiniteCoverage : acc_u;
  }
  rep.cc_weighted = *std::max_element(rep.per_h_weighted.begin(), rep.per_h_weighted.end());
  rep.cc_unweighted = *std::max_element(rep.per_h_unweighted.begin(), rep.per_h_unweighted.end());
  const auto diag = well_explored_diagnostics(ds, backend);
  rep.min_eig_per_h = diag.min_eig_per_h;
  rep.C_est = diag.C_est;
  return rep;
}

CoverageReport coverage_coefficient(const TabularMDP& mdp, const OfflineDataset& ds,
                                    const FunctionClassBackend& backend, const SolverConfig& cfg, int mc_episodes,
                                    std::uint64_t seed) {
  (void)seed;  // occupancy is propagated exactly; the seed only matters for sampling
  const auto pts = points_by_step(ds);
  std::vector<std::vector<double>> sigma(pts.size());
  for (std::size_t h = 0; h < pts.size(); ++h) {
    if (cfg.weighting == Weighting::unit) {
      sigma[h].assign(pts[h].size(), 1.0);
    } else {
      sigma[h] = iterate_weights(pts[h], backend, cfg.alpha, cfg.lambda).sigma_sq;
    }
  }
  auto rep = coverage_coefficient_with_weights(mdp, ds, backend, cfg, sigma, cfg.weighting == Weighting::unit);
  rep.mc_episodes = mc_episodes;
  return rep;
}

WellExplored well_explored_diagnostics(const OfflineDataset& ds, const FunctionClassBackend& backend) {
  if (ds.S != backend.S() || ds.A != backend.A())
    throw std::invalid_argument("well_explored_diagnostics: dataset and backend disagree on the state-action space");
  const auto pts = points_by_step(ds);
  WellExplored out;
  out.C_est = kInfiniteCoverage;
  out.C_eig_bound = kInfiniteCoverage;
  for (const auto& p : pts) {
    const double n = static_cast<double>(p.size());
    if (backend.is_linear()) {
      const int d = backend.d();
      if (static_cast<int>(p.size()) < d) {
        fmt::print(stderr, "warning: {} samples at a step with feature dimension {}; rank deficient\n", p.size(), d);
        out.rank_deficient = true;
      }
      Eigen::MatrixXd bar = Eigen::MatrixXd::Zero(d, d);
      for (const auto& z : p) {
        const Eigen::VectorXd f = backend.feature(z);
        bar.noalias() += f * f.transpose();
      }
      bar /= std::max(n, 1.0);
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(bar);
      const double min_eig = std::max(0.0, eig.eigenvalues()[0]);
      out.min_eig_per_h.push_back(min_eig);
      out.C_eig_bound = std::min(out.C_eig_bound, min_eig);
      if (min_eig <= kSpanTol) {
        out.rank_deficient = true;
        out.C_est = 0.0;
        continue;
      }
      const Eigen::LLT<Eigen::MatrixXd> llt(bar);
      double worst = 0.0;
      for (int s = 0; s < backend.S(); ++s)
        for (int a = 0; a < backend.A(); ++a) {
          const Eigen::VectorXd f = backend.feature({s, a});
          worst = std::max(worst, f.dot(llt.solve(f)));
        }
      if (worst > 0.0) out.C_est = std::min(out.C_est, 1.0 / worst);
    } else {
      for (int f = 0; f < backend.size(); ++f)
        for (int g = f + 1; g < backend.size(); ++g) {
          double sup = 0.0;
          for (std::size_t k = 0; k < backend.table(f).size(); ++k)
            sup = std::max(sup, std::abs(backend.table(f)[k] - backend.table(g)[k]));
          if (sup == 0.0) continue;
          double mean = 0.0;
          for (const auto& z : p) {
            const double diff = backend.value(f, z) - backend.value(g, z);
            mean += diff * diff;
          }
          mean /= std::max(n, 1.0);
          out.C_est = std::min(out.C_est, mean / (sup * sup));
        }
    }
  }
  if (!backend.is_linear()) out.C_eig_bound = 0.0;
  return out;
}

double domination_constant(const TabularMDP& mdp, const OfflineDataset& ds, const FunctionClassBackend& backend,
                           double lambda) {
  if (!backend.is_linear()) throw std::invalid_argument("domination_constant: linear backend only");
  check_dims(mdp, ds, backend);
  const auto pts = points_by_step(ds);
  const auto opt = solve_optimal(mdp);
  const auto occ = occupancy(mdp, opt.policy);
  const int d = backend.d();
  double c = kInfiniteCoverage;
  for (int h0 = 0; h0 < ds.H; ++h0) {
    const auto& p = pts[h0];
    Eigen::MatrixXd m = (lambda - 1.0) * Eigen::MatrixXd::Identity(d, d);
    for (const auto& z : p) {
      const Eigen::VectorXd f = backend.feature(z);
      m.noalias() += f * f.transpose();
    }
    Eigen::MatrixXd target = Eigen::MatrixXd::Zero(d, d);
    for (int s = 0; s < mdp.S; ++s)
      for (int a = 0; a < mdp.A; ++a) {
        const double w = occ[mdp.r_index(h0, s, a)];
        if (w <= 0.0) continue;
        const Eigen::VectorXd f = backend.feature({s, a});
        target.noalias() += w * f * f.transpose();
      }
    target *= static_cast<double>(p.size());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> meig(m);
    if (meig.eigenvalues()[0] <= 1e-12) return 0.0;
    const Eigen::LLT<Eigen::MatrixXd> llt(m);
    const Eigen::MatrixXd linv_t = llt.matrixL().solve(target);
    const Eigen::MatrixXd whitened = llt.matrixL().solve(linv_t.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> weig(0.5 * (whitened + whitened.transpose()));
    const double top = weig.eigenvalues()[d - 1];
    if (top > 0.0) c = std::min(c, 1.0 / top);
  }
  return c;
}

std::vector<double> occupancy_monte_carlo(const TabularMDP& mdp, const Policy& pi, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("occupancy_monte_carlo: episodes must be >= 1");
  std::vector<double> occ(static_cast<std::size_t>(mdp.H) * mdp.S * mdp.A, 0.0);
  for (int e = 0; e < episodes; ++e) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(e)));
    int x = static_cast<int>(rng.categorical(mdp.x1));
    for (int h0 = 0; h0 < mdp.H; ++h0) {
      const int a = static_cast<int>(
          rng.categorical({pi.prob.data() + (static_cast<std::size_t>(h0) * mdp.S + x) * mdp.A,
                           static_cast<std::size_t>(mdp.A)}));
      occ[mdp.r_index(h0, x, a)] += 1.0 / episodes;
      x = static_cast<int>(rng.categorical(mdp.next(h0, x, a)));
    }
  }
  return occ;
}

}  // namespace crorl
