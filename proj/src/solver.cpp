#include "crorl/solver.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace crorl {

std::string to_string(Weighting w) { return w == Weighting::unit ? "unit" : "uncertainty"; }
std::string to_string(BetaMode m) { return m == BetaMode::theory ? "theory" : "plugin"; }
std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::cr_pevi: return "cr_pevi";
    case Algorithm::pevi: return "pevi";
    case Algorithm::cords_pevi: return "cords_pevi";
  }
  return "unknown";
}

Weighting parse_weighting(std::string_view text) {
  if (text == "uncertainty") return Weighting::uncertainty;
  if (text == "unit") return Weighting::unit;
  throw std::invalid_argument(fmt::format("unknown weighting \"{}\"", text));
}

BetaMode parse_beta_mode(std::string_view text) {
  if (text == "plugin") return BetaMode::plugin;
  if (text == "theory") return BetaMode::theory;
  throw std::invalid_argument(fmt::format("unknown beta mode \"{}\"", text));
}

Algorithm parse_algorithm(std::string_view text) {
  if (text == "cr_pevi") return Algorithm::cr_pevi;
  if (text == "pevi") return Algorithm::pevi;
  if (text == "cords_pevi") return Algorithm::cords_pevi;
  throw std::invalid_argument(fmt::format("unknown algorithm \"{}\"", text));
}

void SolverConfig::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(alpha)) throw std::invalid_argument("SolverConfig: alpha must be > 0");
  if (!positive(lambda)) throw std::invalid_argument("SolverConfig: lambda must be > 0");
  if (!positive(beta_scale)) throw std::invalid_argument("SolverConfig: beta_scale must be > 0");
  if (!positive(delta)) throw std::invalid_argument("SolverConfig: delta must be > 0");
  if (!(gamma >= 0.0)) throw std::invalid_argument("SolverConfig: gamma must be >= 0");
  if (!(eta >= 0.0)) throw std::invalid_argument("SolverConfig: eta must be >= 0");
  for (double z : zeta_per_h)
    if (!(z >= 0.0)) throw std::invalid_argument("SolverConfig: zeta_per_h must be >= 0");
  for (double r : rho)
    if (!positive(r)) throw std::invalid_argument("SolverConfig: rho must be > 0");
}

LinearFit weighted_ridge(std::span<const Point> points, std::span<const double> targets,
                         std::span<const double> sigma_sq, const FunctionClassBackend& backend, double lambda) {
  if (!backend.is_linear()) throw std::invalid_argument("weighted_ridge: linear backend only");
  if (targets.size() != points.size() || sigma_sq.size() != points.size())
    throw std::invalid_argument("weighted_ridge: points, targets and weights differ in length");
  const UncertaintyOracle oracle(backend, points, sigma_sq, lambda);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(backend.d());
  for (std::size_t i : canonical_order(backend, points, sigma_sq))
    rhs += backend.feature(points[i]) * (targets[i] / sigma_sq[i]);
  LinearFit fit;
  fit.w = oracle.solve(rhs);
  fit.Lambda = oracle.Lambda();
  double acc = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double e = backend.feature(points[i]).dot(fit.w) - targets[i];
    acc += e * e / sigma_sq[i];
  }
  fit.residual_norm = std::sqrt(acc);
  return fit;
}

double bonus(Point z, std::span<const Point> points, std::span<const double> sigma_sq,
             const FunctionClassBackend& backend, double lambda) {
  return uncertainty(z, points, sigma_sq, backend, lambda);
}

double confidence_radius(int h0, int H, const SolverConfig& cfg, double logN) {
  if (!(logN >= 0.0)) throw std::invalid_argument("confidence_radius: logN must be >= 0");
  const double inner = std::log(static_cast<double>(H)) + logN + std::log(1.0 / cfg.delta);
  return cfg.beta_scale * (cfg.alpha * cfg.zeta(h0) + std::sqrt(std::max(0.0, inner)));
}

double confidence_radius_theory(int h0, int H, int n, const SolverConfig& cfg, double logN, double gamma,
                                double beta_next) {
  const double zeta = cfg.zeta(h0);
  const double nn = static_cast<double>(n);
  // sum_i (zeta_i^h)^2 is bounded by (zeta^h)^2.
  const double c1 = 2.0 * (zeta * zeta + 2.0 * nn * cfg.eta * cfg.eta + 3.0 * cfg.eta * cfg.eta * std::log(2.0 / cfg.delta));
  const double cover = std::log(2.0 * H / cfg.delta) + logN;
  const double drift = 5.0 * beta_next * gamma;
  const double inner =
      12.0 * cfg.lambda + 12.0 * cover + 12.0 * drift * drift * nn + 60.0 * beta_next * gamma * std::sqrt(nn * c1);
  const double lead = cfg.rho.empty() ? 24.0 : 12.0;
  return cfg.beta_scale * (lead * cfg.alpha * zeta + std::sqrt(std::max(0.0, inner)));
}

std::vector<double> confidence_radii(int H, int n, const SolverConfig& cfg, double logN, double gamma) {
  std::vector<double> beta(static_cast<std::size_t>(H), 0.0);
  double next = 0.0;
  for (int h0 = H - 1; h0 >= 0; --h0) {
    beta[h0] = cfg.beta_mode == BetaMode::theory ? confidence_radius_theory(h0, H, n, cfg, logN, gamma, next)
                                                 : confidence_radius(h0, H, cfg, logN);
    next = beta[h0];
  }
  return beta;
}

SolverConfig theorem_defaults(int n, int H, const FunctionClassBackend& backend, std::vector<double> zeta_per_h,
                              double delta, double beta_scale, BetaMode mode) {
  if (n < 1 || H < 1) throw std::invalid_argument("theorem_defaults: n and H must be >= 1");
  if (!zeta_per_h.empty() && zeta_per_h.size() != static_cast<std::size_t>(H))
    throw std::invalid_argument("theorem_defaults: zeta_per_h must have H entries");
  double zeta = 0.0;
  for (double z : zeta_per_h) zeta += z;

  SolverConfig cfg;
  cfg.delta = delta;
  cfg.beta_scale = beta_scale;
  cfg.beta_mode = mode;
  cfg.zeta_per_h = std::move(zeta_per_h);

  auto fill = [&](double gamma) {
    cfg.gamma = gamma;
    const double logN = backend.log_covering(gamma);
    // lambda must stay positive even when the covering term vanishes.
    cfg.lambda = std::max(logN, 1e-6);
    cfg.alpha = zeta > 0.0 ? H * std::sqrt(std::max(logN, 1e-12)) / zeta : 1.0 / std::sqrt(static_cast<double>(n));
    return confidence_radii(H, n, cfg, logN, gamma);
  };

  const auto beta = fill(1.0 / n);
  double worst = 0.0;
  for (int h0 = 0; h0 < H; ++h0) worst = std::max(worst, beta[h0] * cfg.zeta(h0));
  if (worst > 0.0) fill(1.0 / (n * worst));
  return cfg;
}

namespace {

struct StepData {
  std::vector<std::size_t> index;
  std::vector<Point> points;
  std::vector<double> rewards;
  std::vector<int> next_states;
  std::vector<double> rho;
};

std::vector<StepData> split_by_step(const OfflineDataset& ds, const std::vector<double>& rho) {
  std::vector<StepData> steps(static_cast<std::size_t>(ds.H));
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& rec = ds.records[i];
    auto& st = steps[static_cast<std::size_t>(rec.h - 1)];
    st.index.push_back(i);
    st.points.push_back({rec.x, rec.a});
    st.rewards.push_back(rec.r);
    st.next_states.push_back(rec.x_next);
    if (!rho.empty()) st.rho.push_back(rho.size() == ds.records.size() ? rho[i] : rho[rec.episode]);
  }
  return steps;
}

}  // namespace

SolveReport cr_pevi(const OfflineDataset& ds, const FunctionClassBackend& backend, const SolverConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  if (ds.records.empty()) throw std::invalid_argument("cr_pevi: empty dataset");
  ds.validate();
  if (ds.S != backend.S() || ds.A != backend.A())
    throw std::invalid_argument("cr_pevi: dataset and backend disagree on the state-action space");
  if (!cfg.zeta_per_h.empty() && cfg.zeta_per_h.size() != static_cast<std::size_t>(ds.H))
    throw std::invalid_argument("cr_pevi: zeta_per_h must have H entries");
  if (!cfg.rho.empty() && cfg.rho.size() != static_cast<std::size_t>(ds.n) && cfg.rho.size() != ds.records.size())
    throw std::invalid_argument("cr_pevi: rho must have one entry per episode or per record");

  const int H = ds.H;
  const int S = ds.S;
  const int A = ds.A;
  SolveReport rep;
  rep.gamma = cfg.gamma > 0.0 ? cfg.gamma : 1.0 / ds.n;
  rep.lambda = cfg.lambda;
  rep.log_covering = backend.log_covering(rep.gamma);
  rep.beta = confidence_radii(H, ds.n, cfg, rep.log_covering, rep.gamma);
  rep.f = ValueTables(H, S, A);
  rep.fitted = ValueTables(H, S, A);
  rep.bonus = ValueTables(H, S, A);
  rep.weights.resize(static_cast<std::size_t>(H));
  rep.diagnostics.resize(static_cast<std::size_t>(H));
  rep.step_records.resize(static_cast<std::size_t>(H));
  if (backend.is_linear()) rep.fits.resize(static_cast<std::size_t>(H));

  const auto steps = split_by_step(ds, cfg.rho);
  std::vector<int> actions(static_cast<std::size_t>(H) * S);

  for (int h0 = H - 1; h0 >= 0; --h0) {
    const auto& st = steps[static_cast<std::size_t>(h0)];
    const std::size_t m = st.points.size();
    std::vector<double> y(m);
    for (std::size_t i = 0; i < m; ++i) y[i] = st.rewards[i] + rep.f.v(h0 + 1, st.next_states[i]);

    WeightVector wv;
    if (cfg.weighting == Weighting::unit) {
      wv.sigma_sq.assign(m, 1.0);
      wv.alpha = cfg.alpha;
      wv.lambda = cfg.lambda;
    } else if (!cfg.rho.empty()) {
      wv = iterate_weights_shifted(st.points, st.rho, backend, cfg.alpha, cfg.lambda);
    } else {
      wv = iterate_weights(st.points, backend, cfg.alpha, cfg.lambda);
    }

    const UncertaintyOracle oracle(backend, st.points, wv.sigma_sq, cfg.lambda);
    std::vector<double> fitted(static_cast<std::size_t>(S) * A);
    if (backend.is_linear()) {
      auto fit = weighted_ridge(st.points, y, wv.sigma_sq, backend, cfg.lambda);
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) fitted[static_cast<std::size_t>(s) * A + a] = backend.feature({s, a}).dot(fit.w);
      rep.fits[h0] = std::move(fit);
    } else {
      // Least squares over the class; smallest index wins ties.
      int best = 0;
      double best_loss = std::numeric_limits<double>::infinity();
      const auto order = canonical_order(backend, st.points, wv.sigma_sq);
      for (int f = 0; f < backend.size(); ++f) {
        double loss = 0.0;
        for (std::size_t i : order) {
          const double e = backend.value(f, st.points[i]) - y[i];
          loss += e * e / wv.sigma_sq[i];
        }
        if (loss < best_loss) {
          best_loss = loss;
          best = f;
        }
      }
      fitted = backend.table(best);
    }

    auto& diag = rep.diagnostics[h0];
    double err = cfg.lambda;
    for (std::size_t i = 0; i < m; ++i) {
      const double e = fitted[backend.pair(st.points[i])] - y[i];
      err += e * e / wv.sigma_sq[i];
    }
    diag.weighted_error = std::sqrt(err);
    diag.bonus_min = std::numeric_limits<double>::infinity();
    diag.bonus_max = 0.0;
    double bonus_sum = 0.0;
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double fh = fitted[static_cast<std::size_t>(s) * A + a];
        const double b = oracle({s, a});
        rep.fitted.q(h0, s, a) = fh;
        rep.bonus.q(h0, s, a) = b;
        rep.f.q(h0, s, a) = std::clamp(fh - rep.beta[h0] * b, 0.0, 1.0);
        diag.bonus_min = std::min(diag.bonus_min, b);
        diag.bonus_max = std::max(diag.bonus_max, b);
        bonus_sum += b;
      }
      const int best = argmax_first({rep.f.Q.data() + (static_cast<std::size_t>(h0) * S + s) * A,
                                     static_cast<std::size_t>(A)});
      actions[static_cast<std::size_t>(h0) * S + s] = best;
      rep.f.v(h0, s) = rep.f.q(h0, s, best);
    }
    diag.bonus_mean = bonus_sum / (static_cast<double>(S) * A);
    diag.weight_iterations = wv.iterations;
    diag.max_sigma_sq = wv.sigma_sq.empty() ? 1.0 : *std::max_element(wv.sigma_sq.begin(), wv.sigma_sq.end());
    diag.samples = static_cast<int>(m);
    rep.weights[h0] = std::move(wv);
    rep.step_records[h0] = st.index;
  }
  rep.fitted.refresh_values();
  rep.bonus.refresh_values();
  rep.policy = Policy::deterministic(H, S, A, actions);
  rep.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

SolveReport pevi(const OfflineDataset& ds, const FunctionClassBackend& backend, SolverConfig cfg) {
  cfg.weighting = Weighting::unit;
  cfg.rho.clear();
  return cr_pevi(ds, backend, cfg);
}

SolveReport cords_pevi(const OfflineDataset& ds, const FunctionClassBackend& backend, const SolverConfig& cfg) {
  if (cfg.rho.empty()) throw std::invalid_argument("cords_pevi: rho is required");
  return cr_pevi(ds, backend, cfg);
}

SolveReport solve(Algorithm algorithm, const OfflineDataset& ds, const FunctionClassBackend& backend,
                  const SolverConfig& cfg) {
  switch (algorithm) {
    case Algorithm::cr_pevi: {
      SolverConfig c = cfg;
      c.rho.clear();
      return cr_pevi(ds, backend, c);
    }
    case Algorithm::pevi: return pevi(ds, backend, cfg);
    case Algorithm::cords_pevi: return cords_pevi(ds, backend, cfg);
  }
  throw std::logic_error("solve: unhandled algorithm");
}

}  // namespace crorl
