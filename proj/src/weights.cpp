#include "crorl/weights.hpp"

#include "crorl/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace crorl {

namespace {

constexpr double kJitter = 1e-12;

void check_inputs(const FunctionClassBackend& backend, std::span<const Point> points, std::span<const double> sigma_sq,
                  double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("uncertainty: lambda must be > 0");
  if (points.size() != sigma_sq.size()) throw std::invalid_argument("uncertainty: weights and points differ in length");
  for (double s : sigma_sq)
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("uncertainty: weights must be positive");
  for (const auto& z : points) backend.check_point(z);
}

WeightVector iterate(std::span<const Point> points, std::span<const double> rho, const FunctionClassBackend& backend,
                     double alpha, double lambda, bool trace) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("iterate_weights: alpha must be > 0");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("iterate_weights: lambda must be > 0");
  const std::size_t n = points.size();
  WeightVector out;
  out.alpha = alpha;
  out.lambda = lambda;
  out.sigma_sq.assign(n, 1.0);
  if (trace) out.trace.push_back(out.sigma_sq);
  if (n == 0) return out;

  const int cap = weight_iteration_cap(alpha, lambda);
  std::vector<double> next(n);
  for (int t = 1;; ++t) {
    if (t > cap)
      throw std::runtime_error(fmt::format("iterate_weights: no convergence within {} passes", cap));
    const UncertaintyOracle unc(backend, points, out.sigma_sq, lambda);
    double ratio = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double scale = rho.empty() ? alpha : alpha * rho[i];
      next[i] = std::max(1.0, unc(points[i]) / scale);
      ratio = std::max(ratio, next[i] / out.sigma_sq[i]);
    }
    out.sigma_sq.swap(next);
    out.iterations = t;
    if (trace) out.trace.push_back(out.sigma_sq);
    if (ratio <= 2.0) break;
  }
  return out;
}

}  // namespace

std::vector<std::size_t> canonical_order(const FunctionClassBackend& backend, std::span<const Point> points,
                                         std::span<const double> sigma_sq) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const auto pi = backend.pair(points[i]);
    const auto pj = backend.pair(points[j]);
    if (pi != pj) return pi < pj;
    return sigma_sq[i] < sigma_sq[j];
  });
  return order;
}

UncertaintyOracle::UncertaintyOracle(const FunctionClassBackend& backend, std::span<const Point> points,
                                     std::span<const double> sigma_sq, double lambda)
    : backend_(&backend), lambda_(lambda) {
  check_inputs(backend, points, sigma_sq, lambda);
  const auto order = canonical_order(backend, points, sigma_sq);
  if (backend.is_linear()) {
    const int d = backend.d();
    lambda_mat_ = lambda * Eigen::MatrixXd::Identity(d, d);
    for (std::size_t i : order) {
      const Eigen::VectorXd f = backend.feature(points[i]);
      lambda_mat_.selfadjointView<Eigen::Lower>().rankUpdate(f, 1.0 / sigma_sq[i]);
    }
    lambda_mat_ = lambda_mat_.selfadjointView<Eigen::Lower>();
    llt_.compute(lambda_mat_);
    if (llt_.info() != Eigen::Success) {
      lambda_mat_.diagonal().array() += kJitter;
      llt_.compute(lambda_mat_);
      if (llt_.info() != Eigen::Success) throw std::runtime_error("uncertainty: Lambda is not positive definite");
    }
    return;
  }
  const int m = backend.size();
  for (int f = 0; f < m; ++f)
    for (int g = f + 1; g < m; ++g) {
      double acc = lambda;
      for (std::size_t i : order) {
        const double diff = backend.value(f, points[i]) - backend.value(g, points[i]);
        acc += diff * diff / sigma_sq[i];
      }
      pair_f_.push_back(f);
      pair_g_.push_back(g);
      pair_inv_denom_.push_back(1.0 / std::sqrt(acc));
    }
}

double UncertaintyOracle::operator()(Point z) const {
  backend_->check_point(z);
  if (backend_->is_linear()) {
    const Eigen::VectorXd f = backend_->feature(z);
    const Eigen::VectorXd u = llt_.matrixL().solve(f);
    return std::sqrt(u.squaredNorm());
  }
  double best = 0.0;
  for (std::size_t k = 0; k < pair_f_.size(); ++k) {
    const double diff = std::abs(backend_->value(pair_f_[k], z) - backend_->value(pair_g_[k], z));
    best = std::max(best, diff * pair_inv_denom_[k]);
  }
  return best;
}

Eigen::VectorXd UncertaintyOracle::solve(const Eigen::VectorXd& rhs) const {
  if (!backend_->is_linear()) throw std::logic_error("UncertaintyOracle::solve: linear backend only");
  return llt_.solve(rhs);
}

double uncertainty(Point z, std::span<const Point> points, std::span<const double> sigma_sq,
                   const FunctionClassBackend& backend, double lambda) {
  return UncertaintyOracle(backend, points, sigma_sq, lambda)(z);
}

int weight_iteration_cap(double alpha, double lambda) {
  const double bound = 1.0 / (alpha * std::sqrt(lambda));
  const double steps = std::max(0.0, std::ceil(std::log2(bound)));
  return static_cast<int>(10.0 * steps) + 10;
}

WeightVector iterate_weights(std::span<const Point> points, const FunctionClassBackend& backend, double alpha,
                             double lambda, bool trace) {
  return iterate(points, {}, backend, alpha, lambda, trace);
}

WeightVector iterate_weights_shifted(std::span<const Point> points, std::span<const double> rho,
                                     const FunctionClassBackend& backend, double alpha, double lambda, bool trace) {
  if (rho.size() != points.size()) throw std::invalid_argument("iterate_weights_shifted: rho and points differ in length");
  for (double r : rho)
    if (!(r > 0.0)) throw std::invalid_argument("iterate_weights_shifted: rho must be positive");
  return iterate(points, rho, backend, alpha, lambda, trace);
}

double bootstrap_variance(Point z, std::span<const Point> points, std::span<const double> targets,
                          const FunctionClassBackend& backend, double lambda, int K, std::uint64_t seed) {
  if (!backend.is_linear()) throw std::invalid_argument("bootstrap_variance: linear backend only");
  if (K < 2) throw std::invalid_argument("bootstrap_variance: K must be >= 2");
  if (targets.size() != points.size()) throw std::invalid_argument("bootstrap_variance: targets and points differ");
  const std::vector<double> ones(points.size(), 1.0);
  const UncertaintyOracle oracle(backend, points, ones, lambda);
  const int d = backend.d();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < points.size(); ++i) rhs += backend.feature(points[i]) * targets[i];
  const Eigen::VectorXd mu = oracle.solve(rhs);

  // w = mu + L^-T xi has covariance (L L^T)^-1 = Lambda^-1.
  const Eigen::LLT<Eigen::MatrixXd> llt(oracle.Lambda());
  const Eigen::VectorXd phi = backend.feature(z);
  Rng rng(seed);
  Eigen::VectorXd xi(d);
  double mean = 0.0;
  double m2 = 0.0;
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < d; ++j) xi[j] = rng.normal();
    const Eigen::VectorXd w = mu + llt.matrixU().solve(xi);
    const double v = phi.dot(w);
    const double delta = v - mean;
    mean += delta / (k + 1);
    m2 += delta * (v - mean);
  }
  return m2 / (K - 1);
}

}  // namespace crorl
