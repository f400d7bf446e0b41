#pragma once

#include "crorl/function_class.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace crorl {

struct WeightVector {
  std::vector<double> sigma_sq;  // aligned with the input points
  double alpha = 0.0;
  double lambda = 0.0;
  int iterations = 0;
  /// sigma_sq after each pass, starting with the all-ones initialization.
  /// Filled only when tracing was requested.
  std::vector<std::vector<double>> trace;
};

/// Data-dependent uncertainty at arbitrary query points for fixed weights.
/// Linear: sqrt(phi' Lambda^-1 phi) with Lambda = lambda I + sum phi phi' / sigma^2.
/// Finite: max over pairs (f, g) of |f(z) - g(z)| / sqrt(lambda + sum (f - g)^2 / sigma^2).
/// Sums run in a canonical order (by pair, then weight), so the result does not
/// depend on how the points are ordered.
class UncertaintyOracle {
 public:
  UncertaintyOracle(const FunctionClassBackend& backend, std::span<const Point> points,
                    std::span<const double> sigma_sq, double lambda);

  double operator()(Point z) const;

  /// Linear backend only.
  const Eigen::MatrixXd& Lambda() const { return lambda_mat_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

 private:
  const FunctionClassBackend* backend_;
  double lambda_;
  Eigen::MatrixXd lambda_mat_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  std::vector<int> pair_f_;
  std::vector<int> pair_g_;
  std::vector<double> pair_inv_denom_;
};

/// Order in which weighted sums are accumulated: by pair index, then weight.
std::vector<std::size_t> canonical_order(const FunctionClassBackend& backend, std::span<const Point> points,
                                         std::span<const double> sigma_sq);

double uncertainty(Point z, std::span<const Point> points, std::span<const double> sigma_sq,
                   const FunctionClassBackend& backend, double lambda);

/// Maximum number of passes: 10 * ceil(log2(1 / (alpha sqrt(lambda)))) + 10,
/// with the log term clamped at 0.
int weight_iteration_cap(double alpha, double lambda);

/// Uncertainty weight iteration. Starts from sigma^2 = 1 and sets
/// sigma_i^2 = max(1, u_i / alpha) with u_i evaluated at the previous weights,
/// stopping once no weight more than doubles in a pass.
WeightVector iterate_weights(std::span<const Point> points, const FunctionClassBackend& backend, double alpha,
                             double lambda, bool trace = false);

/// Same iteration with u_i / (alpha * rho_i).
WeightVector iterate_weights_shifted(std::span<const Point> points, std::span<const double> rho,
                                     const FunctionClassBackend& backend, double alpha, double lambda,
                                     bool trace = false);

/// Sample variance of phi(z)' w over K draws from N(mu, Lambda^-1), where mu
/// is the unit-weight ridge solution. Linear backend only.
double bootstrap_variance(Point z, std::span<const Point> points, std::span<const double> targets,
                          const FunctionClassBackend& backend, double lambda, int K, std::uint64_t seed);

}  // namespace crorl
