#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace crorl {

/// A state-action pair.
struct Point {
  int s = 0;
  int a = 0;
  bool operator==(const Point&) const = default;
};

/// Either a linear class {w . phi} over a fixed feature table, or an explicit
/// finite list of Q-tables. Both index pairs as s * A + a.
class FunctionClassBackend {
 public:
  enum class Kind { linear, finite };

  /// phi has S*A rows. Log-covering is covering_constant * d^2 * ln(1/gamma).
  static FunctionClassBackend linear(Eigen::MatrixXd phi, int S, int A, double covering_constant = 1.0);
  /// Each table has S*A entries in [0, 1].
  static FunctionClassBackend finite(std::vector<std::vector<double>> tables, int S, int A);

  Kind kind() const { return kind_; }
  bool is_linear() const { return kind_ == Kind::linear; }
  int S() const { return S_; }
  int A() const { return A_; }
  std::size_t pair(Point z) const { return static_cast<std::size_t>(z.s) * A_ + z.a; }

  /// Feature dimension (linear only).
  int d() const { return static_cast<int>(phi_.cols()); }
  const Eigen::MatrixXd& phi() const { return phi_; }
  Eigen::VectorXd feature(Point z) const { return phi_.row(static_cast<Eigen::Index>(pair(z))).transpose(); }

  /// Class size (finite only).
  int size() const { return static_cast<int>(tables_.size()); }
  const std::vector<double>& table(int f) const { return tables_[static_cast<std::size_t>(f)]; }
  double value(int f, Point z) const { return tables_[static_cast<std::size_t>(f)][pair(z)]; }

  /// Analytic ln N(gamma), clamped at 0.
  double log_covering(double gamma) const;
  double covering_constant() const { return covering_constant_; }

  void check_point(Point z) const;

 private:
  Kind kind_ = Kind::linear;
  int S_ = 0;
  int A_ = 0;
  Eigen::MatrixXd phi_;
  std::vector<std::vector<double>> tables_;
  double covering_constant_ = 1.0;
};

}  // namespace crorl
