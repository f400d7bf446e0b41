#include "crorl/function_class.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crorl {

FunctionClassBackend FunctionClassBackend::linear(Eigen::MatrixXd phi, int S, int A, double covering_constant) {
  if (S < 1 || A < 1) throw std::invalid_argument("linear backend: S and A must be >= 1");
  if (phi.rows() != static_cast<Eigen::Index>(S) * A || phi.cols() < 1)
    throw std::invalid_argument("linear backend: phi must have S*A rows and at least one column");
  if (!phi.allFinite()) throw std::invalid_argument("linear backend: non-finite feature");
  if (!(covering_constant > 0.0)) throw std::invalid_argument("linear backend: covering constant must be > 0");
  FunctionClassBackend b;
  b.kind_ = Kind::linear;
  b.S_ = S;
  b.A_ = A;
  b.phi_ = std::move(phi);
  b.covering_constant_ = covering_constant;
  return b;
}

FunctionClassBackend FunctionClassBackend::finite(std::vector<std::vector<double>> tables, int S, int A) {
  if (S < 1 || A < 1) throw std::invalid_argument("finite backend: S and A must be >= 1");
  if (tables.empty()) throw std::invalid_argument("finite backend: empty class");
  const std::size_t pairs = static_cast<std::size_t>(S) * A;
  for (const auto& t : tables) {
    if (t.size() != pairs) throw std::invalid_argument("finite backend: table has wrong size");
    for (double v : t)
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("finite backend: values must lie in [0, 1]");
  }
  FunctionClassBackend b;
  b.kind_ = Kind::finite;
  b.S_ = S;
  b.A_ = A;
  b.tables_ = std::move(tables);
  return b;
}

double FunctionClassBackend::log_covering(double gamma) const {
  if (kind_ == Kind::finite) return std::log(static_cast<double>(tables_.size()));
  if (!(gamma > 0.0)) throw std::invalid_argument("log_covering: gamma must be > 0");
  const double dd = static_cast<double>(d());
  return std::max(0.0, covering_constant_ * dd * dd * std::log(1.0 / gamma));
}

void FunctionClassBackend::check_point(Point z) const {
  if (z.s < 0 || z.s >= S_ || z.a < 0 || z.a >= A_)
    throw std::out_of_range(fmt::format("point ({}, {}) outside the {}x{} domain", z.s, z.a, S_, A_));
}

}  // namespace crorl
