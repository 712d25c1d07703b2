#pragma once

#include "tsplit/fem.hpp"

#include <array>

namespace tsplit {

using Tensor2 = std::array<std::array<double, 2>, 2>;  // [row][col]

/// Manufactured solution on the unit square
///   u = (sin(t+x) sin(t+y), cos(t+x) cos(t+y)),  p = sin(t+x-y),
/// with forcing and boundary traction consistent with the viscous form:
/// sigma(u) = grad(u)/Re (open) or eps(u)/Re (traction),
///   f = u_t - div sigma(u) + grad p,   g = (sigma(u) - p I) n.
class ExactSolution {
 public:
  ExactSolution(StressForm form, double reynolds);

  [[nodiscard]] Vec2 velocity(double t, Point x) const;
  /// grad[i][j] = d u_i / d x_j
  [[nodiscard]] Tensor2 velocity_gradient(double t, Point x) const;
  [[nodiscard]] Vec2 velocity_time_derivative(double t, Point x) const;
  [[nodiscard]] double divergence(double t, Point x) const;
  [[nodiscard]] double pressure(double t, Point x) const;
  [[nodiscard]] Vec2 pressure_gradient(double t, Point x) const;
  [[nodiscard]] Tensor2 viscous_stress(double t, Point x) const;
  [[nodiscard]] Vec2 force(double t, Point x) const;
  [[nodiscard]] Vec2 traction(double t, Point x, Point normal) const;

  [[nodiscard]] StressForm form() const { return form_; }
  [[nodiscard]] double reynolds() const { return reynolds_; }

  // Adapters for the assembly routines.
  [[nodiscard]] VectorFunction velocity_function() const;
  [[nodiscard]] ScalarFunction pressure_function() const;
  [[nodiscard]] VectorFunction force_function() const;
  [[nodiscard]] BoundaryFunction traction_function() const;

 private:
  StressForm form_;
  double reynolds_;
};

}  // namespace tsplit
