#include "tsplit/exact.hpp"

#include <cmath>
#include <stdexcept>

namespace tsplit {

ExactSolution::ExactSolution(StressForm form, double reynolds) : form_(form), reynolds_(reynolds) {
  if (!(reynolds > 0.0)) throw std::invalid_argument("ExactSolution: Reynolds number must be positive");
}

Vec2 ExactSolution::velocity(double t, Point x) const {
  const double a = t + x.x;
  const double b = t + x.y;
  return {std::sin(a) * std::sin(b), std::cos(a) * std::cos(b)};
}

Tensor2 ExactSolution::velocity_gradient(double t, Point x) const {
  const double a = t + x.x;
  const double b = t + x.y;
  const double sa = std::sin(a), ca = std::cos(a), sb = std::sin(b), cb = std::cos(b);
  return {{{ca * sb, sa * cb}, {-sa * cb, -ca * sb}}};
}

Vec2 ExactSolution::velocity_time_derivative(double t, Point x) const {
  const double s = std::sin(2.0 * t + x.x + x.y);
  return {s, -s};
}

double ExactSolution::divergence(double t, Point x) const {
  const Tensor2 g = velocity_gradient(t, x);
  return g[0][0] + g[1][1];
}

double ExactSolution::pressure(double t, Point x) const { return std::sin(t + x.x - x.y); }

Vec2 ExactSolution::pressure_gradient(double t, Point x) const {
  const double c = std::cos(t + x.x - x.y);
  return {c, -c};
}

Tensor2 ExactSolution::viscous_stress(double t, Point x) const {
  const Tensor2 g = velocity_gradient(t, x);
  Tensor2 s{};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      s[i][j] = form_ == StressForm::open ? g[i][j] : 0.5 * (g[i][j] + g[j][i]);
      s[i][j] /= reynolds_;
    }
  }
  return s;
}

Vec2 ExactSolution::force(double t, Point x) const {
  // u is divergence free and Laplace(u) = -2u, so div grad(u) = -2u and
  // div eps(u) = Laplace(u) / 2 = -u.
  const Vec2 u = velocity(t, x);
  const Vec2 ut = velocity_time_derivative(t, x);
  const Vec2 gp = pressure_gradient(t, x);
  const double visc = (form_ == StressForm::open ? 2.0 : 1.0) / reynolds_;
  return {ut.x + visc * u.x + gp.x, ut.y + visc * u.y + gp.y};
}

Vec2 ExactSolution::traction(double t, Point x, Point n) const {
  const Tensor2 s = viscous_stress(t, x);
  const double p = pressure(t, x);
  return {s[0][0] * n.x + s[0][1] * n.y - p * n.x, s[1][0] * n.x + s[1][1] * n.y - p * n.y};
}

VectorFunction ExactSolution::velocity_function() const {
  return [self = *this](double t, Point x) { return self.velocity(t, x); };
}

ScalarFunction ExactSolution::pressure_function() const {
  return [self = *this](double t, Point x) { return self.pressure(t, x); };
}

VectorFunction ExactSolution::force_function() const {
  return [self = *this](double t, Point x) { return self.force(t, x); };
}

BoundaryFunction ExactSolution::traction_function() const {
  return [self = *this](double t, Point x, Point n) { return self.traction(t, x, n); };
}

}  // namespace tsplit
