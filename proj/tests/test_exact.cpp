#include "tsplit/exact.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace tsplit;

namespace {

constexpr double kStep = 1e-5;

// Central differences of the closed forms; only velocity and pressure are
// trusted, everything else is rebuilt from them.
Tensor2 fd_velocity_gradient(const ExactSolution& ex, double t, Point x) {
  Tensor2 g{};
  const Vec2 ux1 = ex.velocity(t, {x.x + kStep, x.y}), ux0 = ex.velocity(t, {x.x - kStep, x.y});
  const Vec2 uy1 = ex.velocity(t, {x.x, x.y + kStep}), uy0 = ex.velocity(t, {x.x, x.y - kStep});
  g[0][0] = (ux1.x - ux0.x) / (2 * kStep);
  g[1][0] = (ux1.y - ux0.y) / (2 * kStep);
  g[0][1] = (uy1.x - uy0.x) / (2 * kStep);
  g[1][1] = (uy1.y - uy0.y) / (2 * kStep);
  return g;
}

Tensor2 stress_from_gradient(const Tensor2& g, StressForm form, double re) {
  Tensor2 s{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) s[i][j] = (form == StressForm::open ? g[i][j] : 0.5 * (g[i][j] + g[j][i])) / re;
  return s;
}

Vec2 fd_stress_divergence(const ExactSolution& ex, double t, Point x) {
  const Tensor2 sx1 = ex.viscous_stress(t, {x.x + kStep, x.y}), sx0 = ex.viscous_stress(t, {x.x - kStep, x.y});
  const Tensor2 sy1 = ex.viscous_stress(t, {x.x, x.y + kStep}), sy0 = ex.viscous_stress(t, {x.x, x.y - kStep});
  return {(sx1[0][0] - sx0[0][0]) / (2 * kStep) + (sy1[0][1] - sy0[0][1]) / (2 * kStep),
          (sx1[1][0] - sx0[1][0]) / (2 * kStep) + (sy1[1][1] - sy0[1][1]) / (2 * kStep)};
}

Vec2 fd_momentum_residual(const ExactSolution& ex, double t, Point x) {
  const Vec2 u1 = ex.velocity(t + kStep, x), u0 = ex.velocity(t - kStep, x);
  const Vec2 ut{(u1.x - u0.x) / (2 * kStep), (u1.y - u0.y) / (2 * kStep)};
  const Vec2 div_s = fd_stress_divergence(ex, t, x);
  const Vec2 gp{(ex.pressure(t, {x.x + kStep, x.y}) - ex.pressure(t, {x.x - kStep, x.y})) / (2 * kStep),
                (ex.pressure(t, {x.x, x.y + kStep}) - ex.pressure(t, {x.x, x.y - kStep})) / (2 * kStep)};
  const Vec2 f = ex.force(t, x);
  return {ut.x - div_s.x + gp.x - f.x, ut.y - div_s.y + gp.y - f.y};
}

struct Sample {
  double t;
  Point x;
};

std::vector<Sample> random_samples(std::uint64_t seed, int n = 100) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) out.push_back({unit(rng), {unit(rng), unit(rng)}});
  return out;
}

}  // namespace

TEST_CASE("closed-form values at the origin") {
  const ExactSolution ex(StressForm::traction, 1.0);
  const Vec2 u = ex.velocity(0.0, {0.0, 0.0});
  CHECK(u.x == 0.0);
  CHECK(u.y == 1.0);
  CHECK(ex.pressure(0.0, {0.0, 0.0}) == 0.0);
  CHECK(ex.pressure(0.5, {0.2, 0.7}) == doctest::Approx(0.0));
}

TEST_CASE("reynolds number must be positive") {
  CHECK_THROWS_AS(ExactSolution(StressForm::open, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(ExactSolution(StressForm::open, -1.0), std::invalid_argument);
}

TEST_CASE("velocity is pointwise divergence free") {
  const ExactSolution ex(StressForm::open, 1.0);
  for (const auto& s : random_samples(1)) {
    CHECK(std::abs(ex.divergence(s.t, s.x)) <= 1e-12);
    const Tensor2 g = ex.velocity_gradient(s.t, s.x);
    CHECK(std::abs(g[0][0] + g[1][1]) <= 1e-12);
  }
}

TEST_CASE("derivatives agree with finite differences") {
  const ExactSolution ex(StressForm::traction, 1.0);
  for (const auto& s : random_samples(2)) {
    const Tensor2 g = ex.velocity_gradient(s.t, s.x);
    const Tensor2 fd = fd_velocity_gradient(ex, s.t, s.x);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK(std::abs(g[i][j] - fd[i][j]) <= 1e-8);
    const Vec2 ut = ex.velocity_time_derivative(s.t, s.x);
    const Vec2 u1 = ex.velocity(s.t + kStep, s.x), u0 = ex.velocity(s.t - kStep, s.x);
    CHECK(std::abs(ut.x - (u1.x - u0.x) / (2 * kStep)) <= 1e-8);
    CHECK(std::abs(ut.y - (u1.y - u0.y) / (2 * kStep)) <= 1e-8);
    const Vec2 gp = ex.pressure_gradient(s.t, s.x);
    CHECK(std::abs(gp.x - (ex.pressure(s.t, {s.x.x + kStep, s.x.y}) - ex.pressure(s.t, {s.x.x - kStep, s.x.y})) /
                              (2 * kStep)) <= 1e-8);
    CHECK(std::abs(gp.y - (ex.pressure(s.t, {s.x.x, s.x.y + kStep}) - ex.pressure(s.t, {s.x.x, s.x.y - kStep})) /
                              (2 * kStep)) <= 1e-8);
  }
}

TEST_CASE("viscous stress matches the selected form") {
  for (StressForm form : {StressForm::open, StressForm::traction}) {
    for (double re : {0.1, 1.0, 100.0}) {
      const ExactSolution ex(form, re);
      for (const auto& s : random_samples(3, 20)) {
        const Tensor2 expected = stress_from_gradient(fd_velocity_gradient(ex, s.t, s.x), form, re);
        const Tensor2 sigma = ex.viscous_stress(s.t, s.x);
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) CHECK(std::abs(sigma[i][j] - expected[i][j]) <= 1e-8 / re);
      }
    }
  }
}

TEST_CASE("momentum residual of the forcing vanishes") {
  for (StressForm form : {StressForm::open, StressForm::traction}) {
    for (double re : {0.1, 1.0, 100.0}) {
      CAPTURE(re);
      const ExactSolution ex(form, re);
      const double scale = 1.0 + 1.0 / re;
      for (const auto& s : random_samples(4)) {
        const Vec2 r = fd_momentum_residual(ex, s.t, s.x);
        CHECK(std::abs(r.x) <= 1e-7 * scale);
        CHECK(std::abs(r.y) <= 1e-7 * scale);
      }
    }
  }
}

TEST_CASE("forcing at a fixed point, traction form, Re = 1") {
  const ExactSolution ex(StressForm::traction, 1.0);
  const Point x{0.2, 0.7};
  const Vec2 r = fd_momentum_residual(ex, 0.3, x);
  CHECK(std::abs(r.x) <= 1e-8);
  CHECK(std::abs(r.y) <= 1e-8);
  // The symmetric-gradient divergence of a solenoidal field is half its
  // Laplacian, and the Laplacian of u is -2u.
  const Vec2 u = ex.velocity(0.3, x);
  const Vec2 ut = ex.velocity_time_derivative(0.3, x);
  const Vec2 gp = ex.pressure_gradient(0.3, x);
  const Vec2 f = ex.force(0.3, x);
  CHECK(f.x == doctest::Approx(ut.x + u.x + gp.x).epsilon(1e-13));
  CHECK(f.y == doctest::Approx(ut.y + u.y + gp.y).epsilon(1e-13));
}

TEST_CASE("traction residual at boundary edge midpoints") {
  struct Side {
    Point normal;
    std::function<Point(double)> at;
  };
  const std::vector<Side> sides = {
      {{0.0, -1.0}, [](double s) { return Point{s, 0.0}; }},
      {{1.0, 0.0}, [](double s) { return Point{1.0, s}; }},
      {{0.0, 1.0}, [](double s) { return Point{s, 1.0}; }},
      {{-1.0, 0.0}, [](double s) { return Point{0.0, s}; }},
  };
  const int n = 16;
  for (StressForm form : {StressForm::open, StressForm::traction}) {
    for (double re : {0.1, 1.0, 100.0}) {
      const ExactSolution ex(form, re);
      for (double t : {0.0, 0.5, 1.0}) {
        for (const auto& side : sides) {
          for (int i = 0; i < n; ++i) {
            const Point x = side.at((i + 0.5) / n);
            const Tensor2 s = stress_from_gradient(fd_velocity_gradient(ex, t, x), form, re);
            const double p = ex.pressure(t, x);
            const Vec2 expected{(s[0][0] - p) * side.normal.x + s[0][1] * side.normal.y,
                                s[1][0] * side.normal.x + (s[1][1] - p) * side.normal.y};
            const Vec2 g = ex.traction(t, x, side.normal);
            CHECK(std::abs(g.x - expected.x) <= 1e-8 * (1.0 + 1.0 / re));
            CHECK(std::abs(g.y - expected.y) <= 1e-8 * (1.0 + 1.0 / re));
          }
        }
      }
    }
  }
}

TEST_CASE("adapters forward to the closed forms") {
  const ExactSolution ex(StressForm::open, 2.0);
  const Point x{0.3, 0.9};
  CHECK(ex.velocity_function()(0.4, x).x == ex.velocity(0.4, x).x);
  CHECK(ex.pressure_function()(0.4, x) == ex.pressure(0.4, x));
  CHECK(ex.force_function()(0.4, x).y == ex.force(0.4, x).y);
  CHECK(ex.traction_function()(0.4, x, {1.0, 0.0}).x == ex.traction(0.4, x, {1.0, 0.0}).x);
  CHECK(ex.form() == StressForm::open);
  CHECK(ex.reynolds() == 2.0);
}
