// Acceptance criteria: one PASS/FAIL line per criterion, with the measured
// values.  Exit status is nonzero when any criterion fails.

#include "tsplit/exact.hpp"
#include "tsplit/schemes.hpp"
#include "tsplit/verification.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace tsplit;

namespace {

constexpr double kMonitorSlack = 1e-10;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(const std::string& id, const std::string& title, const Outcome& o, double seconds) {
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS " : "FAIL ") << id << ": " << title << " | " << o.detail << " [" << std::fixed
            << std::setprecision(1) << seconds << " s]" << std::defaultfloat << std::endl;
}

template <class F>
void criterion(const std::string& id, const std::string& title, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report(id, title, o, s);
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

const std::vector<double> kSweep = {0.1, 0.05, 0.025, 0.0125};

ConvergenceTable sweep(SchemeKind kind, int m, double re, int n) {
  const Discretization disc(n, n);
  StudyConfig cfg;
  cfg.params.scheme = kind;
  cfg.params.m = m;
  cfg.params.form = StressForm::traction;
  cfg.params.reynolds = re;
  cfg.params.final_time = 1.0;
  if (kind == SchemeKind::boundary_correction) cfg.params.kappa = estimate_kappa(disc, StressForm::traction);
  cfg.taus = kSweep;
  return convergence_study(disc, cfg);
}

/// Every counted rate of the listed norms in [lo, hi]; detail lists all rates.
Outcome rates_outcome(const ConvergenceTable& t, const std::vector<Norm>& norms, double lo, double hi,
                      const std::string& label) {
  Outcome o;
  std::ostringstream os;
  os << label;
  const auto r = t.rates();
  for (Norm n : norms) {
    const bool ok = t.rates_within(n, lo, hi);
    o.pass = o.pass && ok;
    os << ' ' << to_string(n) << '=';
    for (std::size_t i = 0; i < r.size(); ++i) {
      const auto idx = static_cast<std::size_t>(n);
      os << (i ? "," : "");
      if (r[i][idx]) {
        os << fmt(*r[i][idx]);
      } else {
        os << (t.rows[i].floor_dominated[idx] || t.rows[i + 1].floor_dominated[idx] ? "floor" : "na");
      }
    }
    os << (ok ? "" : "(out)");
  }
  if (!t.all_completed()) {
    for (const auto& row : t.rows)
      if (!row.completed) os << " failed tau=" << row.tau << ": " << row.failure;
  }
  o.detail = os.str();
  return o;
}

Outcome merge(const std::vector<Outcome>& parts) {
  Outcome o;
  for (const auto& p : parts) {
    o.pass = o.pass && p.pass;
    o.detail += (o.detail.empty() ? "" : "; ") + p.detail;
  }
  return o;
}

double relative_gap(const Vector& a, const Vector& b) {
  const double s = std::max(a.norm(), b.norm());
  return s == 0.0 ? 0.0 : (a - b).norm() / s;
}

// ---------------------------------------------------------------------------
// Operator and manufactured-solution checks.

int kernel_dimension(const CsrMatrix& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A.to_dense());
  const double top = es.eigenvalues().cwiseAbs().maxCoeff();
  int k = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (std::abs(es.eigenvalues()(i)) <= 1e-10 * top) ++k;
  return k;
}

double min_eigenvalue(const CsrMatrix& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A.to_dense());
  return es.eigenvalues()(0);
}

Outcome operator_invariants() {
  std::ostringstream bad;
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  for (int n : {1, 2, 8}) {
    const Discretization d(n, n);
    const OperatorSet& ops = d.operators();
    const SpacePair& spaces = d.spaces();
    const std::vector<std::pair<const char*, const CsrMatrix*>> symmetric = {
        {"M_u", &ops.mass_velocity},    {"M_p", &ops.mass_pressure},   {"K_grad", &ops.stiffness_grad},
        {"K_eps", &ops.stiffness_sym},  {"G", &ops.grad_div},          {"L_p", &ops.laplace_pressure},
        {"H_p", &ops.h1_pressure}};
    for (const auto& [name, A] : symmetric) {
      if (A->max_asymmetry() > 1e-13) bad << " n=" << n << ' ' << name << " asymmetric";
      const double scale = A->diagonal().cwiseAbs().maxCoeff();
      if (min_eigenvalue(*A) < -1e-12 * scale) bad << " n=" << n << ' ' << name << " indefinite";
    }
    for (const CsrMatrix* A : {&ops.mass_velocity, &ops.mass_pressure, &ops.h1_pressure})
      if (min_eigenvalue(*A) <= 0.0) bad << " n=" << n << " definite operator singular";
    if (kernel_dimension(ops.laplace_pressure) != 1) bad << " n=" << n << " L_p kernel";
    if (kernel_dimension(ops.stiffness_grad) != 2) bad << " n=" << n << " K_grad kernel";
    if (kernel_dimension(ops.stiffness_sym) != 3) bad << " n=" << n << " K_eps kernel";
    // Adjointness of divergence and gradient couplings on zero-trace pressures.
    for (int trial = 0; trial < 3; ++trial) {
      Vector v(spaces.velocity_dim());
      for (auto& x : v) x = normal(rng);
      Vector g(spaces.gauge_dim());
      for (auto& x : g) x = normal(rng);
      const Vector psi = prolong_from_gauge(g, spaces);
      const double lhs = v.dot(ops.velocity_gradient.transpose_multiply(psi));
      const double rhs = -psi.dot(ops.divergence * v);
      if (std::abs(lhs - rhs) > 1e-12 * std::max(1.0, std::abs(lhs))) bad << " n=" << n << " B/C adjointness";
    }
  }
  return {bad.str().empty(), bad.str().empty() ? "symmetry, semidefiniteness, kernels 1/2/3, adjointness on nx 1,2,8"
                                               : bad.str()};
}

Outcome manufactured_residuals() {
  constexpr double h = 1e-5;
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_momentum = 0.0, worst_traction = 0.0;
  for (StressForm form : {StressForm::open, StressForm::traction}) {
    for (double re : {0.1, 1.0, 100.0}) {
      const ExactSolution ex(form, re);
      const double scale = 1.0 + 1.0 / re;
      for (int i = 0; i < 100; ++i) {
        const double t = unit(rng);
        const Point x{unit(rng), unit(rng)};
        const Vec2 u1 = ex.velocity(t + h, x), u0 = ex.velocity(t - h, x);
        const auto s = [&](double dx, double dy) { return ex.viscous_stress(t, {x.x + dx, x.y + dy}); };
        const auto sx1 = s(h, 0), sx0 = s(-h, 0), sy1 = s(0, h), sy0 = s(0, -h);
        const double px = (ex.pressure(t, {x.x + h, x.y}) - ex.pressure(t, {x.x - h, x.y})) / (2 * h);
        const double py = (ex.pressure(t, {x.x, x.y + h}) - ex.pressure(t, {x.x, x.y - h})) / (2 * h);
        const Vec2 f = ex.force(t, x);
        const double rx = (u1.x - u0.x) / (2 * h) - (sx1[0][0] - sx0[0][0] + sy1[0][1] - sy0[0][1]) / (2 * h) + px - f.x;
        const double ry = (u1.y - u0.y) / (2 * h) - (sx1[1][0] - sx0[1][0] + sy1[1][1] - sy0[1][1]) / (2 * h) + py - f.y;
        worst_momentum = std::max(worst_momentum, std::max(std::abs(rx), std::abs(ry)) / scale);

        // Traction on a random boundary point of a random side.
        const int side = static_cast<int>(unit(rng) * 4.0) % 4;
        const double sp = unit(rng);
        const Point normals[4] = {{0, -1}, {1, 0}, {0, 1}, {-1, 0}};
        const Point at[4] = {{sp, 0}, {1, sp}, {sp, 1}, {0, sp}};
        const Point nrm = normals[side];
        const Point xb = at[side];
        const Vec2 a = ex.velocity(t, {xb.x + h, xb.y}), b = ex.velocity(t, {xb.x - h, xb.y});
        const Vec2 c = ex.velocity(t, {xb.x, xb.y + h}), d = ex.velocity(t, {xb.x, xb.y - h});
        const double g[2][2] = {{(a.x - b.x) / (2 * h), (c.x - d.x) / (2 * h)},
                                {(a.y - b.y) / (2 * h), (c.y - d.y) / (2 * h)}};
        double sig[2][2];
        for (int r = 0; r < 2; ++r)
          for (int q = 0; q < 2; ++q)
            sig[r][q] = (form == StressForm::open ? g[r][q] : 0.5 * (g[r][q] + g[q][r])) / re;
        const double p = ex.pressure(t, xb);
        const Vec2 tr = ex.traction(t, xb, nrm);
        const double ex_x = (sig[0][0] - p) * nrm.x + sig[0][1] * nrm.y;
        const double ex_y = sig[1][0] * nrm.x + (sig[1][1] - p) * nrm.y;
        worst_traction = std::max(worst_traction, std::max(std::abs(tr.x - ex_x), std::abs(tr.y - ex_y)) / scale);
      }
    }
  }
  const bool ok = worst_momentum <= 1e-7 && worst_traction <= 1e-8;
  return {ok, "momentum residual " + fmt(worst_momentum) + " (tol 1e-7), traction residual " + fmt(worst_traction) +
                  " (tol 1e-8), scaled by 1+1/Re"};
}

}  // namespace

int main() {
  std::cout << "acceptance: manufactured sweeps use T = 1, tau = 0.1/2^j (j = 0..3), traction form\n" << std::flush;

  criterion("criterion 1", "grad-div, m=2, EOC of all four norms in [1.3, 2.1] at Re 1 and 100 (nx 64)", [] {
    std::vector<Outcome> parts;
    for (double re : {1.0, 100.0}) {
      const auto t = sweep(SchemeKind::graddiv, 2, re, 64);
      parts.push_back(rates_outcome(t, {kAllNorms.begin(), kAllNorms.end()}, 1.3, 2.1, "Re=" + fmt(re)));
    }
    return merge(parts);
  });

  criterion("criterion 2",
            "boundary correction, m=2, EOC of all four norms in [1.3, 2.1] at Re 1, 100 (nx 64) and 0.1 (nx 128)",
            [] {
              std::vector<Outcome> parts;
              for (const auto& [re, n] : std::vector<std::pair<double, int>>{{1.0, 64}, {100.0, 64}, {0.1, 128}}) {
                const auto t = sweep(SchemeKind::boundary_correction, 2, re, n);
                parts.push_back(rates_outcome(t, {kAllNorms.begin(), kAllNorms.end()}, 1.3, 2.1,
                                              "Re=" + fmt(re) + " nx=" + std::to_string(n)));
              }
              return merge(parts);
            });

  criterion("criterion 3", "m=1, velocity linf(L2) EOC in [0.85, 1.3] for both schemes (Re 1, nx 64)", [] {
    std::vector<Outcome> parts;
    for (SchemeKind kind : {SchemeKind::graddiv, SchemeKind::boundary_correction}) {
      const auto t = sweep(kind, 1, 1.0, 64);
      parts.push_back(rates_outcome(t, {Norm::velocity_linf_l2}, 0.85, 1.3, to_string(kind)));
    }
    return merge(parts);
  });

  criterion("criterion 4", "gauge-Uzawa and rotational no-slip trajectories agree to 1e-8 over 10 steps (nx 16)",
            [] {
              const Discretization disc(16, 16);
              const ExactSolution ex(StressForm::open, 1.0);
              std::vector<SchemeState> gu, rot;
              for (SchemeKind kind : {SchemeKind::gauge_uzawa_noslip, SchemeKind::rotational_noslip}) {
                SchemeParams p;
                p.scheme = kind;
                p.m = 1;
                p.form = StressForm::open;
                p.tau = 0.01;
                p.final_time = 0.1;
                const Scheme scheme(disc, p, {ex.force_function(), {}});
                auto& out = kind == SchemeKind::gauge_uzawa_noslip ? gu : rot;
                const History h =
                    run(scheme, scheme.initialize({ex.velocity_function(), ex.pressure_function()}),
                        {[&](const SchemeState& s, const StepDiagnostics*) { out.push_back(s); }});
                if (!h.completed) return Outcome{false, "run failed: " + h.failure};
              }
              if (gu.size() != 11 || rot.size() != 11) return Outcome{false, "unexpected number of levels"};
              double du = 0.0, dp = 0.0, dphi = 0.0;
              const double c = 1.0;  // 1/Re
              for (std::size_t k = 1; k < gu.size(); ++k) {
                du = std::max(du, relative_gap(gu[k].u, rot[k].u));
                dp = std::max(dp, relative_gap(gu[k].p, rot[k].p));
                // phi recovered from the rotational pressure update.
                const Vector phi = rot[k].p - rot[k - 1].p - c * (rot[k].q - rot[k - 1].q);
                dphi = std::max(dphi, relative_gap(phi, gu[k].dpsi));
              }
              const bool ok = du <= 1e-8 && dp <= 1e-8 && dphi <= 1e-8;
              return Outcome{ok, "velocity " + fmt(du) + ", pressure " + fmt(dp) + ", phi vs gauge increment " +
                                     fmt(dphi)};
            });

  criterion("criterion 5",
            "grad-div m=1 monitors hold every step to 1e-10 and max ||u^k|| <= e ||u^0|| (alpha 2.5, tau 0.01, "
            "100 steps, nx 16)",
            [] {
              const Discretization disc(16, 16);
              SchemeParams p;
              p.scheme = SchemeKind::graddiv;
              p.m = 1;
              p.alpha = 2.5;
              p.tau = 0.01;
              p.reynolds = 1.0;
              const StabilityTrace trace = stability_probe(disc, p, 100, 1);
              int energy = 0, gauge = 0, dq = 0;
              std::string first;
              for (const auto& row : trace.rows) {
                if (row.k == 0) continue;
                const auto& d = row.diagnostics;
                const bool e_ok = d.energy_lhs <= d.energy_rhs * (1.0 + kMonitorSlack);
                if (!e_ok) ++energy;
                if (!d.gauge_ok.value_or(true)) ++gauge;
                if (!(d.norm_dq <= d.norm_div * (1.0 + kMonitorSlack))) ++dq;
                if ((!e_ok || !d.gauge_ok.value_or(true) || !d.dq_ok) && first.empty()) first = std::to_string(row.k);
              }
              const bool bounded = trace.bounded();
              const bool ok = trace.completed && energy == 0 && gauge == 0 && dq == 0 && bounded;
              std::string detail = "energy violations " + std::to_string(energy) + ", gauge-increment violations " +
                                   std::to_string(gauge) + ", divergence-correction violations " +
                                   std::to_string(dq) + ", max ||u||/||u0|| " +
                                   fmt(trace.max_norm / trace.initial_norm);
              if (!first.empty()) detail += ", first violation at k=" + first;
              return Outcome{ok, detail};
            });

  criterion("criterion 6", "open-form kappa = 1/2; traction kappa on nx 8 matches a dense oracle to 1e-8", [] {
    const Discretization disc(8, 8);
    const double open = estimate_kappa(disc, StressForm::open);
    const double traction = estimate_kappa(disc, StressForm::traction);
    const OperatorSet& ops = disc.operators();
    const Eigen::MatrixXd M = ops.mass_velocity.to_dense();
    const Eigen::MatrixXd B = M + ops.stiffness_grad.to_dense();
    const Eigen::MatrixXd A = M + ops.stiffness_sym.to_dense();
    const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, B);
    const double dense = 0.5 * es.eigenvalues().minCoeff();
    const double e_open = std::abs(open - 0.5);
    const double e_tr = std::abs(traction - dense) / dense;
    const bool ok = e_open <= 1e-8 && e_tr <= 1e-8;
    return Outcome{ok, "open " + fmt(open, 17) + " (|err| " + fmt(e_open) + "), traction " + fmt(traction, 17) +
                           " vs dense " + fmt(dense, 17) + " (rel " + fmt(e_tr) + ")"};
  });

  criterion("criterion 7", "operator invariants on nx 1, 2, 8 and manufactured residuals at 100 random points",
            [] { return merge({operator_invariants(), manufactured_residuals()}); });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
