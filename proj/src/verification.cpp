#include "tsplit/verification.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

namespace tsplit {

std::string to_string(Norm norm) {
  switch (norm) {
    case Norm::velocity_linf_l2:
      return "velocity_linf_l2";
    case Norm::velocity_l2_h1:
      return "velocity_l2_h1";
    case Norm::pressure_linf_l2:
      return "pressure_linf_l2";
    case Norm::pressure_l2_l2:
      return "pressure_l2_l2";
  }
  return "unknown";
}

LevelErrors level_errors(const Vector& u, const Vector& p, int k, double t, const ExactSolution& exact,
                         const SpacePair& spaces) {
  const Mesh& mesh = spaces.mesh();
  double eu = 0.0, egrad = 0.0, ep = 0.0;
  for (int tri = 0; tri < mesh.num_triangles(); ++tri) {
    const TriangleGeometry g = triangle_geometry(mesh, tri);
    for (const auto& qp : error_rule()) {
      const double w = qp.weight * g.area;
      const Point x = g.map(qp.bary);
      const VelocitySample s = sample_velocity(u, spaces, tri, eval_p2(g, qp.bary));
      const Vec2 ue = exact.velocity(t, x);
      const Tensor2 ge = exact.velocity_gradient(t, x);
      const double dx = s.value.x - ue.x;
      const double dy = s.value.y - ue.y;
      eu += w * (dx * dx + dy * dy);
      for (int c = 0; c < 2; ++c) {
        const double gx = s.grad[c].x - ge[c][0];
        const double gy = s.grad[c].y - ge[c][1];
        egrad += w * (gx * gx + gy * gy);
      }
      const double dp = sample_pressure(p, tri, spaces, qp.bary) - exact.pressure(t, x);
      ep += w * dp * dp;
    }
  }
  LevelErrors e;
  e.k = k;
  e.t = t;
  e.velocity_l2 = std::sqrt(eu);
  e.velocity_h1 = std::sqrt(eu + egrad);
  e.pressure_l2 = std::sqrt(ep);
  return e;
}

NormValues aggregate_errors(const std::vector<LevelErrors>& levels, double tau) {
  NormValues out{};
  double sum_h1 = 0.0, sum_p = 0.0;
  for (const auto& e : levels) {
    out[0] = std::max(out[0], e.velocity_l2);
    out[2] = std::max(out[2], e.pressure_l2);
    if (e.k >= 1) {
      sum_h1 += e.velocity_h1 * e.velocity_h1;
      sum_p += e.pressure_l2 * e.pressure_l2;
    }
  }
  out[1] = std::sqrt(tau * sum_h1);
  out[3] = std::sqrt(tau * sum_p);
  return out;
}

NormValues compute_errors(const std::vector<Snapshot>& trajectory, const ExactSolution& exact, const SpacePair& spaces,
                          double tau) {
  std::vector<LevelErrors> levels;
  levels.reserve(trajectory.size());
  for (const auto& s : trajectory) levels.push_back(level_errors(s.u, s.p, s.k, s.t, exact, spaces));
  return aggregate_errors(levels, tau);
}

StateObserver ErrorRecorder::observer() {
  return [this](const SchemeState& s, const StepDiagnostics*) {
    levels_.push_back(level_errors(s.u, s.p, s.k, s.t, *exact_, *spaces_));
  };
}

std::optional<double> eoc(double e_coarse, double e_fine, double tau_coarse, double tau_fine) {
  if (!(e_coarse > 0.0) || !(e_fine > 0.0) || !(tau_coarse > 0.0) || !(tau_fine > 0.0) || tau_coarse == tau_fine) {
    return std::nullopt;
  }
  return std::log(e_coarse / e_fine) / std::log(tau_coarse / tau_fine);
}

std::vector<std::array<std::optional<double>, 4>> ConvergenceTable::rates() const {
  std::vector<std::array<std::optional<double>, 4>> out;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    std::array<std::optional<double>, 4> r{};
    for (int n = 0; n < 4; ++n) {
      const bool usable = rows[i].completed && rows[i + 1].completed && !rows[i].floor_dominated[n] &&
                          !rows[i + 1].floor_dominated[n];
      if (usable) r[n] = eoc(rows[i].errors[n], rows[i + 1].errors[n], rows[i].tau, rows[i + 1].tau);
    }
    out.push_back(r);
  }
  return out;
}

bool ConvergenceTable::rates_within(Norm n, double lo, double hi) const {
  if (!all_completed()) return false;
  const auto r = rates();
  const auto idx = static_cast<std::size_t>(n);
  int counted = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (rows[i].floor_dominated[idx] || rows[i + 1].floor_dominated[idx]) continue;
    if (!r[i][idx] || *r[i][idx] < lo || *r[i][idx] > hi) return false;
    ++counted;
  }
  return counted > 0;
}

bool ConvergenceTable::all_completed() const {
  return std::all_of(rows.begin(), rows.end(), [](const ConvergenceRow& r) { return r.completed; });
}

void ConvergenceTable::write_csv(std::ostream& os) const {
  const auto old = os.precision(17);
  os << "tau,h,steps";
  for (Norm n : kAllNorms) os << ',' << to_string(n);
  for (Norm n : kAllNorms) os << ",eoc_" << to_string(n);
  for (Norm n : kAllNorms) os << ",floor_" << to_string(n);
  os << ",floor_dominated,completed\n";
  const auto r = rates();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    os << row.tau << ',' << row.h << ',' << row.steps;
    for (double e : row.errors) os << ',' << e;
    for (int n = 0; n < 4; ++n) {
      os << ',';
      if (i > 0 && r[i - 1][n]) os << *r[i - 1][n];
    }
    for (double f : row.floor) os << ',' << f;
    os << ',';
    for (int n = 0; n < 4; ++n) os << (row.floor_dominated[n] ? '1' : '0');
    os << ',' << (row.completed ? 1 : 0) << '\n';
  }
  os.precision(old);
}

void ConvergenceTable::write_plot_data(std::ostream& os, Norm n) const {
  const auto old = os.precision(17);
  os << "# tau " << to_string(n) << '\n';
  for (const auto& row : rows) {
    if (row.completed) os << row.tau << ' ' << row.errors[static_cast<std::size_t>(n)] << '\n';
  }
  os.precision(old);
}

double estimate_kappa(const Discretization& disc, StressForm form, double tolerance) {
  const OperatorSet& ops = disc.operators();
  const CsrMatrix lhs = linear_combination(1.0, ops.mass_velocity, 1.0, viscous_stiffness(ops, form));
  const CsrMatrix rhs = linear_combination(1.0, ops.mass_velocity, 1.0, ops.stiffness_grad);
  return 0.5 * smallest_generalized_eigenvalue(lhs, rhs, tolerance).value;
}

Vector random_velocity(const Discretization& disc, std::uint64_t seed, double l2_norm) {
  const int n = disc.spaces().velocity_dim();
  Vector u(n);
  if (l2_norm == 0.0) return Vector::Zero(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int i = 0; i < n; ++i) u[i] = dist(rng);
  const double norm = std::sqrt(u.dot(disc.operators().mass_velocity * u));
  return u * (l2_norm / norm);
}

void StabilityTrace::write_csv(std::ostream& os) const {
  const auto old = os.precision(17);
  os << "k,velocity_sq,alpha_divergence_sq,q_term,gauge_term,energy_lhs,energy_rhs,gauge_jump,norm_dq,norm_div,"
        "energy_ok,gauge_ok,dq_ok,cfl_ok,monitors_pass\n";
  const auto flag = [](const std::optional<bool>& f) -> const char* {
    if (!f) return "na";
    return *f ? "1" : "0";
  };
  for (const auto& r : rows) {
    const auto& d = r.diagnostics;
    os << r.k << ',' << r.velocity_sq << ',' << r.divergence_sq << ',' << r.q_term << ',' << r.gauge_term << ','
       << d.energy_lhs << ',' << d.energy_rhs << ',' << d.gauge_jump << ',' << d.norm_dq << ',' << d.norm_div << ','
       << flag(d.energy_ok) << ',' << flag(d.gauge_ok) << ',' << (d.dq_ok ? 1 : 0) << ',' << flag(d.cfl_ok) << ','
       << (d.monitors_pass() ? 1 : 0) << '\n';
  }
  os.precision(old);
}

StabilityTrace stability_probe(const Discretization& disc, SchemeParams params, int steps, std::uint64_t seed,
                               double amplitude) {
  if (steps < 1) throw std::invalid_argument("stability_probe: steps must be positive");
  params.final_time = steps * params.tau;
  const Scheme scheme(disc, params);
  const Vector u0 = random_velocity(disc, seed, amplitude);

  StabilityTrace trace;
  const OperatorSet& ops = disc.operators();
  const double tau = params.tau;
  const auto record = [&](const SchemeState& s, const StepDiagnostics* d) {
    StabilityRow row;
    row.k = s.k;
    row.velocity_sq = s.u.dot(ops.mass_velocity * s.u);
    row.divergence_sq = params.alpha * s.u.dot(ops.grad_div * s.u);
    row.q_term = tau * params.pressure_q_coefficient() * s.q.dot(ops.mass_pressure * s.q);
    const CsrMatrix& gauge_form =
        params.scheme == SchemeKind::graddiv ? ops.h1_pressure : ops.laplace_pressure;
    row.gauge_term = tau * tau * s.psi.dot(gauge_form * s.psi);
    if (d != nullptr) {
      row.diagnostics = *d;
      if (!d->monitors_pass()) ++trace.violations;
    } else {
      row.diagnostics.k = s.k;
      row.diagnostics.t = s.t;
      row.diagnostics.norm_u = std::sqrt(row.velocity_sq);
    }
    if (!std::isfinite(row.velocity_sq)) ++trace.violations;
    trace.max_norm = std::max(trace.max_norm, std::sqrt(row.velocity_sq));
    // Levels repeated by the startup are reported once.
    if (!trace.rows.empty() && trace.rows.back().k == row.k) return;
    trace.rows.push_back(std::move(row));
  };

  trace.initial_norm = std::sqrt(u0.dot(ops.mass_velocity * u0));
  History h = run(scheme, scheme.initialize_from_velocity(u0), {record});
  trace.completed = h.completed;
  trace.failure = h.failure;
  trace.messages = h.messages;
  return trace;
}

ManufacturedRun manufactured_run(const Discretization& disc, const SchemeParams& params) {
  const ExactSolution exact(params.form, params.reynolds);
  const Scheme scheme(disc, params, {exact.force_function(), exact.traction_function()});
  ErrorRecorder recorder(exact, disc.spaces());
  ManufacturedRun out;
  out.history = run(scheme, scheme.initialize({exact.velocity_function(), exact.pressure_function()}),
                    {recorder.observer()});
  out.levels = recorder.levels();
  out.errors = aggregate_errors(out.levels, params.tau);
  return out;
}

namespace {

NormValues projection_floor(const Discretization& disc, const ExactSolution& exact, const SpdSolver& mass_u,
                            const SpdSolver& mass_p, double tau, int steps) {
  const SpacePair& spaces = disc.spaces();
  std::vector<LevelErrors> levels;
  levels.reserve(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) {
    const double t = k * tau;
    const Vector u = mass_u.solve(assemble_load(exact.velocity_function(), t, spaces)).x;
    const Vector p = mass_p.solve(assemble_scalar_load(exact.pressure_function(), t, spaces)).x;
    levels.push_back(level_errors(u, p, k, t, exact, spaces));
  }
  return aggregate_errors(levels, tau);
}

}  // namespace

ConvergenceTable convergence_study(const Discretization& disc, const StudyConfig& config) {
  if (config.taus.empty()) throw std::invalid_argument("convergence_study: no time steps given");
  for (std::size_t i = 0; i + 1 < config.taus.size(); ++i) {
    if (!(config.taus[i + 1] < config.taus[i])) throw std::invalid_argument("time steps must be strictly decreasing");
  }
  for (double tau : config.taus) {
    SchemeParams p = config.params;
    p.tau = tau;
    p.validate();
  }
  const ExactSolution exact(config.params.form, config.params.reynolds);
  const OperatorSet& ops = disc.operators();
  const SpdSolver mass_u(ops.mass_velocity, config.params.solver);
  const SpdSolver mass_p(ops.mass_pressure, config.params.solver);

  ConvergenceTable table;
  table.rows.resize(config.taus.size());
  const auto job = [&](std::size_t i) {
    SchemeParams p = config.params;
    p.tau = config.taus[i];
    ConvergenceRow& row = table.rows[i];
    row.tau = p.tau;
    row.h = disc.mesh().h_max;
    row.steps = step_count(p.final_time, p.tau);
    try {
      const ManufacturedRun r = manufactured_run(disc, p);
      row.completed = r.history.completed;
      row.failure = r.history.failure;
      row.errors = r.errors;
      row.floor = projection_floor(disc, exact, mass_u, mass_p, p.tau, row.steps);
      for (int n = 0; n < 4; ++n) row.floor_dominated[n] = row.errors[n] < kSpatialFloorFactor * row.floor[n];
    } catch (const std::exception& e) {
      row.completed = false;
      row.failure = e.what();
    }
  };

  const int jobs = std::max(1, std::min<int>(config.jobs, static_cast<int>(config.taus.size())));
  if (jobs == 1) {
    for (std::size_t i = 0; i < config.taus.size(); ++i) job(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < config.taus.size(); i = next++) job(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  return table;
}

}  // namespace tsplit
