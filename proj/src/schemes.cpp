#include "tsplit/schemes.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace tsplit {

std::string to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::graddiv:
      return "graddiv";
    case SchemeKind::boundary_correction:
      return "bc";
    case SchemeKind::gauge_uzawa_noslip:
      return "gu";
    case SchemeKind::rotational_noslip:
      return "rot";
  }
  return "unknown";
}

SchemeKind parse_scheme(const std::string& name) {
  if (name == "graddiv" || name == "grad_div") return SchemeKind::graddiv;
  if (name == "bc" || name == "boundary_correction") return SchemeKind::boundary_correction;
  if (name == "gu" || name == "gauge_uzawa_noslip") return SchemeKind::gauge_uzawa_noslip;
  if (name == "rot" || name == "rotational_noslip") return SchemeKind::rotational_noslip;
  throw std::invalid_argument("unknown scheme '" + name + "' (expected graddiv, bc, gu or rot)");
}

std::string to_string(PressureUpdate update) { return update == PressureUpdate::plain ? "plain" : "korn"; }

PressureUpdate parse_pressure_update(const std::string& name) {
  if (name == "plain") return PressureUpdate::plain;
  if (name == "korn") return PressureUpdate::korn;
  throw std::invalid_argument("unknown pressure update '" + name + "' (expected plain or korn)");
}

void SchemeParams::validate() const {
  const auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be positive");
  };
  if (m != 1 && m != 2) throw std::invalid_argument("m must be 1 or 2");
  positive(reynolds, "Reynolds number");
  positive(tau, "time step");
  positive(final_time, "final time");
  positive(c_cfl, "c_cfl");
  if (!(kappa > 0.0 && kappa <= 0.5 + 1e-12)) throw std::invalid_argument("kappa must lie in (0, 1/2]");
  if (scheme == SchemeKind::graddiv && !(alpha >= 0.0 && std::isfinite(alpha))) {
    throw std::invalid_argument("alpha must be nonnegative");
  }
  if (noslip() && m != 1) throw std::invalid_argument("the no-slip pair is first order only (m = 1)");
  solver.validate();
  (void)step_count(final_time, tau);
}

double SchemeParams::pressure_q_coefficient() const {
  const bool korn = scheme == SchemeKind::boundary_correction ||
                    (scheme == SchemeKind::graddiv && pressure_update == PressureUpdate::korn);
  return (korn ? kappa : 1.0) / reynolds;
}

bool SchemeParams::in_graddiv_stability_regime() const { return alpha > std::max(1.0, 2.0 / reynolds); }

int step_count(double final_time, double tau) {
  if (!(tau > 0.0) || !(final_time > 0.0)) throw std::invalid_argument("time step and final time must be positive");
  const double ratio = final_time / tau;
  const double k = std::round(ratio);
  const double ulp = std::nextafter(ratio, std::numeric_limits<double>::infinity()) - ratio;
  if (k < 1.0 || std::abs(ratio - k) > ulp || k > std::numeric_limits<int>::max()) {
    throw std::invalid_argument("time step must divide final time");
  }
  return static_cast<int>(k);
}

bool mesh_condition_holds(const SchemeParams& params, double h_min) {
  return params.tau <= params.c_cfl * params.reynolds * h_min * h_min;
}

Vector bdf_apply(int m, const Vector& phi_kp1, const Vector& phi_k, const Vector* phi_km1, double tau) {
  if (m == 1) return (phi_kp1 - phi_k) / tau;
  if (m != 2) throw std::invalid_argument("bdf_apply: m must be 1 or 2");
  if (phi_km1 == nullptr) throw std::invalid_argument("bdf_apply: m = 2 needs the level k-1");
  return (3.0 * phi_kp1 - 4.0 * phi_k + *phi_km1) / (2.0 * tau);
}

Vector extrapolate_sharp(int m, const Vector& dphi_k, const Vector* dphi_km1) {
  if (m == 1) return dphi_k;
  if (m != 2) throw std::invalid_argument("extrapolate_sharp: m must be 1 or 2");
  if (dphi_km1 == nullptr) throw std::invalid_argument("extrapolate_sharp: m = 2 needs the previous increment");
  return (4.0 / 3.0) * dphi_k - (1.0 / 3.0) * *dphi_km1;
}

// ---------------------------------------------------------------------------

struct Scheme::Solvers {
  std::optional<SpdSolver> velocity;
  CsrMatrix history_weight;  // M_u + alpha G for grad-div, M_u otherwise
  std::optional<SpdSolver> mass_velocity;
  std::optional<SpdSolver> mass_pressure;
  std::optional<SpdSolver> projection;  // H_p, L_p on M_h or pinned L_p
  CsrMatrix gauge_gradient;             // rows of C_v on the free gauge dofs
  std::vector<int> pinned_keep;
};

namespace {

double quad(const CsrMatrix& A, const Vector& x) { return x.dot(A * x); }

Vector gather(const Vector& x, const std::vector<int>& idx) {
  Vector r(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) r[static_cast<Eigen::Index>(i)] = x[idx[i]];
  return r;
}

Vector scatter(const Vector& x, const std::vector<int>& idx, Eigen::Index n) {
  Vector r = Vector::Zero(n);
  for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = x[static_cast<Eigen::Index>(i)];
  return r;
}

bool within(double lhs, double rhs) {
  constexpr double slack = 1e-10;
  return lhs <= rhs + slack * std::max(std::abs(rhs), std::abs(lhs)) + 1e-300;
}

}  // namespace

Scheme::Scheme(const Discretization& disc, SchemeParams params, ForcingData data)
    : disc_(&disc), params_(params), data_(std::move(data)), solvers_(std::make_unique<Solvers>()) {
  params_.validate();
  const OperatorSet& ops = disc.operators();
  const SpacePair& spaces = disc.spaces();
  const double tau = params_.tau;
  const double lead = params_.bdf_leading() / tau;
  const CsrMatrix& stiff = viscous_stiffness(ops, params_.form);

  if (params_.noslip()) {
    const auto interior = spaces.interior_velocity_dofs();
    active_.assign(interior.begin(), interior.end());
  } else {
    active_.resize(static_cast<std::size_t>(spaces.velocity_dim()));
    std::iota(active_.begin(), active_.end(), 0);
  }

  solvers_->history_weight = params_.scheme == SchemeKind::graddiv
                                 ? linear_combination(1.0, ops.mass_velocity, params_.alpha, ops.grad_div)
                                 : ops.mass_velocity;
  CsrMatrix velocity = linear_combination(lead, solvers_->history_weight, 1.0 / params_.reynolds, stiff);
  if (params_.noslip()) velocity = velocity.submatrix(active_, active_);
  solvers_->velocity.emplace(std::move(velocity), params_.solver);
  solvers_->mass_pressure.emplace(ops.mass_pressure, params_.solver);

  switch (params_.scheme) {
    case SchemeKind::graddiv:
      solvers_->projection.emplace(ops.h1_pressure, params_.solver);
      break;
    case SchemeKind::boundary_correction: {
      if (spaces.gauge_dim() == 0) throw std::invalid_argument("mesh has no interior vertex for the gauge space");
      solvers_->projection.emplace(restrict_to_gauge(ops.laplace_pressure, spaces), params_.solver);
      const auto free = spaces.gauge_free_dofs();
      std::vector<int> cols(static_cast<std::size_t>(spaces.velocity_dim()));
      std::iota(cols.begin(), cols.end(), 0);
      solvers_->gauge_gradient = ops.velocity_gradient.submatrix(free, cols);
      break;
    }
    case SchemeKind::gauge_uzawa_noslip:
    case SchemeKind::rotational_noslip: {
      // Neumann Laplacian: pin vertex 0, then shift to zero mean.
      solvers_->pinned_keep.resize(static_cast<std::size_t>(spaces.pressure_dim() - 1));
      std::iota(solvers_->pinned_keep.begin(), solvers_->pinned_keep.end(), 1);
      solvers_->projection.emplace(ops.laplace_pressure.submatrix(solvers_->pinned_keep, solvers_->pinned_keep),
                                   params_.solver);
      solvers_->mass_velocity.emplace(ops.mass_velocity.submatrix(active_, active_), params_.solver);
      break;
    }
  }
}

Scheme::~Scheme() = default;
Scheme::Scheme(Scheme&&) noexcept = default;

double Scheme::l2_velocity(const Vector& u) const {
  return std::sqrt(std::max(0.0, quad(disc_->operators().mass_velocity, u)));
}
double Scheme::l2_divergence(const Vector& u) const {
  return std::sqrt(std::max(0.0, quad(disc_->operators().grad_div, u)));
}
double Scheme::l2_pressure(const Vector& p) const {
  return std::sqrt(std::max(0.0, quad(disc_->operators().mass_pressure, p)));
}
double Scheme::h1_pressure(const Vector& p) const {
  return std::sqrt(std::max(0.0, quad(disc_->operators().h1_pressure, p)));
}
double Scheme::energy_a(const Vector& u) const {
  return std::sqrt(std::max(0.0, quad(viscous_stiffness(disc_->operators(), params_.form), u) / params_.reynolds));
}

std::vector<SchemeState> Scheme::initialize(const InitialData& data) const {
  const SpacePair& spaces = disc_->spaces();
  const OperatorSet& ops = disc_->operators();
  const int np = spaces.pressure_dim();
  std::vector<SchemeState> levels;
  for (int k = 0; k < params_.m; ++k) {
    SchemeState s;
    s.k = k;
    s.t = k * params_.tau;
    if (!data.velocity) {
      s.u = Vector::Zero(spaces.velocity_dim());
    } else if (params_.noslip()) {
      const Vector load = gather(assemble_load(data.velocity, s.t, spaces), active_);
      s.u = scatter(solvers_->mass_velocity->solve(load).x, active_, spaces.velocity_dim());
    } else {
      s.u = l2_project_velocity(data.velocity, s.t, spaces, ops, params_.solver).values;
    }
    s.p = data.pressure ? l2_project_pressure(data.pressure, s.t, spaces, ops, params_.solver).values
                        : Vector::Zero(np);
    s.p_offset = s.p;
    s.psi = s.dpsi = s.dpsi_prev = s.q = Vector::Zero(np);
    s.u_prev = levels.empty() ? s.u : levels.back().u;
    levels.push_back(std::move(s));
  }
  return levels;
}

std::vector<SchemeState> Scheme::initialize_from_velocity(const Vector& u0) const {
  const SpacePair& spaces = disc_->spaces();
  if (u0.size() != spaces.velocity_dim()) throw std::invalid_argument("initial velocity has the wrong length");
  Vector u = u0;
  if (params_.noslip()) u = scatter(gather(u0, active_), active_, spaces.velocity_dim());
  std::vector<SchemeState> levels;
  for (int k = 0; k < params_.m; ++k) {
    SchemeState s;
    s.k = k;
    s.t = k * params_.tau;
    s.u = s.u_prev = u;
    s.p = s.p_offset = s.psi = s.dpsi = s.dpsi_prev = s.q = Vector::Zero(spaces.pressure_dim());
    levels.push_back(std::move(s));
  }
  return levels;
}

StepDiagnostics Scheme::step(SchemeState& s) const {
  const SpacePair& spaces = disc_->spaces();
  const OperatorSet& ops = disc_->operators();
  const SchemeParams& pr = params_;
  const int m = pr.m;
  const double tau = pr.tau;
  const double beta = pr.beta();
  const int k1 = s.k + 1;
  const double t1 = k1 * tau;
  if (s.k < m - 1) throw std::logic_error("Scheme::step: state lacks the history required by m = 2");

  StepDiagnostics d;
  d.k = k1;
  d.t = t1;
  const auto track = [&d](const SolveResult& r) {
    d.max_residual = std::max(d.max_residual, r.residual);
    return r.x;
  };

  // Velocity.
  const Vector hist = m == 1 ? Vector(s.u) : Vector(2.0 * s.u - 0.5 * s.u_prev);
  Vector rhs = solvers_->history_weight * hist / tau;
  if (data_.force) rhs += assemble_load(data_.force, t1, spaces);
  if (data_.traction && !pr.noslip()) rhs += assemble_boundary_load(data_.traction, t1, spaces);
  const Vector sharp = extrapolate_sharp(m, s.dpsi, &s.dpsi_prev);
  switch (pr.scheme) {
    case SchemeKind::graddiv:
      rhs += ops.divergence.transpose_multiply(s.p + sharp);
      break;
    case SchemeKind::boundary_correction:
      rhs += ops.divergence.transpose_multiply(s.p);
      rhs -= ops.velocity_gradient.transpose_multiply(sharp);
      rhs -= (tau / (beta * pr.reynolds)) * (ops.boundary_coupling * s.dpsi);
      break;
    case SchemeKind::gauge_uzawa_noslip:
    case SchemeKind::rotational_noslip:
      // dpsi is the gauge increment (GU) or phi (ROT).
      rhs += ops.divergence.transpose_multiply(s.p + s.dpsi);
      break;
  }
  Vector u1;
  if (pr.noslip()) {
    u1 = scatter(track(solvers_->velocity->solve(gather(rhs, active_))), active_, spaces.velocity_dim());
  } else {
    u1 = track(solvers_->velocity->solve(rhs));
  }

  // Projection.
  const Vector div_load = ops.divergence * u1;
  Vector dpsi1;
  switch (pr.scheme) {
    case SchemeKind::graddiv:
      dpsi1 = track(solvers_->projection->solve(-(beta / tau) * div_load));
      break;
    case SchemeKind::boundary_correction: {
      const Vector g = (beta / tau) * (solvers_->gauge_gradient * u1);
      dpsi1 = prolong_from_gauge(track(solvers_->projection->solve(g)), spaces);
      break;
    }
    case SchemeKind::gauge_uzawa_noslip:
    case SchemeKind::rotational_noslip: {
      const Vector b = gather(Vector(-(1.0 / tau) * div_load), solvers_->pinned_keep);
      dpsi1 = scatter(track(solvers_->projection->solve(b)), solvers_->pinned_keep, spaces.pressure_dim());
      const Vector ones = Vector::Ones(spaces.pressure_dim());
      const double mean = ones.dot(ops.mass_pressure * dpsi1) / ones.dot(ops.mass_pressure * ones);
      dpsi1.array() -= mean;
      break;
    }
  }

  // Divergence correction.
  const Vector dq = track(solvers_->mass_pressure->solve(-div_load));

  // Monitors use the state before the update.
  const Vector du = u1 - s.u;
  const Vector d2psi = dpsi1 - s.dpsi;
  d.norm_du = l2_velocity(du);
  d.norm_ddiv = l2_divergence(du);
  d.norm_dq = l2_pressure(dq);
  d.norm_div = l2_divergence(u1);
  d.dq_ok = within(d.norm_dq, d.norm_div);
  if (pr.scheme == SchemeKind::graddiv) {
    d.gauge_jump = tau * tau * quad(ops.h1_pressure, d2psi);
    d.gauge_ok = within(d.gauge_jump, beta * beta * d.norm_ddiv * d.norm_ddiv);
  } else if (pr.scheme == SchemeKind::boundary_correction) {
    d.gauge_jump = tau * tau * quad(ops.laplace_pressure, d2psi);
    d.gauge_ok = within(d.gauge_jump, beta * beta * d.norm_du * d.norm_du);
    d.cfl_ok = mesh_condition_holds(pr, disc_->mesh().h_min);
  }

  const Vector psi1 = s.psi + dpsi1;
  const Vector q1 = s.q + dq;
  const double cq = pr.pressure_q_coefficient();
  if (pr.scheme == SchemeKind::graddiv && m == 1 && pr.pressure_update == PressureUpdate::plain) {
    const double a = energy_a(u1);
    const double div0 = l2_divergence(s.u);
    d.energy_lhs = quad(ops.mass_velocity, u1) + pr.alpha * (1.0 - tau / 2.0) * d.norm_div * d.norm_div +
                   tau * cq * quad(ops.mass_pressure, q1) + tau * tau * quad(ops.h1_pressure, psi1) +
                   d.norm_du * d.norm_du + 2.0 * tau * a * a + tau * tau * quad(ops.h1_pressure, s.dpsi);
    d.energy_rhs = quad(ops.mass_velocity, s.u) + pr.alpha * div0 * div0 + tau * cq * quad(ops.mass_pressure, s.q) +
                   tau * tau * quad(ops.h1_pressure, s.psi);
    d.energy_ok = within(d.energy_lhs, d.energy_rhs);
  }

  // Update.
  Vector p1;
  if (pr.scheme == SchemeKind::rotational_noslip) {
    // p^{k+1} = p^k + phi^{k+1} - Pi(div u^{k+1}) / Re, and dq = -Pi(div u^{k+1}).
    p1 = s.p + dpsi1 + dq / pr.reynolds;
  } else {
    p1 = s.p_offset + psi1 + cq * q1;
  }
  s.u_prev = std::move(s.u);
  s.u = std::move(u1);
  s.dpsi_prev = std::move(s.dpsi);
  s.dpsi = std::move(dpsi1);
  s.psi = psi1;
  s.q = q1;
  s.p = std::move(p1);
  s.k = k1;
  s.t = t1;

  d.norm_u = l2_velocity(s.u);
  d.energy_a = energy_a(s.u);
  d.norm_p = l2_pressure(s.p);
  d.residual_ok = d.max_residual <= pr.solver.tolerance;
  return d;
}

History run(const Scheme& scheme, std::vector<SchemeState> levels, const std::vector<StateObserver>& observers) {
  const SchemeParams& pr = scheme.params();
  if (static_cast<int>(levels.size()) != pr.m) throw std::invalid_argument("run: expected m initial levels");
  const int K = step_count(pr.final_time, pr.tau);
  History h;
  for (const auto& lvl : levels)
    for (const auto& obs : observers) obs(lvl, nullptr);
  SchemeState state = std::move(levels.back());
  if (pr.scheme == SchemeKind::boundary_correction && !mesh_condition_holds(pr, scheme.discretization().mesh().h_min)) {
    std::ostringstream msg;
    msg << "warning: tau = " << pr.tau << " exceeds c_cfl Re h^2 = "
        << pr.c_cfl * pr.reynolds * std::pow(scheme.discretization().mesh().h_min, 2)
        << "; the mesh condition of the boundary-correction scheme is not met";
    h.messages.push_back(msg.str());
    ++h.warnings;
  }
  h.steps.reserve(static_cast<std::size_t>(K));
  try {
    while (state.k < K) {
      StepDiagnostics d = scheme.step(state);
      for (const auto& obs : observers) obs(state, &d);
      h.steps.push_back(d);
    }
    h.completed = true;
  } catch (const SolverError& e) {
    h.failure = std::string("step ") + std::to_string(state.k + 1) + ": " + e.what();
  }
  h.final_state = std::move(state);
  return h;
}

void write_diagnostics_header(std::ostream& os) {
  os << "k,t,norm_u,energy_a,norm_div,norm_p,norm_dq,norm_ddiv,gauge_jump,energy_lhs,energy_rhs,"
        "energy_ok,gauge_ok,dq_ok,cfl_ok,max_residual,residual_ok\n";
}

namespace {
const char* flag(const std::optional<bool>& f) {
  if (!f) return "na";
  return *f ? "1" : "0";
}
}  // namespace

void write_diagnostics_row(std::ostream& os, const StepDiagnostics& d) {
  const auto old_precision = os.precision(17);
  os << d.k << ',' << d.t << ',' << d.norm_u << ',' << d.energy_a << ',' << d.norm_div << ',' << d.norm_p << ','
     << d.norm_dq << ',' << d.norm_ddiv << ',' << d.gauge_jump << ',' << d.energy_lhs << ',' << d.energy_rhs << ','
     << flag(d.energy_ok) << ',' << flag(d.gauge_ok) << ',' << (d.dq_ok ? "1" : "0") << ',' << flag(d.cfl_ok) << ','
     << d.max_residual << ',' << (d.residual_ok ? "1" : "0") << '\n';
  os.precision(old_precision);
}

}  // namespace tsplit
