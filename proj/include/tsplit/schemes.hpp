#pragma once

#include "tsplit/fem.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tsplit {

enum class SchemeKind { graddiv, boundary_correction, gauge_uzawa_noslip, rotational_noslip };

std::string to_string(SchemeKind kind);
/// Accepts graddiv, bc, gu, rot and the long names.
SchemeKind parse_scheme(const std::string& name);

/// Coefficient of q in the pressure update: 1/Re or kappa/Re.
enum class PressureUpdate { plain, korn };

std::string to_string(PressureUpdate update);
PressureUpdate parse_pressure_update(const std::string& name);

struct SchemeParams {
  SchemeKind scheme = SchemeKind::graddiv;
  StressForm form = StressForm::traction;
  int m = 2;
  double reynolds = 1.0;
  double tau = 0.1;
  double alpha = 1.0;
  double kappa = 0.5;
  PressureUpdate pressure_update = PressureUpdate::plain;
  double final_time = 1.0;
  double c_cfl = 1.0;
  // Direct solves reach about eps * cond(A) relative residual; 1e-12 is not
  // attainable for smooth right-hand sides beyond nx = 16.
  SolverConfig solver{SolverMethod::direct, 1e-10, std::nullopt};

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  [[nodiscard]] double beta() const { return 1.0 + 0.5 * (m - 1); }
  /// Leading BDF coefficient: 1 for m=1, 3/2 for m=2.
  [[nodiscard]] double bdf_leading() const { return m == 1 ? 1.0 : 1.5; }
  /// Multiplier of q in the pressure update.
  [[nodiscard]] double pressure_q_coefficient() const;
  /// alpha > max{1, 2/Re}: the regime in which the grad-div energy bound is proven.
  [[nodiscard]] bool in_graddiv_stability_regime() const;
  [[nodiscard]] bool noslip() const {
    return scheme == SchemeKind::gauge_uzawa_noslip || scheme == SchemeKind::rotational_noslip;
  }
};

/// Number of steps K = T / tau; throws std::invalid_argument
/// ("time step must divide final time") unless T / tau is within one ulp of
/// an integer.
int step_count(double final_time, double tau);

/// State after step k.  psi is stored over the full pressure space; for the
/// boundary-correction scheme its boundary entries stay zero.  For the
/// rotational scheme dpsi holds phi.
struct SchemeState {
  int k = 0;
  double t = 0.0;
  Vector u;
  Vector u_prev;
  Vector psi;
  Vector dpsi;       // psi^k - psi^{k-1}
  Vector dpsi_prev;  // psi^{k-1} - psi^{k-2}
  Vector q;
  Vector p;
  /// Pressure level carried from initialization: p = p_offset + psi + c q.
  Vector p_offset;
};

struct StepDiagnostics {
  int k = 0;  // index of the computed state
  double t = 0.0;
  double norm_u = 0.0;
  double energy_a = 0.0;  // A(u, u)^{1/2}
  double norm_div = 0.0;
  double norm_p = 0.0;
  double norm_dq = 0.0;
  double norm_ddiv = 0.0;    // ||div(u^{k+1} - u^k)||
  double norm_du = 0.0;      // ||u^{k+1} - u^k||
  double gauge_jump = 0.0;   // tau^2 |||d^2 psi|||^2 (H1 form) or tau^2 ||grad d^2 psi||^2
  double energy_lhs = 0.0;   // grad-div, m = 1 only
  double energy_rhs = 0.0;
  std::optional<bool> energy_ok;
  std::optional<bool> gauge_ok;  // gauge_jump <= beta^2 ||d div u||^2 (or beta^2 ||d u||^2)
  bool dq_ok = true;     // ||d q|| <= ||div u||
  std::optional<bool> cfl_ok;
  double max_residual = 0.0;
  bool residual_ok = true;

  [[nodiscard]] bool monitors_pass() const {
    return energy_ok.value_or(true) && gauge_ok.value_or(true) && dq_ok && residual_ok;
  }
};

/// Right-hand side data; empty functions mean zero.
struct ForcingData {
  VectorFunction force;
  BoundaryFunction traction;
};

/// Initial data sampled at t_0..t_{m-1}; empty functions mean zero.
struct InitialData {
  VectorFunction velocity;
  ScalarFunction pressure;
};

/// D_m applied to three consecutive levels.  m=2 requires phi_km1.
Vector bdf_apply(int m, const Vector& phi_kp1, const Vector& phi_k, const Vector* phi_km1, double tau);
/// Extrapolated increment.  m=2 requires dphi_km1.
Vector extrapolate_sharp(int m, const Vector& dphi_k, const Vector* dphi_km1);

/// One time-stepping scheme on a fixed discretization.  Factorizations are
/// computed once at construction.
class Scheme {
 public:
  Scheme(const Discretization& disc, SchemeParams params, ForcingData data = {});
  ~Scheme();
  Scheme(Scheme&&) noexcept;
  Scheme& operator=(Scheme&&) = delete;

  /// Projections of the initial data at t_0..t_{m-1}; psi = q = 0.
  /// Returns the levels k = 0..m-1; the last one is the working state.
  [[nodiscard]] std::vector<SchemeState> initialize(const InitialData& data) const;
  /// u^{m-1} = ... = u^0 = u0, pressure and gauge zero.
  [[nodiscard]] std::vector<SchemeState> initialize_from_velocity(const Vector& u0) const;

  /// Advances state from k to k+1.  Throws SolverError on a missed solve.
  StepDiagnostics step(SchemeState& state) const;

  [[nodiscard]] const SchemeParams& params() const { return params_; }
  [[nodiscard]] const Discretization& discretization() const { return *disc_; }
  /// Interior velocity dofs for the no-slip variants, all dofs otherwise.
  [[nodiscard]] const std::vector<int>& active_velocity_dofs() const { return active_; }

  // Norm helpers in the discrete inner products.
  [[nodiscard]] double l2_velocity(const Vector& u) const;
  [[nodiscard]] double l2_divergence(const Vector& u) const;
  [[nodiscard]] double l2_pressure(const Vector& p) const;
  [[nodiscard]] double h1_pressure(const Vector& p) const;
  [[nodiscard]] double energy_a(const Vector& u) const;

 private:
  struct Solvers;
  const Discretization* disc_;
  SchemeParams params_;
  ForcingData data_;
  std::vector<int> active_;
  std::unique_ptr<Solvers> solvers_;
};

using StateObserver = std::function<void(const SchemeState&, const StepDiagnostics*)>;

struct History {
  std::vector<StepDiagnostics> steps;
  SchemeState final_state;
  bool completed = false;
  std::string failure;
  int warnings = 0;
  std::vector<std::string> messages;
};

/// Time loop from the initialized levels to T.  Observers see the initial
/// levels (diagnostics null) and every computed state.  A failed step ends
/// the loop and is reported through History::failure.
History run(const Scheme& scheme, std::vector<SchemeState> levels, const std::vector<StateObserver>& observers = {});

/// Mesh condition tau <= c_cfl Re h_min^2.
bool mesh_condition_holds(const SchemeParams& params, double h_min);

void write_diagnostics_header(std::ostream& os);
void write_diagnostics_row(std::ostream& os, const StepDiagnostics& d);

}  // namespace tsplit
