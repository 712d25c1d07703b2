#pragma once

#include "tsplit/exact.hpp"
#include "tsplit/schemes.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tsplit {

/// Errors of one time level against the exact solution.
struct LevelErrors {
  int k = 0;
  double t = 0.0;
  double velocity_l2 = 0.0;
  double velocity_h1 = 0.0;  // full H1 norm: (||e||^2 + ||grad e||^2)^{1/2}
  double pressure_l2 = 0.0;
};

LevelErrors level_errors(const Vector& u, const Vector& p, int k, double t, const ExactSolution& exact,
                         const SpacePair& spaces);

enum class Norm { velocity_linf_l2, velocity_l2_h1, pressure_linf_l2, pressure_l2_l2 };
inline constexpr std::array<Norm, 4> kAllNorms = {Norm::velocity_linf_l2, Norm::velocity_l2_h1,
                                                  Norm::pressure_linf_l2, Norm::pressure_l2_l2};
std::string to_string(Norm norm);

using NormValues = std::array<double, 4>;  // indexed in kAllNorms order

/// Discrete-in-time norms: l-infinity over k = 0..K, l2 with sqrt(tau)
/// weights over k = 1..K.
NormValues aggregate_errors(const std::vector<LevelErrors>& levels, double tau);

struct Snapshot {
  int k = 0;
  double t = 0.0;
  Vector u;
  Vector p;
};

/// Errors of a stored trajectory (k = 0..K).
NormValues compute_errors(const std::vector<Snapshot>& trajectory, const ExactSolution& exact, const SpacePair& spaces,
                          double tau);

/// Observer that records LevelErrors for every level it sees.
class ErrorRecorder {
 public:
  ErrorRecorder(const ExactSolution& exact, const SpacePair& spaces) : exact_(&exact), spaces_(&spaces) {}
  [[nodiscard]] StateObserver observer();
  [[nodiscard]] const std::vector<LevelErrors>& levels() const { return levels_; }

 private:
  const ExactSolution* exact_;
  const SpacePair* spaces_;
  std::vector<LevelErrors> levels_;
};

/// Experimental order of convergence; nullopt when an error is not positive.
std::optional<double> eoc(double e_coarse, double e_fine, double tau_coarse, double tau_fine);

struct ConvergenceRow {
  double tau = 0.0;
  double h = 0.0;
  NormValues errors{};
  /// Errors of the projected exact solution sampled on the same time levels.
  NormValues floor{};
  std::array<bool, 4> floor_dominated{};  // error < 3 * floor
  bool completed = true;
  std::string failure;
  int steps = 0;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;

  /// rates()[i][n]: rate between rows i and i+1 for norm n; empty when either
  /// row failed or is dominated by spatial error.
  [[nodiscard]] std::vector<std::array<std::optional<double>, 4>> rates() const;
  /// Every consecutive rate of norm n between rows not dominated by spatial
  /// error lies in [lo, hi]; false if no such rate exists or a run failed.
  [[nodiscard]] bool rates_within(Norm n, double lo, double hi) const;
  [[nodiscard]] bool all_completed() const;

  void write_csv(std::ostream& os) const;
  /// Two columns "tau error" for one norm.
  void write_plot_data(std::ostream& os, Norm n) const;
};

/// Scale-free floor factor used to flag rows dominated by spatial error.
inline constexpr double kSpatialFloorFactor = 3.0;

/// Smallest generalized eigenvalue of (M_u + K_form) x = lambda (M_u + K_grad) x,
/// halved: the discrete best constant in Korn's inequality.
double estimate_kappa(const Discretization& disc, StressForm form, double tolerance = 1e-10);

struct StabilityRow {
  int k = 0;
  double velocity_sq = 0.0;    // ||u||^2
  double divergence_sq = 0.0;  // alpha ||div u||^2
  double q_term = 0.0;         // (tau/Re) ||q||^2
  double gauge_term = 0.0;     // tau^2 |||psi|||^2
  StepDiagnostics diagnostics;
};

struct StabilityTrace {
  std::vector<StabilityRow> rows;
  double initial_norm = 0.0;
  double max_norm = 0.0;
  int violations = 0;
  bool completed = true;
  std::string failure;
  std::vector<std::string> messages;

  [[nodiscard]] bool bounded() const { return max_norm <= initial_norm * std::exp(1.0) * (1.0 + 1e-12); }
  [[nodiscard]] bool all_monitors_pass() const { return violations == 0 && completed; }
  void write_csv(std::ostream& os) const;
};

/// Seeded random velocity coefficients scaled to the given L2 norm.
Vector random_velocity(const Discretization& disc, std::uint64_t seed, double l2_norm = 1.0);

/// Runs the scheme with f = g = 0 from random initial velocity (u^1 = u^0,
/// psi = q = 0) for `steps` steps.  Monitor violations are recorded, not thrown.
StabilityTrace stability_probe(const Discretization& disc, SchemeParams params, int steps, std::uint64_t seed,
                               double amplitude = 1.0);

struct StudyConfig {
  SchemeParams params;  // tau is overridden per row
  std::vector<double> taus;
  int jobs = 1;
};

/// One manufactured-solution run per tau (strictly decreasing, each dividing
/// T).  With jobs > 1 the runs execute concurrently on a shared discretization.
ConvergenceTable convergence_study(const Discretization& disc, const StudyConfig& config);

/// Runs the scheme on the manufactured solution and returns errors and history.
struct ManufacturedRun {
  History history;
  std::vector<LevelErrors> levels;
  NormValues errors{};
};
ManufacturedRun manufactured_run(const Discretization& disc, const SchemeParams& params);

}  // namespace tsplit
