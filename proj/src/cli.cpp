#include "tsplit/cli.hpp"

#include "tsplit/exact.hpp"
#include "tsplit/verification.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace tsplit {

std::string to_string(Command command) {
  switch (command) {
    case Command::converge:
      return "converge";
    case Command::stability:
      return "stability";
    case Command::equivalence:
      return "equivalence";
    case Command::run:
      return "run";
  }
  return "unknown";
}

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailure = 1;
constexpr int kExitUsage = 2;

constexpr double kEquivalenceTolerance = 1e-8;

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string normalize_key(std::string key) {
  key = trim(key);
  while (!key.empty() && key.front() == '-') key.erase(key.begin());
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

double parse_double(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
  return out;
}

long long parse_integer(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(key + ": expected an integer, got '" + value + "'");
  }
  return out;
}

int parse_int(const std::string& key, const std::string& value) {
  const long long v = parse_integer(key, value);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError(key + ": value out of range");
  }
  return static_cast<int>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

/// Comma- or space-separated list of time steps.
std::vector<double> parse_tau_list(const std::string& value) {
  std::string v = value;
  std::replace(v.begin(), v.end(), ',', ' ');
  std::istringstream is(v);
  std::vector<double> out;
  std::string item;
  while (is >> item) out.push_back(parse_double("tau", item));
  if (out.empty()) throw ConfigError("tau: empty list");
  return out;
}

template <class F>
auto rethrow_as_config(F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

std::string RunConfig::describe() const {
  const SchemeParams& p = params;
  std::ostringstream os;
  os << "command=" << to_string(command) << " scheme=" << to_string(p.scheme) << " m=" << p.m
     << " form=" << to_string(p.form) << " re=" << format_double(p.reynolds) << " alpha=" << format_double(p.alpha)
     << " pressure_update=" << to_string(p.pressure_update)
     << " kappa=" << (kappa ? format_double(*kappa) : std::string("estimated")) << " nx=" << nx
     << " ny=" << mesh_ny() << " tau=";
  for (std::size_t i = 0; i < taus.size(); ++i) os << (i ? "," : "") << format_double(taus[i]);
  os << " final_time=" << format_double(p.final_time) << " c_cfl=" << format_double(p.c_cfl) << " seed=" << seed
     << " amplitude=" << format_double(amplitude)
     << " data=" << (data == DataSource::manufactured ? "manufactured" : "zero")
     << " solver=" << (p.solver.method == SolverMethod::direct ? "direct" : "cg")
     << " solver_tol=" << format_double(p.solver.tolerance) << " jobs=" << jobs;
  return os.str();
}

RunConfig default_config(Command command) {
  RunConfig c;
  c.command = command;
  switch (command) {
    case Command::converge:
      c.params.m = 2;
      c.nx = 64;
      c.taus = {0.1, 0.05, 0.025, 0.0125};
      break;
    case Command::stability:
      c.params.m = 1;
      c.params.alpha = 2.5;
      c.taus = {0.01};
      break;
    case Command::equivalence:
      c.params.scheme = SchemeKind::gauge_uzawa_noslip;
      c.params.m = 1;
      c.taus = {0.01};
      c.params.final_time = 0.1;
      break;
    case Command::run:
      c.taus = {0.1};
      break;
  }
  c.params.tau = c.taus.front();
  return c;
}

std::map<std::string, std::string> parse_config_text(std::istream& is) {
  std::map<std::string, std::string> out;
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = normalize_key(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(number) + ": empty key");
    if (out.count(key) != 0U) throw ConfigError("config line " + std::to_string(number) + ": duplicate key " + key);
    out[key] = value;
  }
  return out;
}

void apply_setting(RunConfig& c, const std::string& raw_key, const std::string& value) {
  const std::string key = normalize_key(raw_key);
  SchemeParams& p = c.params;
  if (key == "scheme") {
    p.scheme = rethrow_as_config([&] { return parse_scheme(trim(value)); });
  } else if (key == "m") {
    p.m = parse_int(key, value);
    if (p.m != 1 && p.m != 2) throw ConfigError("m must be 1 or 2");
  } else if (key == "form") {
    p.form = rethrow_as_config([&] { return parse_stress_form(trim(value)); });
  } else if (key == "re" || key == "reynolds") {
    p.reynolds = parse_double(key, value);
  } else if (key == "alpha") {
    p.alpha = parse_double(key, value);
  } else if (key == "pressure_update") {
    p.pressure_update = rethrow_as_config([&] { return parse_pressure_update(trim(value)); });
  } else if (key == "kappa") {
    c.kappa = parse_double(key, value);
  } else if (key == "nx") {
    c.nx = parse_int(key, value);
  } else if (key == "ny") {
    c.ny = parse_int(key, value);
  } else if (key == "tau") {
    c.taus = parse_tau_list(value);
  } else if (key == "final_time") {
    p.final_time = parse_double(key, value);
  } else if (key == "c_cfl") {
    p.c_cfl = parse_double(key, value);
  } else if (key == "seed") {
    const long long s = parse_integer(key, value);
    if (s < 0) throw ConfigError("seed must be nonnegative");
    c.seed = static_cast<std::uint64_t>(s);
  } else if (key == "amplitude") {
    c.amplitude = parse_double(key, value);
  } else if (key == "data") {
    const std::string v = trim(value);
    if (v == "manufactured") {
      c.data = DataSource::manufactured;
    } else if (v == "zero") {
      c.data = DataSource::zero;
    } else {
      throw ConfigError("data: expected manufactured or zero, got '" + value + "'");
    }
  } else if (key == "out") {
    c.out = trim(value);
  } else if (key == "jobs") {
    c.jobs = parse_int(key, value);
  } else if (key == "solver") {
    const std::string v = trim(value);
    if (v == "direct") {
      p.solver.method = SolverMethod::direct;
    } else if (v == "cg") {
      p.solver.method = SolverMethod::conjugate_gradient;
    } else {
      throw ConfigError("solver: expected direct or cg, got '" + value + "'");
    }
  } else if (key == "solver_tol") {
    p.solver.tolerance = parse_double(key, value);
  } else if (key == "dump_fields") {
    c.dump_fields = parse_bool(key, value);
  } else {
    throw ConfigError("unknown setting '" + raw_key + "'");
  }
}

void validate_config(const RunConfig& c) {
  if (c.nx < 1 || c.ny < 0) throw ConfigError("nx must be positive and ny nonnegative");
  if (c.jobs < 1) throw ConfigError("jobs must be at least 1");
  if (c.taus.empty()) throw ConfigError("no time step given");
  if (c.command != Command::converge && c.taus.size() != 1) {
    throw ConfigError(to_string(c.command) + " expects a single time step");
  }
  if (!(c.amplitude >= 0.0)) throw ConfigError("amplitude must be nonnegative");
  if (c.kappa && !(*c.kappa > 0.0 && *c.kappa <= 0.5)) throw ConfigError("kappa must lie in (0, 1/2]");
  for (std::size_t i = 0; i + 1 < c.taus.size(); ++i) {
    if (!(c.taus[i + 1] < c.taus[i])) throw ConfigError("time steps must be strictly decreasing");
  }
  for (double tau : c.taus) {
    SchemeParams p = c.params;
    p.tau = tau;
    if (c.kappa) p.kappa = *c.kappa;
    rethrow_as_config([&] {
      p.validate();
      return 0;
    });
  }
}

namespace {

bool needs_kappa(const SchemeParams& p) {
  return p.scheme == SchemeKind::boundary_correction ||
         (p.scheme == SchemeKind::graddiv && p.pressure_update == PressureUpdate::korn);
}

/// Resolves kappa on the discretization when it was not given.
void resolve_kappa(RunConfig& c, const Discretization& disc, std::ostream& out) {
  if (c.kappa) {
    c.params.kappa = *c.kappa;
    return;
  }
  if (!needs_kappa(c.params)) return;
  c.params.kappa = estimate_kappa(disc, c.params.form);
  c.kappa = c.params.kappa;
  out << "kappa (estimated) = " << format_double(c.params.kappa) << '\n';
}

std::ofstream open_output(const RunConfig& c, const std::string& name) {
  const std::filesystem::path path = std::filesystem::path(c.out) / name;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "# traction_split v1 " << c.describe() << '\n';
  return os;
}

ForcingData forcing_for(const RunConfig& c, const ExactSolution& exact) {
  if (c.data == DataSource::zero) return {};
  return {exact.force_function(), exact.traction_function()};
}

InitialData initial_for(const RunConfig& c, const ExactSolution& exact) {
  if (c.data == DataSource::zero) return {};
  return {exact.velocity_function(), exact.pressure_function()};
}

int cmd_converge(RunConfig& c, std::ostream& out) {
  const Discretization disc(c.nx, c.mesh_ny());
  resolve_kappa(c, disc, out);
  StudyConfig study;
  study.params = c.params;
  study.taus = c.taus;
  study.jobs = c.jobs;
  const ConvergenceTable table = convergence_study(disc, study);

  {
    auto os = open_output(c, "table.csv");
    table.write_csv(os);
  }
  for (Norm n : kAllNorms) {
    auto os = open_output(c, "plot_" + to_string(n) + ".dat");
    table.write_plot_data(os, n);
  }

  out << std::setprecision(6);
  out << "tau";
  for (Norm n : kAllNorms) out << "  " << to_string(n);
  out << '\n';
  for (const auto& row : table.rows) {
    out << row.tau;
    if (!row.completed) {
      out << "  failed: " << row.failure << '\n';
      continue;
    }
    for (std::size_t n = 0; n < row.errors.size(); ++n) {
      out << "  " << row.errors[n] << (row.floor_dominated[n] ? "*" : "");
    }
    out << '\n';
  }
  const auto rates = table.rates();
  for (Norm n : kAllNorms) {
    out << "EOC " << to_string(n) << ':';
    if (rates.empty()) out << " n/a (single time step)";
    for (const auto& r : rates) {
      const auto& v = r[static_cast<std::size_t>(n)];
      out << ' ';
      if (v) {
        out << std::fixed << std::setprecision(3) << *v << std::defaultfloat << std::setprecision(6);
      } else {
        out << '-';
      }
    }
    out << '\n';
  }
  if (std::any_of(table.rows.begin(), table.rows.end(),
                  [](const ConvergenceRow& r) { return std::any_of(r.floor_dominated.begin(), r.floor_dominated.end(),
                                                                   [](bool b) { return b; }); })) {
    out << "* error below " << kSpatialFloorFactor << "x the spatial projection floor; excluded from EOC\n";
  }
  return table.all_completed() ? kExitOk : kExitRunFailure;
}

int cmd_stability(RunConfig& c, std::ostream& out) {
  const Discretization disc(c.nx, c.mesh_ny());
  resolve_kappa(c, disc, out);
  SchemeParams p = c.params;
  p.tau = c.taus.front();
  const int steps = step_count(p.final_time, p.tau);
  const StabilityTrace trace = stability_probe(disc, p, steps, c.seed, c.amplitude);
  {
    auto os = open_output(c, "trace.csv");
    trace.write_csv(os);
  }
  for (const auto& m : trace.messages) out << m << '\n';
  out << "steps " << steps << ", monitor violations " << trace.violations << ", max ||u^k|| / ||u^0|| = "
      << (trace.initial_norm > 0.0 ? trace.max_norm / trace.initial_norm : 0.0)
      << (trace.bounded() ? " (within e)" : " (exceeds e)") << '\n';
  if (!p.noslip() && p.scheme == SchemeKind::graddiv && !p.in_graddiv_stability_regime()) {
    out << "note: alpha <= max{1, 2/Re}; the energy bound is not guaranteed\n";
  }
  if (!trace.completed) {
    out << "run failed: " << trace.failure << '\n';
    return kExitRunFailure;
  }
  for (const auto& row : trace.rows) {
    if (row.k > 0 && !row.diagnostics.monitors_pass()) {
      const auto& d = row.diagnostics;
      out << "violation at k=" << row.k << ":";
      if (d.energy_ok && !*d.energy_ok) out << " energy";
      if (d.gauge_ok && !*d.gauge_ok) out << " gauge-increment";
      if (!d.dq_ok) out << " divergence-correction";
      if (!d.residual_ok) out << " solver-residual";
      out << '\n';
    }
  }
  return trace.all_monitors_pass() ? kExitOk : kExitRunFailure;
}

double relative_gap(const Vector& a, const Vector& b) {
  const double scale = std::max(a.norm(), b.norm());
  if (scale == 0.0) return 0.0;
  return (a - b).norm() / scale;
}

int cmd_equivalence(RunConfig& c, std::ostream& out) {
  const Discretization disc(c.nx, c.mesh_ny());
  SchemeParams base = c.params;
  base.tau = c.taus.front();
  base.m = 1;
  const ExactSolution exact(base.form, base.reynolds);

  const auto trajectory = [&](SchemeKind kind, History& history) {
    SchemeParams p = base;
    p.scheme = kind;
    const Scheme scheme(disc, p, forcing_for(c, exact));
    std::vector<SchemeState> states;
    history = run(scheme, scheme.initialize(initial_for(c, exact)),
                  {[&](const SchemeState& s, const StepDiagnostics*) { states.push_back(s); }});
    return states;
  };
  History h_gu, h_rot;
  const auto gu = trajectory(SchemeKind::gauge_uzawa_noslip, h_gu);
  const auto rot = trajectory(SchemeKind::rotational_noslip, h_rot);
  if (!h_gu.completed || !h_rot.completed) {
    out << "run failed: " << (h_gu.completed ? h_rot.failure : h_gu.failure) << '\n';
    return kExitRunFailure;
  }

  auto os = open_output(c, "equivalence.csv");
  os << "k,t,velocity_gap,pressure_gap,phi_gap\n" << std::setprecision(17);
  double worst_u = 0.0, worst_p = 0.0, worst_phi = 0.0;
  for (std::size_t i = 0; i < gu.size() && i < rot.size(); ++i) {
    const double du = relative_gap(gu[i].u, rot[i].u);
    const double dp = relative_gap(gu[i].p, rot[i].p);
    // The rotational run stores phi where the gauge-Uzawa run stores the gauge increment.
    const double dphi = relative_gap(gu[i].dpsi, rot[i].dpsi);
    os << gu[i].k << ',' << gu[i].t << ',' << du << ',' << dp << ',' << dphi << '\n';
    worst_u = std::max(worst_u, du);
    worst_p = std::max(worst_p, dp);
    worst_phi = std::max(worst_phi, dphi);
  }
  const double worst = std::max({worst_u, worst_p, worst_phi});
  out << std::setprecision(3) << "max relative discrepancy over " << gu.size() - 1 << " steps: velocity " << worst_u
      << ", pressure " << worst_p << ", phi vs gauge increment " << worst_phi << '\n';
  if (worst > kEquivalenceTolerance) {
    out << "discrepancy exceeds " << kEquivalenceTolerance << " (solver tolerance " << base.solver.tolerance
        << "; the gap tracks the solver tolerance)\n";
    return kExitRunFailure;
  }
  return kExitOk;
}

void dump_fields(const RunConfig& c, const Discretization& disc, const SchemeState& s) {
  const SpacePair& spaces = disc.spaces();
  const Mesh& mesh = disc.mesh();
  auto vel = open_output(c, "field_velocity_magnitude.txt");
  auto pre = open_output(c, "field_pressure.txt");
  vel << std::setprecision(17);
  pre << std::setprecision(17);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    const Point& x = mesh.vertices[v];
    const double ux = s.u[spaces.velocity_dof(0, v)];
    const double uy = s.u[spaces.velocity_dof(1, v)];
    vel << x.x << ' ' << x.y << ' ' << std::hypot(ux, uy) << '\n';
    pre << x.x << ' ' << x.y << ' ' << s.p[v] << '\n';
  }
}

int cmd_run(RunConfig& c, std::ostream& out, std::ostream& err) {
  const Discretization disc(c.nx, c.mesh_ny());
  resolve_kappa(c, disc, out);
  SchemeParams p = c.params;
  p.tau = c.taus.front();
  const ExactSolution exact(p.form, p.reynolds);
  const Scheme scheme(disc, p, forcing_for(c, exact));

  auto diag = open_output(c, "diagnostics.csv");
  write_diagnostics_header(diag);
  ErrorRecorder recorder(exact, disc.spaces());
  const History h =
      run(scheme, scheme.initialize(initial_for(c, exact)),
          {recorder.observer(), [&](const SchemeState&, const StepDiagnostics* d) {
             if (d != nullptr) write_diagnostics_row(diag, *d);
           }});
  for (const auto& m : h.messages) err << m << '\n';
  const int violations = static_cast<int>(
      std::count_if(h.steps.begin(), h.steps.end(), [](const StepDiagnostics& d) { return !d.monitors_pass(); }));
  out << "steps " << h.steps.size() << ", monitor violations " << violations << '\n';
  if (c.data == DataSource::manufactured && !recorder.levels().empty()) {
    const LevelErrors& last = recorder.levels().back();
    out << std::setprecision(6) << "final step k=" << last.k << " t=" << last.t << ": velocity L2 error "
        << last.velocity_l2 << ", velocity H1 error " << last.velocity_h1 << ", pressure L2 error "
        << last.pressure_l2 << '\n';
  }
  if (c.dump_fields) dump_fields(c, disc, h.final_state);
  if (!h.completed) {
    out << "run failed: " << h.failure << '\n';
    return kExitRunFailure;
  }
  return kExitOk;
}

struct FlagValues {
  std::string config;
  std::map<std::string, std::string> scalar;
  std::vector<std::string> taus;
  bool dump_fields = false;
};

void add_common_flags(CLI::App* sub, FlagValues& v) {
  sub->add_option("--config", v.config, "key = value configuration file");
  const std::vector<std::pair<std::string, std::string>> flags = {
      {"scheme", "graddiv, bc, gu or rot"},
      {"m", "time-stepping order: 1 or 2"},
      {"form", "open or traction"},
      {"re", "Reynolds number"},
      {"alpha", "grad-div parameter"},
      {"pressure-update", "plain or korn"},
      {"kappa", "Korn constant (estimated when omitted)"},
      {"nx", "cells in x"},
      {"ny", "cells in y (default nx)"},
      {"final-time", "final time T"},
      {"c-cfl", "constant of the mesh condition tau <= c Re h^2"},
      {"seed", "random seed of the stability probe"},
      {"amplitude", "L2 norm of the random initial velocity"},
      {"data", "manufactured or zero"},
      {"out", "output directory"},
      {"jobs", "concurrent runs in a convergence study"},
      {"solver", "direct or cg"},
      {"solver-tol", "relative residual tolerance of every solve"},
  };
  for (const auto& [name, help] : flags) sub->add_option("--" + name, v.scalar[name], help);
  sub->add_option("--tau", v.taus, "time step (repeatable; a list for converge)");
  sub->add_flag("--dump-fields", v.dump_fields, "write vertex values of |u| and p (run)");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rotational pressure-correction schemes with open and traction boundary conditions", "traction_split"};
  app.require_subcommand(1);
  FlagValues values;
  const std::vector<std::pair<Command, std::string>> commands = {
      {Command::converge, "manufactured-solution convergence study in tau"},
      {Command::stability, "per-step stability monitors from random initial data"},
      {Command::equivalence, "gauge-Uzawa versus rotational no-slip trajectories"},
      {Command::run, "single run with per-step diagnostics"},
  };
  std::map<CLI::App*, Command> by_app;
  for (const auto& [cmd, help] : commands) {
    CLI::App* sub = app.add_subcommand(to_string(cmd), help);
    add_common_flags(sub, values);
    by_app[sub] = cmd;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  Command command = Command::run;
  CLI::App* active = nullptr;
  for (const auto& [sub, cmd] : by_app) {
    if (sub->parsed()) {
      command = cmd;
      active = sub;
    }
  }

  RunConfig config = default_config(command);
  try {
    if (!values.config.empty()) {
      std::ifstream is(values.config);
      if (!is) throw ConfigError("cannot read config file " + values.config);
      for (const auto& [key, value] : parse_config_text(is)) apply_setting(config, key, value);
    }
    for (const auto& [name, value] : values.scalar) {
      if (active->count("--" + name) > 0) apply_setting(config, name, value);
    }
    if (!values.taus.empty()) {
      config.taus.clear();
      for (const auto& t : values.taus)
        for (double v : parse_tau_list(t)) config.taus.push_back(v);
    }
    if (values.dump_fields) config.dump_fields = true;
    if (const char* env = std::getenv("TRACTION_SPLIT_OUT"); env != nullptr && *env != '\0') config.out = env;
    if (command == Command::equivalence) {
      if (!config.params.noslip()) config.params.scheme = SchemeKind::gauge_uzawa_noslip;
      config.params.m = 1;
    }
    config.params.tau = config.taus.empty() ? config.params.tau : config.taus.front();
    validate_config(config);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    std::filesystem::create_directories(config.out);
    switch (command) {
      case Command::converge:
        return cmd_converge(config, out);
      case Command::stability:
        return cmd_stability(config, out);
      case Command::equivalence:
        return cmd_equivalence(config, out);
      case Command::run:
        return cmd_run(config, out, err);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "run failed: " << e.what() << '\n';
    return kExitRunFailure;
  }
  return kExitRunFailure;
}

}  // namespace tsplit
