#pragma once

#include "tsplit/schemes.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsplit {

/// Invalid configuration or usage; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Command { converge, stability, equivalence, run };

std::string to_string(Command command);

/// Source of forcing and initial data for run and equivalence.
enum class DataSource { manufactured, zero };

struct RunConfig {
  Command command = Command::run;
  SchemeParams params;
  /// Korn constant; estimated from the discretization when absent and needed.
  std::optional<double> kappa;
  int nx = 16;
  int ny = 0;  // 0: same as nx
  std::vector<double> taus;
  std::uint64_t seed = 1;
  double amplitude = 1.0;  // L2 norm of the random initial velocity
  DataSource data = DataSource::manufactured;
  std::string out = ".";
  int jobs = 1;
  bool dump_fields = false;

  [[nodiscard]] int mesh_ny() const { return ny > 0 ? ny : nx; }
  /// Single line "key=value ..." naming every resolved setting.
  [[nodiscard]] std::string describe() const;
};

/// Subcommand defaults before any file or flag is applied.
RunConfig default_config(Command command);

/// Flat "key = value" lines; '#' starts a comment.  Keys may use '-' or '_'.
/// Throws ConfigError with the line number on malformed input.
std::map<std::string, std::string> parse_config_text(std::istream& is);

/// Applies one setting.  Throws ConfigError on an unknown key or bad value.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Checks cross-field constraints; throws ConfigError.
void validate_config(const RunConfig& config);

/// Entry point of the command-line tool.  Returns the process exit code:
/// 0 success, 1 run failure, 2 usage or configuration error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tsplit
