#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fks {

/// Invalid or unreadable configuration; the message names the offending
/// field (or line, for JSON syntax errors).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Tolerances {
  double hls = 0.02;         ///< HLS extremizer ratio vs the sharp constant
  double vhls = 0.02;        ///< J <= C_hls (1 + vhls) on random fields
  double identity = 0.05;    ///< energy and virial identities, relative
  double scaling = 0.01;     ///< J scaling invariance
  double symmetry = 1e-12;   ///< kernel asymmetry
  double rearrange = 1e-12;  ///< allowed relative drop of ω under rearrangement
};

struct ExperimentConfig {
  // model
  int d = 3;
  double s = std::numeric_limits<double>::quiet_NaN();  ///< required
  double epsilon = 0.0;
  // grid
  std::size_t N = 512;
  double R_max = 4.0;
  // solver
  double cfl = 0.4;
  double dt_min = 1e-14;
  std::optional<double> t_end;  ///< absolute; otherwise t_end_tau diffusive times
  double t_end_tau = 5.0;
  double blowup_factor = 100.0;
  std::size_t output_every = 100;
  std::size_t max_steps = 50'000'000;
  // experiment
  std::vector<double> mass_ratios{0.5, 0.9, 1.5, 2.0};
  std::vector<double> eps_list{0.2, 0.1, 0.05, 0.025};
  double t_fix_tau = 1.0;
  std::size_t n_starts = 10;
  std::uint64_t seed = 12345;
  double support_radius = 1.0;
  double el_tol = 1e-12;
  std::size_t el_max_iter = 500;
  std::string mass_basis = "measured";  ///< "measured" or "closed_form"
  std::optional<std::string> profile;   ///< CSV profile to use instead of solving EL
  std::optional<std::string> kernel_cache;
  std::size_t n_random = 100;
  std::size_t hls_N = 1024;
  double hls_R_max = 50.0;
  bool corrupt_kernel = false;
  Tolerances tol;
  std::string initial_kind = "el_scaled";  ///< el_scaled | barenblatt | file
  double initial_mass_ratio = 0.5;
  double initial_mass = 1.0;
  double initial_radius = 1.0;
  std::optional<std::string> initial_path;
  std::string tag = "run";
  // output
  std::string out_dir = "out";
  bool write_csv = true;
};

/// Parses JSON text; missing fields keep their defaults, unknown fields are
/// rejected. Throws ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// Throws ConfigError naming the first field that violates a precondition.
void validate_config(const ExperimentConfig& config);

/// Canonical JSON of the fully resolved config.
std::string config_json(const ExperimentConfig& config);

/// FNV-1a 64 over the canonical config and the bytes of every input file.
std::string content_hash(const ExperimentConfig& config);

/// Exit codes shared by every command.
enum ExitCode : int { kOk = 0, kConfigError = 1, kVerifyFailed = 2, kRuntimeError = 3 };

/// Each command writes report.json (and CSVs) to config.out_dir, prints a
/// short summary to log, and returns an exit code. Errors inside are not
/// caught here; see run_command.
int cmd_constants(const ExperimentConfig& config, std::ostream& log);
int cmd_simulate(const ExperimentConfig& config, std::ostream& log);
int cmd_dichotomy(const ExperimentConfig& config, std::ostream& log);
int cmd_extremal(const ExperimentConfig& config, std::ostream& log);
int cmd_verify(const ExperimentConfig& config, std::ostream& log);
int cmd_eps_study(const ExperimentConfig& config, std::ostream& log);

/// Dispatches by name and maps exceptions to exit codes (ConfigError and
/// ParameterError → 1, anything else → 3).
int run_command(const std::string& name, const ExperimentConfig& config, std::ostream& log,
                std::ostream& err);

}  // namespace fks
