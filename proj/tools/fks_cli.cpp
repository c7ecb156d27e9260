// Command-line front end: fks <command> [--config file.json] [overrides...]
#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fks/experiment.hpp"

namespace {

struct Overrides {
  std::optional<std::string> config;
  std::optional<int> d;
  std::optional<double> s, epsilon, R_max, cfl, dt_min, t_end, t_end_tau, blowup_factor;
  std::optional<double> t_fix_tau, support_radius, tolerance, mass_ratio;
  std::optional<std::size_t> N, output_every, n_starts, n_random;
  std::optional<std::uint64_t> seed;
  std::vector<double> mass_ratios, eps_list;
  std::optional<std::string> profile, out, tag, initial, initial_path, kernel_cache, mass_basis;
  bool corrupt_kernel = false;
  bool no_csv = false;
};

void add_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--d", o.d, "space dimension");
  cmd->add_option("--s", o.s, "fractional order (2 < 2s < d)");
  cmd->add_option("--epsilon", o.epsilon, "regularization length");
  cmd->add_option("--N", o.N, "radial cells");
  cmd->add_option("--R-max", o.R_max, "outer radius");
  cmd->add_option("--cfl", o.cfl);
  cmd->add_option("--dt-min", o.dt_min);
  cmd->add_option("--t-end", o.t_end, "final time (absolute)");
  cmd->add_option("--t-end-tau", o.t_end_tau, "final time in diffusive times");
  cmd->add_option("--blowup-factor", o.blowup_factor);
  cmd->add_option("--output-every", o.output_every);
  cmd->add_option("--mass-ratios", o.mass_ratios)->delimiter(',');
  cmd->add_option("--eps-list", o.eps_list)->delimiter(',');
  cmd->add_option("--t-fix-tau", o.t_fix_tau);
  cmd->add_option("--n-starts", o.n_starts);
  cmd->add_option("--n-random", o.n_random);
  cmd->add_option("--seed", o.seed);
  cmd->add_option("--support-radius", o.support_radius);
  cmd->add_option("--mass-basis", o.mass_basis)->check(CLI::IsMember({"measured", "closed_form"}));
  cmd->add_option("--profile", o.profile, "profile CSV (field format)");
  cmd->add_option("--kernel-cache", o.kernel_cache, "directory for cached kernels");
  cmd->add_option("--initial", o.initial)->check(CLI::IsMember({"el_scaled", "barenblatt", "file"}));
  cmd->add_option("--initial-path", o.initial_path);
  cmd->add_option("--mass-ratio", o.mass_ratio, "initial mass as a fraction of M*");
  cmd->add_option("--tolerance", o.tolerance, "set every verification tolerance");
  cmd->add_flag("--corrupt-kernel", o.corrupt_kernel, "break kernel symmetry (fault injection)");
  cmd->add_option("--tag", o.tag);
  cmd->add_option("-o,--out", o.out, "output directory");
  cmd->add_flag("--no-csv", o.no_csv, "write report.json only");
}

fks::ExperimentConfig resolve(const Overrides& o) {
  fks::ExperimentConfig c = o.config ? fks::load_config(*o.config) : fks::ExperimentConfig{};
  if (o.d) c.d = *o.d;
  if (o.s) c.s = *o.s;
  if (o.epsilon) c.epsilon = *o.epsilon;
  if (o.N) c.N = *o.N;
  if (o.R_max) c.R_max = *o.R_max;
  if (o.cfl) c.cfl = *o.cfl;
  if (o.dt_min) c.dt_min = *o.dt_min;
  if (o.t_end) c.t_end = *o.t_end;
  if (o.t_end_tau) c.t_end_tau = *o.t_end_tau;
  if (o.blowup_factor) c.blowup_factor = *o.blowup_factor;
  if (o.output_every) c.output_every = *o.output_every;
  if (!o.mass_ratios.empty()) c.mass_ratios = o.mass_ratios;
  if (!o.eps_list.empty()) c.eps_list = o.eps_list;
  if (o.t_fix_tau) c.t_fix_tau = *o.t_fix_tau;
  if (o.n_starts) c.n_starts = *o.n_starts;
  if (o.n_random) c.n_random = *o.n_random;
  if (o.seed) c.seed = *o.seed;
  if (o.support_radius) c.support_radius = *o.support_radius;
  if (o.mass_basis) c.mass_basis = *o.mass_basis;
  if (o.profile) c.profile = *o.profile;
  if (o.kernel_cache) c.kernel_cache = *o.kernel_cache;
  if (o.initial) c.initial_kind = *o.initial;
  if (o.initial_path) c.initial_path = *o.initial_path;
  if (o.mass_ratio) c.initial_mass_ratio = *o.mass_ratio;
  if (o.tolerance) {
    c.tol.hls = c.tol.vhls = c.tol.identity = c.tol.scaling = *o.tolerance;
    c.tol.symmetry = c.tol.rearrange = *o.tolerance;
  }
  if (o.corrupt_kernel) c.corrupt_kernel = true;
  if (o.tag) c.tag = *o.tag;
  if (o.out) c.out_dir = *o.out;
  if (o.no_csv) c.write_csv = false;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Critical fractional Keller-Segel solver and verification suite"};
  app.require_subcommand(1);
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"constants", "closed-form constants (and measured C* for a supplied profile)"},
      {"simulate", "single run with diagnostics"},
      {"dichotomy", "runs from scaled steady profiles across mass ratios"},
      {"extremal", "Euler-Lagrange profile and random-start VHLS maximization"},
      {"verify", "property suites; exit 2 on any failure"},
      {"eps-study", "L1 distances between regularized solutions"},
  };
  Overrides o;
  std::string chosen;
  for (const auto& [name, help] : commands) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_options(cmd, o);
    cmd->callback([&chosen, n = name] { chosen = n; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : fks::kConfigError;
  }
  fks::ExperimentConfig config;
  try {
    config = resolve(o);
  } catch (const fks::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return fks::kConfigError;
  }
  return fks::run_command(chosen, config, std::cout, std::cerr);
}
