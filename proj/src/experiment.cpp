#include "fks/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "fks/energy.hpp"
#include "fks/extremal.hpp"
#include "fks/field.hpp"
#include "fks/model.hpp"
#include "fks/riesz.hpp"
#include "fks/solver.hpp"

namespace fks {
namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------- parsing

class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(label() + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json& sub(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }
  std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void read(const char* key, int& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) fail(key, "expected an integer");
      out = v->get<int>();
    }
  }
  void read(const char* key, std::size_t& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0) {
        fail(key, "expected a non-negative integer");
      }
      out = v->get<std::size_t>();
    }
  }
  void read(const char* key, std::uint64_t& out, int) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() &&
                                      v->get<long long>() < 0)) {
        fail(key, "expected a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }
  void read(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<double>();
    }
  }
  void read(const char* key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) fail(key, "expected true or false");
      out = v->get<bool>();
    }
  }
  void read(const char* key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      out = v->get<std::string>();
    }
  }
  void read(const char* key, std::optional<double>& out) {
    if (const json* v = take(key)) {
      if (v->is_null()) {
        out.reset();
      } else {
        if (!v->is_number()) fail(key, "expected a number or null");
        out = v->get<double>();
      }
    }
  }
  void read(const char* key, std::optional<std::string>& out) {
    if (const json* v = take(key)) {
      if (v->is_null()) {
        out.reset();
      } else {
        if (!v->is_string()) fail(key, "expected a string or null");
        out = v->get<std::string>();
      }
    }
  }
  void read(const char* key, std::vector<double>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) fail(key, "expected an array of numbers");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number()) fail(key, "element " + std::to_string(i) + " is not a number");
        out.push_back((*v)[i].get<double>());
      }
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(child(it.key().c_str()) + ": unknown field");
    }
  }

  [[noreturn]] void fail(const char* key, const std::string& what) const {
    throw ConfigError(child(key) + ": " + what);
  }

 private:
  const json* take(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string label() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::size_t line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  throw ConfigError(field + ": " + what);
}

// ---------------------------------------------------------------- helpers

std::string hex64(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

void fnv_mix(std::uint64_t& h, const std::string& bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read input file: " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path out_path(const ExperimentConfig& c, const std::string& name) {
  std::filesystem::create_directories(c.out_dir);
  return std::filesystem::path(c.out_dir) / name;
}

void write_report(const ExperimentConfig& c, const std::string& command, ojson results) {
  ojson report;
  report["command"] = command;
  report["config"] = ojson::parse(config_json(c));
  report["input_hash"] = content_hash(c);
  report["results"] = std::move(results);
  std::ofstream out(out_path(c, "report.json"));
  if (!out) throw std::runtime_error("cannot write report.json in " + c.out_dir);
  out << report.dump(2) << "\n";
}

std::string ratio_tag(double rho) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "rho%.4g", rho);
  return buf;
}

ModelParams params_of(const ExperimentConfig& c) { return ModelParams::critical(c.d, c.s, c.epsilon); }

RieszKernel kernel_for(const ExperimentConfig& c, GridPtr grid, double eps) {
  if (c.kernel_cache) return cached_kernel(*c.kernel_cache, std::move(grid), c.s, eps);
  return build_kernel(std::move(grid), c.s, eps);
}

SolverConfig solver_of(const ExperimentConfig& c, double t_end) {
  SolverConfig s;
  s.cfl = c.cfl;
  s.dt_min = c.dt_min;
  s.t_end = t_end;
  s.blowup_factor = c.blowup_factor;
  s.output_every = c.output_every;
  s.max_steps = c.max_steps;
  return s;
}

// R_support² / (m ‖u‖_∞^{m-1}): time for the nonlinear diffusion to cross the support.
double diffusive_time(const DensityField& u, double m) {
  const double umax = lp_norm(u, std::numeric_limits<double>::infinity());
  if (!(umax > 0.0)) return 1.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] > 1e-8 * umax) last = i;
  }
  const double R = u.grid().edges()[last + 1];
  return R * R / (m * std::pow(umax, m - 1.0));
}

struct Profile {
  DensityField U;
  std::optional<ExtremalResult> el;  // set when computed here
  double C_star = 0.0;               // J(U)
  double M_star = 0.0;               // critical mass used to normalize ratios
  double tau = 0.0;
};

Profile obtain_profile(const ExperimentConfig& c, const RieszKernel& kernel,
                       const ModelParams& params) {
  std::optional<ExtremalResult> el;
  DensityField U = [&] {
    if (c.profile) return read_field_csv(*c.profile, kernel.grid_ptr());
    ElOptions opt;
    opt.support_radius = c.support_radius;
    opt.tol = c.el_tol;
    opt.max_iter = c.el_max_iter;
    el = el_fixed_point(kernel, params, barenblatt_start(kernel.grid_ptr(), 1.0, c.support_radius),
                        opt);
    return el->U;
  }();
  Profile p{U, el};
  p.C_star = vhls_ratio(U, kernel, params);
  if (c.mass_basis == "closed_form") {
    p.C_star = vhls_constant_upper(c.d, c.s);
    p.M_star = critical_mass(c.d, c.s, p.C_star);
  } else {
    p.M_star = mass(U);
  }
  p.tau = diffusive_time(U, params.m);
  return p;
}

double sup_lm_power(const RunOutcome& out, double m) {
  double best = 0.0;
  for (const DiagnosticsRow& r : out.diagnostics) best = std::max(best, std::pow(r.lm_norm, m));
  return best;
}

}  // namespace

// ---------------------------------------------------------------- config

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("JSON syntax error at line " + std::to_string(line_of(text, e.byte)) +
                      ": " + e.what());
  }
  ExperimentConfig c;
  Section top(root, "");
  if (top.has("model")) {
    Section s(top.sub("model"), "model");
    s.read("d", c.d);
    s.read("s", c.s);
    s.read("epsilon", c.epsilon);
    s.finish();
  }
  if (top.has("grid")) {
    Section s(top.sub("grid"), "grid");
    s.read("N", c.N);
    s.read("R_max", c.R_max);
    s.finish();
  }
  if (top.has("solver")) {
    Section s(top.sub("solver"), "solver");
    s.read("cfl", c.cfl);
    s.read("dt_min", c.dt_min);
    s.read("t_end", c.t_end);
    s.read("t_end_tau", c.t_end_tau);
    s.read("blowup_factor", c.blowup_factor);
    s.read("output_every", c.output_every);
    s.read("max_steps", c.max_steps);
    s.finish();
  }
  if (top.has("experiment")) {
    Section s(top.sub("experiment"), "experiment");
    s.read("mass_ratios", c.mass_ratios);
    s.read("eps_list", c.eps_list);
    s.read("t_fix_tau", c.t_fix_tau);
    s.read("n_starts", c.n_starts);
    s.read("seed", c.seed, 0);
    s.read("support_radius", c.support_radius);
    s.read("el_tol", c.el_tol);
    s.read("el_max_iter", c.el_max_iter);
    s.read("mass_basis", c.mass_basis);
    s.read("profile", c.profile);
    s.read("kernel_cache", c.kernel_cache);
    s.read("n_random", c.n_random);
    s.read("hls_N", c.hls_N);
    s.read("hls_R_max", c.hls_R_max);
    s.read("corrupt_kernel", c.corrupt_kernel);
    s.read("tag", c.tag);
    if (s.has("tolerances")) {
      Section t(s.sub("tolerances"), s.child("tolerances"));
      t.read("hls", c.tol.hls);
      t.read("vhls", c.tol.vhls);
      t.read("identity", c.tol.identity);
      t.read("scaling", c.tol.scaling);
      t.read("symmetry", c.tol.symmetry);
      t.read("rearrange", c.tol.rearrange);
      t.finish();
    }
    if (s.has("initial")) {
      Section t(s.sub("initial"), s.child("initial"));
      t.read("kind", c.initial_kind);
      t.read("mass_ratio", c.initial_mass_ratio);
      t.read("mass", c.initial_mass);
      t.read("radius", c.initial_radius);
      t.read("path", c.initial_path);
      t.finish();
    }
    s.finish();
  }
  if (top.has("output")) {
    Section s(top.sub("output"), "output");
    s.read("directory", c.out_dir);
    if (s.has("formats")) {
      const json& f = s.sub("formats");
      if (!f.is_array()) s.fail("formats", "expected an array of strings");
      c.write_csv = false;
      for (const json& x : f) {
        if (!x.is_string()) s.fail("formats", "expected an array of strings");
        const std::string v = x.get<std::string>();
        if (v == "csv") {
          c.write_csv = true;
        } else if (v != "json") {
          s.fail("formats", "unknown format '" + v + "' (json, csv)");
        }
      }
    }
    s.finish();
  }
  top.finish();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return parse_config(s.str());
}

void validate_config(const ExperimentConfig& c) {
  if (std::isnan(c.s)) invalid("model.s", "required (set it in the config or with --s)");
  if (c.d < 3) invalid("model.d", "must be >= 3");
  if (!(2.0 < 2.0 * c.s && 2.0 * c.s < c.d)) invalid("model.s", "must satisfy 2 < 2s < d");
  if (!(c.d - 2.0 * c.s < c.d - 1.0)) invalid("model.s", "d - 2s must be below d - 1");
  if (!(c.epsilon >= 0.0) || !std::isfinite(c.epsilon)) invalid("model.epsilon", "must be >= 0");
  if (c.N < 4) invalid("grid.N", "must be >= 4");
  if (!(c.R_max > 0.0) || !std::isfinite(c.R_max)) invalid("grid.R_max", "must be > 0");
  if (!(c.cfl > 0.0 && c.cfl <= 1.0)) invalid("solver.cfl", "must lie in (0, 1]");
  if (!(c.dt_min > 0.0)) invalid("solver.dt_min", "must be > 0");
  if (c.t_end && !(*c.t_end > 0.0)) invalid("solver.t_end", "must be > 0");
  if (!(c.t_end_tau > 0.0)) invalid("solver.t_end_tau", "must be > 0");
  if (!(c.blowup_factor > 1.0)) invalid("solver.blowup_factor", "must be > 1");
  if (c.output_every < 1) invalid("solver.output_every", "must be >= 1");
  if (c.max_steps < 1) invalid("solver.max_steps", "must be >= 1");
  for (std::size_t i = 0; i < c.mass_ratios.size(); ++i) {
    if (!(c.mass_ratios[i] > 0.0)) {
      invalid("experiment.mass_ratios[" + std::to_string(i) + "]", "must be > 0");
    }
  }
  for (std::size_t i = 0; i < c.eps_list.size(); ++i) {
    if (!(c.eps_list[i] >= 0.0)) {
      invalid("experiment.eps_list[" + std::to_string(i) + "]", "must be >= 0");
    }
    if (i > 0 && c.eps_list[i] > c.eps_list[i - 1]) {
      invalid("experiment.eps_list[" + std::to_string(i) + "]", "list must be non-increasing");
    }
  }
  if (!(c.t_fix_tau > 0.0)) invalid("experiment.t_fix_tau", "must be > 0");
  if (c.n_starts < 1) invalid("experiment.n_starts", "must be >= 1");
  if (!(c.support_radius > 0.0 && c.support_radius < c.R_max)) {
    invalid("experiment.support_radius", "must lie in (0, grid.R_max)");
  }
  if (!(c.el_tol > 0.0)) invalid("experiment.el_tol", "must be > 0");
  if (c.el_max_iter < 1) invalid("experiment.el_max_iter", "must be >= 1");
  if (c.mass_basis != "measured" && c.mass_basis != "closed_form") {
    invalid("experiment.mass_basis", "must be \"measured\" or \"closed_form\"");
  }
  if (c.n_random < 1) invalid("experiment.n_random", "must be >= 1");
  if (c.hls_N < 4) invalid("experiment.hls_N", "must be >= 4");
  if (!(c.hls_R_max > 0.0)) invalid("experiment.hls_R_max", "must be > 0");
  const auto nonneg = [](double v) { return v >= 0.0 && std::isfinite(v); };
  if (!nonneg(c.tol.hls)) invalid("experiment.tolerances.hls", "must be >= 0");
  if (!nonneg(c.tol.vhls)) invalid("experiment.tolerances.vhls", "must be >= 0");
  if (!nonneg(c.tol.identity)) invalid("experiment.tolerances.identity", "must be >= 0");
  if (!nonneg(c.tol.scaling)) invalid("experiment.tolerances.scaling", "must be >= 0");
  if (!nonneg(c.tol.symmetry)) invalid("experiment.tolerances.symmetry", "must be >= 0");
  if (!nonneg(c.tol.rearrange)) invalid("experiment.tolerances.rearrange", "must be >= 0");
  if (c.initial_kind != "el_scaled" && c.initial_kind != "barenblatt" &&
      c.initial_kind != "file") {
    invalid("experiment.initial.kind", "must be el_scaled, barenblatt or file");
  }
  if (!(c.initial_mass_ratio > 0.0)) invalid("experiment.initial.mass_ratio", "must be > 0");
  if (!(c.initial_mass > 0.0)) invalid("experiment.initial.mass", "must be > 0");
  if (!(c.initial_radius > 0.0 && c.initial_radius < c.R_max)) {
    invalid("experiment.initial.radius", "must lie in (0, grid.R_max)");
  }
  if (c.initial_kind == "file" && !c.initial_path) {
    invalid("experiment.initial.path", "required when kind is file");
  }
  if (c.tag.empty() || c.tag.find_first_of("/\\") != std::string::npos) {
    invalid("experiment.tag", "must be a non-empty file-name fragment");
  }
  if (c.out_dir.empty()) invalid("output.directory", "must not be empty");
}

std::string config_json(const ExperimentConfig& c) {
  ojson j;
  j["model"] = {{"d", c.d}, {"s", c.s}, {"epsilon", c.epsilon}};
  j["grid"] = {{"N", c.N}, {"R_max", c.R_max}};
  ojson solver;
  solver["cfl"] = c.cfl;
  solver["dt_min"] = c.dt_min;
  solver["t_end"] = c.t_end ? ojson(*c.t_end) : ojson(nullptr);
  solver["t_end_tau"] = c.t_end_tau;
  solver["blowup_factor"] = c.blowup_factor;
  solver["output_every"] = c.output_every;
  solver["max_steps"] = c.max_steps;
  j["solver"] = solver;
  ojson e;
  e["mass_ratios"] = c.mass_ratios;
  e["eps_list"] = c.eps_list;
  e["t_fix_tau"] = c.t_fix_tau;
  e["n_starts"] = c.n_starts;
  e["seed"] = c.seed;
  e["support_radius"] = c.support_radius;
  e["el_tol"] = c.el_tol;
  e["el_max_iter"] = c.el_max_iter;
  e["mass_basis"] = c.mass_basis;
  e["profile"] = c.profile ? ojson(*c.profile) : ojson(nullptr);
  e["kernel_cache"] = c.kernel_cache ? ojson(*c.kernel_cache) : ojson(nullptr);
  e["n_random"] = c.n_random;
  e["hls_N"] = c.hls_N;
  e["hls_R_max"] = c.hls_R_max;
  e["corrupt_kernel"] = c.corrupt_kernel;
  e["tag"] = c.tag;
  ojson tol;
  tol["hls"] = c.tol.hls;
  tol["vhls"] = c.tol.vhls;
  tol["identity"] = c.tol.identity;
  tol["scaling"] = c.tol.scaling;
  tol["symmetry"] = c.tol.symmetry;
  tol["rearrange"] = c.tol.rearrange;
  e["tolerances"] = tol;
  ojson init;
  init["kind"] = c.initial_kind;
  init["mass_ratio"] = c.initial_mass_ratio;
  init["mass"] = c.initial_mass;
  init["radius"] = c.initial_radius;
  init["path"] = c.initial_path ? ojson(*c.initial_path) : ojson(nullptr);
  e["initial"] = init;
  j["experiment"] = e;
  ojson out;
  out["directory"] = c.out_dir;
  out["formats"] = c.write_csv ? ojson::array({"json", "csv"}) : ojson::array({"json"});
  j["output"] = out;
  return j.dump();
}

std::string content_hash(const ExperimentConfig& c) {
  std::uint64_t h = 1469598103934665603ULL;
  fnv_mix(h, config_json(c));
  if (c.profile) fnv_mix(h, read_file(*c.profile));
  if (c.initial_kind == "file" && c.initial_path) fnv_mix(h, read_file(*c.initial_path));
  return hex64(h);
}

// ---------------------------------------------------------------- commands

int cmd_constants(const ExperimentConfig& c, std::ostream& log) {
  const DerivedConstants k = derived_constants(c.d, c.s);
  ojson r;
  r["m"] = critical_exponent(c.d, c.s);
  r["c_ds"] = k.c_ds;
  r["C_hls"] = k.C_hls;
  r["C_star_upper"] = k.C_star_upper;
  r["M_star"] = k.M_star;
  log << std::setprecision(12) << "c_ds = " << k.c_ds << "\nC_hls = " << k.C_hls
      << "\nC_star_upper = " << k.C_star_upper << "\nM_star = " << k.M_star << "\n";
  int code = kOk;
  if (c.profile) {
    const DensityField U = read_field_csv(*c.profile, c.d);
    const ModelParams p = params_of(c);
    const RieszKernel kernel = kernel_for(c, U.grid_ptr(), c.epsilon);
    const double C_hat = vhls_ratio(U, kernel, p);
    const bool within = C_hat <= k.C_star_upper * (1.0 + c.tol.vhls);
    r["C_star_measured"] = C_hat;
    r["M_star_measured"] = critical_mass(c.d, c.s, C_hat);
    r["measured_within_upper"] = within;
    log << "C_star_measured = " << C_hat << "\nM_star_measured = " << critical_mass(c.d, c.s, C_hat)
        << "\n";
    if (!within) code = kVerifyFailed;
  }
  write_report(c, "constants", r);
  return code;
}

int cmd_extremal(const ExperimentConfig& c, std::ostream& log) {
  const ModelParams p = params_of(c);
  const GridPtr grid = make_uniform_grid(c.d, c.N, c.R_max);
  const RieszKernel kernel = kernel_for(c, grid, c.epsilon);
  ElOptions opt;
  opt.support_radius = c.support_radius;
  opt.tol = c.el_tol;
  opt.max_iter = c.el_max_iter;
  const ExtremalResult el =
      el_fixed_point(kernel, p, barenblatt_start(grid, 1.0, c.support_radius), opt);
  VhlsOptions vopt;
  vopt.n_starts = c.n_starts;
  vopt.seed = c.seed;
  const VhlsSearch search = maximize_vhls(kernel, p, vopt);

  if (c.write_csv) {
    write_field_csv(out_path(c, "profile_el.csv").string(), el.U);
    write_extremal_json(out_path(c, "profile_el.json").string(), el, el.M_star);
    write_field_csv(out_path(c, "profile_vhls.csv").string(), search.best.U);
  }
  ojson r;
  r["el"] = {{"iterations", el.iterations},         {"M_star", el.M_star},
             {"J_value", el.J_value},               {"lambda_bar", el.lambda_bar},
             {"lambda_bar_closed", el.lambda_bar_closed}, {"el_residual", el.el_residual},
             {"support_radius", el.support_radius}, {"tau", diffusive_time(el.U, p.m)}};
  r["vhls"] = {{"C_star_measured", search.best.J_value},
               {"M_star_measured", search.M_star_measured},
               {"start_J", search.start_J},
               {"best_start", search.best_start}};
  r["C_star_upper"] = vhls_constant_upper(c.d, c.s);
  r["M_star_closed_form"] = critical_mass(c.d, c.s, vhls_constant_upper(c.d, c.s));
  const double agree = std::abs(search.best.J_value - el.J_value) / el.J_value;
  r["relative_J_gap"] = agree;
  log << std::setprecision(10) << "EL: iterations " << el.iterations << ", M* " << el.M_star
      << ", J " << el.J_value << ", residual " << el.el_residual << "\n"
      << "VHLS search: best J " << search.best.J_value << " (gap " << agree << ")\n";
  write_report(c, "extremal", r);
  return kOk;
}

int cmd_simulate(const ExperimentConfig& c, std::ostream& log) {
  const ModelParams p = params_of(c);
  const GridPtr grid = make_uniform_grid(c.d, c.N, c.R_max);
  const RieszKernel kernel = kernel_for(c, grid, c.epsilon);
  std::optional<DensityField> u0;
  double tau = 0.0;
  if (c.initial_kind == "el_scaled") {
    const RieszKernel k0 = c.epsilon == 0.0 ? kernel : kernel_for(c, grid, 0.0);
    ModelParams p0 = p;
    p0.epsilon = 0.0;
    const Profile prof = obtain_profile(c, k0, p0);
    u0 = blowup_initial_data(prof.U, c.initial_mass_ratio * prof.M_star);
    tau = prof.tau;
  } else if (c.initial_kind == "barenblatt") {
    u0 = barenblatt_start(grid, c.initial_mass, c.initial_radius);
    tau = diffusive_time(*u0, p.m);
  } else {
    u0 = read_field_csv(*c.initial_path, grid);
    tau = diffusive_time(*u0, p.m);
  }
  const double t_end = c.t_end ? *c.t_end : c.t_end_tau * tau;
  const RunOutcome out = run(*u0, kernel, p, solver_of(c, t_end));
  if (c.write_csv) {
    write_diagnostics_csv(out_path(c, "diagnostics_" + c.tag + ".csv").string(), out.diagnostics);
    write_field_csv(out_path(c, "profile_" + c.tag + ".csv").string(), out.final_state->u);
  }
  const auto bound = blowup_time_upper_bound(*u0, kernel, p);
  ojson r;
  r["status"] = status_name(out.status);
  r["reason"] = out.reason;
  r["t_detect"] = out.status == RunStatus::Completed ? ojson(nullptr) : ojson(out.t_detect);
  r["t_end"] = t_end;
  r["tau"] = tau;
  r["steps"] = out.steps;
  r["mass0"] = mass(*u0);
  r["F0"] = free_energy(*u0, kernel, p);
  r["blowup_time_upper_bound"] = bound ? ojson(*bound) : ojson(nullptr);
  r["sup_lm_power"] = sup_lm_power(out, p.m);
  r["clipped_mass"] = out.clipped_mass;
  r["outer_mass_max"] = out.outer_mass_max;
  log << "status " << status_name(out.status) << " after " << out.steps << " steps, t = "
      << out.final_state->t << "\n";
  write_report(c, "simulate", r);
  return kOk;
}

int cmd_dichotomy(const ExperimentConfig& c, std::ostream& log) {
  const ModelParams p = params_of(c);
  const GridPtr grid = make_uniform_grid(c.d, c.N, c.R_max);
  const RieszKernel kernel = kernel_for(c, grid, c.epsilon);
  ojson table = ojson::array();
  if (!c.mass_ratios.empty()) {
    const Profile prof = obtain_profile(c, kernel, p);
    const double t_end = c.t_end ? *c.t_end : c.t_end_tau * prof.tau;
    const double coupling = p.coupling();
    const double e = 2.0 * c.s / c.d;
    std::vector<double> ratios = c.mass_ratios;
    std::sort(ratios.begin(), ratios.end());
    for (double rho : ratios) {
      const DensityField u0 = blowup_initial_data(prof.U, rho * prof.M_star);
      const double F0 = free_energy(u0, kernel, p);
      const double M = mass(u0);
      const RunOutcome out = run(u0, kernel, p, solver_of(c, t_end));
      ojson row;
      row["ratio"] = rho;
      row["F0"] = F0;
      row["status"] = status_name(out.status);
      row["reason"] = out.reason;
      row["t_detect"] = out.status == RunStatus::Completed ? ojson(nullptr) : ojson(out.t_detect);
      row["t_end"] = t_end;
      row["sup_lm_power"] = sup_lm_power(out, p.m);
      if (rho < 1.0) {
        const double ge1 = 2.0 * F0 / (prof.C_star * coupling *
                                       (std::pow(prof.M_star, e) - std::pow(M, e)));
        row["ge1_bound"] = ge1;
      } else {
        row["ge1_bound"] = nullptr;
      }
      const auto T = blowup_time_upper_bound(u0, kernel, p);
      row["blowup_time_upper_bound"] = T ? ojson(*T) : ojson(nullptr);
      if (F0 < 0.0) {
        const double m20 = second_moment(u0);
        double excess = -std::numeric_limits<double>::infinity();
        for (const DiagnosticsRow& d : out.diagnostics) {
          excess = std::max(excess, (d.m2 - (m20 + 2.0 * p.alpha * F0 * d.t)) / m20);
        }
        row["m2_below_chord"] = excess <= 1e-12;
        row["max_chord_excess"] = excess;
      } else {
        row["m2_below_chord"] = nullptr;
      }
      row["steps"] = out.steps;
      if (c.write_csv) {
        write_diagnostics_csv(out_path(c, "diagnostics_" + ratio_tag(rho) + ".csv").string(),
                              out.diagnostics);
      }
      log << "ratio " << rho << ": " << status_name(out.status) << " (F0 = " << F0 << ")\n";
      table.push_back(row);
    }
    ojson meta;
    meta["C_star"] = prof.C_star;
    meta["M_star"] = prof.M_star;
    meta["tau"] = prof.tau;
    write_report(c, "dichotomy", ojson{{"basis", meta}, {"table", table}});
    return kOk;
  }
  write_report(c, "dichotomy", ojson{{"table", table}});
  return kOk;
}

int cmd_eps_study(const ExperimentConfig& c, std::ostream& log) {
  const ModelParams p = params_of(c);
  const GridPtr grid = make_uniform_grid(c.d, c.N, c.R_max);
  ModelParams p0 = p;
  p0.epsilon = 0.0;
  const RieszKernel k0 = kernel_for(c, grid, 0.0);
  const Profile prof = obtain_profile(c, k0, p0);
  const DensityField u0 = blowup_initial_data(prof.U, c.initial_mass_ratio * prof.M_star);
  const double t_fix = c.t_fix_tau * prof.tau;
  const std::vector<double> dist = epsilon_convergence_study(
      u0, p0, c.eps_list, t_fix, solver_of(c, t_fix),
      [&](double eps) { return kernel_for(c, grid, eps); });
  bool decreasing = true;
  for (std::size_t k = 1; k < dist.size(); ++k) decreasing = decreasing && dist[k] < dist[k - 1];
  ojson r;
  r["eps_list"] = c.eps_list;
  r["t_fix"] = t_fix;
  r["l1_distances"] = dist;
  r["strictly_decreasing"] = decreasing;
  log << "L1 distances:";
  for (double x : dist) log << " " << x;
  log << (decreasing ? " (decreasing)\n" : " (NOT decreasing)\n");
  write_report(c, "eps-study", r);
  return decreasing ? kOk : kVerifyFailed;
}

int cmd_verify(const ExperimentConfig& c, std::ostream& log) {
  const ModelParams p = params_of(c);
  const DerivedConstants k = derived_constants(c.d, c.s);
  ojson checks = ojson::array();
  int failed = 0;
  auto check = [&](const std::string& name, bool ok, double value, double limit) {
    checks.push_back({{"name", name}, {"pass", ok}, {"value", value}, {"limit", limit}});
    log << (ok ? "PASS " : "FAIL ") << name << " value=" << value << " limit=" << limit << "\n";
    if (!ok) ++failed;
  };

  const GridPtr grid = make_uniform_grid(c.d, c.N, c.R_max);
  RieszKernel kernel = kernel_for(c, grid, c.epsilon);
  if (c.corrupt_kernel) {
    const std::size_t i = c.N / 3;
    const std::size_t j = c.N / 2;
    kernel = kernel.with_entry(i, j, kernel(i, j) * 1.01);
  }
  check("kernel_symmetry", kernel.max_asymmetry() <= c.tol.symmetry, kernel.max_asymmetry(),
        c.tol.symmetry);

  {  // HLS extremizer ratio
    const GridPtr g = make_uniform_grid(c.d, c.hls_N, c.hls_R_max);
    const RieszKernel kh = kernel_for(c, g, 0.0);
    const DensityField f = hls_extremizer_profile(g, 1.0, 1.0, c.s);
    const double q = 2.0 * c.d / (c.d + 2.0 * c.s);
    const double ratio = interaction_energy(kh, f) / std::pow(lp_norm(f, q), 2.0);
    const double gap = std::abs(ratio / k.C_hls - 1.0);
    check("hls_extremizer_ratio", gap <= c.tol.hls, gap, c.tol.hls);
  }

  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto random_field = [&] {
    std::vector<double> v(c.N, 0.0);
    const double R = (0.1 + 0.8 * unit(rng)) * c.R_max;
    const double sparsity = unit(rng);
    for (std::size_t i = 0; i < c.N; ++i) {
      if (grid->centers()[i] < R && unit(rng) > 0.5 * sparsity) v[i] = std::pow(unit(rng), 3.0);
    }
    v[0] += 1e-3;
    return DensityField(grid, v);
  };
  {
    double worst_J = 0.0;
    double worst_drop = 0.0;
    std::size_t violations = 0;
    for (std::size_t n = 0; n < c.n_random; ++n) {
      const DensityField u = random_field();
      worst_J = std::max(worst_J, vhls_ratio(u, kernel, p) / k.C_hls);
      const DensityField r = rearrange(u);
      const RieszKernel& kr = same_grid(r.grid(), *grid) ? kernel : kernel_for(c, r.grid_ptr(), c.epsilon);
      const double w0 = interaction_energy(kernel, u);
      const double w1 = interaction_energy(kr, r);
      const double drop = (w0 - w1) / w0;
      worst_drop = std::max(worst_drop, drop);
      if (drop > c.tol.rearrange) ++violations;
    }
    check("vhls_random_fields", worst_J <= 1.0 + c.tol.vhls, worst_J, 1.0 + c.tol.vhls);
    check("rearrangement_omega", violations == 0, worst_drop, c.tol.rearrange);
  }

  {  // identities on a short subcritical run from half the steady profile
    ModelParams p0 = p;
    p0.epsilon = 0.0;
    const RieszKernel k0 = c.epsilon == 0.0 ? kernel : kernel_for(c, grid, 0.0);
    const Profile prof = obtain_profile(c, k0, p0);
    const DensityField u0 = blowup_initial_data(prof.U, 0.5 * prof.M_star);
    SolverConfig sc = solver_of(c, 0.05 * prof.tau);
    sc.output_every = 1;
    const RunOutcome out = run(u0, k0, p0, sc);
    double e_energy = 0.0, e_virial = 0.0, drift = 0.0;
    const auto& R = out.diagnostics;
    for (std::size_t i = 0; i + 1 < R.size(); ++i) {
      if (!(R[i].dt > 0.0)) continue;
      e_energy = std::max(e_energy, std::abs((R[i + 1].F - R[i].F) / R[i].dt + R[i].D) / R[i].D);
      e_virial = std::max(e_virial, std::abs((R[i + 1].m2 - R[i].m2) / R[i].dt - R[i].virial_rhs) /
                                        std::abs(R[i].virial_rhs));
      drift = std::max(drift, std::abs(R[i + 1].mass - R[0].mass) / R[0].mass);
    }
    check("dissipation_identity", e_energy <= c.tol.identity, e_energy, c.tol.identity);
    check("virial_identity", e_virial <= c.tol.identity, e_virial, c.tol.identity);
    check("mass_conservation", drift <= 1e-10, drift, 1e-10);

    const double J_U = vhls_ratio(prof.U, k0, p0);
    double worst = 0.0;
    for (double lam : {0.5, 2.0}) {
      for (double mu : {0.5, 2.0}) {
        const DensityField v = scale(prof.U, lam, mu);
        const RieszKernel kv = kernel_for(c, v.grid_ptr(), 0.0);
        worst = std::max(worst, std::abs(vhls_ratio(v, kv, p0) / J_U - 1.0));
      }
    }
    check("j_scaling_invariance", worst <= c.tol.scaling, worst, c.tol.scaling);
  }

  {  // ε-monotonicity of kernels: larger ε gives pointwise smaller entries
    const GridPtr g = make_uniform_grid(c.d, std::min<std::size_t>(c.N, 128), c.R_max);
    std::vector<double> eps = c.eps_list;
    eps.push_back(0.0);
    std::sort(eps.begin(), eps.end());
    eps.erase(std::unique(eps.begin(), eps.end()), eps.end());
    std::size_t violations = 0;
    std::optional<RieszKernel> prev;
    for (auto it = eps.rbegin(); it != eps.rend(); ++it) {
      RieszKernel cur = kernel_for(c, g, *it);
      if (prev) {
        for (std::size_t i = 0; i < cur.entries().size(); ++i) {
          if (prev->entries()[i] > cur.entries()[i]) ++violations;
        }
      }
      prev = std::move(cur);
    }
    check("kernel_epsilon_monotone", violations == 0, static_cast<double>(violations), 0.0);
  }

  ojson r;
  r["checks"] = checks;
  r["failed"] = failed;
  write_report(c, "verify", r);
  log << failed << " check(s) failed\n";
  return failed == 0 ? kOk : kVerifyFailed;
}

int run_command(const std::string& name, const ExperimentConfig& config, std::ostream& log,
                std::ostream& err) {
  try {
    validate_config(config);
    if (name == "constants") return cmd_constants(config, log);
    if (name == "simulate") return cmd_simulate(config, log);
    if (name == "dichotomy") return cmd_dichotomy(config, log);
    if (name == "extremal") return cmd_extremal(config, log);
    if (name == "verify") return cmd_verify(config, log);
    if (name == "eps-study") return cmd_eps_study(config, log);
    err << "unknown command: " << name << "\n";
    return kConfigError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ParameterError& e) {
    err << "parameter error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

}  // namespace fks
