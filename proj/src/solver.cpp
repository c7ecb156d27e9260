#include "fks/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "fks/simd.hpp"

namespace fks {

void SolverConfig::validate() const {
  if (!(cfl > 0.0 && cfl <= 1.0)) throw ParameterError("solver: cfl must lie in (0, 1]");
  if (!(dt_min > 0.0)) throw ParameterError("solver: dt_min must be > 0");
  if (!(dt_max > 0.0)) throw ParameterError("solver: dt_max must be > 0");
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ParameterError("solver: t_end must be > 0");
  if (!(blowup_factor > 1.0)) throw ParameterError("solver: blowup_factor must be > 1");
  if (output_every == 0) throw ParameterError("solver: output_every must be >= 1");
}

const char* status_name(RunStatus status) {
  switch (status) {
    case RunStatus::Completed: return "Completed";
    case RunStatus::BlowUp: return "BlowUp";
    case RunStatus::Stalled: return "Stalled";
  }
  return "?";
}

namespace {

double stable_dt_impl(const DensityField& u, std::span<const double> w, double max_diffusivity,
                      const ModelParams& params, const SolverConfig& config) {
  const RadialGrid& g = u.grid();
  const std::size_t n = u.size();
  const auto edges = g.edges();
  const auto area = g.face_areas();
  const auto inv = g.inv_center_spacing();
  const auto vol = g.volumes();
  const double eps = params.epsilon;
  constexpr double inf = std::numeric_limits<double>::infinity();

  double advect = inf;
  for (std::size_t k = 1; k < n; ++k) {
    if (w[k] != 0.0) advect = std::min(advect, 1.0 / (inv[k] * std::abs(w[k])));
  }
  double hmin = inf;
  for (std::size_t i = 0; i < n; ++i) hmin = std::min(hmin, edges[i + 1] - edges[i]);
  const double denom = 2.0 * max_diffusivity + 2.0 * eps;
  const double diffuse = denom > 0.0 ? hmin * hmin / denom : inf;

  double guard = inf;
  for (std::size_t i = 0; i < n; ++i) {
    // A donor cell exports at most twice its own density per unit velocity.
    const double out = area[i + 1] * (2.0 * std::max(w[i + 1], 0.0) + eps * inv[i + 1]) +
                       area[i] * (2.0 * std::max(-w[i], 0.0) + eps * inv[i]);
    if (out > 0.0) guard = std::min(guard, vol[i] / out);
  }
  return config.cfl * std::min({advect, diffuse, guard});
}

}  // namespace

double stable_dt(const DensityField& u, std::span<const double> w, const ModelParams& params,
                 const SolverConfig& config) {
  double dmax = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] > 0.0) dmax = std::max(dmax, params.m * std::pow(u[i], params.m - 1.0));
  }
  return stable_dt_impl(u, w, dmax, params, config);
}

namespace {

struct Workspace {
  std::vector<double> phi, mu, w, flux;
  double max_diffusivity = 0.0;  // max m u^{m-1}
};

// Fills phi, mu, w and the diagnostics row of u.
DiagnosticsRow evaluate(const DensityField& u, double t, const RieszKernel& kernel,
                        const ModelParams& params, Workspace& ws) {
  const RadialGrid& g = u.grid();
  const std::size_t n = u.size();
  const auto vol = g.volumes();
  const auto r2 = g.r2_means();
  ws.phi = potential(kernel, u, params.coupling());
  ws.mu.assign(n, 0.0);
  ws.w.assign(n + 1, 0.0);
  const double pref = params.m / (params.m - 1.0);

  DiagnosticsRow row;
  row.t = t;
  double lm = 0.0, omega_c = 0.0, pmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = u[i] > 0.0 ? std::pow(u[i], params.m - 1.0) : 0.0;
    pmax = std::max(pmax, p);
    ws.mu[i] = pref * p - ws.phi[i];
    row.mass += u[i] * vol[i];
    row.m2 += u[i] * r2[i] * vol[i];
    row.linf_norm = std::max(row.linf_norm, u[i]);
    lm += u[i] * p * vol[i];
    omega_c += ws.phi[i] * u[i] * vol[i];
  }
  ws.max_diffusivity = params.m * pmax;
  simd::face_velocity(ws.mu, g.inv_center_spacing(), ws.w);
  row.lm_norm = lm > 0.0 ? std::pow(lm, 1.0 / params.m) : 0.0;
  row.S = lm / (params.m - 1.0);
  row.W = 0.5 * omega_c;
  row.F = row.S - row.W;
  row.D = dissipation(u, ws.mu);
  row.virial_rhs = 2.0 * params.alpha * row.F;
  return row;
}

SolverState advance(const SolverState& state, const RieszKernel& kernel,
                    const ModelParams& params, const SolverConfig& config, double dt_cap,
                    StepInfo* info, Workspace& ws) {
  require_same_grid(kernel.grid(), state.u.grid(), "step");
  const RadialGrid& g = state.u.grid();
  const std::size_t n = state.u.size();
  DiagnosticsRow row = evaluate(state.u, state.t, kernel, params, ws);
  const double dt_stable = stable_dt_impl(state.u, ws.w, ws.max_diffusivity, params, config);

  SolverState next = state;
  if (dt_stable < config.dt_min) {
    next.dt_last = dt_stable;
    if (info) *info = StepInfo{0.0, dt_stable, 0.0, row};
    return next;
  }
  const double dt = std::min({dt_stable, config.dt_max, dt_cap});

  ws.flux.assign(n + 1, 0.0);
  simd::upwind_flux(state.u.values(), ws.w, g.face_areas(), g.inv_center_spacing(),
                    params.epsilon, ws.flux);
  const auto vol = g.volumes();
  std::vector<double> u(n);
  double clipped = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double v = state.u[i] + dt * (ws.flux[i] - ws.flux[i + 1]) / vol[i];
    if (v < 0.0) {
      clipped -= v * vol[i];
      v = 0.0;
    }
    u[i] = v;
  }
  next.u = DensityField(state.u.grid_ptr(), std::move(u));
  next.t = state.t + dt;
  next.step_count = state.step_count + 1;
  next.dt_last = dt;
  if (info) {
    row.dt = dt;
    *info = StepInfo{dt, dt_stable, clipped, row};
  }
  return next;
}

double outer_mass(const DensityField& u) {
  const std::size_t n = u.size();
  const std::size_t first = n - std::max<std::size_t>(1, (n + 19) / 20);
  const auto vol = u.grid().volumes();
  double acc = 0.0;
  for (std::size_t i = first; i < n; ++i) acc += u[i] * vol[i];
  return acc;
}

}  // namespace

SolverState step(const SolverState& state, const RieszKernel& kernel, const ModelParams& params,
                 const SolverConfig& config, double dt_cap, StepInfo* info) {
  Workspace ws;
  return advance(state, kernel, params, config, dt_cap, info, ws);
}

DiagnosticsRow diagnose(const DensityField& u, double t, const RieszKernel& kernel,
                        const ModelParams& params) {
  Workspace ws;
  return evaluate(u, t, kernel, params, ws);
}

double second_moment_rate(const DensityField& u, const RieszKernel& kernel,
                          const ModelParams& params) {
  Workspace ws;
  evaluate(u, 0.0, kernel, params, ws);
  const RadialGrid& g = u.grid();
  std::vector<double> flux(u.size() + 1);
  simd::upwind_flux(u.values(), ws.w, g.face_areas(), g.inv_center_spacing(), params.epsilon,
                    flux);
  const auto r2 = g.r2_means();
  double acc = 0.0;
  for (std::size_t k = 1; k < u.size(); ++k) acc += flux[k] * (r2[k] - r2[k - 1]);
  return acc;
}

BlowupCheck detect_blowup(const SolverState& state, double u0_linf, const SolverConfig& config) {
  BlowupCheck check;
  const double linf = lp_norm(state.u, std::numeric_limits<double>::infinity());
  if (!std::isfinite(linf) || linf > config.blowup_factor * u0_linf) {
    check.triggered = true;
    check.reason = "linf";
  } else if (state.step_count > 0 && state.dt_last < config.dt_min) {
    check.triggered = true;
    check.reason = "dt_collapse";
  }
  return check;
}

RunOutcome run(const DensityField& u0, const RieszKernel& kernel, const ModelParams& params,
               const SolverConfig& config) {
  config.validate();
  require_same_grid(kernel.grid(), u0.grid(), "run");
  RunOutcome out;
  const double u0_linf = lp_norm(u0, std::numeric_limits<double>::infinity());
  SolverState state{0.0, u0, 0, 0.0};
  Workspace ws;
  StepInfo info;
  out.outer_mass_max = outer_mass(u0);

  auto record = [&](const DiagnosticsRow& row, const DensityField& u) {
    out.diagnostics.push_back(row);
    if (config.keep_snapshots) out.snapshots.push_back(u);
  };
  auto finish = [&](RunStatus status, const std::string& reason) {
    DiagnosticsRow last = evaluate(state.u, state.t, kernel, params, ws);
    if (out.diagnostics.empty() || out.diagnostics.back().t != state.t) record(last, state.u);
    out.status = status;
    out.reason = reason;
    if (status != RunStatus::Completed) out.t_detect = state.t;
    out.steps = state.step_count;
    out.final_state = state;
  };

  // Half an ulp of slack so the last capped step lands on t_end.
  const double t_stop = config.t_end * (1.0 - 4.0 * std::numeric_limits<double>::epsilon());
  while (state.t < t_stop) {
    if (state.step_count >= config.max_steps) {
      finish(RunStatus::Stalled, "max_steps");
      return out;
    }
    const bool emit = state.step_count % config.output_every == 0;
    SolverState next =
        advance(state, kernel, params, config, config.t_end - state.t, &info, ws);
    if (next.dt_last < config.dt_min && info.dt == 0.0) {
      if (emit) record(info.row, state.u);
      state = next;
      finish(RunStatus::Stalled, "dt_collapse");
      return out;
    }
    if (emit) record(info.row, state.u);
    out.clipped_mass += info.clipped;
    state = std::move(next);
    out.outer_mass_max = std::max(out.outer_mass_max, outer_mass(state.u));
    const BlowupCheck check = detect_blowup(state, u0_linf, config);
    if (check.triggered) {
      finish(check.reason == "linf" ? RunStatus::BlowUp : RunStatus::Stalled, check.reason);
      return out;
    }
  }
  finish(RunStatus::Completed, "t_end");
  return out;
}

std::optional<double> blowup_time_upper_bound(const DensityField& u0, const RieszKernel& kernel,
                                              const ModelParams& params) {
  const double F = free_energy(u0, kernel, params);
  if (!(F < 0.0)) return std::nullopt;
  return second_moment(u0) / (2.0 * params.alpha * std::abs(F));
}

namespace {

// e^{-1/x} for x > 0, 0 otherwise.
double smooth_step_part(double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; }

// 1 for t <= 0, 0 for t >= 1, C^∞ in between.
double smooth_cutoff(double t) {
  const double a = smooth_step_part(1.0 - t);
  const double b = smooth_step_part(t);
  return a / (a + b);
}

}  // namespace

TestFunction plateau_test(double r0, double r1) {
  if (!(0.0 < r0 && r0 < r1)) throw ParameterError("plateau_test: need 0 < r0 < r1");
  return {[=](double r) { return smooth_cutoff((r - r0) / (r1 - r0)); }, r1};
}

TestFunction bump_test(double R) {
  if (!(R > 0.0)) throw ParameterError("bump_test: need R > 0");
  return {[=](double r) {
            const double x = r / R;
            return x < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - x * x)) : 0.0;
          },
          R};
}

TestFunction truncated_r2_test(double r0, double r1) {
  TestFunction p = plateau_test(r0, r1);
  auto cut = p.value;
  return {[=](double r) { return r * r * cut(r); }, r1};
}

namespace {

struct Derivs {
  double d1, d2;
};

Derivs derivatives(const TestFunction& psi, double r) {
  const double h = 1e-4 * psi.support;
  if (r < 2.0 * h) {
    // Even extension across the origin.
    auto f = [&](double x) { return psi.value(std::abs(x)); };
    const double d1 = (f(r - 2 * h) - 8 * f(r - h) + 8 * f(r + h) - f(r + 2 * h)) / (12 * h);
    const double d2 =
        (-f(r - 2 * h) + 16 * f(r - h) - 30 * f(r) + 16 * f(r + h) - f(r + 2 * h)) / (12 * h * h);
    return {d1, d2};
  }
  const auto& f = psi.value;
  const double d1 = (f(r - 2 * h) - 8 * f(r - h) + 8 * f(r + h) - f(r + 2 * h)) / (12 * h);
  const double d2 =
      (-f(r - 2 * h) + 16 * f(r - h) - 30 * f(r) + 16 * f(r + h) - f(r + 2 * h)) / (12 * h * h);
  return {d1, d2};
}

}  // namespace

double weak_form_residual(std::span<const double> times, std::span<const DensityField> states,
                          const TestFunction& psi, const RieszKernel& kernel,
                          const ModelParams& params) {
  if (times.size() != states.size() || times.empty()) {
    throw ParameterError("weak_form_residual: need matching, non-empty times and states");
  }
  const RadialGrid& g = kernel.grid();
  if (psi.support > g.r_max() * (1.0 + 1e-12)) {
    throw ParameterError("weak_form_residual: test function support exceeds the grid");
  }
  const std::size_t n = g.size();
  const int d = g.dim();
  const auto c = g.centers();
  const auto vol = g.volumes();
  std::vector<double> val(n), d1(n), lap(n);
  for (std::size_t i = 0; i < n; ++i) {
    val[i] = psi.value(c[i]);
    const Derivs dv = derivatives(psi, c[i]);
    d1[i] = dv.d1;
    lap[i] = dv.d2 + (d - 1) * dv.d1 / c[i];
  }
  // Kr[i][j] = ∂_r K(r_i, r_j); symmetrized weight S_ij = ψ'_i Kr_ij + ψ'_j Kr_ji.
  std::vector<double> sym(n * n);
  {
    std::vector<double> kr(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        kr[i * n + j] = kernel_point_dr(d, kernel.s(), kernel.epsilon(), c[i], c[j]);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        sym[i * n + j] = d1[i] * kr[i * n + j] + d1[j] * kr[j * n + i];
      }
    }
  }
  // u_j v_j already carries the sphere of y that kernel_point integrates over.
  const double coupling = params.coupling() / unit_sphere_area(d);
  auto rate = [&](const DensityField& u) {
    require_same_grid(g, u.grid(), "weak_form_residual");
    std::vector<double> x(n);
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = u[i] * vol[i];
      if (u[i] > 0.0) diff += lap[i] * (std::pow(u[i], params.m) + params.epsilon * u[i]) * vol[i];
    }
    return diff + 0.5 * coupling * simd::quadratic_form(sym, x);
  };
  auto pairing = [&](const DensityField& u) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += val[i] * u[i] * vol[i];
    return acc;
  };

  double integral = 0.0;
  double prev = rate(states[0]);
  for (std::size_t k = 1; k < states.size(); ++k) {
    const double cur = rate(states[k]);
    integral += 0.5 * (times[k] - times[k - 1]) * (prev + cur);
    prev = cur;
  }
  return std::abs(pairing(states.back()) - pairing(states.front()) - integral);
}

double l1_distance(const DensityField& a, const DensityField& b) {
  if (!same_grid(a.grid(), b.grid())) throw GridMismatch("l1_distance: grids differ");
  const auto vol = a.grid().volumes();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]) * vol[i];
  return acc;
}

std::vector<double> epsilon_convergence_study(const DensityField& u0, const ModelParams& params,
                                              std::span<const double> eps_list, double t_fix,
                                              const SolverConfig& config,
                                              const KernelFactory& make_kernel) {
  for (std::size_t k = 1; k < eps_list.size(); ++k) {
    if (eps_list[k] > eps_list[k - 1]) {
      throw ParameterError("epsilon_convergence_study: eps_list must be non-increasing");
    }
  }
  if (eps_list.size() < 2) return {};
  std::vector<DensityField> finals;
  for (double eps : eps_list) {
    ModelParams p = params;
    p.epsilon = eps;
    const RieszKernel kernel =
        make_kernel ? make_kernel(eps) : build_kernel(u0.grid_ptr(), params.s, eps);
    SolverConfig cfg = config;
    cfg.t_end = t_fix;
    const RunOutcome out = run(u0, kernel, p, cfg);
    if (out.status != RunStatus::Completed) {
      throw std::runtime_error("epsilon_convergence_study: run with eps=" + std::to_string(eps) +
                               " ended early (" + out.reason + ")");
    }
    finals.push_back(out.final_state->u);
  }
  std::vector<double> dist;
  for (std::size_t k = 1; k < finals.size(); ++k) dist.push_back(l1_distance(finals[k - 1], finals[k]));
  return dist;
}

void write_diagnostics_csv(std::ostream& out, std::span<const DiagnosticsRow> rows) {
  out << "t,mass,lm_norm,linf_norm,m2,F,S,W,D,virial_rhs,dt\n";
  char buf[512];
  for (const DiagnosticsRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.t, r.mass, r.lm_norm, r.linf_norm, r.m2, r.F, r.S, r.W, r.D, r.virial_rhs,
                  r.dt);
    out << buf;
  }
}

void write_diagnostics_csv(const std::string& path, std::span<const DiagnosticsRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_diagnostics_csv(out, rows);
}

}  // namespace fks
