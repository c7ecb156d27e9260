#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fks/energy.hpp"
#include "fks/field.hpp"
#include "fks/model.hpp"
#include "fks/riesz.hpp"

namespace fks {

struct SolverConfig {
  double cfl = 0.4;
  double dt_min = 1e-14;
  double dt_max = std::numeric_limits<double>::infinity();
  double t_end = 1.0;
  double blowup_factor = 100.0;  ///< L^∞ growth relative to u0 that counts as blow-up
  std::size_t output_every = 100;
  std::size_t max_steps = 50'000'000;
  bool keep_snapshots = false;  ///< store u alongside every diagnostics row

  void validate() const;
};

struct SolverState {
  double t = 0.0;
  DensityField u;
  std::size_t step_count = 0;
  double dt_last = 0.0;
};

struct DiagnosticsRow {
  double t = 0.0;
  double mass = 0.0;
  double lm_norm = 0.0;
  double linf_norm = 0.0;
  double m2 = 0.0;
  double F = 0.0;
  double S = 0.0;
  double W = 0.0;
  double D = 0.0;
  double virial_rhs = 0.0;
  double dt = 0.0;  ///< step taken from this state (0 on the final row)
};

enum class RunStatus { Completed, BlowUp, Stalled };
const char* status_name(RunStatus status);

struct RunOutcome {
  RunStatus status = RunStatus::Completed;
  double t_detect = std::numeric_limits<double>::quiet_NaN();
  std::string reason;
  std::vector<DiagnosticsRow> diagnostics;
  std::vector<DensityField> snapshots;  ///< parallel to diagnostics when kept
  double clipped_mass = 0.0;            ///< total mass removed by clipping negatives
  double outer_mass_max = 0.0;          ///< max mass seen in the outermost 5% of cells
  std::size_t steps = 0;
  std::optional<SolverState> final_state;
};

/// Per-step by-products, describing the state before the step.
struct StepInfo {
  double dt = 0.0;         ///< step actually taken
  double dt_stable = 0.0;  ///< stability limit before capping
  double clipped = 0.0;
  DiagnosticsRow row;  ///< diagnostics of the pre-step state (dt filled in)
};

/// Largest stable step for face velocities w:
///   cfl · min( Δr/|w|, Δr²/(2 max m u^{m-1} + 2ε), min_i v_i / outflow_i ),
/// the last term keeping every cell non-negative under the flux update
/// (outflow_i bounds the rate at which cell i can lose density).
double stable_dt(const DensityField& u, std::span<const double> w, const ModelParams& params,
                 const SolverConfig& config);

/// One explicit finite-volume step of u_t = ∇·(u∇μ) + εΔu with zero flux at
/// both ends; the mobility at each face is face_density(). The step is min(stable_dt, dt_max, dt_cap); if the
/// stable step is below dt_min the state is returned unchanged with
/// dt_last set to that step.
SolverState step(const SolverState& state, const RieszKernel& kernel, const ModelParams& params,
                 const SolverConfig& config,
                 double dt_cap = std::numeric_limits<double>::infinity(),
                 StepInfo* info = nullptr);

/// Diagnostics of a state (dt left 0).
DiagnosticsRow diagnose(const DensityField& u, double t, const RieszKernel& kernel,
                        const ModelParams& params);

/// Integrates to t_end, recording a row every output_every steps and at the
/// start and end. Stops early on blow-up (L^∞ trigger) or stall (dt below
/// dt_min, or max_steps reached).
RunOutcome run(const DensityField& u0, const RieszKernel& kernel, const ModelParams& params,
               const SolverConfig& config);

/// Exact d/dt of the discrete second moment Σ u_i <|x|²>_i v_i under the
/// semi-discrete flux (the quantity the virial identity approximates).
double second_moment_rate(const DensityField& u, const RieszKernel& kernel,
                          const ModelParams& params);

struct BlowupCheck {
  bool triggered = false;
  std::string reason;  ///< "linf" or "dt_collapse"
};

BlowupCheck detect_blowup(const SolverState& state, double u0_linf, const SolverConfig& config);

/// m2(u0) / (2(d-2s)|F(u0)|) when F(u0) < 0, nullopt otherwise.
std::optional<double> blowup_time_upper_bound(const DensityField& u0, const RieszKernel& kernel,
                                              const ModelParams& params);

/// Radial test function ψ with support in [0, support].
struct TestFunction {
  std::function<double(double)> value;
  double support = 0.0;
};

/// 1 on [0, r0], C^∞ decay to 0 at r1.
TestFunction plateau_test(double r0, double r1);
/// exp(1 - 1/(1 - (r/R)²)) on [0, R).
TestFunction bump_test(double R);
/// r² on [0, r0], smoothly cut off to 0 at r1.
TestFunction truncated_r2_test(double r0, double r1);

/// Gap between the two sides of the weak formulation over [t_0, t_n]:
///   |∫ψu(t_n) - ∫ψu(t_0) - ∫ [∫Δψ u^m + ε∫Δψ u
///        + (c/2)∬ (ψ'(r)∂_rK(r,ρ) + ψ'(ρ)∂_ρK(ρ,r)) u(x)u(y) ] dt|,
/// with K the angular kernel and the time integral by the trapezoid rule.
/// The symmetrized interaction equals -(cα/2)∬(∇ψ(x)-∇ψ(y))·(x-y)|x-y|^{-α-2}u u.
double weak_form_residual(std::span<const double> times, std::span<const DensityField> states,
                          const TestFunction& psi, const RieszKernel& kernel,
                          const ModelParams& params);

using KernelFactory = std::function<RieszKernel(double epsilon)>;

/// Runs the regularized problem for each ε to t_fix and returns the L¹
/// distances between consecutive final states. Throws std::runtime_error if
/// any run fails to reach t_fix.
std::vector<double> epsilon_convergence_study(const DensityField& u0, const ModelParams& params,
                                              std::span<const double> eps_list, double t_fix,
                                              const SolverConfig& config,
                                              const KernelFactory& make_kernel = {});

double l1_distance(const DensityField& a, const DensityField& b);

void write_diagnostics_csv(std::ostream& out, std::span<const DiagnosticsRow> rows);
void write_diagnostics_csv(const std::string& path, std::span<const DiagnosticsRow> rows);

}  // namespace fks
