#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fks/field.hpp"
#include "fks/model.hpp"
#include "fks/riesz.hpp"

namespace fks {

/// Raised when the Euler-Lagrange iteration exhausts max_iter.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_change, std::size_t iterations)
      : std::runtime_error(what), last_change(last_change), iterations(iterations) {}
  double last_change;
  std::size_t iterations;
};

enum class ElPin {
  /// Fix the support radius and let the mass float; the self-consistent
  /// scale then yields the discrete critical mass.
  Support,
  /// Fix the mass each sweep by a scalar solve for λ̄.
  Mass,
};

struct ElOptions {
  ElPin pin = ElPin::Support;
  double support_radius = 1.0;         ///< pin radius for ElPin::Support
  std::optional<double> mass_target;   ///< required for ElPin::Mass
  double damping = 0.5;                ///< U ← (1-θ)U + θ·candidate
  double tol = 1e-12;                  ///< relative L¹ change per sweep
  std::size_t max_iter = 500;
  double support_threshold = 1e-8;     ///< support = {U > threshold · max U}
};

struct ExtremalResult {
  DensityField U;
  double lambda_bar = 0.0;         ///< mass-weighted mean of μ over supp U (the EL multiplier)
  double lambda_bar_closed = 0.0;  ///< (1/M)(2s/(2s-d)) ‖U‖_m^m with M = mass(U)
  double J_value = 0.0;
  double el_residual = 0.0;
  double support_radius = 0.0;  ///< outer edge of the last support cell
  std::size_t iterations = 0;
  double M_star = 0.0;  ///< mass(U)
  double last_change = 0.0;
};

/// Truncated parabola (1 - (r/R)²)₊ scaled to the given mass.
DensityField barenblatt_start(GridPtr grid, double mass_value, double radius);

/// Euler-Lagrange fixed point (m/(m-1))U^{m-1} = φ_U + λ̄ on supp U with
/// damping. With ElPin::Support the iteration runs on the unit-coupling
/// shape and the amplitude is fixed afterwards from the exact critical
/// scaling, so mass(U) is the discrete critical mass. init may be any
/// non-zero field on the kernel grid (only its shape matters).
ExtremalResult el_fixed_point(const RieszKernel& kernel, const ModelParams& params,
                              const DensityField& init, const ElOptions& options = {});

/// sup over supp U of |μ - λ̄| / |λ̄| with λ̄ the mass-weighted mean of μ.
/// Throws ParameterError when U has empty support.
double el_residual(const DensityField& U, const RieszKernel& kernel, const ModelParams& params,
                   double support_threshold = 1e-8);

/// Mass-weighted mean of the chemical potential over supp U.
double el_multiplier(const DensityField& U, const RieszKernel& kernel, const ModelParams& params,
                     double support_threshold = 1e-8);

struct VhlsOptions {
  std::size_t n_starts = 10;
  std::uint64_t seed = 12345;
  std::size_t max_iter = 3000;
  double rel_tol = 1e-10;  ///< stop after patience iterations gaining less than this
  std::size_t patience = 50;
};

struct VhlsSearch {
  ExtremalResult best;                       ///< U normalized to unit mass
  std::vector<double> start_J;               ///< final J of every start
  std::vector<std::vector<double>> history;  ///< accepted J values per start
  std::size_t best_start = 0;
  double M_star_measured = 0.0;  ///< critical mass implied by the best J
};

/// Random-start projected ascent of J: each start is normalized and
/// rearranged, then moved along the L² gradient of log J, clipped at 0 and
/// rearranged again; only improving steps are accepted.
VhlsSearch maximize_vhls(const RieszKernel& kernel, const ModelParams& params,
                         const VhlsOptions& options = {});

/// (M / mass(U)) · U.
DensityField blowup_initial_data(const DensityField& U, double M);

/// Profile sidecar: J_value, lambda_bar, residual, M_target and friends.
void write_extremal_json(const std::string& path, const ExtremalResult& result,
                         double M_target);

}  // namespace fks
