#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fks/field.hpp"

namespace fks {

class GridMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense symmetric matrix realizing the (regularized) Riesz interaction on a
/// radial grid: K_ij is the average of (|x-y|^2 + ε^2)^{-(d-2s)/2} over
/// x in shell i and y in shell j. With that normalization
///   φ_i = c Σ_j K_ij u_j v_j   and   ω(u) = Σ_ij u_i v_i K_ij u_j v_j
/// are exact for piecewise-constant densities.
class RieszKernel {
 public:
  /// Wraps precomputed entries (row-major N×N). Symmetry is not enforced here;
  /// see max_asymmetry().
  RieszKernel(GridPtr grid, double s, double epsilon, std::vector<double> entries);

  const RadialGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::size_t size() const { return grid_->size(); }
  double s() const { return s_; }
  double epsilon() const { return epsilon_; }
  double alpha() const { return grid_->dim() - 2.0 * s_; }

  double operator()(std::size_t i, std::size_t j) const { return entries_[i * size() + j]; }
  std::span<const double> entries() const { return entries_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(entries_).subspan(i * size(), size());
  }

  /// max_ij |K_ij - K_ji| / max_ij |K_ij|.
  double max_asymmetry() const;

  /// Copy with one entry overwritten (fault injection in verification runs).
  RieszKernel with_entry(std::size_t i, std::size_t j, double value) const;

 private:
  GridPtr grid_;
  double s_;
  double epsilon_;
  std::vector<double> entries_;
};

enum class KernelMethod {
  Auto,        ///< closed form for d = 3, ε = 0; quadrature otherwise
  ClosedForm,  ///< exact cell-pair integrals (d = 3, ε = 0 only)
  Quadrature,  ///< composite Gauss-Legendre over cell pairs of the angular kernel
};

/// Angular reduction ∫_{S^{d-1}} (|r e - ρ θ|^2 + ε^2)^{-α/2} dθ, α = d - 2s.
/// Closed form for d = 3:
///   2π/(rρ(2-α)) [((r+ρ)^2+ε^2)^{(2-α)/2} - ((r-ρ)^2+ε^2)^{(2-α)/2}];
/// tanh-sinh quadrature over the polar angle otherwise.
double kernel_point(int d, double s, double epsilon, double r, double rho);

/// ∂/∂r of kernel_point.
double kernel_point_dr(int d, double s, double epsilon, double r, double rho);

/// Throws ParameterError if α >= d - 1 (angular reduction not integrable at
/// r = ρ) or ε < 0.
RieszKernel build_kernel(GridPtr grid, double s, double epsilon,
                         KernelMethod method = KernelMethod::Auto);

/// Cell-averaged potential φ_i = c Σ_j K_ij u_j v_j.
std::vector<double> potential(const RieszKernel& kernel, const DensityField& u, double c);

/// ω(u) = Σ_ij u_i v_i K_ij u_j v_j (no c_{d,s} factor).
double interaction_energy(const RieszKernel& kernel, const DensityField& u);

/// ∂φ/∂r on the N+1 faces by central differences between adjacent cell
/// centers. Face 0 (r = 0) is 0 by symmetry; face N is the zero-flux outer
/// boundary and is reported as 0.
std::vector<double> potential_gradient(const RieszKernel& kernel, const DensityField& u,
                                       double c);

/// Same as potential_gradient from an already computed potential.
std::vector<double> gradient_from_potential(const RadialGrid& grid, std::span<const double> phi);

/// FNV-1a hash of (d, s, ε, N, R_max).
std::uint64_t kernel_cache_key(int d, double s, double epsilon, std::size_t cells, double r_max);

/// Binary kernel dump. Layout (little-endian):
///   char[8] "FKSKRN01", int32 d, f64 s, f64 ε, u64 N, f64 R_max, u64 key,
///   f64 edges[N+1], f64 entries[N*N] (row-major).
void save_kernel(const std::string& path, const RieszKernel& kernel);

/// Loads a kernel dump if it matches (grid, s, ε); nullopt when the file is
/// missing or describes a different configuration.
std::optional<RieszKernel> load_kernel(const std::string& path, GridPtr grid, double s,
                                       double epsilon);

/// Loads `<dir>/kernel_<key>.bin` or builds and stores it.
RieszKernel cached_kernel(const std::string& dir, GridPtr grid, double s, double epsilon);

void require_same_grid(const RadialGrid& a, const RadialGrid& b, const char* op);

}  // namespace fks
