#pragma once

#include <span>
#include <vector>

#include "fks/field.hpp"
#include "fks/model.hpp"
#include "fks/riesz.hpp"

namespace fks {

struct EnergyReport {
  double F = 0.0;  ///< free energy S - W
  double S = 0.0;  ///< (1/(m-1)) ∫u^m
  double W = 0.0;  ///< (c/2) ω(u)
  double D = 0.0;  ///< dissipation, >= 0
  double J = 0.0;  ///< VHLS ratio; 0 for the zero field
};

/// F = (1/(m-1)) Σ u_i^m v_i - (c/2) ω(u), c = params.coupling().
double free_energy(const DensityField& u, const RieszKernel& kernel, const ModelParams& params);

/// μ_i = (m/(m-1)) u_i^{m-1} - φ_i.
std::vector<double> chemical_potential(const DensityField& u, const RieszKernel& kernel,
                                       const ModelParams& params);

/// Same, reusing a computed potential.
std::vector<double> chemical_potential_from(const DensityField& u, std::span<const double> phi,
                                            const ModelParams& params);

/// Face density used by the solver flux at a face with left/right cell values
/// and velocity w: min((l + r)/2, 2 u_up), u_up the donor (upwind) value.
/// Vanishes when the donor cell is empty and never exceeds twice the donor.
inline double face_density(double left, double right, double w) {
  const double up = w > 0.0 ? left : right;
  const double mean = 0.5 * (left + right);
  return mean < 2.0 * up ? mean : 2.0 * up;
}

/// D = Σ_k A_k u_f,k (μ_k - μ_{k-1})² / (c_k - c_{k-1}) over interior faces
/// with u_f from face_density. This is exactly -dF/dt of the semi-discrete
/// scheme without ε-diffusion.
double dissipation(const DensityField& u, std::span<const double> mu);

/// J = ω(u) / (mass(u)^{2s/d} ‖u‖_m^m). Throws ParameterError on the zero field.
double vhls_ratio(const DensityField& u, const RieszKernel& kernel, const ModelParams& params);

/// 2(d - 2s) F(u).
double virial_rhs(const DensityField& u, const RieszKernel& kernel, const ModelParams& params);

/// All of F, S, W, D, J from one potential evaluation.
EnergyReport energy_report(const DensityField& u, const RieszKernel& kernel,
                           const ModelParams& params);

/// Lower bound on ‖u‖_r for any u >= 0 on R^d with ∫u = M and ∫|x|²u = m2.
///
/// Splitting M at radius R, Hölder on B_R and Chebyshev outside give
///   M <= C3 R^a ‖u‖_r + m2 / R²,   a = d(r-1)/r,  C3 = |B_1|^{(r-1)/r}.
/// Minimizing the right side over R yields
///   ‖u‖_r >= M^{(a+2)/2} / [ (a C3 / 2) (1 + 2/a)^{(a+2)/2} m2^{a/2} ].
double lr_lower_bound(double M, double m2, double r, int d);

}  // namespace fks
