#pragma once

#include <stdexcept>
#include <string>

namespace fks {

// Raised when a parameter lies outside the admissible domain of an operation.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Problem parameters of the critical aggregation-diffusion model
///   u_t = Δu^m - ∇·(u∇φ),  φ = c_{d,s} |x|^{-(d-2s)} * u,
/// with 2 < 2s < d and the critical exponent m = 2 - 2s/d.
struct ModelParams {
  int d = 3;
  double s = 1.25;
  double m = 7.0 / 6.0;
  double epsilon = 0.0;  ///< kernel regularization length and linear diffusion
  double alpha = 0.5;    ///< kernel exponent d - 2s

  /// Multiplier on c_{d,s} in the potential; 0 switches attraction off.
  double attraction = 1.0;

  /// Validated constructor; throws ParameterError unless 2 < 2s < d and eps >= 0.
  static ModelParams critical(int d, double s, double epsilon = 0.0);

  /// Effective coupling attraction * c_{d,s}.
  double coupling() const;
};

struct DerivedConstants {
  double c_ds = 0.0;          ///< Riesz normalization
  double C_hls = 0.0;         ///< sharp HLS constant at β = d - 2s
  double C_star_upper = 0.0;  ///< closed-form VHLS constant (an upper bound on C*)
  double M_star = 0.0;        ///< critical mass evaluated at C_star_upper
};

DerivedConstants derived_constants(int d, double s);

/// m = 2 - 2s/d.
double critical_exponent(int d, double s);

/// c_{d,s} = Γ(d/2 - s) / (π^{d/2} 4^s Γ(s)).
double riesz_constant(int d, double s);

/// Sharp HLS constant for kernel exponent β = d - 2s, written in the HLS form
/// π^{β/2} Γ(d/2 - β/2)/Γ(d - β/2) (Γ(d/2)/Γ(d))^{-1+β/d}.
double hls_sharp_constant(int d, double s);

/// Same constant written in the VHLS form
/// π^{(d-2s)/2} Γ(s)/Γ((d+2s)/2) (Γ(d/2)/Γ(d))^{-2s/d}.
double vhls_constant_upper(int d, double s);

/// M* = [2 / ((m-1) C* c_{d,s})]^{d/(2s)}.
double critical_mass(int d, double s, double C_star);

/// Inverse of critical_mass: the constant C* whose critical mass is M.
double constant_for_mass(int d, double s, double M);

/// Surface measure of the unit sphere S^{d-1}.
double unit_sphere_area(int d);

/// Volume of the unit ball in R^d.
double unit_ball_volume(int d);

}  // namespace fks
