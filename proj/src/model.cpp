#include "fks/model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "fks/gamma.hpp"

namespace fks {
namespace {

void require_admissible(int d, double s, const char* op) {
  if (d < 3 || !std::isfinite(s) || !(2.0 < 2.0 * s) || !(2.0 * s < d)) {
    std::ostringstream msg;
    msg << op << ": require d >= 3 and 2 < 2s < d, got d=" << d << " s=" << s;
    throw ParameterError(msg.str());
  }
}

}  // namespace

ModelParams ModelParams::critical(int d, double s, double epsilon) {
  require_admissible(d, s, "ModelParams");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw ParameterError("ModelParams: epsilon must be finite and >= 0");
  }
  ModelParams p;
  p.d = d;
  p.s = s;
  p.m = critical_exponent(d, s);
  p.epsilon = epsilon;
  p.alpha = d - 2.0 * s;
  return p;
}

double ModelParams::coupling() const { return attraction * riesz_constant(d, s); }

double critical_exponent(int d, double s) {
  require_admissible(d, s, "critical_exponent");
  return 2.0 - 2.0 * s / d;
}

double riesz_constant(int d, double s) {
  require_admissible(d, s, "riesz_constant");
  const double half_d = 0.5 * d;
  return gamma_fn(half_d - s) /
         (std::pow(std::numbers::pi, half_d) * std::pow(4.0, s) * gamma_fn(s));
}

double hls_sharp_constant(int d, double s) {
  require_admissible(d, s, "hls_sharp_constant");
  const double beta = d - 2.0 * s;
  const double half_d = 0.5 * d;
  return std::pow(std::numbers::pi, 0.5 * beta) * gamma_fn(half_d - 0.5 * beta) /
         gamma_fn(d - 0.5 * beta) *
         std::pow(gamma_fn(half_d) / gamma_fn(d), -1.0 + beta / d);
}

double vhls_constant_upper(int d, double s) {
  require_admissible(d, s, "vhls_constant_upper");
  const double half_d = 0.5 * d;
  return std::pow(std::numbers::pi, 0.5 * (d - 2.0 * s)) * gamma_fn(s) /
         gamma_fn(0.5 * (d + 2.0 * s)) *
         std::pow(gamma_fn(half_d) / gamma_fn(d), -2.0 * s / d);
}

double critical_mass(int d, double s, double C_star) {
  require_admissible(d, s, "critical_mass");
  if (!(C_star > 0.0) || !std::isfinite(C_star)) {
    throw ParameterError("critical_mass: C_star must be positive and finite");
  }
  const double m = critical_exponent(d, s);
  return std::pow(2.0 / ((m - 1.0) * C_star * riesz_constant(d, s)), d / (2.0 * s));
}

double constant_for_mass(int d, double s, double M) {
  require_admissible(d, s, "constant_for_mass");
  if (!(M > 0.0)) throw ParameterError("constant_for_mass: mass must be positive");
  const double m = critical_exponent(d, s);
  return 2.0 / ((m - 1.0) * riesz_constant(d, s) * std::pow(M, 2.0 * s / d));
}

DerivedConstants derived_constants(int d, double s) {
  DerivedConstants c;
  c.c_ds = riesz_constant(d, s);
  c.C_hls = hls_sharp_constant(d, s);
  c.C_star_upper = vhls_constant_upper(d, s);
  c.M_star = critical_mass(d, s, c.C_star_upper);
  return c;
}

double unit_sphere_area(int d) {
  if (d < 1) throw ParameterError("unit_sphere_area: d must be >= 1");
  return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / gamma_fn(0.5 * d);
}

double unit_ball_volume(int d) { return unit_sphere_area(d) / d; }

}  // namespace fks
