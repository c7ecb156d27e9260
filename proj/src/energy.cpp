#include "fks/energy.hpp"

#include <cmath>

namespace fks {
namespace {

double entropy_sum(const DensityField& u, double m) {
  const auto vol = u.grid().volumes();
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] > 0.0) acc += std::pow(u[i], m) * vol[i];
  }
  return acc;
}

}  // namespace

double free_energy(const DensityField& u, const RieszKernel& kernel, const ModelParams& params) {
  require_same_grid(kernel.grid(), u.grid(), "free_energy");
  const double S = entropy_sum(u, params.m) / (params.m - 1.0);
  const double W = 0.5 * params.coupling() * interaction_energy(kernel, u);
  return S - W;
}

std::vector<double> chemical_potential_from(const DensityField& u, std::span<const double> phi,
                                            const ModelParams& params) {
  const double pref = params.m / (params.m - 1.0);
  std::vector<double> mu(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double p = u[i] > 0.0 ? pref * std::pow(u[i], params.m - 1.0) : 0.0;
    mu[i] = p - phi[i];
  }
  return mu;
}

std::vector<double> chemical_potential(const DensityField& u, const RieszKernel& kernel,
                                       const ModelParams& params) {
  const std::vector<double> phi = potential(kernel, u, params.coupling());
  return chemical_potential_from(u, phi, params);
}

double dissipation(const DensityField& u, std::span<const double> mu) {
  const RadialGrid& g = u.grid();
  if (mu.size() != u.size()) throw ParameterError("dissipation: mu size mismatch");
  const auto area = g.face_areas();
  const auto inv = g.inv_center_spacing();
  double acc = 0.0;
  for (std::size_t k = 1; k < u.size(); ++k) {
    const double dmu = mu[k] - mu[k - 1];
    const double w = -dmu * inv[k];
    acc += area[k] * face_density(u[k - 1], u[k], w) * dmu * dmu * inv[k];
  }
  return acc;
}

double vhls_ratio(const DensityField& u, const RieszKernel& kernel, const ModelParams& params) {
  require_same_grid(kernel.grid(), u.grid(), "vhls_ratio");
  const double M = mass(u);
  if (!(M > 0.0)) throw ParameterError("vhls_ratio: undefined for the zero field");
  const double lm = entropy_sum(u, params.m);
  return interaction_energy(kernel, u) / (std::pow(M, 2.0 * params.s / params.d) * lm);
}

double virial_rhs(const DensityField& u, const RieszKernel& kernel, const ModelParams& params) {
  return 2.0 * (params.d - 2.0 * params.s) * free_energy(u, kernel, params);
}

EnergyReport energy_report(const DensityField& u, const RieszKernel& kernel,
                           const ModelParams& params) {
  require_same_grid(kernel.grid(), u.grid(), "energy_report");
  const double c = params.coupling();
  const std::vector<double> phi = potential(kernel, u, c);
  const auto vol = u.grid().volumes();
  double omega_c = 0.0;  // c ω(u) = Σ φ_i u_i v_i
  for (std::size_t i = 0; i < u.size(); ++i) omega_c += phi[i] * u[i] * vol[i];
  const double lm = entropy_sum(u, params.m);

  EnergyReport r;
  r.S = lm / (params.m - 1.0);
  r.W = 0.5 * omega_c;
  r.F = r.S - r.W;
  r.D = dissipation(u, chemical_potential_from(u, phi, params));
  const double M = mass(u);
  if (M > 0.0 && c > 0.0) {
    r.J = (omega_c / c) / (std::pow(M, 2.0 * params.s / params.d) * lm);
  } else if (M > 0.0) {
    r.J = interaction_energy(kernel, u) / (std::pow(M, 2.0 * params.s / params.d) * lm);
  }
  return r;
}

double lr_lower_bound(double M, double m2, double r, int d) {
  if (!(M > 0.0) || !(m2 > 0.0) || !(r > 1.0) || d < 1 || !std::isfinite(M) ||
      !std::isfinite(m2) || !std::isfinite(r)) {
    throw ParameterError("lr_lower_bound: need M > 0, m2 > 0, r > 1, d >= 1");
  }
  const double a = d * (r - 1.0) / r;
  const double c3 = std::pow(unit_ball_volume(d), (r - 1.0) / r);
  const double e = 0.5 * (a + 2.0);
  return std::pow(M, e) / (0.5 * a * c3 * std::pow(1.0 + 2.0 / a, e) * std::pow(m2, 0.5 * a));
}

}  // namespace fks
