#include <doctest.h>

#include <cmath>
#include <random>

#include "fks/energy.hpp"

using namespace fks;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

DensityField random_field(std::mt19937_64& rng, GridPtr g) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> v(g->size());
  const double R = (0.1 + 0.8 * unit(rng)) * g->r_max();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (g->centers()[i] < R) v[i] = std::pow(unit(rng), 2.0) * 10.0;
  }
  v[0] += 1e-3;
  return DensityField(g, v);
}

struct Setup {
  ModelParams p = ModelParams::critical(3, 1.25);
  GridPtr g = make_uniform_grid(3, 64, 3.0);
  RieszKernel k = build_kernel(g, 1.25, 0.0);
};

}  // namespace

TEST_CASE("free energy parts") {
  Setup s;
  std::mt19937_64 rng(1);
  for (int t = 0; t < 30; ++t) {
    const DensityField u = random_field(rng, s.g);
    const EnergyReport r = energy_report(u, s.k, s.p);
    CHECK(r.F == r.S - r.W);
    CHECK(rel(r.F, free_energy(u, s.k, s.p)) < 1e-12);
    CHECK(rel(r.S, lp_integral(u, s.p.m) / (s.p.m - 1.0)) < 1e-12);
    CHECK(rel(r.W, 0.5 * s.p.coupling() * interaction_energy(s.k, u)) < 1e-12);
    CHECK(r.D >= 0.0);
    CHECK(rel(r.J, vhls_ratio(u, s.k, s.p)) < 1e-12);
  }
  const DensityField z = DensityField::zeros(s.g);
  CHECK(free_energy(z, s.k, s.p) == 0.0);
  CHECK(virial_rhs(z, s.k, s.p) == 0.0);
  CHECK_THROWS_AS(vhls_ratio(z, s.k, s.p), ParameterError);
  const EnergyReport rz = energy_report(z, s.k, s.p);
  CHECK(rz.F == 0.0);
  CHECK(rz.D == 0.0);
}

TEST_CASE("small mass makes the entropy dominate") {
  Setup s;
  std::mt19937_64 rng(2);
  const DensityField u = random_field(rng, s.g);
  double prev = INFINITY;
  for (double a : {1e-2, 1e-4, 1e-6}) {
    const DensityField v = u.scaled_by(a);
    const double F = free_energy(v, s.k, s.p);
    CHECK(F > 0.0);
    const double ratio = F / (lp_integral(v, s.p.m) / (s.p.m - 1.0));
    CHECK(ratio < 1.0);
    CHECK(std::abs(1.0 - ratio) < prev);
    prev = std::abs(1.0 - ratio);
  }
}

TEST_CASE("virial right-hand side in expanded form") {
  Setup s;
  std::mt19937_64 rng(3);
  for (int t = 0; t < 30; ++t) {
    const DensityField u = random_field(rng, s.g);
    const double expanded = 2.0 * s.p.d * lp_integral(u, s.p.m) -
                            s.p.alpha * s.p.coupling() * interaction_energy(s.k, u);
    const double v = virial_rhs(u, s.k, s.p);
    CHECK(std::abs(v - expanded) <= 1e-12 * std::max(std::abs(v), lp_integral(u, s.p.m)));
    if (free_energy(u, s.k, s.p) < 0.0) CHECK(v < 0.0);
  }
}

TEST_CASE("chemical potential") {
  Setup s;
  const DensityField z = DensityField::zeros(s.g);
  for (double x : chemical_potential(z, s.k, s.p)) CHECK(x == 0.0);
  ModelParams off = s.p;
  off.attraction = 0.0;
  std::mt19937_64 rng(4);
  const DensityField u = random_field(rng, s.g);
  const auto mu = chemical_potential(u, s.k, off);
  for (std::size_t i = 0; i < u.size(); ++i) {
    CHECK(mu[i] == doctest::Approx(7.0 * std::pow(u[i], 1.0 / 6.0)).epsilon(1e-14));
    for (std::size_t j = 0; j < u.size(); ++j) {
      if (u[i] < u[j]) CHECK(mu[i] <= mu[j]);
    }
  }
}

TEST_CASE("dissipation") {
  Setup s;
  const DensityField u = DensityField::constant(s.g, 2.0);
  std::vector<double> flat(u.size(), 3.0);
  CHECK(dissipation(u, flat) == 0.0);
  std::vector<double> ramp(u.size());
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i);
  CHECK(dissipation(u, ramp) > 0.0);
  CHECK(dissipation(DensityField::zeros(s.g), ramp) == 0.0);
  // Donor-limited face density.
  CHECK(face_density(1.0, 3.0, 1.0) == 2.0);
  CHECK(face_density(1.0, 3.0, -1.0) == 2.0);
  CHECK(face_density(0.0, 3.0, 1.0) == 0.0);
  CHECK(face_density(0.1, 3.0, 1.0) == doctest::Approx(0.2));
}

TEST_CASE("per-part scaling under λu(μ·)") {
  Setup s;
  std::mt19937_64 rng(5);
  const DensityField u = random_field(rng, s.g);
  const EnergyReport a = energy_report(u, s.k, s.p);
  for (double lam : {0.5, 2.0}) {
    for (double mu : {0.5, 2.0}) {
      const DensityField v = scale(u, lam, mu);
      const RieszKernel kv = build_kernel(v.grid_ptr(), 1.25, 0.0);
      const EnergyReport b = energy_report(v, kv, s.p);
      CHECK(rel(b.S, std::pow(lam, s.p.m) * std::pow(mu, -3.0) * a.S) < 1e-12);
      CHECK(rel(b.W, lam * lam * std::pow(mu, -3.0 - 2.5) * a.W) < 1e-11);
      CHECK(rel(b.J, a.J) < 1e-11);
    }
  }
}

TEST_CASE("VHLS ratio stays below the sharp constant on random fields") {
  Setup s;
  std::mt19937_64 rng(6);
  const double C = hls_sharp_constant(3, 1.25);
  for (int t = 0; t < 100; ++t) {
    const DensityField u = random_field(rng, s.g);
    CHECK(vhls_ratio(u, s.k, s.p) <= C * 1.02);
  }
}

TEST_CASE("L^r lower bound") {
  // Direct numerical maximization over the split radius (mpmath).
  CHECK(rel(lr_lower_bound(2.0, 0.5, 7.0 / 6.0, 3), 1.24573253397312104503) < 1e-12);
  // Exponent in M.
  const double a = 3.0 * (1.0 / 7.0);
  CHECK(rel(lr_lower_bound(4.0, 0.5, 7.0 / 6.0, 3) / lr_lower_bound(2.0, 0.5, 7.0 / 6.0, 3),
            std::pow(2.0, 0.5 * (a + 2.0))) < 1e-12);
  // Unbounded as the second moment collapses.
  double prev = 0.0;
  for (double m2 : {1.0, 1e-2, 1e-4, 1e-8}) {
    const double b = lr_lower_bound(1.0, m2, 2.0, 3);
    CHECK(b > prev);
    prev = b;
  }
  CHECK(prev > 1e3);
  CHECK_THROWS_AS(lr_lower_bound(0.0, 1.0, 2.0, 3), ParameterError);
  CHECK_THROWS_AS(lr_lower_bound(1.0, -1.0, 2.0, 3), ParameterError);
  CHECK_THROWS_AS(lr_lower_bound(1.0, 1.0, 1.0, 3), ParameterError);
}

TEST_CASE("L^r lower bound holds for 1000 random fields") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const GridPtr g = make_uniform_grid(3, 16 + t % 48, 0.5 + 4.0 * unit(rng));
    const DensityField u = random_field(rng, g);
    const double r = 1.05 + 3.0 * unit(rng);
    if (lp_norm(u, r) < lr_lower_bound(mass(u), second_moment(u), r, 3)) ++violations;
  }
  CHECK(violations == 0);
}
