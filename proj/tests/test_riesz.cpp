#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "fks/model.hpp"
#include "fks/riesz.hpp"

using namespace fks;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

DensityField random_field(std::mt19937_64& rng, GridPtr g) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> v(g->size());
  const double cut = unit(rng);
  for (double& x : v) x = unit(rng) > cut ? unit(rng) : 0.0;
  v[0] += 0.01;
  return DensityField(g, v);
}

}  // namespace

TEST_CASE("angular kernel against direct quadrature") {
  // mpmath quadrature of the polar-angle integral, 30 digits.
  CHECK(rel(kernel_point(3, 1.25, 0.0, 1.0, 1.0), 11.847687835088976659) < 1e-13);
  CHECK(rel(kernel_point(3, 1.25, 0.2, 0.5, 1.5), 10.1634653963728488046) < 1e-13);
  CHECK(rel(kernel_point(4, 1.5, 0.1, 0.7, 1.3), 14.5611159043876781593) < 1e-11);
  CHECK(rel(kernel_point(5, 1.2, 0.0, 0.4, 0.9), 33.8613125349292582713) < 1e-11);
  // r = 0: the sphere average is the point value.
  CHECK(rel(kernel_point(3, 1.25, 0.0, 0.0, 2.0), 4.0 * std::acos(-1.0) * std::pow(2.0, -0.5)) <
        1e-14);
}

TEST_CASE("angular kernel is symmetric and decreasing in epsilon (property)") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> r(0.01, 3.0);
  for (int i = 0; i < 200; ++i) {
    const double a = r(rng), b = r(rng);
    for (int d : {3, 4}) {
      const double s = d == 3 ? 1.25 : 1.6;
      CHECK(rel(kernel_point(d, s, 0.0, a, b), kernel_point(d, s, 0.0, b, a)) < 1e-11);
      CHECK(kernel_point(d, s, 0.1, a, b) < kernel_point(d, s, 0.05, a, b));
    }
  }
}

TEST_CASE("radial derivative of the angular kernel") {
  for (double eps : {0.0, 0.1}) {
    for (int d : {3, 4}) {
      const double s = d == 3 ? 1.25 : 1.6;
      const double h = 1e-6;
      const double fd = (kernel_point(d, s, eps, 0.7 + h, 1.1) - kernel_point(d, s, eps, 0.7 - h, 1.1)) /
                        (2 * h);
      CHECK(rel(kernel_point_dr(d, s, eps, 0.7, 1.1), fd) < 1e-5);
    }
  }
}

TEST_CASE("closed-form cell averages match direct quadrature") {
  // K_01, K_11 on edges {0, 0.5, 1}: 4-dimensional integrals done in mpmath.
  const GridPtr g = make_uniform_grid(3, 2, 1.0);
  const RieszKernel k = build_kernel(g, 1.25, 0.0);
  CHECK(rel(k(0, 1), 1.11533662805582567322) < 1e-12);
  CHECK(rel(k(1, 1), 1.03255340346885701356) < 1e-12);
  CHECK(k(1, 0) == k(0, 1));
}

TEST_CASE("interaction energy of the unit-ball indicator") {
  // ∫∫_{B×B} |x-y|^{-1/2} dx dy, mpmath.
  const GridPtr g = make_uniform_grid(3, 64, 1.0);
  const DensityField u = DensityField::constant(g, 1.0);
  CHECK(rel(interaction_energy(build_kernel(g, 1.25, 0.0), u), 18.561966079039513358) < 1e-12);
  const RieszKernel q = build_kernel(g, 1.25, 0.0, KernelMethod::Quadrature);
  CHECK(rel(interaction_energy(q, u), 18.561966079039513358) < 1e-8);
}

TEST_CASE("quadrature and closed form agree entrywise") {
  const GridPtr g = make_uniform_grid(3, 24, 2.0);
  const RieszKernel a = build_kernel(g, 1.25, 0.0);
  const RieszKernel b = build_kernel(g, 1.25, 0.0, KernelMethod::Quadrature);
  for (std::size_t i = 0; i < a.entries().size(); ++i) {
    CHECK(rel(b.entries()[i], a.entries()[i]) < 1e-5);
  }
}

TEST_CASE("kernel structure") {
  const GridPtr g = make_uniform_grid(3, 32, 2.0);
  const RieszKernel k = build_kernel(g, 1.25, 0.05);
  CHECK(k.max_asymmetry() == 0.0);
  for (double x : k.entries()) CHECK(x > 0.0);
  const RieszKernel bad = k.with_entry(3, 7, k(3, 7) * 1.01);
  CHECK(bad.max_asymmetry() > 1e-4);
  // Entrywise monotone in ε.
  const RieszKernel k0 = build_kernel(g, 1.25, 0.0);
  const RieszKernel k1 = build_kernel(g, 1.25, 0.1);
  for (std::size_t i = 0; i < k0.entries().size(); ++i) {
    CHECK(k1.entries()[i] < k.entries()[i]);
    CHECK(k.entries()[i] < k0.entries()[i]);
  }
  // d = 4 quadrature path is symmetric too.
  const RieszKernel k4 = build_kernel(make_uniform_grid(4, 12, 1.0), 1.6, 0.0);
  CHECK(k4.max_asymmetry() < 1e-12);
}

TEST_CASE("kernel parameter errors") {
  const GridPtr g = make_uniform_grid(3, 8, 1.0);
  CHECK_THROWS_AS(build_kernel(g, 0.5, 0.0), ParameterError);  // α = d - 1
  CHECK_THROWS_AS(build_kernel(g, 1.25, -0.1), ParameterError);
  CHECK_THROWS_AS(build_kernel(g, 1.25, 0.1, KernelMethod::ClosedForm), ParameterError);
  CHECK_THROWS_AS(build_kernel(g, 1.6, 0.0), ParameterError);  // α <= 0
}

TEST_CASE("potential and interaction energy are consistent") {
  std::mt19937_64 rng(4);
  const GridPtr g = make_uniform_grid(3, 40, 2.0);
  const RieszKernel k = build_kernel(g, 1.25, 0.0);
  for (int t = 0; t < 20; ++t) {
    const DensityField u = random_field(rng, g);
    const auto phi = potential(k, u, 2.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) acc += phi[i] * u[i] * g->volumes()[i];
    CHECK(rel(acc, 2.0 * interaction_energy(k, u)) < 1e-12);
    const auto grad = potential_gradient(k, u, 2.0);
    REQUIRE(grad.size() == u.size() + 1);
    CHECK(grad.front() == 0.0);
    CHECK(grad.back() == 0.0);
    CHECK(grad[5] == doctest::Approx((phi[5] - phi[4]) * g->inv_center_spacing()[5]));
  }
  const DensityField other = DensityField::constant(make_uniform_grid(3, 40, 3.0), 1.0);
  CHECK_THROWS_AS(potential(k, other, 1.0), GridMismatch);
  CHECK_THROWS_AS(interaction_energy(k, other), GridMismatch);
}

TEST_CASE("interaction energy scales like λ² μ^{α-2d}") {
  std::mt19937_64 rng(8);
  const GridPtr g = make_uniform_grid(3, 30, 1.0);
  const DensityField u = random_field(rng, g);
  const double w = interaction_energy(build_kernel(g, 1.25, 0.0), u);
  const DensityField v = scale(u, 2.0, 0.5);
  const double wv = interaction_energy(build_kernel(v.grid_ptr(), 1.25, 0.0), v);
  CHECK(rel(wv, 4.0 * std::pow(0.5, -5.5) * w) < 1e-11);
}

TEST_CASE("rearrangement never decreases ω (100 random fields)") {
  std::mt19937_64 rng(77);
  const GridPtr g = make_uniform_grid(3, 48, 3.0);
  const RieszKernel k = build_kernel(g, 1.25, 0.0);
  int violations = 0;
  for (int t = 0; t < 100; ++t) {
    const DensityField u = random_field(rng, g);
    const DensityField r = rearrange(u);
    const RieszKernel& kr = same_grid(r.grid(), *g) ? k : build_kernel(r.grid_ptr(), 1.25, 0.0);
    if (interaction_energy(kr, r) < interaction_energy(k, u) * (1.0 - 1e-12)) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("binary cache round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "fks_kernel_cache_test";
  std::filesystem::remove_all(dir);
  const GridPtr g = make_uniform_grid(3, 16, 2.0);
  const RieszKernel a = cached_kernel(dir.string(), g, 1.25, 0.05);
  const RieszKernel b = cached_kernel(dir.string(), g, 1.25, 0.05);
  CHECK(std::distance(std::filesystem::directory_iterator(dir), {}) == 1);
  for (std::size_t i = 0; i < a.entries().size(); ++i) CHECK(a.entries()[i] == b.entries()[i]);
  const auto path = (dir / "k.bin").string();
  save_kernel(path, a);
  CHECK(load_kernel(path, g, 1.25, 0.05).has_value());
  CHECK_FALSE(load_kernel(path, g, 1.25, 0.1).has_value());
  CHECK_FALSE(load_kernel(path, make_uniform_grid(3, 16, 3.0), 1.25, 0.05).has_value());
  CHECK_FALSE(load_kernel((dir / "missing.bin").string(), g, 1.25, 0.05).has_value());
  CHECK(kernel_cache_key(3, 1.25, 0.05, 16, 2.0) != kernel_cache_key(3, 1.25, 0.05, 17, 2.0));
  std::filesystem::remove_all(dir);
}
