#pragma once

// Data-parallel inner loops used by the kernel matvec and the finite-volume
// flux update. Every routine has a scalar reference implementation; vector
// variants (AVX2+FMA on x86-64, NEON on AArch64) are selected once at runtime
// from CPU features. Set FKS_SIMD=scalar in the environment to force the
// reference path.

#include <cstddef>
#include <span>

namespace fks::simd {

enum class Backend { Scalar, Avx2, Neon };

const char* backend_name(Backend backend);
bool backend_available(Backend backend);
Backend active_backend();

// Overrides runtime selection. Throws std::invalid_argument if the backend
// is not available on this CPU/build.
void force_backend(Backend backend);

// Σ a_i b_i
double dot(std::span<const double> a, std::span<const double> b);

// y = M x, M dense row-major with y.size() rows and x.size() columns.
void gemv(std::span<const double> matrix, std::span<const double> x, std::span<double> y);

// xᵀ M x for square row-major M.
double quadratic_form(std::span<const double> matrix, std::span<const double> x);

// Face velocities w_k = -(mu_k - mu_{k-1}) * inv_dist_k on interior faces
// k = 1..n-1; w_0 = w_n = 0. w.size() == mu.size() + 1.
void face_velocity(std::span<const double> mu, std::span<const double> inv_dist,
                   std::span<double> w);

// Outward face fluxes with donor-limited face density:
//   flux_k = area_k * (u_f * w_k - eps * (u_k - u_{k-1}) * inv_dist_k),
//   u_f = min((u_{k-1} + u_k) / 2, 2 u_up),
// with donor u_up = u_{k-1} when w_k > 0 and u_k otherwise. Boundary fluxes are 0.
void upwind_flux(std::span<const double> u, std::span<const double> w,
                 std::span<const double> area, std::span<const double> inv_dist,
                 double eps, std::span<double> flux);

// Backend-specific entry points. Exposed for equivalence testing.
namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void gemv(const double* m, const double* x, double* y, std::size_t rows, std::size_t cols);
double quadratic_form(const double* m, const double* x, std::size_t n);
void face_velocity(const double* mu, const double* inv_dist, double* w, std::size_t n);
void upwind_flux(const double* u, const double* w, const double* area, const double* inv_dist,
                 double eps, double* flux, std::size_t n);
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void gemv(const double* m, const double* x, double* y, std::size_t rows, std::size_t cols);
double quadratic_form(const double* m, const double* x, std::size_t n);
void face_velocity(const double* mu, const double* inv_dist, double* w, std::size_t n);
void upwind_flux(const double* u, const double* w, const double* area, const double* inv_dist,
                 double eps, double* flux, std::size_t n);
}  // namespace avx2

namespace neon {
double dot(const double* a, const double* b, std::size_t n);
void gemv(const double* m, const double* x, double* y, std::size_t rows, std::size_t cols);
double quadratic_form(const double* m, const double* x, std::size_t n);
void face_velocity(const double* mu, const double* inv_dist, double* w, std::size_t n);
void upwind_flux(const double* u, const double* w, const double* area, const double* inv_dist,
                 double eps, double* flux, std::size_t n);
}  // namespace neon

}  // namespace fks::simd
