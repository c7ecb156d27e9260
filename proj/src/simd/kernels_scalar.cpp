#include "fks/simd.hpp"

#include <algorithm>

namespace fks::simd::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void gemv(const double* m, const double* x, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) y[i] = dot(m + i * cols, x, cols);
}

double quadratic_form(const double* m, const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] == 0.0) continue;
    acc += x[i] * dot(m + i * n, x, n);
  }
  return acc;
}

void face_velocity(const double* mu, const double* inv_dist, double* w, std::size_t n) {
  w[0] = 0.0;
  for (std::size_t k = 1; k < n; ++k) w[k] = -(mu[k] - mu[k - 1]) * inv_dist[k];
  w[n] = 0.0;
}

void upwind_flux(const double* u, const double* w, const double* area, const double* inv_dist,
                 double eps, double* flux, std::size_t n) {
  flux[0] = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    const double up = w[k] > 0.0 ? u[k - 1] : u[k];
    const double face = std::min(0.5 * (u[k - 1] + u[k]), 2.0 * up);
    flux[k] = area[k] * (face * w[k] - eps * ((u[k] - u[k - 1]) * inv_dist[k]));
  }
  flux[n] = 0.0;
}

}  // namespace fks::simd::scalar
