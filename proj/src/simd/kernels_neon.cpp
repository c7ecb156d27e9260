// AArch64 variants; NEON is part of the base ISA there.
#include <arm_neon.h>

#include "fks/simd.hpp"

#include <algorithm>

namespace fks::simd::neon {

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
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
  std::size_t k = 1;
  for (; k + 2 <= n; k += 2) {
    const float64x2_t diff = vsubq_f64(vld1q_f64(mu + k), vld1q_f64(mu + k - 1));
    vst1q_f64(w + k, vmulq_f64(vnegq_f64(diff), vld1q_f64(inv_dist + k)));
  }
  for (; k < n; ++k) w[k] = -(mu[k] - mu[k - 1]) * inv_dist[k];
  w[n] = 0.0;
}

void upwind_flux(const double* u, const double* w, const double* area, const double* inv_dist,
                 double eps, double* flux, std::size_t n) {
  flux[0] = 0.0;
  const float64x2_t veps = vdupq_n_f64(eps);
  std::size_t k = 1;
  for (; k + 2 <= n; k += 2) {
    const float64x2_t left = vld1q_f64(u + k - 1);
    const float64x2_t right = vld1q_f64(u + k);
    const float64x2_t vel = vld1q_f64(w + k);
    const uint64x2_t outward = vcgtq_f64(vel, vdupq_n_f64(0.0));
    const float64x2_t up = vbslq_f64(outward, left, right);
    const float64x2_t grad = vmulq_f64(vsubq_f64(right, left), vld1q_f64(inv_dist + k));
    const float64x2_t mean = vmulq_f64(vdupq_n_f64(0.5), vaddq_f64(left, right));
    const float64x2_t face = vminq_f64(mean, vaddq_f64(up, up));
    const float64x2_t total = vsubq_f64(vmulq_f64(face, vel), vmulq_f64(veps, grad));
    vst1q_f64(flux + k, vmulq_f64(vld1q_f64(area + k), total));
  }
  for (; k < n; ++k) {
    const double up = w[k] > 0.0 ? u[k - 1] : u[k];
    const double face = std::min(0.5 * (u[k - 1] + u[k]), 2.0 * up);
    flux[k] = area[k] * (face * w[k] - eps * (u[k] - u[k - 1]) * inv_dist[k]);
  }
  flux[n] = 0.0;
}

}  // namespace fks::simd::neon
