// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include "fks/simd.hpp"

#include <algorithm>

namespace fks::simd::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
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
  for (; k + 4 <= n; k += 4) {
    const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(mu + k), _mm256_loadu_pd(mu + k - 1));
    const __m256d neg = _mm256_sub_pd(_mm256_setzero_pd(), diff);
    _mm256_storeu_pd(w + k, _mm256_mul_pd(neg, _mm256_loadu_pd(inv_dist + k)));
  }
  for (; k < n; ++k) w[k] = -(mu[k] - mu[k - 1]) * inv_dist[k];
  w[n] = 0.0;
}

void upwind_flux(const double* u, const double* w, const double* area, const double* inv_dist,
                 double eps, double* flux, std::size_t n) {
  flux[0] = 0.0;
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d half = _mm256_set1_pd(0.5);
  std::size_t k = 1;
  for (; k + 4 <= n; k += 4) {
    const __m256d left = _mm256_loadu_pd(u + k - 1);
    const __m256d right = _mm256_loadu_pd(u + k);
    const __m256d vel = _mm256_loadu_pd(w + k);
    const __m256d outward = _mm256_cmp_pd(vel, zero, _CMP_GT_OQ);
    const __m256d up = _mm256_blendv_pd(right, left, outward);
    const __m256d grad = _mm256_mul_pd(_mm256_sub_pd(right, left), _mm256_loadu_pd(inv_dist + k));
    const __m256d mean = _mm256_mul_pd(half, _mm256_add_pd(left, right));
    const __m256d face = _mm256_min_pd(mean, _mm256_add_pd(up, up));
    const __m256d adv = _mm256_mul_pd(face, vel);
    const __m256d total = _mm256_sub_pd(adv, _mm256_mul_pd(veps, grad));
    _mm256_storeu_pd(flux + k, _mm256_mul_pd(_mm256_loadu_pd(area + k), total));
  }
  for (; k < n; ++k) {
    const double up = w[k] > 0.0 ? u[k - 1] : u[k];
    const double face = std::min(0.5 * (u[k - 1] + u[k]), 2.0 * up);
    flux[k] = area[k] * (face * w[k] - eps * (u[k] - u[k - 1]) * inv_dist[k]);
  }
  flux[n] = 0.0;
}

}  // namespace fks::simd::avx2
