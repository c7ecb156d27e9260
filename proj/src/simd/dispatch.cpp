#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string_view>

#include "fks/simd.hpp"

namespace fks::simd {
namespace {

struct Ops {
  Backend backend;
  double (*dot)(const double*, const double*, std::size_t);
  void (*gemv)(const double*, const double*, double*, std::size_t, std::size_t);
  double (*quadratic_form)(const double*, const double*, std::size_t);
  void (*face_velocity)(const double*, const double*, double*, std::size_t);
  void (*upwind_flux)(const double*, const double*, const double*, const double*, double, double*,
                      std::size_t);
};

constexpr Ops kScalar{Backend::Scalar, scalar::dot, scalar::gemv, scalar::quadratic_form,
                      scalar::face_velocity, scalar::upwind_flux};
#if defined(FKS_HAVE_AVX2_TU)
constexpr Ops kAvx2{Backend::Avx2, avx2::dot, avx2::gemv, avx2::quadratic_form,
                    avx2::face_velocity, avx2::upwind_flux};
#endif
#if defined(FKS_HAVE_NEON_TU)
constexpr Ops kNeon{Backend::Neon, neon::dot, neon::gemv, neon::quadratic_form,
                    neon::face_velocity, neon::upwind_flux};
#endif

const Ops* table_for(Backend backend) {
  switch (backend) {
    case Backend::Scalar:
      return &kScalar;
    case Backend::Avx2:
#if defined(FKS_HAVE_AVX2_TU)
      if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return &kAvx2;
#endif
      return nullptr;
    case Backend::Neon:
#if defined(FKS_HAVE_NEON_TU)
      return &kNeon;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

const Ops* detect() {
  if (const char* env = std::getenv("FKS_SIMD"); env && std::string_view(env) == "scalar") {
    return &kScalar;
  }
  for (Backend b : {Backend::Avx2, Backend::Neon}) {
    if (const Ops* ops = table_for(b)) return ops;
  }
  return &kScalar;
}

std::atomic<const Ops*>& current() {
  static std::atomic<const Ops*> ops{detect()};
  return ops;
}

const Ops& ops() { return *current().load(std::memory_order_relaxed); }

}  // namespace

const char* backend_name(Backend backend) {
  switch (backend) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
    case Backend::Neon:
      return "neon";
  }
  return "unknown";
}

bool backend_available(Backend backend) { return table_for(backend) != nullptr; }

Backend active_backend() { return ops().backend; }

void force_backend(Backend backend) {
  const Ops* table = table_for(backend);
  if (!table) {
    throw std::invalid_argument(std::string("SIMD backend not available: ") +
                                backend_name(backend));
  }
  current().store(table, std::memory_order_relaxed);
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  return ops().dot(a.data(), b.data(), a.size());
}

void gemv(std::span<const double> matrix, std::span<const double> x, std::span<double> y) {
  if (matrix.size() != x.size() * y.size()) throw std::invalid_argument("gemv: shape mismatch");
  ops().gemv(matrix.data(), x.data(), y.data(), y.size(), x.size());
}

double quadratic_form(std::span<const double> matrix, std::span<const double> x) {
  if (matrix.size() != x.size() * x.size()) {
    throw std::invalid_argument("quadratic_form: shape mismatch");
  }
  return ops().quadratic_form(matrix.data(), x.data(), x.size());
}

void face_velocity(std::span<const double> mu, std::span<const double> inv_dist,
                   std::span<double> w) {
  const std::size_t n = mu.size();
  if (w.size() != n + 1 || inv_dist.size() != n + 1) {
    throw std::invalid_argument("face_velocity: expected n+1 faces");
  }
  ops().face_velocity(mu.data(), inv_dist.data(), w.data(), n);
}

void upwind_flux(std::span<const double> u, std::span<const double> w,
                 std::span<const double> area, std::span<const double> inv_dist, double eps,
                 std::span<double> flux) {
  const std::size_t n = u.size();
  if (w.size() != n + 1 || area.size() != n + 1 || inv_dist.size() != n + 1 ||
      flux.size() != n + 1) {
    throw std::invalid_argument("upwind_flux: expected n+1 faces");
  }
  ops().upwind_flux(u.data(), w.data(), area.data(), inv_dist.data(), eps, flux.data(), n);
}

}  // namespace fks::simd
