#include "fks/gamma.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "fks/model.hpp"

namespace fks {
namespace {

constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczosCoef = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

// Lanczos series A_g(z) for z >= 1/2 (argument already shifted by one).
double lanczos_sum(double z) {
  double sum = kLanczosCoef[0];
  for (std::size_t k = 1; k < kLanczosCoef.size(); ++k) sum += kLanczosCoef[k] / (z + k);
  return sum;
}

}  // namespace

double gamma_fn(double x) {
  if (!std::isfinite(x)) throw ParameterError("gamma_fn: non-finite argument");
  if (x <= 0.0 && x == std::floor(x)) throw ParameterError("gamma_fn: pole at non-positive integer");
  if (x < 0.5) {
    // Γ(x) Γ(1-x) = π / sin(πx)
    return std::numbers::pi / (std::sin(std::numbers::pi * x) * gamma_fn(1.0 - x));
  }
  const double z = x - 1.0;
  const double t = z + kLanczosG + 0.5;
  // t^(z+1/2) split in two factors to stay finite up to x ~ 171.
  const double half_pow = std::pow(t, 0.5 * (z + 0.5));
  return std::sqrt(2.0 * std::numbers::pi) * half_pow * (half_pow * std::exp(-t)) *
         lanczos_sum(z);
}

double log_gamma_fn(double x) {
  if (!(x > 0.0)) throw ParameterError("log_gamma_fn: argument must be positive");
  if (x < 0.5) return std::log(gamma_fn(x));
  const double z = x - 1.0;
  const double t = z + kLanczosG + 0.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t +
         std::log(lanczos_sum(z));
}

}  // namespace fks
