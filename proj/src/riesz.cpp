#include "fks/riesz.hpp"

#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "fks/gamma.hpp"
#include "fks/model.hpp"
#include "fks/simd.hpp"

namespace fks {
namespace {

void validate_kernel_params(int d, double s, double epsilon) {
  const double alpha = d - 2.0 * s;
  if (!(alpha > 0.0)) throw ParameterError("Riesz kernel: need d - 2s > 0");
  if (!(alpha < d - 1.0)) {
    throw ParameterError("Riesz kernel: d - 2s must be below d - 1 for an integrable angular kernel");
  }
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw ParameterError("Riesz kernel: epsilon must be finite and >= 0");
  }
}

// Iterated antiderivatives of |t|^β: G_k' = G_{k-1}, G_0 = |t|^β. Returns
// G_2, G_3, G_4 at t.
struct Antiderivatives {
  long double g2, g3, g4;
};

Antiderivatives iterated(long double t, long double beta) {
  const long double a = std::fabs(t);
  if (a == 0.0L) return {0.0L, 0.0L, 0.0L};
  const long double sign = t < 0.0L ? -1.0L : 1.0L;
  const long double g2 = std::pow(a, beta + 2.0L) / ((beta + 1.0L) * (beta + 2.0L));
  const long double g3abs = g2 * a / (beta + 3.0L);
  const long double g4 = g3abs * a / (beta + 4.0L);
  return {g2, sign * g3abs, g4};
}

// Mixed antiderivative Φ(r, ρ) with ∂²Φ/∂r∂ρ = rρ[(r+ρ)^β - |r-ρ|^β].
long double mixed_antiderivative(long double r, long double rho, long double beta) {
  const long double sum = r + rho;
  const long double diff = r - rho;
  const Antiderivatives p = iterated(sum, beta);
  const Antiderivatives q = iterated(diff, beta);
  const long double plus = r * rho * p.g2 - sum * p.g3 + p.g4;
  const long double minus = -r * rho * q.g2 - diff * q.g3 + q.g4;
  return plus - minus;
}

std::vector<double> closed_form_entries(const RadialGrid& grid, double s) {
  const std::size_t n = grid.size();
  const auto edges = grid.edges();
  const auto vol = grid.volumes();
  const long double beta = 2.0L - (3.0L - 2.0L * s);
  // Φ on the lattice of edge pairs; symmetric since Φ(r,ρ) = Φ(ρ,r).
  std::vector<long double> phi((n + 1) * (n + 1));
  for (std::size_t a = 0; a <= n; ++a) {
    for (std::size_t b = a; b <= n; ++b) {
      const long double v = mixed_antiderivative(edges[a], edges[b], beta);
      phi[a * (n + 1) + b] = v;
      phi[b * (n + 1) + a] = v;
    }
  }
  const long double pref = 4.0L * std::numbers::pi_v<long double> * 2.0L *
                           std::numbers::pi_v<long double> / beta;
  std::vector<double> k(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const long double rect = phi[(i + 1) * (n + 1) + (j + 1)] - phi[i * (n + 1) + (j + 1)] -
                               phi[(i + 1) * (n + 1) + j] + phi[i * (n + 1) + j];
      const double value =
          static_cast<double>(pref * rect / (static_cast<long double>(vol[i]) * vol[j]));
      k[i * n + j] = value;
      k[j * n + i] = value;
    }
  }
  return k;
}

// Gauss-Legendre nodes on [a, b] split into `parts` equal pieces, weighted by
// ω_d r^{d-1}.
struct Nodes {
  std::vector<double> r;
  std::vector<double> w;
};

Nodes shell_nodes(double a, double b, int parts, int d, double omega) {
  Nodes out;
  double x[8];
  double w[8];
  const double h = (b - a) / parts;
  for (int p = 0; p < parts; ++p) {
    detail::gauss_legendre_8(a + p * h, a + (p + 1) * h, x, w);
    for (int q = 0; q < 8; ++q) {
      out.r.push_back(x[q]);
      out.w.push_back(w[q] * omega * std::pow(x[q], d - 1));
    }
  }
  return out;
}

std::vector<double> quadrature_entries(const RadialGrid& grid, double s, double epsilon) {
  const std::size_t n = grid.size();
  const int d = grid.dim();
  const auto edges = grid.edges();
  const auto vol = grid.volumes();
  const double omega = unit_sphere_area(d);

  std::vector<Nodes> coarse(n);
  for (std::size_t i = 0; i < n; ++i) coarse[i] = shell_nodes(edges[i], edges[i + 1], 1, d, omega);

  std::vector<double> k(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const bool near = (j - i) <= 1;
      int parts = 1;
      if (near) {
        const double h = std::max(edges[i + 1] - edges[i], edges[j + 1] - edges[j]);
        parts = epsilon > 0.0 ? std::clamp(static_cast<int>(std::ceil(4.0 * h / epsilon)), 2, 32)
                              : 16;
      }
      const Nodes ni = near ? shell_nodes(edges[i], edges[i + 1], parts, d, omega) : coarse[i];
      const Nodes nj = near ? shell_nodes(edges[j], edges[j + 1], parts, d, omega) : coarse[j];
      double acc = 0.0;
      for (std::size_t a = 0; a < ni.r.size(); ++a) {
        double inner = 0.0;
        for (std::size_t b = 0; b < nj.r.size(); ++b) {
          inner += nj.w[b] * kernel_point(d, s, epsilon, ni.r[a], nj.r[b]);
        }
        acc += ni.w[a] * inner;
      }
      // The angular kernel already integrates over the sphere of y; divide
      // out one factor ω_d from the y-weights.
      const double value = acc / omega / (vol[i] * vol[j]);
      k[i * n + j] = value;
      k[j * n + i] = value;
    }
  }
  return k;
}

}  // namespace

RieszKernel::RieszKernel(GridPtr grid, double s, double epsilon, std::vector<double> entries)
    : grid_(std::move(grid)), s_(s), epsilon_(epsilon), entries_(std::move(entries)) {
  if (!grid_) throw ParameterError("RieszKernel: null grid");
  if (entries_.size() != grid_->size() * grid_->size()) {
    throw ParameterError("RieszKernel: entry count does not match grid");
  }
}

double RieszKernel::max_asymmetry() const {
  const std::size_t n = size();
  double worst = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      scale = std::max(scale, std::abs(entries_[i * n + j]));
      if (j > i) worst = std::max(worst, std::abs(entries_[i * n + j] - entries_[j * n + i]));
    }
  }
  return scale > 0.0 ? worst / scale : 0.0;
}

RieszKernel RieszKernel::with_entry(std::size_t i, std::size_t j, double value) const {
  std::vector<double> e = entries_;
  e.at(i * size() + j) = value;
  return RieszKernel(grid_, s_, epsilon_, std::move(e));
}

double kernel_point(int d, double s, double epsilon, double r, double rho) {
  const double alpha = d - 2.0 * s;
  const double e2 = epsilon * epsilon;
  if (r == 0.0 || rho == 0.0) {
    const double x = r + rho;
    return unit_sphere_area(d) * std::pow(x * x + e2, -0.5 * alpha);
  }
  if (d == 3) {
    const double beta = 2.0 - alpha;
    const double plus = std::pow((r + rho) * (r + rho) + e2, 0.5 * beta);
    const double minus = std::pow((r - rho) * (r - rho) + e2, 0.5 * beta);
    return 2.0 * std::numbers::pi / (r * rho * beta) * (plus - minus);
  }
  // ω_{d-1} ∫_0^π (r² + ρ² - 2rρ cos θ + ε²)^{-α/2} sin^{d-2}θ dθ
  static thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  const double ring = unit_sphere_area(d - 1);
  auto f = [&](double theta) {
    const double half = std::sin(0.5 * theta);
    // r² + ρ² - 2rρ cos θ = (r - ρ)² + 4rρ sin²(θ/2), free of cancellation.
    const double q = (r - rho) * (r - rho) + 4.0 * r * rho * half * half + e2;
    // r = ρ, ε = 0: integrable endpoint singularity, sampled only at θ = 0.
    if (q == 0.0) return 0.0;
    return std::pow(q, -0.5 * alpha) * std::pow(std::sin(theta), d - 2);
  };
  return ring * integrator.integrate(f, 0.0, std::numbers::pi, 1e-13);
}

double kernel_point_dr(int d, double s, double epsilon, double r, double rho) {
  const double alpha = d - 2.0 * s;
  if (d == 3 && r > 0.0 && rho > 0.0) {
    const double beta = 2.0 - alpha;
    const double e2 = epsilon * epsilon;
    const double sp = r + rho;
    const double sm = r - rho;
    const double qp = sp * sp + e2;
    const double qm = sm * sm + e2;
    const double a = std::pow(qp, 0.5 * beta);
    const double b = std::pow(qm, 0.5 * beta);
    const double da = beta * sp * std::pow(qp, 0.5 * beta - 1.0);
    const double db = qm > 0.0 ? beta * sm * std::pow(qm, 0.5 * beta - 1.0) : 0.0;
    return 2.0 * std::numbers::pi / (rho * beta) * ((da - db) / r - (a - b) / (r * r));
  }
  const double h = 1e-5 * std::max({r, rho, epsilon, 1e-3});
  const double lo = std::max(r - h, 0.0);
  return (kernel_point(d, s, epsilon, r + h, rho) - kernel_point(d, s, epsilon, lo, rho)) /
         (r + h - lo);
}

RieszKernel build_kernel(GridPtr grid, double s, double epsilon, KernelMethod method) {
  if (!grid) throw ParameterError("build_kernel: null grid");
  const int d = grid->dim();
  validate_kernel_params(d, s, epsilon);
  const bool closed_ok = d == 3 && epsilon == 0.0;
  if (method == KernelMethod::ClosedForm && !closed_ok) {
    throw ParameterError("build_kernel: closed form requires d = 3 and epsilon = 0");
  }
  const bool closed = method == KernelMethod::ClosedForm ||
                      (method == KernelMethod::Auto && closed_ok);
  std::vector<double> entries =
      closed ? closed_form_entries(*grid, s) : quadrature_entries(*grid, s, epsilon);
  return RieszKernel(std::move(grid), s, epsilon, std::move(entries));
}

void require_same_grid(const RadialGrid& a, const RadialGrid& b, const char* op) {
  if (!same_grid(a, b)) throw GridMismatch(std::string(op) + ": kernel and field grids differ");
}

namespace {

std::vector<double> mass_weights(const DensityField& u) {
  const auto vol = u.grid().volumes();
  std::vector<double> x(u.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = u[i] * vol[i];
  return x;
}

}  // namespace

std::vector<double> potential(const RieszKernel& kernel, const DensityField& u, double c) {
  require_same_grid(kernel.grid(), u.grid(), "potential");
  const std::vector<double> x = mass_weights(u);
  std::vector<double> phi(u.size());
  simd::gemv(kernel.entries(), x, phi);
  for (double& p : phi) p *= c;
  return phi;
}

double interaction_energy(const RieszKernel& kernel, const DensityField& u) {
  require_same_grid(kernel.grid(), u.grid(), "interaction_energy");
  const std::vector<double> x = mass_weights(u);
  return simd::quadratic_form(kernel.entries(), x);
}

std::vector<double> gradient_from_potential(const RadialGrid& grid, std::span<const double> phi) {
  const auto inv = grid.inv_center_spacing();
  std::vector<double> g(grid.size() + 1, 0.0);
  for (std::size_t k = 1; k < grid.size(); ++k) g[k] = (phi[k] - phi[k - 1]) * inv[k];
  return g;
}

std::vector<double> potential_gradient(const RieszKernel& kernel, const DensityField& u,
                                       double c) {
  const std::vector<double> phi = potential(kernel, u, c);
  return gradient_from_potential(u.grid(), phi);
}

std::uint64_t kernel_cache_key(int d, double s, double epsilon, std::size_t cells, double r_max) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  const std::int32_t dd = d;
  const std::uint64_t nn = cells;
  mix(&dd, sizeof dd);
  mix(&s, sizeof s);
  mix(&epsilon, sizeof epsilon);
  mix(&nn, sizeof nn);
  mix(&r_max, sizeof r_max);
  return h;
}

namespace {

constexpr char kMagic[8] = {'F', 'K', 'S', 'K', 'R', 'N', '0', '1'};

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
bool get(std::istream& in, T& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof v));
}

}  // namespace

void save_kernel(const std::string& path, const RieszKernel& kernel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  const RadialGrid& g = kernel.grid();
  out.write(kMagic, sizeof kMagic);
  put(out, static_cast<std::int32_t>(g.dim()));
  put(out, kernel.s());
  put(out, kernel.epsilon());
  put(out, static_cast<std::uint64_t>(g.size()));
  put(out, g.r_max());
  put(out, kernel_cache_key(g.dim(), kernel.s(), kernel.epsilon(), g.size(), g.r_max()));
  out.write(reinterpret_cast<const char*>(g.edges().data()),
            static_cast<std::streamsize>(g.edges().size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(kernel.entries().data()),
            static_cast<std::streamsize>(kernel.entries().size() * sizeof(double)));
  if (!out) throw std::runtime_error("failed writing kernel cache: " + path);
}

std::optional<RieszKernel> load_kernel(const std::string& path, GridPtr grid, double s,
                                       double epsilon) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    return std::nullopt;
  }
  std::int32_t d = 0;
  double fs = 0.0, feps = 0.0, rmax = 0.0;
  std::uint64_t n = 0, key = 0;
  if (!get(in, d) || !get(in, fs) || !get(in, feps) || !get(in, n) || !get(in, rmax) ||
      !get(in, key)) {
    return std::nullopt;
  }
  if (d != grid->dim() || fs != s || feps != epsilon || n != grid->size() ||
      rmax != grid->r_max() || key != kernel_cache_key(d, s, epsilon, n, rmax)) {
    return std::nullopt;
  }
  std::vector<double> edges(n + 1);
  std::vector<double> entries(n * n);
  in.read(reinterpret_cast<char*>(edges.data()), static_cast<std::streamsize>(edges.size() * 8));
  in.read(reinterpret_cast<char*>(entries.data()),
          static_cast<std::streamsize>(entries.size() * 8));
  if (!in) return std::nullopt;
  if (!std::equal(edges.begin(), edges.end(), grid->edges().begin())) return std::nullopt;
  return RieszKernel(std::move(grid), s, epsilon, std::move(entries));
}

RieszKernel cached_kernel(const std::string& dir, GridPtr grid, double s, double epsilon) {
  const auto key = kernel_cache_key(grid->dim(), s, epsilon, grid->size(), grid->r_max());
  std::ostringstream name;
  name << "kernel_" << std::hex << key << ".bin";
  const std::filesystem::path path = std::filesystem::path(dir) / name.str();
  if (auto k = load_kernel(path.string(), grid, s, epsilon)) return std::move(*k);
  RieszKernel k = build_kernel(grid, s, epsilon);
  std::filesystem::create_directories(dir);
  save_kernel(path.string(), k);
  return k;
}

}  // namespace fks
