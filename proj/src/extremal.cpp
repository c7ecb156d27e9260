#include "fks/extremal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <random>

#include "fks/energy.hpp"
#include "fks/simd.hpp"

namespace fks {
namespace {

std::vector<double> weighted(std::span<const double> u, std::span<const double> vol) {
  std::vector<double> x(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) x[i] = u[i] * vol[i];
  return x;
}

double weighted_sum(std::span<const double> u, std::span<const double> vol) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * vol[i];
  return acc;
}

// Linear interpolation of cell-center samples at radius r, constant beyond the ends.
double interpolate(std::span<const double> centers, std::span<const double> f, double r) {
  if (r <= centers.front()) return f.front();
  if (r >= centers.back()) return f.back();
  const auto it = std::upper_bound(centers.begin(), centers.end(), r);
  const std::size_t j = static_cast<std::size_t>(it - centers.begin());
  const double t = (r - centers[j - 1]) / (centers[j] - centers[j - 1]);
  return (1.0 - t) * f[j - 1] + t * f[j];
}

// [((m-1)/m)(φ + λ)₊]^{1/(m-1)}
void el_candidate(std::span<const double> phi, double lambda, double m, std::vector<double>& out) {
  const double q = (m - 1.0) / m;
  const double e = 1.0 / (m - 1.0);
  out.resize(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const double b = q * (phi[i] + lambda);
    out[i] = b > 0.0 ? std::pow(b, e) : 0.0;
  }
}

double solve_lambda_for_mass(std::span<const double> phi, std::span<const double> vol, double m,
                             double target) {
  std::vector<double> cand;
  auto mass_at = [&](double lambda) {
    el_candidate(phi, lambda, m, cand);
    return weighted_sum(cand, vol);
  };
  const double phimax = *std::max_element(phi.begin(), phi.end());
  double lo = -phimax;
  double step = std::max(std::abs(phimax), 1.0);
  double hi = lo + step;
  while (mass_at(hi) < target) {
    lo = hi;
    step *= 2.0;
    hi = lo + step;
    if (!std::isfinite(hi)) throw ConvergenceError("el_fixed_point: cannot bracket λ̄", NAN, 0);
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (mass_at(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

void fill_summary(ExtremalResult& r, const RieszKernel& kernel, const ModelParams& params,
                  double threshold) {
  const DensityField& U = r.U;
  const RadialGrid& g = U.grid();
  r.M_star = mass(U);
  r.J_value = vhls_ratio(U, kernel, params);
  r.lambda_bar = el_multiplier(U, kernel, params, threshold);
  r.el_residual = el_residual(U, kernel, params, threshold);
  r.lambda_bar_closed = (1.0 / r.M_star) * (2.0 * params.s / (2.0 * params.s - params.d)) *
                        lp_integral(U, params.m);
  const double umax = lp_norm(U, std::numeric_limits<double>::infinity());
  std::size_t last = 0;
  for (std::size_t i = 0; i < U.size(); ++i) {
    if (U[i] > threshold * umax) last = i;
  }
  r.support_radius = g.edges()[last + 1];
}

std::vector<std::size_t> support_cells(const DensityField& U, double threshold) {
  const double umax = lp_norm(U, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> cells;
  if (!(umax > 0.0)) return cells;
  for (std::size_t i = 0; i < U.size(); ++i) {
    if (U[i] > threshold * umax) cells.push_back(i);
  }
  return cells;
}

}  // namespace

DensityField barenblatt_start(GridPtr grid, double mass_value, double radius) {
  if (!(mass_value > 0.0) || !(radius > 0.0)) {
    throw ParameterError("barenblatt_start: mass and radius must be > 0");
  }
  DensityField shape = sample_cell_averages(grid, [radius](double r) {
    const double x = r / radius;
    return std::max(1.0 - x * x, 0.0);
  });
  const double m0 = mass(shape);
  if (!(m0 > 0.0)) throw ParameterError("barenblatt_start: radius below grid resolution");
  return shape.scaled_by(mass_value / m0);
}

double el_multiplier(const DensityField& U, const RieszKernel& kernel, const ModelParams& params,
                     double support_threshold) {
  const auto cells = support_cells(U, support_threshold);
  if (cells.empty()) throw ParameterError("el_residual: empty support");
  const std::vector<double> mu = chemical_potential(U, kernel, params);
  const auto vol = U.grid().volumes();
  double num = 0.0, den = 0.0;
  for (std::size_t i : cells) {
    num += mu[i] * U[i] * vol[i];
    den += U[i] * vol[i];
  }
  return num / den;
}

double el_residual(const DensityField& U, const RieszKernel& kernel, const ModelParams& params,
                   double support_threshold) {
  const auto cells = support_cells(U, support_threshold);
  if (cells.empty()) throw ParameterError("el_residual: empty support");
  const std::vector<double> mu = chemical_potential(U, kernel, params);
  const double lambda = el_multiplier(U, kernel, params, support_threshold);
  double worst = 0.0;
  for (std::size_t i : cells) worst = std::max(worst, std::abs(mu[i] - lambda));
  return worst / std::abs(lambda);
}

ExtremalResult el_fixed_point(const RieszKernel& kernel, const ModelParams& params,
                              const DensityField& init, const ElOptions& options) {
  require_same_grid(kernel.grid(), init.grid(), "el_fixed_point");
  if (!(options.damping > 0.0 && options.damping <= 1.0)) {
    throw ParameterError("el_fixed_point: damping must lie in (0, 1]");
  }
  const double c = params.coupling();
  if (!(c > 0.0)) throw ParameterError("el_fixed_point: attraction must be on");
  const RadialGrid& g = kernel.grid();
  const auto vol = g.volumes();
  const auto centers = g.centers();
  const double m = params.m;
  const double theta = options.damping;
  const double init_mass = mass(init);
  if (!(init_mass > 0.0)) throw ParameterError("el_fixed_point: init must have positive mass");

  const bool pin_mass = options.pin == ElPin::Mass;
  if (pin_mass && !(options.mass_target && *options.mass_target > 0.0)) {
    throw ParameterError("el_fixed_point: ElPin::Mass needs a positive mass_target");
  }
  if (!pin_mass && !(options.support_radius > 0.0 && options.support_radius < g.r_max())) {
    throw ParameterError("el_fixed_point: support_radius must lie inside the grid");
  }
  // Support pinning works on the unit-mass shape; mass pinning on the target.
  const double m_ref = pin_mass ? *options.mass_target : 1.0;
  std::vector<double> U(init.values().begin(), init.values().end());
  for (double& x : U) x *= m_ref / init_mass;

  std::vector<double> phi(U.size()), cand;
  double change = std::numeric_limits<double>::infinity();
  double t_scale = 1.0;
  double lambda_t = 0.0;
  std::size_t it = 0;
  while (it < options.max_iter) {
    ++it;
    const std::vector<double> x = weighted(U, vol);
    simd::gemv(kernel.entries(), x, phi);
    if (pin_mass) {
      for (double& p : phi) p *= c;
      lambda_t = solve_lambda_for_mass(phi, vol, m, m_ref);
      el_candidate(phi, lambda_t, m, cand);
    } else {
      lambda_t = -interpolate(centers, phi, options.support_radius);
      el_candidate(phi, lambda_t, m, cand);
      const double cm = weighted_sum(cand, vol);
      if (!(cm > 0.0)) throw ConvergenceError("el_fixed_point: candidate vanished", change, it);
      t_scale = m_ref / cm;
      for (double& v : cand) v *= t_scale;
    }
    change = 0.0;
    for (std::size_t i = 0; i < U.size(); ++i) {
      const double next = (1.0 - theta) * U[i] + theta * cand[i];
      change += std::abs(next - U[i]) * vol[i];
      U[i] = next;
    }
    change /= m_ref;
    if (change < options.tol) break;
  }
  if (!(change < options.tol)) {
    throw ConvergenceError("el_fixed_point: no convergence within max_iter (last L1 change " +
                               std::to_string(change) + ")",
                           change, it);
  }
  if (!pin_mass) {
    // At the fixed point U = t·V0 with (m/(m-1))V0^{m-1} = K(Uv) + λ̃ on the
    // support, so aU solves the equation with coupling c iff c a^{2-m} = t^{m-1}.
    const double kappa = std::pow(t_scale, m - 1.0);
    const double a = std::pow(kappa / c, 1.0 / (2.0 - m));
    for (double& x : U) x *= a;
  }
  ExtremalResult r{DensityField(init.grid_ptr(), std::move(U))};
  r.iterations = it;
  r.last_change = change;
  fill_summary(r, kernel, params, options.support_threshold);
  return r;
}

namespace {

struct JParts {
  double J = 0.0, omega = 0.0, mass = 0.0, lm = 0.0;
};

JParts evaluate_j(std::span<const double> u, std::span<const double> vol,
                  const RieszKernel& kernel, const ModelParams& params, std::vector<double>& Kx) {
  JParts p;
  const std::vector<double> x = weighted(u, vol);
  Kx.resize(u.size());
  simd::gemv(kernel.entries(), x, Kx);
  for (std::size_t i = 0; i < u.size(); ++i) {
    p.omega += x[i] * Kx[i];
    p.mass += x[i];
    if (u[i] > 0.0) p.lm += std::pow(u[i], params.m) * vol[i];
  }
  p.J = p.omega / (std::pow(p.mass, 2.0 * params.s / params.d) * p.lm);
  return p;
}

DensityField normalized(const DensityField& u) { return u.scaled_by(1.0 / mass(u)); }

}  // namespace

VhlsSearch maximize_vhls(const RieszKernel& kernel, const ModelParams& params,
                         const VhlsOptions& options) {
  if (options.n_starts < 1) throw ParameterError("maximize_vhls: n_starts must be >= 1");
  const GridPtr& grid = kernel.grid_ptr();
  const auto vol = grid->volumes();
  const auto edges = grid->edges();
  const std::size_t n = grid->size();
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  VhlsSearch search{ExtremalResult{DensityField::zeros(grid)}, {}, {}, 0, 0.0};
  double best_J = -1.0;
  std::vector<double> Kx;

  for (std::size_t start = 0; start < options.n_starts; ++start) {
    const double radius = (0.15 + 0.45 * unit(rng)) * edges[n];
    std::vector<double> raw(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (edges[i] < radius) raw[i] = unit(rng) + 1e-3;
    }
    DensityField u = normalized(rearrange_on_grid(DensityField(grid, raw)));
    JParts cur = evaluate_j(u.values(), vol, kernel, params, Kx);
    std::vector<double> hist{cur.J};
    double eta = 0.05;
    std::size_t quiet = 0;
    std::vector<double> g(n), trial(n);
    for (std::size_t it = 0; it < options.max_iter && eta > 1e-14; ++it) {
      // L² gradient of log J.
      double gmax = 0.0;
      double umax = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double dl = u[i] > 0.0 ? params.m * std::pow(u[i], params.m - 1.0) / cur.lm : 0.0;
        g[i] = 2.0 * Kx[i] / cur.omega - (2.0 * params.s / params.d) / cur.mass - dl;
        gmax = std::max(gmax, std::abs(g[i]));
        umax = std::max(umax, u[i]);
      }
      if (!(gmax > 0.0)) break;
      bool accepted = false;
      while (eta > 1e-14) {
        for (std::size_t i = 0; i < n; ++i) {
          trial[i] = std::max(u[i] + eta * umax * g[i] / gmax, 0.0);
        }
        DensityField cand(grid, trial);
        if (!(mass(cand) > 0.0)) {
          eta *= 0.5;
          continue;
        }
        cand = normalized(rearrange_on_grid(cand));
        std::vector<double> Kx_c;
        const JParts next = evaluate_j(cand.values(), vol, kernel, params, Kx_c);
        if (next.J > cur.J) {
          const double gain = (next.J - cur.J) / cur.J;
          quiet = gain < options.rel_tol ? quiet + 1 : 0;
          u = std::move(cand);
          cur = next;
          Kx = std::move(Kx_c);
          hist.push_back(cur.J);
          eta = std::min(eta * 1.5, 0.5);
          accepted = true;
          break;
        }
        eta *= 0.5;
      }
      if (!accepted || quiet >= options.patience) break;
    }
    search.start_J.push_back(cur.J);
    search.history.push_back(std::move(hist));
    if (cur.J > best_J) {
      best_J = cur.J;
      search.best_start = start;
      search.best.U = u;
    }
  }
  ExtremalResult& b = search.best;
  b.J_value = best_J;
  b.M_star = mass(b.U);
  b.el_residual = std::numeric_limits<double>::quiet_NaN();
  b.lambda_bar = std::numeric_limits<double>::quiet_NaN();
  b.lambda_bar_closed = std::numeric_limits<double>::quiet_NaN();
  b.iterations = search.history[search.best_start].size();
  const double umax = lp_norm(b.U, std::numeric_limits<double>::infinity());
  std::size_t last = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (b.U[i] > 1e-8 * umax) last = i;
  }
  b.support_radius = edges[last + 1];
  search.M_star_measured = critical_mass(params.d, params.s, best_J);
  return search;
}

DensityField blowup_initial_data(const DensityField& U, double M) {
  if (!(M > 0.0)) throw ParameterError("blowup_initial_data: M must be > 0");
  const double mu = mass(U);
  if (!(mu > 0.0)) throw ParameterError("blowup_initial_data: profile has zero mass");
  return U.scaled_by(M / mu);
}

void write_extremal_json(const std::string& path, const ExtremalResult& r, double M_target) {
  nlohmann::ordered_json j;
  j["J_value"] = r.J_value;
  j["lambda_bar"] = r.lambda_bar;
  j["lambda_bar_closed"] = r.lambda_bar_closed;
  j["residual"] = r.el_residual;
  j["M_target"] = M_target;
  j["M_star"] = r.M_star;
  j["support_radius"] = r.support_radius;
  j["iterations"] = r.iterations;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace fks
