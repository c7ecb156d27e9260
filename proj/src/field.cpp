#include "fks/field.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "fks/model.hpp"

namespace fks {

namespace detail {

void gauss_legendre_8(double a, double b, double* nodes, double* weights) {
  static constexpr double x[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                  0.9602898564975363};
  static constexpr double w[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                  0.1012285362903763};
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  for (int k = 0; k < 4; ++k) {
    nodes[2 * k] = mid - half * x[k];
    nodes[2 * k + 1] = mid + half * x[k];
    weights[2 * k] = half * w[k];
    weights[2 * k + 1] = half * w[k];
  }
}

}  // namespace detail

RadialGrid::RadialGrid(int d, std::vector<double> edges) : d_(d), edges_(std::move(edges)) {
  if (d_ < 1) throw ParameterError("RadialGrid: dimension must be >= 1");
  if (edges_.size() < 2) throw ParameterError("RadialGrid: need at least one cell");
  if (edges_.front() != 0.0) throw ParameterError("RadialGrid: first edge must be 0");
  for (std::size_t i = 1; i < edges_.size(); ++i) {
    if (!(edges_[i] > edges_[i - 1]) || !std::isfinite(edges_[i])) {
      throw ParameterError("RadialGrid: edges must be finite and strictly increasing");
    }
  }
  const std::size_t n = edges_.size() - 1;
  const double omega = unit_sphere_area(d_);
  volumes_.resize(n);
  centers_.resize(n);
  r2_means_.resize(n);
  face_areas_.resize(n + 1);
  inv_spacing_.assign(n + 1, 0.0);
  for (std::size_t k = 0; k <= n; ++k) face_areas_[k] = omega * std::pow(edges_[k], d_ - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = edges_[i];
    const double b = edges_[i + 1];
    const double ad = std::pow(a, d_);
    const double bd = std::pow(b, d_);
    volumes_[i] = omega * (bd - ad) / d_;
    centers_[i] = d_ / (d_ + 1.0) * (bd * b - ad * a) / (bd - ad);
    r2_means_[i] = d_ / (d_ + 2.0) * (bd * b * b - ad * a * a) / (bd - ad);
  }
  for (std::size_t k = 1; k < n; ++k) inv_spacing_[k] = 1.0 / (centers_[k] - centers_[k - 1]);
}

RadialGrid RadialGrid::uniform(int d, std::size_t cells, double r_max) {
  if (cells == 0) throw ParameterError("RadialGrid::uniform: need at least one cell");
  if (!(r_max > 0.0) || !std::isfinite(r_max)) {
    throw ParameterError("RadialGrid::uniform: r_max must be positive");
  }
  std::vector<double> edges(cells + 1);
  for (std::size_t k = 0; k <= cells; ++k) edges[k] = r_max * static_cast<double>(k) / cells;
  edges.back() = r_max;
  return RadialGrid(d, std::move(edges));
}

RadialGrid RadialGrid::from_edges(int d, std::vector<double> edges) {
  return RadialGrid(d, std::move(edges));
}

RadialGrid RadialGrid::scaled(double factor) const {
  if (!(factor > 0.0)) throw ParameterError("RadialGrid::scaled: factor must be positive");
  std::vector<double> edges = edges_;
  for (double& e : edges) e *= factor;
  return RadialGrid(d_, std::move(edges));
}

std::size_t RadialGrid::locate(double r) const {
  auto it = std::upper_bound(edges_.begin(), edges_.end(), r);
  if (it == edges_.begin()) return 0;
  const auto idx = static_cast<std::size_t>(std::distance(edges_.begin(), it)) - 1;
  return std::min(idx, size() - 1);
}

double RadialGrid::total_volume() const {
  return unit_ball_volume(d_) * std::pow(r_max(), d_);
}

GridPtr make_uniform_grid(int d, std::size_t cells, double r_max) {
  return std::make_shared<const RadialGrid>(RadialGrid::uniform(d, cells, r_max));
}

DensityField::DensityField(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) throw ParameterError("DensityField: null grid");
  if (values_.size() != grid_->size()) {
    throw ParameterError("DensityField: value count does not match grid");
  }
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ParameterError("DensityField: values must be finite and non-negative");
    }
  }
}

DensityField DensityField::zeros(GridPtr grid) {
  const std::size_t n = grid->size();
  return DensityField(std::move(grid), std::vector<double>(n, 0.0));
}

DensityField DensityField::constant(GridPtr grid, double value) {
  const std::size_t n = grid->size();
  return DensityField(std::move(grid), std::vector<double>(n, value));
}

DensityField DensityField::scaled_by(double a) const {
  std::vector<double> v = values_;
  for (double& x : v) x *= a;
  return DensityField(grid_, std::move(v));
}

bool same_grid(const RadialGrid& a, const RadialGrid& b) { return &a == &b || a == b; }

double mass(const DensityField& u) { return lp_integral(u, 1.0); }

double lp_integral(const DensityField& u, double p) {
  const auto vol = u.grid().volumes();
  const auto val = u.values();
  double acc = 0.0;
  if (p == 1.0) {
    for (std::size_t i = 0; i < val.size(); ++i) acc += val[i] * vol[i];
  } else {
    for (std::size_t i = 0; i < val.size(); ++i) {
      if (val[i] > 0.0) acc += std::pow(val[i], p) * vol[i];
    }
  }
  return acc;
}

double lp_norm(const DensityField& u, double p) {
  if (!(p >= 1.0)) throw ParameterError("lp_norm: p must be >= 1");
  if (std::isinf(p)) {
    const auto val = u.values();
    return val.empty() ? 0.0 : *std::max_element(val.begin(), val.end());
  }
  const double integral = lp_integral(u, p);
  return p == 1.0 ? integral : std::pow(integral, 1.0 / p);
}

double second_moment(const DensityField& u) {
  const auto vol = u.grid().volumes();
  const auto r2 = u.grid().r2_means();
  const auto val = u.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < val.size(); ++i) acc += r2[i] * val[i] * vol[i];
  return acc;
}

namespace {

// Cells ordered by decreasing value; ties keep radial order so that an
// already non-increasing field maps onto itself.
std::vector<std::size_t> descending_order(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return order;
}

}  // namespace

DensityField rearrange(const DensityField& u) {
  const RadialGrid& grid = u.grid();
  const auto vol = grid.volumes();
  const auto val = u.values();
  const auto order = descending_order(val);

  const bool identity = std::is_sorted(order.begin(), order.end());
  bool same_volumes = true;
  for (std::size_t k = 0; k < order.size() && same_volumes; ++k) {
    same_volumes = vol[order[k]] == vol[k];
  }
  std::vector<double> sorted(val.size());
  for (std::size_t k = 0; k < order.size(); ++k) sorted[k] = val[order[k]];
  if (identity || same_volumes) return DensityField(u.grid_ptr(), std::move(sorted));

  const int d = grid.dim();
  const double omega = unit_sphere_area(d);
  std::vector<double> edges(order.size() + 1, 0.0);
  double rd = 0.0;  // r^d of the running outer edge
  for (std::size_t k = 0; k < order.size(); ++k) {
    rd += d * vol[order[k]] / omega;
    edges[k + 1] = std::pow(rd, 1.0 / d);
  }
  // Pin the outer edge to R_max; the cumulative sum only differs by rounding.
  edges.back() = grid.r_max();
  for (std::size_t k = order.size() - 1; k > 0 && edges[k] >= edges[k + 1]; --k) {
    edges[k] = std::nextafter(edges[k + 1], 0.0);
  }
  auto new_grid = std::make_shared<const RadialGrid>(RadialGrid::from_edges(d, std::move(edges)));
  return DensityField(std::move(new_grid), std::move(sorted));
}

DensityField rearrange_on_grid(const DensityField& u) {
  const auto vol = u.grid().volumes();
  const auto val = u.values();
  const auto order = descending_order(val);
  std::vector<double> out(val.size(), 0.0);

  std::size_t cell = 0;
  double room = vol.empty() ? 0.0 : vol[0];  // unfilled volume of the current shell
  double filled_mass = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double value = val[order[k]];
    double left = vol[order[k]];
    while (left > 0.0 && cell < out.size()) {
      const double take = std::min(left, room);
      filled_mass += value * take;
      left -= take;
      room -= take;
      if (room <= vol[cell] * 1e-14) {
        out[cell] = filled_mass / vol[cell];
        filled_mass = 0.0;
        ++cell;
        room = cell < out.size() ? vol[cell] : 0.0;
      }
    }
  }
  if (cell < out.size()) out[cell] = filled_mass / vol[cell];
  return DensityField(u.grid_ptr(), std::move(out));
}

DensityField scale(const DensityField& u, double lambda, double mu) {
  if (!(lambda > 0.0) || !(mu > 0.0)) throw ParameterError("scale: lambda and mu must be positive");
  auto grid = std::make_shared<const RadialGrid>(u.grid().scaled(1.0 / mu));
  std::vector<double> v(u.values().begin(), u.values().end());
  for (double& x : v) x *= lambda;
  return DensityField(std::move(grid), std::move(v));
}

DensityField hls_extremizer_profile(GridPtr grid, double A, double gamma, double s) {
  const int d = grid->dim();
  const double beta = d - 2.0 * s;
  if (!(beta > 0.0 && beta < d)) throw ParameterError("hls_extremizer_profile: need 0 < d-2s < d");
  if (!(A > 0.0)) throw ParameterError("hls_extremizer_profile: A must be positive");
  if (gamma == 0.0) throw ParameterError("hls_extremizer_profile: gamma must be non-zero");
  const double expo = -(2.0 * d - beta) / 2.0;
  const double g2 = gamma * gamma;
  return sample_cell_averages(std::move(grid),
                              [&](double r) { return A * std::pow(g2 + r * r, expo); });
}

void write_field_csv(std::ostream& out, const DensityField& u) {
  const auto c = u.grid().centers();
  const auto v = u.grid().volumes();
  out << "r_center,volume,value\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < u.size(); ++i) out << c[i] << ',' << v[i] << ',' << u[i] << '\n';
}

void write_field_csv(const std::string& path, const DensityField& u) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_field_csv(out, u);
}

DensityField read_field_csv(std::istream& in, int d) {
  std::string line;
  if (!std::getline(in, line) || line != "r_center,volume,value") {
    throw ParameterError("field CSV: expected header r_center,volume,value");
  }
  std::vector<double> volumes;
  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    double c = 0.0, v = 0.0, x = 0.0;
    char sep1 = 0, sep2 = 0;
    if (!(row >> c >> sep1 >> v >> sep2 >> x) || sep1 != ',' || sep2 != ',') {
      throw ParameterError("field CSV: malformed row at line " + std::to_string(lineno));
    }
    volumes.push_back(v);
    values.push_back(x);
  }
  if (volumes.empty()) throw ParameterError("field CSV: no rows");
  const double omega = unit_sphere_area(d);
  std::vector<double> edges(volumes.size() + 1, 0.0);
  double rd = 0.0;
  for (std::size_t i = 0; i < volumes.size(); ++i) {
    rd += d * volumes[i] / omega;
    edges[i + 1] = std::pow(rd, 1.0 / d);
  }
  auto grid = std::make_shared<const RadialGrid>(RadialGrid::from_edges(d, std::move(edges)));
  return DensityField(std::move(grid), std::move(values));
}

DensityField read_field_csv(const std::string& path, int d) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  return read_field_csv(in, d);
}

DensityField read_field_csv(const std::string& path, GridPtr grid) {
  const DensityField loaded = read_field_csv(path, grid->dim());
  if (loaded.size() != grid->size()) {
    throw ParameterError("field CSV: " + path + " has " + std::to_string(loaded.size()) +
                         " cells, grid has " + std::to_string(grid->size()));
  }
  const auto want = grid->volumes();
  const auto got = loaded.grid().volumes();
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (std::abs(got[i] - want[i]) > 1e-10 * want[i]) {
      throw ParameterError("field CSV: " + path + " volume mismatch at row " +
                           std::to_string(i + 2));
    }
  }
  return DensityField(std::move(grid),
                      std::vector<double>(loaded.values().begin(), loaded.values().end()));
}

}  // namespace fks
