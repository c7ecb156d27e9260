#pragma once

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fks {

/// Finite-volume partition of the ball [0, R_max] in R^d into radial shells.
///
/// Cell i is the shell r_i <= |x| < r_{i+1}. Cell centers are the volume
/// centroids of the shells, and every geometric moment needed downstream
/// (shell volume, exact shell mean of |x|^2, face areas) is precomputed.
class RadialGrid {
 public:
  static RadialGrid uniform(int d, std::size_t cells, double r_max);
  static RadialGrid from_edges(int d, std::vector<double> edges);

  int dim() const { return d_; }
  std::size_t size() const { return volumes_.size(); }
  double r_max() const { return edges_.back(); }

  std::span<const double> edges() const { return edges_; }
  std::span<const double> volumes() const { return volumes_; }
  std::span<const double> centers() const { return centers_; }
  /// Shell average of |x|^2.
  std::span<const double> r2_means() const { return r2_means_; }
  /// ω_d r_k^{d-1} for k = 0..N.
  std::span<const double> face_areas() const { return face_areas_; }
  /// 1 / (center_k - center_{k-1}) on interior faces, 0 on the two boundary faces.
  std::span<const double> inv_center_spacing() const { return inv_spacing_; }

  /// Grid with every edge multiplied by factor.
  RadialGrid scaled(double factor) const;

  /// Index of the cell containing radius r (clamped to the last cell).
  std::size_t locate(double r) const;

  double total_volume() const;

  friend bool operator==(const RadialGrid& a, const RadialGrid& b) {
    return a.d_ == b.d_ && a.edges_ == b.edges_;
  }

 private:
  RadialGrid(int d, std::vector<double> edges);

  int d_ = 3;
  std::vector<double> edges_;
  std::vector<double> volumes_;
  std::vector<double> centers_;
  std::vector<double> r2_means_;
  std::vector<double> face_areas_;
  std::vector<double> inv_spacing_;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

GridPtr make_uniform_grid(int d, std::size_t cells, double r_max);

/// Non-negative, piecewise-constant radial density (cell averages).
class DensityField {
 public:
  DensityField(GridPtr grid, std::vector<double> values);

  static DensityField zeros(GridPtr grid);
  static DensityField constant(GridPtr grid, double value);

  const RadialGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Returns a copy with values multiplied by a >= 0.
  DensityField scaled_by(double a) const;

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

/// True when both fields live on the same partition.
bool same_grid(const RadialGrid& a, const RadialGrid& b);

double mass(const DensityField& u);

/// (Σ u_i^p v_i)^{1/p}; p = +inf gives max_i u_i. Throws ParameterError if p < 1.
double lp_norm(const DensityField& u, double p);

/// Σ u_i^p v_i (the p-th power of the norm, without the root).
double lp_integral(const DensityField& u, double p);

double second_moment(const DensityField& u);

/// Exact symmetric decreasing rearrangement of a piecewise-constant field.
///
/// Cell values are sorted in descending order and each value is placed on a
/// centered shell whose volume equals the volume it occupied before. The
/// result is exactly equimeasurable with the input. It lives on the original
/// grid when the sorted volumes reproduce its edges (e.g. the input is
/// already non-increasing, or the cells have equal volume), and on a new
/// grid otherwise.
DensityField rearrange(const DensityField& u);

/// Rearrangement projected back onto the original grid: sorted value blocks
/// refill the shells from the origin outward, and a shell straddled by two
/// blocks receives their volume-weighted average. Mass is preserved exactly;
/// higher L^p norms may decrease through the averaging.
DensityField rearrange_on_grid(const DensityField& u);

/// λ u(μ r) on the grid with radii divided by μ. Mass scales by λ μ^{-d}.
DensityField scale(const DensityField& u, double lambda, double mu);

/// Cell averages of A (γ² + r²)^{-(2d-β)/2} with β = d - 2s.
DensityField hls_extremizer_profile(GridPtr grid, double A, double gamma, double s);

/// Cell averages of a radial function f(r), by 8-point Gauss-Legendre per cell
/// in the measure r^{d-1} dr.
template <class F>
DensityField sample_cell_averages(GridPtr grid, F&& f);

/// CSV with header `r_center,volume,value`, one row per cell.
void write_field_csv(std::ostream& out, const DensityField& u);
void write_field_csv(const std::string& path, const DensityField& u);

/// Reads a field CSV; the grid is reconstructed from the listed centers and
/// volumes (edges are recovered from the cumulative volumes).
DensityField read_field_csv(const std::string& path, int d);
DensityField read_field_csv(std::istream& in, int d);

/// Reads a field CSV onto an existing grid; the listed volumes must match the
/// grid's shell volumes to 1e-10 relative.
DensityField read_field_csv(const std::string& path, GridPtr grid);

namespace detail {
void gauss_legendre_8(double a, double b, double* nodes, double* weights);
}

template <class F>
DensityField sample_cell_averages(GridPtr grid, F&& f) {
  const auto edges = grid->edges();
  const int d = grid->dim();
  std::vector<double> values(grid->size());
  double nodes[8];
  double weights[8];
  for (std::size_t i = 0; i < values.size(); ++i) {
    detail::gauss_legendre_8(edges[i], edges[i + 1], nodes, weights);
    double num = 0.0;
    double den = 0.0;
    for (int q = 0; q < 8; ++q) {
      const double jac = weights[q] * std::pow(nodes[q], d - 1);
      num += jac * f(nodes[q]);
      den += jac;
    }
    values[i] = num / den;
  }
  return DensityField(std::move(grid), std::move(values));
}

}  // namespace fks
