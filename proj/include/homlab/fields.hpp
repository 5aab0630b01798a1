#pragma once

// Grids, nodal fields, coefficient families and ball/annulus quadrature.
//
// Layout convention: node (i, j) has x-index i (fastest) and y-index j.
// Domain grids are node-centred on [-L, L]^2 with n cells per side, so there
// are n + 1 nodes per side. Periodic grids have n nodes per side on [0, 1)^2.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "homlab/errors.hpp"

namespace homlab {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  double operator[](int k) const { return k == 0 ? x : y; }
  double& operator[](int k) { return k == 0 ? x : y; }

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
  friend double norm(Vec2 a) { return std::hypot(a.x, a.y); }
};

/// General 2x2 matrix, row-major entries a_ij.
struct Mat2 {
  double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

  static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static constexpr Mat2 diagonal(double d1, double d2) { return {d1, 0.0, 0.0, d2}; }

  double operator()(int i, int j) const {
    return i == 0 ? (j == 0 ? a11 : a12) : (j == 0 ? a21 : a22);
  }
  Vec2 operator*(Vec2 v) const { return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y}; }
  Mat2 transpose() const { return {a11, a21, a12, a22}; }
  Mat2 symmetric_part() const {
    const double off = 0.5 * (a12 + a21);
    return {a11, off, off, a22};
  }
  /// Frobenius inner product A : B.
  friend double contract(const Mat2& a, const Mat2& b) {
    return a.a11 * b.a11 + a.a12 * b.a12 + a.a21 * b.a21 + a.a22 * b.a22;
  }
};

/// Eigenvalues (ascending) of the symmetric part of `m`.
std::pair<double, double> symmetric_eigenvalues(const Mat2& m);

// ---------------------------------------------------------------------------
// Grids

class PeriodicGrid {
 public:
  static constexpr int dim = 2;

  /// Throws ConfigError unless n >= 8 is a power of two.
  explicit PeriodicGrid(int n);

  int n() const { return n_; }
  double h() const { return 1.0 / n_; }
  int nodes_per_side() const { return n_; }
  std::size_t node_count() const { return static_cast<std::size_t>(n_) * n_; }
  int wrap(int i) const { return ((i % n_) + n_) % n_; }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(wrap(j)) * n_ + static_cast<std::size_t>(wrap(i));
  }
  Vec2 node(int i, int j) const { return {i * h(), j * h()}; }

  friend bool operator==(const PeriodicGrid&, const PeriodicGrid&) = default;

 private:
  int n_;
};

class DomainGrid {
 public:
  static constexpr int dim = 2;

  /// Square [-L, L]^2 with n cells per side. Throws ConfigError on L <= 0 or n < 2.
  DomainGrid(double half_extent, int n);

  double half_extent() const { return L_; }
  int n() const { return n_; }
  double h() const { return 2.0 * L_ / n_; }
  int nodes_per_side() const { return n_ + 1; }
  std::size_t node_count() const {
    return static_cast<std::size_t>(n_ + 1) * static_cast<std::size_t>(n_ + 1);
  }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(n_ + 1) + static_cast<std::size_t>(i);
  }
  double coord(int i) const { return -L_ + i * h(); }
  Vec2 node(int i, int j) const { return {coord(i), coord(j)}; }
  bool is_boundary(int i, int j) const { return i == 0 || j == 0 || i == n_ || j == n_; }

  friend bool operator==(const DomainGrid&, const DomainGrid&) = default;

 private:
  double L_;
  int n_;
};

/// Nodal real values on a grid.
template <class Grid>
class Field {
 public:
  explicit Field(Grid grid, double fill = 0.0) : grid_(grid), values_(grid.node_count(), fill) {}
  Field(Grid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.node_count()) {
      throw ConfigError("field value count does not match grid node count");
    }
  }

  template <class Fn>
  static Field sampled(Grid grid, Fn&& fn) {
    Field f(grid);
    const int m = grid.nodes_per_side();
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < m; ++i) f.values_[grid.index(i, j)] = fn(grid.node(i, j));
    }
    return f;
  }

  const Grid& grid() const { return grid_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& storage() { return values_; }

  double operator()(int i, int j) const { return values_[grid_.index(i, j)]; }
  double& operator()(int i, int j) { return values_[grid_.index(i, j)]; }

  bool all_finite() const {
    for (double v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

 private:
  Grid grid_;
  std::vector<double> values_;
};

using DomainField = Field<DomainGrid>;
using CellField = Field<PeriodicGrid>;

// ---------------------------------------------------------------------------
// Coefficients

/// 1-periodic symmetric matrix field A(y) with certified ellipticity constant mu
/// (mu|xi|^2 <= A xi.xi <= |xi|^2/mu) and Lipschitz constant lip.
class CoefficientField {
 public:
  using Evaluator = std::function<Mat2(Vec2)>;

  CoefficientField(std::string name, Evaluator eval, double mu, double lip);

  Mat2 operator()(Vec2 y) const { return eval_(y); }
  const std::string& name() const { return name_; }
  double mu() const { return mu_; }
  double lip() const { return lip_; }
  /// True when the family is known to have a12 == a21 == 0 everywhere.
  bool diagonal() const { return diagonal_; }
  CoefficientField& set_diagonal(bool d) {
    diagonal_ = d;
    return *this;
  }

 private:
  std::string name_;
  Evaluator eval_;
  double mu_;
  double lip_;
  bool diagonal_ = false;
};

/// Constants of the growth condition int_B3 |u|^2 <= M max{(int_B2 |u|^2)^N1, (int_B2 |u|^2)^(1/N2)}.
struct GrowthParams {
  double M = 10.0;
  double N1 = 2.0;
  double N2 = 2.0;

  /// Throws ConfigError unless M > 0, N1 >= 1, N2 >= 1.
  void validate() const;
};

/// identity, laminate (a(y1) I with a(t) = 1/(2 + sin 2 pi t)) or
/// smooth2d ((1.5 + 0.5 sin 2 pi y1 sin 2 pi y2) I). Unknown names throw ConfigError.
CoefficientField builtin_coefficient(std::string_view name);

struct AssumptionCheck {
  double mu_hat = 0.0;
  double lip_hat = 0.0;
};

/// Samples A on a deterministic lattice of at least `samples` points of the unit
/// cell and checks symmetry, ellipticity and periodicity. mu_hat is the largest
/// mu with mu <= lambda_min(A) and lambda_max(A) <= 1/mu over the samples.
AssumptionCheck verify_assumptions(const CoefficientField& a, int samples = 10000);

// ---------------------------------------------------------------------------
// Quadrature over balls and annuli

namespace detail {

/// Fraction (of h^2) of the dual cell of node (i, j) lying in r_in <= |x| < r_out
/// and inside the domain, from an m x m subsample of the cell.
double dual_cell_fraction(const DomainGrid& g, int i, int j, double r_in, double r_out, int m);

void check_annulus(const DomainGrid& g, double r_in, double r_out, int m);

}  // namespace detail

/// Calls visit(i, j, frac) for every node whose dual cell meets the annulus
/// r_in <= |x| < r_out, where frac in (0, 1] is the covered fraction of the cell
/// (exact 1 for cells fully inside, m x m subsampling otherwise).
template <class Visitor>
void visit_annulus(const DomainGrid& g, double r_in, double r_out, int m, Visitor&& visit) {
  detail::check_annulus(g, r_in, r_out, m);
  const double h = g.h();
  const double L = g.half_extent();
  const double reach = r_out + h;
  const int lo = std::max(0, static_cast<int>(std::floor((L - reach) / h)));
  const int hi = std::min(g.n(), static_cast<int>(std::ceil((L + reach) / h)));
  for (int j = lo; j <= hi; ++j) {
    const double cy = g.coord(j);
    const double dy_near = std::max(0.0, std::abs(cy) - 0.5 * h);
    const double dy_far = std::abs(cy) + 0.5 * h;
    for (int i = lo; i <= hi; ++i) {
      const double cx = g.coord(i);
      const double dx_near = std::max(0.0, std::abs(cx) - 0.5 * h);
      const double dx_far = std::abs(cx) + 0.5 * h;
      const double dmin = std::hypot(dx_near, dy_near);
      const double dmax = std::hypot(dx_far, dy_far);
      if (dmax < r_in || dmin >= r_out) continue;
      double frac;
      if (dmin >= r_in && dmax < r_out && !g.is_boundary(i, j)) {
        frac = 1.0;
      } else {
        frac = detail::dual_cell_fraction(g, i, j, r_in, r_out, m);
        if (frac == 0.0) continue;
      }
      visit(i, j, frac);
    }
  }
}

/// Midpoint rule over the annulus r_in <= |x| < r_out: sum of integrand(i, j) * h^2 *
/// (fraction of the node's dual cell inside the annulus).
template <class Integrand>
double integrate_annulus(const DomainGrid& g, double r_in, double r_out, int m, Integrand&& integrand) {
  double total = 0.0;
  visit_annulus(g, r_in, r_out, m, [&](int i, int j, double frac) { total += frac * integrand(i, j); });
  return total * g.h() * g.h();
}

/// Integral of f over B_r: nodal values on cells inside the ball, bilinear values
/// averaged over the covered m x m subsamples on cut cells. Throws GeometryError
/// if B_r is not inside the domain.
double ball_integral(const DomainField& f, double r, int m = 4);

/// ||f||_{L^2(B_r)} with the same quadrature.
double ball_l2_norm(const DomainField& f, double r, int m = 4);

enum class WeightPower { w, w_phi, w_phi3, w_x2_phi2 };

/// Integral over r_in <= |x| < r_out of f * P(phi) * exp(2 tau (phi - phi_ref)),
/// phi = exp(-lambda |x|^2), where P is the selected power. The constant factor
/// exp(2 tau phi_ref) is removed from every weighted quantity; phi_ref = 1 (the
/// maximum of phi) keeps the weight in (0, 1].
double annulus_weighted_integral(const DomainField& f, double r_in, double r_out, double lambda,
                                 double tau, WeightPower power, int m = 4, double phi_ref = 1.0);

// ---------------------------------------------------------------------------
// Finite differences and interpolation

/// Centred differences in the interior, second-order one-sided at domain edges.
Vec2 gradient_at(const DomainField& f, int i, int j);

/// Second derivatives (f_xx, f_xy, f_yy) by centred differences; interior nodes only.
struct Hessian2 {
  double xx = 0.0, xy = 0.0, yy = 0.0;
};
Hessian2 hessian_at(const DomainField& f, int i, int j);

/// Bilinear interpolation; points outside the grid are clamped to it.
double bilinear(const DomainField& f, Vec2 x);

/// Bilinear interpolation of a periodic field at any y (wrapped into the cell).
/// Points within 1e-9 cells of a node return the nodal value exactly.
double periodic_bilinear(const CellField& f, Vec2 y);

}  // namespace homlab
