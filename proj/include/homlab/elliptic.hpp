#pragma once

// Dirichlet problems for -div(A grad u) = 0 on the square [-L, L]^2 or on an
// embedded disc, plus boundary-data generators and exact harmonic oracles.

#include <cstdint>
#include <optional>
#include <vector>

#include "homlab/cell.hpp"
#include "homlab/fields.hpp"
#include "homlab/solvers.hpp"

namespace homlab {

/// Active region of a Dirichlet problem: the open square (boundary = its edge
/// nodes) or the open disc |x| < radius (boundary = circle crossings of grid lines).
struct BoundaryMask {
  enum class Kind { square, disc };
  Kind kind = Kind::square;
  double radius = 0.0;

  static BoundaryMask square() { return {Kind::square, 0.0}; }
  static BoundaryMask disc(double r) { return {Kind::disc, r}; }
};

/// Coupling of an active node to a boundary point at distance theta * h along a grid line.
struct BoundaryLink {
  std::size_t node;
  double weight;  // a / (theta h^2), added to the node's diagonal
  std::size_t point;
};

class DiscreteOperator {
 public:
  const DomainGrid& grid() const { return grid_; }
  const BoundaryMask& mask() const { return mask_; }

  /// Interior nodes carrying unknowns.
  const std::vector<char>& active() const { return active_; }
  bool is_active(int i, int j) const { return active_[grid_.index(i, j)] != 0; }

  /// Points where boundary data is prescribed; BoundaryData values align with these.
  const std::vector<Vec2>& boundary_points() const { return boundary_points_; }

  /// Applies the operator to a full node array; the output is zero off the
  /// active set. On square masks inactive (boundary) entries of `u` are read as
  /// given, so a lift may be applied. On disc masks only active entries couple and
  /// each crossing adds its link weight to the diagonal.
  void apply(const std::vector<double>& u, std::vector<double>& out) const;

  /// Adds the disc crossing terms weight * g to `rhs` (no-op for square masks).
  void add_boundary_terms(const std::vector<double>& g, std::vector<double>& rhs) const;

  /// Edge means used by the sine-transform preconditioner.
  double mean_a11() const { return mean_a11_; }
  double mean_a22() const { return mean_a22_; }

  double edge_x(int i, int j) const { return cx_[static_cast<std::size_t>(j) * grid_.n() + i]; }
  double edge_y(int i, int j) const { return cy_[static_cast<std::size_t>(j) * (grid_.n() + 1) + i]; }

  friend DiscreteOperator assemble(const CoefficientField&, double, const DomainGrid&, const BoundaryMask&);
  friend DiscreteOperator assemble_homogenized(const HomogenizedTensor&, const DomainGrid&, const BoundaryMask&);

 private:
  explicit DiscreteOperator(const DomainGrid& g, const BoundaryMask& m) : grid_(g), mask_(m) {}
  void build_mask();

  DomainGrid grid_;
  BoundaryMask mask_;
  std::vector<double> cx_;   // a11 at x-edges (i + 1/2, j), n x (n + 1)
  std::vector<double> cy_;   // a22 at y-edges (i, j + 1/2), (n + 1) x n
  std::vector<double> c12_;  // a12 at nodes; empty when identically zero
  std::vector<char> active_;
  std::vector<Vec2> boundary_points_;
  std::vector<BoundaryLink> links_;
  std::vector<double> link_diag_;  // per node, sum of link weights
  double mean_a11_ = 1.0;
  double mean_a22_ = 1.0;
};

/// Flux-form stencil with A(x / eps) at edge midpoints. Throws ConfigError
/// unless 0 < eps <= 1 and ResolutionError when h > eps / 8.
DiscreteOperator assemble(const CoefficientField& a, double eps, const DomainGrid& grid,
                          const BoundaryMask& mask = BoundaryMask::square());

/// Constant-coefficient operator; uses the centred cross stencil when a12 != 0.
/// A disc mask with a12 != 0 throws ConfigError.
DiscreteOperator assemble_homogenized(const HomogenizedTensor& a_hat, const DomainGrid& grid,
                                      const BoundaryMask& mask = BoundaryMask::square());

/// Prescribed values at DiscreteOperator::boundary_points(), in order.
struct BoundaryData {
  std::vector<double> values;

  template <class Fn>
  static BoundaryData sample(const DiscreteOperator& op, Fn&& g) {
    BoundaryData d;
    d.values.reserve(op.boundary_points().size());
    for (const Vec2& p : op.boundary_points()) d.values.push_back(g(p));
    return d;
  }
};

struct DirichletSolution {
  DomainField u;
  SolveStats stats;
};

/// Solves op u = 0 with u = g on the boundary points. Square masks: boundary
/// nodes hold g exactly. Disc masks: nodes outside the disc are set to
/// `exterior` when given, otherwise zero. Throws SolverError on stagnation.
DirichletSolution solve_dirichlet(const DiscreteOperator& op, const BoundaryData& g, double tol = 1e-10,
                                  const DomainField* exterior = nullptr);

/// Re (x1 + i x2)^k.
struct HarmonicPolynomial {
  int k = 0;

  explicit HarmonicPolynomial(int degree);
  double operator()(Vec2 x) const;
  Vec2 gradient(Vec2 x) const;
};

/// Finite Fourier series in the arclength s of the square's perimeter
/// (period 8L, s = 0 at (-L, -L), counter-clockwise): 1 + sum_m (a_m cos + b_m sin)
/// with a_m, b_m uniform in [-1, 1] / m^2 drawn from a seeded mt19937_64.
class FourierBoundaryData {
 public:
  FourierBoundaryData(double half_extent, std::uint64_t seed, int modes = 4);

  double at_arclength(double s) const;
  /// Value at the perimeter point nearest to x.
  double operator()(Vec2 x) const;
  std::uint64_t seed() const { return seed_; }

 private:
  double L_;
  std::uint64_t seed_;
  std::vector<double> a_, b_;
};

/// Grid aligned with the period lattice: h = eps / cells_per_period and nodes
/// at x / eps in (1 / cells_per_period) Z^2. Throws ConfigError when L / eps is not
/// an integer multiple of 1 / cells_per_period.
DomainGrid matched_grid(double half_extent, double eps, int cells_per_period);

}  // namespace homlab
