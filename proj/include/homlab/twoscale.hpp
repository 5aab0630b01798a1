#pragma once

// Recovery of the homogenized solution from u_eps, the first-order two-scale
// expansion, and convergence studies over an eps sweep.

#include <functional>
#include <string>
#include <vector>

#include "homlab/cell.hpp"
#include "homlab/elliptic.hpp"

namespace homlab {

using ScalarFunction = std::function<double(Vec2)>;

struct EpsilonSolution {
  double eps = 0.0;
  DomainField u;
  SolveStats stats;
};

/// Solves -div(A(x/eps) grad u) = 0 on the square with u = g on its edge.
EpsilonSolution solve_epsilon_problem(const CoefficientField& a, double eps, const DomainGrid& grid,
                                      const ScalarFunction& g, double tol = 1e-10);

struct RecoveredU0 {
  DomainField u0;
  double r0 = 0.0;
  double ring_energy = 0.0;
  double mean_ring_energy = 0.0;
  SolveStats stats;
};

/// Picks r0 among 16 equispaced radii in [11/4, 23/8] minimising the ring
/// energy h^2 sum (u^2 + |grad u|^2) over nodes with r - h/2 <= |x| < r + h/2
/// (first candidate on ties), then solves the homogenized problem on B_r0 with
/// data interpolated bilinearly from u_eps. The disc solve runs on a grid of
/// spacing about `solve_spacing` (never finer than u_eps's grid) and is
/// resampled bicubically; nodes outside B_r0 keep the values of u_eps.
/// Throws GeometryError when the domain does not contain B_{23/8} with margin.
RecoveredU0 recover_u0(const DomainField& u_eps, const HomogenizedTensor& a_hat, double tol = 1e-10,
                       double solve_spacing = 0.01);

/// u0 + eps chi_j(x / eps) d_j u0 (periodic bilinear chi, centred d_j u0).
DomainField expansion(const DomainField& u0, const Corrector& chi, double eps);

struct ConvergenceRow {
  double eps = 0.0;
  int n = 0;
  double l2_err = 0.0;     // ||u_eps - u0||_{L2(B_{11/4})}
  double h1_err = 0.0;     // ||grad(u_eps - u0 - eps chi d u0)||_{L2(B_{5/2})}
  double u_norm_b3 = 0.0;  // ||u_eps||_{L2(B_3)}
  double constant = 0.0;   // l2_err / (sqrt(eps) u_norm_b3)
  double r0 = 0.0;
  int iterations = 0;
};

struct ConvergenceStudy {
  std::vector<ConvergenceRow> rows;  // sorted by decreasing eps
  double l2_slope = 0.0;
  double h1_slope = 0.0;
  bool floor = false;  // chi == 0: errors sit at the discretisation floor, slopes are not meaningful
};

/// Errors of a single eps from an already computed u_eps.
ConvergenceRow convergence_row(const EpsilonSolution& sol, const RecoveredU0& rec, const Corrector& chi);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Sweep over eps_list (strictly decreasing) on matched grids with
/// chi.grid.n() cells per period. `a_hat` should be the tensor of the same
/// discrete cell problem. Rows may be computed concurrently on `jobs` workers.
ConvergenceStudy convergence_study(const CoefficientField& a, const ScalarFunction& g, const std::vector<double>& eps_list,
                                   double half_extent, const Corrector& chi, const HomogenizedTensor& a_hat,
                                   double tol = 1e-10, int jobs = 1);

}  // namespace homlab
