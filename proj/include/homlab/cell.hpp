#pragma once

// Periodic cell problem, homogenized tensor and flux correctors.
//
// Discretisation on PeriodicGrid(n): flux form with a11 sampled on x-edges
// (i + 1/2, j), a22 on y-edges (i, j + 1/2) and a12 at nodes (centred cross
// differences). Staggered quantities are stored in CellFields indexed by the
// node to their lower-left: x-edge (i + 1/2, j) -> (i, j), y-edge (i, j + 1/2) -> (i, j),
// cell centre (i + 1/2, j + 1/2) -> (i, j).

#include <array>

#include "homlab/fields.hpp"

namespace homlab {

/// Edge and node samples of A on a periodic grid.
struct CellCoefficients {
  CellField cx;   // a11 on x-edges
  CellField cy;   // a22 on y-edges
  CellField c12;  // a12 at nodes
  bool has_cross = false;

  static CellCoefficients sample(const CoefficientField& a, PeriodicGrid grid);
};

/// Discrete -div(A grad u) on the periodic grid.
void apply_cell_operator(const CellCoefficients& c, const std::vector<double>& u, std::vector<double>& out);

struct Corrector {
  PeriodicGrid grid;
  std::array<CellField, 2> chi;
  double residual_norm = 0.0;
  int iterations = 0;
};

/// Solves L chi_j = -L y_j with mean-zero projection, relative residual <= tol.
/// Throws ConfigError for tol outside (0, 1e-6] and SolverError on stagnation.
Corrector solve_corrector(const CoefficientField& a, PeriodicGrid grid, double tol = 1e-10);

struct HomogenizedTensor {
  Mat2 a_hat;
  double asymmetry = 0.0;  // |a12 - a21| before symmetrisation
};

/// Cell average of a_ij + a_ik d_k chi_j with the stencil's own edge fluxes.
/// Throws ConsistencyError if the eigenvalues leave [mu - tol, 1/mu + tol].
HomogenizedTensor homogenize(const CoefficientField& a, const Corrector& chi, double tol = 1e-8);

/// Homogenized tensor for the constant matrix `m` (no correctors needed).
inline HomogenizedTensor constant_tensor(const Mat2& m) { return {m.symmetric_part(), 0.0}; }

struct FluxCorrector {
  PeriodicGrid grid;
  /// b[i][j]: b_1j on x-edges, b_2j on y-edges.
  std::array<std::array<CellField, 2>, 2> b;
  /// F[k][i][j] at cell centres, F_kij = -F_ikj.
  std::array<std::array<std::array<CellField, 2>, 2>, 2> F;
  /// ||d_k F_kij - b_ij|| / ||b|| in l2 over all (i, j) and both edge lattices
  /// (absolute when b vanishes).
  double divergence_residual = 0.0;
  /// max over (i, j) of the absolute cell mean of b_ij.
  double max_mean = 0.0;
};

FluxCorrector flux_correctors(const CoefficientField& a, const Corrector& chi, const HomogenizedTensor& a_hat,
                              double tol = 1e-10);

/// Periodic-cell derivatives used by the expanded Carleman right-hand side:
/// dchi[j][k] = d_{y_k} chi_j and div_chiA[j][k] = sum_i d_{y_i}(chi_j a_ik), both
/// by centred differences at the nodes.
struct CorrectorDerivatives {
  std::array<std::array<CellField, 2>, 2> dchi;
  std::array<std::array<CellField, 2>, 2> div_chiA;

  static CorrectorDerivatives compute(const CoefficientField& a, const Corrector& chi);
};

}  // namespace homlab
