#pragma once

// Krylov solvers and the fast sine-transform preconditioner.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "homlab/errors.hpp"

namespace homlab {

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
};

using LinearMap = std::function<void(const std::vector<double>&, std::vector<double>&)>;

inline double dot_product(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

/// Preconditioned conjugate gradients for an SPD map on the subspace fixed by
/// `project` (applied to every residual and search direction; may be empty).
/// `x` holds the initial guess and receives the solution. Stops when
/// ||b - Ax|| <= tol ||b||; throws SolverError after max_iter iterations.
SolveStats pcg(const LinearMap& apply, const LinearMap& precondition, const std::vector<double>& b,
               std::vector<double>& x, double tol, int max_iter, const std::string& label,
               const std::function<void(std::vector<double>&)>& project = {});

/// Exact inverse of the constant-coefficient operator
/// -(alpha1 d_xx + alpha2 d_yy) with homogeneous Dirichlet data on a square grid
/// of n cells per side and spacing h, applied to full (n+1)^2 node arrays
/// (boundary entries of the output are zero). Uses a type-I discrete sine transform.
class DirichletPoissonInverse {
 public:
  DirichletPoissonInverse(int n, double h, double alpha1, double alpha2);
  ~DirichletPoissonInverse();
  DirichletPoissonInverse(const DirichletPoissonInverse&) = delete;
  DirichletPoissonInverse& operator=(const DirichletPoissonInverse&) = delete;

  void apply(const std::vector<double>& r, std::vector<double>& z);

 private:
  int n_;
  std::vector<double> inv_eig_;
  double* buf_in_ = nullptr;
  double* buf_out_ = nullptr;
  void* plan_ = nullptr;
};

}  // namespace homlab
