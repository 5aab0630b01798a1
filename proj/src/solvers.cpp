#include "homlab/solvers.hpp"

#include <fftw3.h>

#include <mutex>

#include "homlab/fields.hpp"

namespace homlab {

namespace {
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

SolveStats pcg(const LinearMap& apply, const LinearMap& precondition, const std::vector<double>& b,
               std::vector<double>& x, double tol, int max_iter, const std::string& label,
               const std::function<void(std::vector<double>&)>& project) {
  const std::size_t n = b.size();
  const double bnorm = std::sqrt(dot_product(b, b));
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return {0, 0.0};
  }
  std::vector<double> r(n), z(n), p(n), q(n);
  apply(x, q);
  for (std::size_t k = 0; k < n; ++k) r[k] = b[k] - q[k];
  if (project) project(r);
  double rnorm = std::sqrt(dot_product(r, r));
  if (rnorm <= tol * bnorm) return {0, rnorm / bnorm};

  precondition(r, z);
  if (project) project(z);
  p = z;
  double rz = dot_product(r, z);
  for (int it = 1; it <= max_iter; ++it) {
    apply(p, q);
    const double pq = dot_product(p, q);
    if (!(pq > 0.0)) {
      throw SolverError(label + ": operator is not positive definite", rnorm / bnorm, it);
    }
    const double alpha = rz / pq;
    for (std::size_t k = 0; k < n; ++k) {
      x[k] += alpha * p[k];
      r[k] -= alpha * q[k];
    }
    if (project) project(r);
    rnorm = std::sqrt(dot_product(r, r));
    if (!std::isfinite(rnorm)) throw SolverError(label + ": residual is not finite", rnorm, it);
    if (rnorm <= tol * bnorm) return {it, rnorm / bnorm};
    precondition(r, z);
    if (project) project(z);
    const double rz_new = dot_product(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
  }
  throw SolverError(label + ": no convergence", rnorm / bnorm, max_iter);
}

DirichletPoissonInverse::DirichletPoissonInverse(int n, double h, double alpha1, double alpha2) : n_(n) {
  if (n < 2) throw ConfigError("sine-transform preconditioner needs n >= 2");
  const int m = n - 1;
  inv_eig_.resize(static_cast<std::size_t>(m) * m);
  // Unnormalised RODFT00 applied twice scales by (2n)^2 in two dimensions.
  const double norm = 1.0 / (4.0 * n * n);
  for (int q = 1; q <= m; ++q) {
    const double sq = std::sin(q * kPi / (2.0 * n));
    for (int p = 1; p <= m; ++p) {
      const double sp = std::sin(p * kPi / (2.0 * n));
      const double lam = 4.0 / (h * h) * (alpha1 * sp * sp + alpha2 * sq * sq);
      inv_eig_[static_cast<std::size_t>(q - 1) * m + (p - 1)] = norm / lam;
    }
  }
  std::lock_guard<std::mutex> lock(fftw_planner_mutex());
  buf_in_ = fftw_alloc_real(static_cast<std::size_t>(m) * m);
  buf_out_ = fftw_alloc_real(static_cast<std::size_t>(m) * m);
  plan_ = fftw_plan_r2r_2d(m, m, buf_in_, buf_out_, FFTW_RODFT00, FFTW_RODFT00, FFTW_ESTIMATE);
  if (!plan_) throw NumericalError("FFTW could not create a sine-transform plan");
}

DirichletPoissonInverse::~DirichletPoissonInverse() {
  std::lock_guard<std::mutex> lock(fftw_planner_mutex());
  if (plan_) fftw_destroy_plan(static_cast<fftw_plan>(plan_));
  fftw_free(buf_in_);
  fftw_free(buf_out_);
}

void DirichletPoissonInverse::apply(const std::vector<double>& r, std::vector<double>& z) {
  const int m = n_ - 1;
  const int stride = n_ + 1;
  for (int j = 1; j < n_; ++j) {
    for (int i = 1; i < n_; ++i) {
      buf_in_[static_cast<std::size_t>(j - 1) * m + (i - 1)] = r[static_cast<std::size_t>(j) * stride + i];
    }
  }
  auto plan = static_cast<fftw_plan>(plan_);
  fftw_execute_r2r(plan, buf_in_, buf_out_);
  const std::size_t count = static_cast<std::size_t>(m) * m;
  for (std::size_t k = 0; k < count; ++k) buf_out_[k] *= inv_eig_[k];
  fftw_execute_r2r(plan, buf_out_, buf_in_);
  z.assign(static_cast<std::size_t>(stride) * stride, 0.0);
  for (int j = 1; j < n_; ++j) {
    for (int i = 1; i < n_; ++i) {
      z[static_cast<std::size_t>(j) * stride + i] = buf_in_[static_cast<std::size_t>(j - 1) * m + (i - 1)];
    }
  }
}

}  // namespace homlab
