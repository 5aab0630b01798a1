#include "homlab/elliptic.hpp"

#include <complex>
#include <random>

namespace homlab {

namespace {

constexpr double kResolutionSlack = 1e-12;
constexpr double kMinTheta = 1e-3;

}  // namespace

void DiscreteOperator::build_mask() {
  const int n = grid_.n();
  const double h = grid_.h();
  active_.assign(grid_.node_count(), 0);
  link_diag_.assign(grid_.node_count(), 0.0);
  boundary_points_.clear();
  links_.clear();

  if (mask_.kind == BoundaryMask::Kind::square) {
    for (int j = 1; j < n; ++j)
      for (int i = 1; i < n; ++i) active_[grid_.index(i, j)] = 1;
    // Boundary nodes in index order.
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i)
        if (grid_.is_boundary(i, j)) boundary_points_.push_back(grid_.node(i, j));
    return;
  }

  const double r = mask_.radius;
  if (!(r > 0.0) || r >= grid_.half_extent() - h) {
    throw GeometryError("embedded disc of radius " + std::to_string(r) + " must lie strictly inside the domain");
  }
  const double r2 = r * r;
  // Nodes closer than kMinTheta * h to the circle act as boundary points, which
  // bounds every link weight by a / (kMinTheta h^2).
  const double r_active = r - kMinTheta * h;
  for (int j = 1; j < n; ++j) {
    for (int i = 1; i < n; ++i) {
      const Vec2 x = grid_.node(i, j);
      if (dot(x, x) < r_active * r_active) active_[grid_.index(i, j)] = 1;
    }
  }
  const int di[4] = {1, -1, 0, 0};
  const int dj[4] = {0, 0, 1, -1};
  for (int j = 1; j < n; ++j) {
    for (int i = 1; i < n; ++i) {
      if (!is_active(i, j)) continue;
      const Vec2 x = grid_.node(i, j);
      for (int d = 0; d < 4; ++d) {
        if (is_active(i + di[d], j + dj[d])) continue;
        // Solve |x + t e| = r for t in (0, h].
        const double along = di[d] != 0 ? di[d] * x.x : dj[d] * x.y;
        const double across = di[d] != 0 ? x.y : x.x;
        const double t = -along + std::sqrt(std::max(0.0, r2 - across * across));
        const double theta = std::clamp(t / h, kMinTheta, 1.0);
        const Vec2 p = x + (theta * h) * Vec2{static_cast<double>(di[d]), static_cast<double>(dj[d])};
        const double a = di[d] != 0 ? (di[d] > 0 ? edge_x(i, j) : edge_x(i - 1, j))
                                    : (dj[d] > 0 ? edge_y(i, j) : edge_y(i, j - 1));
        const double w = a / (theta * h * h);
        links_.push_back({grid_.index(i, j), w, boundary_points_.size()});
        link_diag_[grid_.index(i, j)] += w;
        boundary_points_.push_back(p);
      }
    }
  }
}

void DiscreteOperator::apply(const std::vector<double>& u, std::vector<double>& out) const {
  const int n = grid_.n();
  const std::size_t stride = static_cast<std::size_t>(n) + 1;
  const double ih2 = 1.0 / (grid_.h() * grid_.h());
  const bool disc = mask_.kind == BoundaryMask::Kind::disc;
  out.assign(u.size(), 0.0);
  for (int j = 1; j < n; ++j) {
    const std::size_t row = static_cast<std::size_t>(j) * stride;
    const double* cxr = &cx_[static_cast<std::size_t>(j) * n];
    const double* cyr = &cy_[static_cast<std::size_t>(j) * stride];
    const double* cyd = &cy_[static_cast<std::size_t>(j - 1) * stride];
    for (int i = 1; i < n; ++i) {
      const std::size_t k = row + i;
      if (!active_[k]) continue;
      const double uc = u[k];
      double v;
      if (!disc) {
        v = cxr[i - 1] * (uc - u[k - 1]) - cxr[i] * (u[k + 1] - uc) + cyd[i] * (uc - u[k - stride]) -
            cyr[i] * (u[k + stride] - uc);
      } else {
        // Only active neighbours couple; crossings enter through the link diagonal.
        v = 0.0;
        if (active_[k - 1]) v += cxr[i - 1] * (uc - u[k - 1]);
        if (active_[k + 1]) v -= cxr[i] * (u[k + 1] - uc);
        if (active_[k - stride]) v += cyd[i] * (uc - u[k - stride]);
        if (active_[k + stride]) v -= cyr[i] * (u[k + stride] - uc);
      }
      out[k] = v * ih2;
    }
  }
  if (disc) {
    for (int j = 1; j < n; ++j)
      for (int i = 1; i < n; ++i) {
        const std::size_t k = grid_.index(i, j);
        if (active_[k]) out[k] += link_diag_[k] * u[k];
      }
    return;
  }
  if (c12_.empty()) return;
  // -d1(a12 d2 u) - d2(a12 d1 u), centred; q evaluated on nodes with interior neighbours.
  const double h = grid_.h();
  std::vector<double> q1(u.size(), 0.0), q2(u.size(), 0.0);
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      const std::size_t k = grid_.index(i, j);
      if (i > 0 && i < n) q1[k] = c12_[k] * (u[k + 1] - u[k - 1]) / (2.0 * h);
      if (j > 0 && j < n) q2[k] = c12_[k] * (u[k + stride] - u[k - stride]) / (2.0 * h);
    }
  }
  for (int j = 1; j < n; ++j) {
    for (int i = 1; i < n; ++i) {
      const std::size_t k = grid_.index(i, j);
      out[k] -= (q2[k + 1] - q2[k - 1]) / (2.0 * h) + (q1[k + stride] - q1[k - stride]) / (2.0 * h);
    }
  }
}

void DiscreteOperator::add_boundary_terms(const std::vector<double>& g, std::vector<double>& rhs) const {
  for (const BoundaryLink& l : links_) rhs[l.node] += l.weight * g[l.point];
}

DiscreteOperator assemble(const CoefficientField& a, double eps, const DomainGrid& grid, const BoundaryMask& mask) {
  if (!(eps > 0.0 && eps <= 1.0)) throw ConfigError("eps must lie in (0, 1]");
  const double h = grid.h();
  if (h > eps / 8.0 * (1.0 + kResolutionSlack)) {
    const int required = static_cast<int>(std::ceil(2.0 * grid.half_extent() * 8.0 / eps - 1e-9));
    throw ResolutionError("grid spacing h = " + std::to_string(h) + " does not resolve eps = " + std::to_string(eps) +
                              " (needs h <= eps/8, i.e. n >= " + std::to_string(required) + ")",
                          required);
  }
  DiscreteOperator op(grid, mask);
  const int n = grid.n();
  const std::size_t stride = static_cast<std::size_t>(n) + 1;
  op.cx_.resize(static_cast<std::size_t>(n) * stride);
  op.cy_.resize(stride * static_cast<std::size_t>(n));
  double s11 = 0.0, s22 = 0.0;
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Vec2 x{grid.coord(i) + 0.5 * h, grid.coord(j)};
      const double v = a((1.0 / eps) * x).a11;
      op.cx_[static_cast<std::size_t>(j) * n + i] = v;
      s11 += v;
    }
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i <= n; ++i) {
      const Vec2 x{grid.coord(i), grid.coord(j) + 0.5 * h};
      const double v = a((1.0 / eps) * x).a22;
      op.cy_[static_cast<std::size_t>(j) * stride + i] = v;
      s22 += v;
    }
  }
  op.mean_a11_ = s11 / static_cast<double>(op.cx_.size());
  op.mean_a22_ = s22 / static_cast<double>(op.cy_.size());
  if (!a.diagonal()) {
    std::vector<double> c12(grid.node_count());
    bool any = false;
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) {
        const double v = a((1.0 / eps) * grid.node(i, j)).a12;
        c12[grid.index(i, j)] = v;
        any = any || v != 0.0;
      }
    if (any) {
      if (mask.kind == BoundaryMask::Kind::disc) {
        throw ConfigError("embedded-disc problems require a12 == 0");
      }
      op.c12_ = std::move(c12);
    }
  }
  op.build_mask();
  return op;
}

DiscreteOperator assemble_homogenized(const HomogenizedTensor& a_hat, const DomainGrid& grid,
                                      const BoundaryMask& mask) {
  const Mat2 m = a_hat.a_hat.symmetric_part();
  if (m.a12 != 0.0 && mask.kind == BoundaryMask::Kind::disc) {
    throw ConfigError("embedded-disc problems require a12 == 0");
  }
  DiscreteOperator op(grid, mask);
  const int n = grid.n();
  const std::size_t stride = static_cast<std::size_t>(n) + 1;
  op.cx_.assign(static_cast<std::size_t>(n) * stride, m.a11);
  op.cy_.assign(stride * static_cast<std::size_t>(n), m.a22);
  op.mean_a11_ = m.a11;
  op.mean_a22_ = m.a22;
  if (m.a12 != 0.0) op.c12_.assign(grid.node_count(), m.a12);
  op.build_mask();
  return op;
}

DirichletSolution solve_dirichlet(const DiscreteOperator& op, const BoundaryData& g, double tol,
                                  const DomainField* exterior) {
  if (!(tol > 0.0 && tol <= 1e-8)) throw ConfigError("Dirichlet tolerance must lie in (0, 1e-8]");
  const DomainGrid& grid = op.grid();
  if (g.values.size() != op.boundary_points().size()) {
    throw ConfigError("boundary data has " + std::to_string(g.values.size()) + " values, expected " +
                      std::to_string(op.boundary_points().size()));
  }
  for (double v : g.values)
    if (!std::isfinite(v)) throw ConfigError("boundary data contains non-finite values");

  const int n = grid.n();
  const std::size_t count = grid.node_count();
  const auto& active = op.active();
  std::vector<double> rhs(count, 0.0);
  std::vector<double> lift(count, 0.0);

  if (op.mask().kind == BoundaryMask::Kind::square) {
    std::size_t p = 0;
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i)
        if (grid.is_boundary(i, j)) lift[grid.index(i, j)] = g.values[p++];
    op.apply(lift, rhs);
    for (double& v : rhs) v = -v;
  } else {
    op.add_boundary_terms(g.values, rhs);
  }

  DirichletPoissonInverse pre(n, grid.h(), op.mean_a11(), op.mean_a22());
  const LinearMap apply = [&op](const std::vector<double>& u, std::vector<double>& out) {
    op.apply(u, out);
  };
  const LinearMap precondition = [&pre, &active](const std::vector<double>& r, std::vector<double>& z) {
    pre.apply(r, z);
    for (std::size_t k = 0; k < z.size(); ++k)
      if (!active[k]) z[k] = 0.0;
  };
  std::vector<double> x(count, 0.0);
  const int cap = std::max(1000, 20 * n);
  const SolveStats stats = pcg(apply, precondition, rhs, x, tol, cap, "Dirichlet solve");

  DomainField u(grid);
  auto& s = u.storage();
  if (op.mask().kind == BoundaryMask::Kind::square) {
    for (std::size_t k = 0; k < count; ++k) s[k] = active[k] ? x[k] : lift[k];
  } else {
    for (std::size_t k = 0; k < count; ++k) {
      if (active[k]) {
        s[k] = x[k];
      } else if (exterior) {
        if (!(exterior->grid() == grid)) throw ConfigError("exterior field lives on a different grid");
        s[k] = exterior->values()[k];
      }
    }
  }
  return {std::move(u), stats};
}

HarmonicPolynomial::HarmonicPolynomial(int degree) : k(degree) {
  if (degree < 0) throw ConfigError("harmonic polynomial degree must be >= 0");
}

double HarmonicPolynomial::operator()(Vec2 x) const {
  return std::pow(std::complex<double>(x.x, x.y), k).real();
}

Vec2 HarmonicPolynomial::gradient(Vec2 x) const {
  if (k == 0) return {0.0, 0.0};
  const std::complex<double> d = static_cast<double>(k) * std::pow(std::complex<double>(x.x, x.y), k - 1);
  return {d.real(), -d.imag()};
}

FourierBoundaryData::FourierBoundaryData(double half_extent, std::uint64_t seed, int modes)
    : L_(half_extent), seed_(seed) {
  if (!(half_extent > 0.0)) throw ConfigError("Fourier boundary data needs L > 0");
  if (modes < 1) throw ConfigError("Fourier boundary data needs at least one mode");
  std::mt19937_64 rng(seed);
  // (x >> 11) * 2^-53 keeps the draws identical across standard libraries.
  auto uniform = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0; };
  for (int m = 1; m <= modes; ++m) {
    const double scale = 1.0 / (static_cast<double>(m) * m);
    a_.push_back(uniform() * scale);
    b_.push_back(uniform() * scale);
  }
}

double FourierBoundaryData::at_arclength(double s) const {
  const double period = 8.0 * L_;
  double v = 1.0;
  for (std::size_t m = 0; m < a_.size(); ++m) {
    const double w = 2.0 * kPi * static_cast<double>(m + 1) * s / period;
    v += a_[m] * std::cos(w) + b_[m] * std::sin(w);
  }
  return v;
}

double FourierBoundaryData::operator()(Vec2 x) const {
  const double L = L_;
  const double px = std::clamp(x.x, -L, L);
  const double py = std::clamp(x.y, -L, L);
  // Distance to each side; pick the nearest (ties resolved in traversal order).
  const double d[4] = {py + L, L - px, L - py, px + L};
  int side = 0;
  for (int k = 1; k < 4; ++k)
    if (d[k] < d[side]) side = k;
  double s = 0.0;
  switch (side) {
    case 0: s = px + L; break;                // bottom, left to right
    case 1: s = 2.0 * L + (py + L); break;    // right, bottom to top
    case 2: s = 4.0 * L + (L - px); break;    // top, right to left
    case 3: s = 6.0 * L + (L - py); break;    // left, top to bottom
  }
  return at_arclength(s);
}

DomainGrid matched_grid(double half_extent, double eps, int cells_per_period) {
  if (!(eps > 0.0 && eps <= 1.0)) throw ConfigError("eps must lie in (0, 1]");
  if (cells_per_period < 8 || (cells_per_period & (cells_per_period - 1)) != 0) {
    throw ConfigError("cells_per_period must be a power of two >= 8");
  }
  const double half_cells = half_extent * cells_per_period / eps;
  const double rounded = std::round(half_cells);
  if (std::abs(half_cells - rounded) > 1e-9 * std::max(1.0, half_cells)) {
    throw ConfigError("L / eps must be a multiple of 1 / cells_per_period for a matched grid");
  }
  return DomainGrid(half_extent, 2 * static_cast<int>(rounded));
}

}  // namespace homlab
