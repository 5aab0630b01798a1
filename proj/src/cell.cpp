#include "homlab/cell.hpp"

#include <numeric>

#include "homlab/solvers.hpp"

namespace homlab {

namespace {

void project_mean_zero(std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (double& x : v) x -= mean;
}

double mean_of(const CellField& f) {
  const auto v = f.values();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

using Pair = std::array<CellField, 2>;
using Quad = std::array<Pair, 2>;

Quad quad_of(const PeriodicGrid& g) {
  return {Pair{CellField(g), CellField(g)}, Pair{CellField(g), CellField(g)}};
}

SolveStats periodic_cg(const LinearMap& apply, const std::vector<double>& rhs, std::vector<double>& x, double tol,
                       int cap, const std::string& label) {
  std::vector<double> b = rhs;
  project_mean_zero(b);
  const LinearMap identity = [](const std::vector<double>& r, std::vector<double>& z) { z = r; };
  auto stats = pcg(apply, identity, b, x, tol, cap, label, project_mean_zero);
  project_mean_zero(x);
  return stats;
}

// -Laplacian on a periodic lattice of the grid's shape.
void apply_neg_laplacian(const PeriodicGrid& g, const std::vector<double>& u, std::vector<double>& out) {
  const int n = g.n();
  const double ih2 = 1.0 / (g.h() * g.h());
  out.resize(u.size());
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double c = u[g.index(i, j)];
      out[g.index(i, j)] =
          ih2 * (4.0 * c - u[g.index(i + 1, j)] - u[g.index(i - 1, j)] - u[g.index(i, j + 1)] - u[g.index(i, j - 1)]);
    }
  }
}

}  // namespace

CellCoefficients CellCoefficients::sample(const CoefficientField& a, PeriodicGrid grid) {
  CellCoefficients c{CellField(grid), CellField(grid), CellField(grid), false};
  const int n = grid.n();
  const double h = grid.h();
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      c.cx(i, j) = a(Vec2{(i + 0.5) * h, j * h}).a11;
      c.cy(i, j) = a(Vec2{i * h, (j + 0.5) * h}).a22;
      if (!a.diagonal()) {
        c.c12(i, j) = a(Vec2{i * h, j * h}).a12;
        if (c.c12(i, j) != 0.0) c.has_cross = true;
      }
    }
  }
  return c;
}

void apply_cell_operator(const CellCoefficients& c, const std::vector<double>& u, std::vector<double>& out) {
  const PeriodicGrid& g = c.cx.grid();
  const int n = g.n();
  const double h = g.h();
  const double ih2 = 1.0 / (h * h);
  out.resize(u.size());
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double uc = u[g.index(i, j)];
      const double fe = c.cx(i, j) * (u[g.index(i + 1, j)] - uc);
      const double fw = c.cx(i - 1, j) * (uc - u[g.index(i - 1, j)]);
      const double fn = c.cy(i, j) * (u[g.index(i, j + 1)] - uc);
      const double fs = c.cy(i, j - 1) * (uc - u[g.index(i, j - 1)]);
      out[g.index(i, j)] = ih2 * (fw - fe + fs - fn);
    }
  }
  if (!c.has_cross) return;
  // -d1(a12 d2 u) - d2(a12 d1 u) with centred differences.
  std::vector<double> q1(u.size()), q2(u.size());
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double a = c.c12(i, j);
      q1[g.index(i, j)] = a * (u[g.index(i + 1, j)] - u[g.index(i - 1, j)]) / (2.0 * h);
      q2[g.index(i, j)] = a * (u[g.index(i, j + 1)] - u[g.index(i, j - 1)]) / (2.0 * h);
    }
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      out[g.index(i, j)] -= (q2[g.index(i + 1, j)] - q2[g.index(i - 1, j)]) / (2.0 * h) +
                            (q1[g.index(i, j + 1)] - q1[g.index(i, j - 1)]) / (2.0 * h);
    }
  }
}

Corrector solve_corrector(const CoefficientField& a, PeriodicGrid grid, double tol) {
  if (!(tol > 0.0 && tol <= 1e-6)) throw ConfigError("corrector tolerance must lie in (0, 1e-6]");
  const CellCoefficients c = CellCoefficients::sample(a, grid);
  const int n = grid.n();
  const double h = grid.h();
  const LinearMap apply = [&c](const std::vector<double>& u, std::vector<double>& out) {
    apply_cell_operator(c, u, out);
  };

  Corrector out{grid, {CellField(grid), CellField(grid)}, 0.0, 0};
  for (int jdir = 0; jdir < 2; ++jdir) {
    std::vector<double> rhs(grid.node_count());
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        double v;
        if (jdir == 0) {
          v = (c.cx(i, j) - c.cx(i - 1, j)) / h;
          if (c.has_cross) v += (c.c12(i, j + 1) - c.c12(i, j - 1)) / (2.0 * h);
        } else {
          v = (c.cy(i, j) - c.cy(i, j - 1)) / h;
          if (c.has_cross) v += (c.c12(i + 1, j) - c.c12(i - 1, j)) / (2.0 * h);
        }
        rhs[grid.index(i, j)] = v;
      }
    }
    std::vector<double> x(grid.node_count(), 0.0);
    const auto stats = periodic_cg(apply, rhs, x, tol, 50 * n, "corrector solve");
    out.chi[jdir] = CellField(grid, std::move(x));
    out.residual_norm = std::max(out.residual_norm, stats.relative_residual);
    out.iterations = std::max(out.iterations, stats.iterations);
  }
  return out;
}

HomogenizedTensor homogenize(const CoefficientField& a, const Corrector& chi, double tol) {
  const PeriodicGrid& g = chi.grid;
  const CellCoefficients c = CellCoefficients::sample(a, g);
  const int n = g.n();
  const double h = g.h();
  double ah[2][2] = {{0, 0}, {0, 0}};
  for (int jdir = 0; jdir < 2; ++jdir) {
    const CellField& x = chi.chi[jdir];
    double s1 = 0.0, s2 = 0.0;
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        s1 += c.cx(i, j) * ((jdir == 0 ? 1.0 : 0.0) + (x(i + 1, j) - x(i, j)) / h);
        s2 += c.cy(i, j) * ((jdir == 1 ? 1.0 : 0.0) + (x(i, j + 1) - x(i, j)) / h);
        if (c.has_cross) {
          s1 += c.c12(i, j) * ((jdir == 1 ? 1.0 : 0.0) + (x(i, j + 1) - x(i, j - 1)) / (2.0 * h));
          s2 += c.c12(i, j) * ((jdir == 0 ? 1.0 : 0.0) + (x(i + 1, j) - x(i - 1, j)) / (2.0 * h));
        }
      }
    }
    const double cells = static_cast<double>(n) * n;
    ah[0][jdir] = s1 / cells;
    ah[1][jdir] = s2 / cells;
  }
  HomogenizedTensor out;
  out.asymmetry = std::abs(ah[0][1] - ah[1][0]);
  out.a_hat = Mat2{ah[0][0], ah[0][1], ah[1][0], ah[1][1]}.symmetric_part();
  const auto [lo, hi] = symmetric_eigenvalues(out.a_hat);
  if (lo < a.mu() - tol || hi > 1.0 / a.mu() + tol) {
    throw ConsistencyError("homogenized tensor eigenvalues [" + std::to_string(lo) + ", " + std::to_string(hi) +
                           "] leave the ellipticity range of '" + a.name() + "'");
  }
  return out;
}

FluxCorrector flux_correctors(const CoefficientField& a, const Corrector& chi, const HomogenizedTensor& a_hat,
                              double tol) {
  const PeriodicGrid& g = chi.grid;
  const CellCoefficients c = CellCoefficients::sample(a, g);
  const int n = g.n();
  const double h = g.h();
  FluxCorrector out{g, quad_of(g), {quad_of(g), quad_of(g)}, 0.0, 0.0};

  double err = 0.0, ref = 0.0;
  const LinearMap neg_lap = [&g](const std::vector<double>& u, std::vector<double>& o) {
    apply_neg_laplacian(g, u, o);
  };

  for (int jdir = 0; jdir < 2; ++jdir) {
    const CellField& x = chi.chi[jdir];
    CellField& b1 = out.b[0][jdir];
    CellField& b2 = out.b[1][jdir];
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        double f1 = c.cx(i, j) * ((jdir == 0 ? 1.0 : 0.0) + (x(i + 1, j) - x(i, j)) / h);
        double f2 = c.cy(i, j) * ((jdir == 1 ? 1.0 : 0.0) + (x(i, j + 1) - x(i, j)) / h);
        if (c.has_cross) {
          auto q1 = [&](int ii, int jj) {
            return c.c12(ii, jj) * ((jdir == 1 ? 1.0 : 0.0) + (x(ii, jj + 1) - x(ii, jj - 1)) / (2.0 * h));
          };
          auto q2 = [&](int ii, int jj) {
            return c.c12(ii, jj) * ((jdir == 0 ? 1.0 : 0.0) + (x(ii + 1, jj) - x(ii - 1, jj)) / (2.0 * h));
          };
          f1 += 0.5 * (q1(i, j) + q1(i + 1, j));
          f2 += 0.5 * (q2(i, j) + q2(i, j + 1));
        }
        b1(i, j) = a_hat.a_hat(0, jdir) - f1;
        b2(i, j) = a_hat.a_hat(1, jdir) - f2;
      }
    }
    out.max_mean = std::max({out.max_mean, std::abs(mean_of(b1)), std::abs(mean_of(b2))});

    // Delta f = b on each staggered lattice, i.e. (-Delta) f = -b.
    std::array<CellField, 2> f{CellField(g), CellField(g)};
    for (int idir = 0; idir < 2; ++idir) {
      const auto bv = out.b[idir][jdir].values();
      std::vector<double> rhs(bv.size());
      for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] = -bv[k];
      std::vector<double> sol(rhs.size(), 0.0);
      periodic_cg(neg_lap, rhs, sol, tol, 50 * n, "flux-corrector Poisson solve");
      f[idir] = CellField(g, std::move(sol));
    }

    // F_12j = D1 f_2j - D2 f_1j at cell centres.
    CellField& F12 = out.F[0][1][jdir];
    CellField& F21 = out.F[1][0][jdir];
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const double v = (f[1](i + 1, j) - f[1](i, j)) / h - (f[0](i, j + 1) - f[0](i, j)) / h;
        F12(i, j) = v;
        F21(i, j) = -v;
      }
    }

    // d_k F_k1j = d_2 F_21j on x-edges; d_k F_k2j = d_1 F_12j on y-edges.
    for (int idir = 0; idir < 2; ++idir) {
      const CellField& bij = out.b[idir][jdir];
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
          const double div =
              idir == 0 ? (F21(i, j) - F21(i, j - 1)) / h : (F12(i, j) - F12(i - 1, j)) / h;
          err += (div - bij(i, j)) * (div - bij(i, j));
          ref += bij(i, j) * bij(i, j);
        }
      }
    }
  }
  out.divergence_residual = ref > 0.0 ? std::sqrt(err / ref) : std::sqrt(err);
  return out;
}

CorrectorDerivatives CorrectorDerivatives::compute(const CoefficientField& a, const Corrector& chi) {
  const PeriodicGrid& g = chi.grid;
  const int n = g.n();
  const double h = g.h();
  CorrectorDerivatives d{quad_of(g), quad_of(g)};

  std::vector<Mat2> amat(g.node_count());
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) amat[g.index(i, j)] = a(g.node(i, j));

  for (int jdir = 0; jdir < 2; ++jdir) {
    const CellField& x = chi.chi[jdir];
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        d.dchi[jdir][0](i, j) = (x(i + 1, j) - x(i - 1, j)) / (2.0 * h);
        d.dchi[jdir][1](i, j) = (x(i, j + 1) - x(i, j - 1)) / (2.0 * h);
        for (int k = 0; k < 2; ++k) {
          const double dx = (x(i + 1, j) * amat[g.index(i + 1, j)](0, k) -
                             x(i - 1, j) * amat[g.index(i - 1, j)](0, k)) /
                            (2.0 * h);
          const double dy = (x(i, j + 1) * amat[g.index(i, j + 1)](1, k) -
                             x(i, j - 1) * amat[g.index(i, j - 1)](1, k)) /
                            (2.0 * h);
          d.div_chiA[jdir][k](i, j) = dx + dy;
        }
      }
    }
  }
  return d;
}

}  // namespace homlab
