#include "homlab/twoscale.hpp"

#include <array>

#include "homlab/parallel.hpp"

namespace homlab {

namespace {

constexpr double kRingLo = 11.0 / 4.0;
constexpr double kRingHi = 23.0 / 8.0;
constexpr int kCandidates = 16;

// Energies of the rings r_c - h/2 <= |x| < r_c + h/2 for all candidate radii in one pass.
std::array<double, kCandidates> ring_energies(const DomainField& u) {
  const DomainGrid& g = u.grid();
  const double h = g.h();
  const double step = (kRingHi - kRingLo) / (kCandidates - 1);
  const double outer = kRingHi + h;
  const int imin = std::max(1, static_cast<int>(std::floor((g.half_extent() - outer) / h)) - 1);
  const int imax = std::min(g.n() - 1, static_cast<int>(std::ceil((g.half_extent() + outer) / h)) + 1);
  std::array<double, kCandidates> e{};
  for (int j = imin; j <= imax; ++j) {
    for (int i = imin; i <= imax; ++i) {
      const double d = norm(g.node(i, j));
      if (d < kRingLo - h || d >= outer) continue;
      double local = -1.0;
      for (int c = 0; c < kCandidates; ++c) {
        const double r = kRingLo + step * c;
        if (d < r - 0.5 * h || d >= r + 0.5 * h) continue;
        if (local < 0.0) {
          const Vec2 du = gradient_at(u, i, j);
          local = u(i, j) * u(i, j) + dot(du, du);
        }
        e[c] += local;
      }
    }
  }
  for (double& v : e) v *= h * h;
  return e;
}

// Four-point Lagrange weights at offset t in [0, 1) for nodes -1, 0, 1, 2.
std::array<double, 4> cubic_weights(double t) {
  return {-t * (t - 1.0) * (t - 2.0) / 6.0, (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
          -(t + 1.0) * t * (t - 2.0) / 2.0, (t + 1.0) * t * (t - 1.0) / 6.0};
}

double bicubic(const DomainField& f, Vec2 x) {
  const DomainGrid& g = f.grid();
  const int n = g.n();
  const double tx = (x.x + g.half_extent()) / g.h();
  const double ty = (x.y + g.half_extent()) / g.h();
  const int i0 = std::clamp(static_cast<int>(std::floor(tx)), 1, n - 2);
  const int j0 = std::clamp(static_cast<int>(std::floor(ty)), 1, n - 2);
  const auto wx = cubic_weights(tx - i0);
  const auto wy = cubic_weights(ty - j0);
  double v = 0.0;
  for (int b = 0; b < 4; ++b) {
    double row = 0.0;
    for (int a = 0; a < 4; ++a) row += wx[a] * f(i0 - 1 + a, j0 - 1 + b);
    v += wy[b] * row;
  }
  return v;
}

double ball_grad_sq(const DomainField& f, double r) {
  return integrate_annulus(f.grid(), 0.0, r, 4, [&](int i, int j) {
    const Vec2 d = gradient_at(f, i, j);
    return dot(d, d);
  });
}

}  // namespace

EpsilonSolution solve_epsilon_problem(const CoefficientField& a, double eps, const DomainGrid& grid,
                                      const ScalarFunction& g, double tol) {
  const DiscreteOperator op = assemble(a, eps, grid);
  auto sol = solve_dirichlet(op, BoundaryData::sample(op, g), tol);
  return {eps, std::move(sol.u), sol.stats};
}

RecoveredU0 recover_u0(const DomainField& u_eps, const HomogenizedTensor& a_hat, double tol, double solve_spacing) {
  const DomainGrid& fine = u_eps.grid();
  const double L = fine.half_extent();
  if (L < kRingHi + 2.0 * fine.h()) {
    throw GeometryError("recovering u0 needs the domain to contain B_{23/8} with a margin; L = " + std::to_string(L));
  }

  RecoveredU0 out{DomainField(fine), kRingLo, 0.0, 0.0, {}};
  const auto energies = ring_energies(u_eps);
  double best = 0.0, total = 0.0;
  for (int c = 0; c < kCandidates; ++c) {
    const double r = kRingLo + (kRingHi - kRingLo) * c / (kCandidates - 1);
    const double e = energies[c];
    total += e;
    if (c == 0 || e < best) {
      best = e;
      out.r0 = r;
    }
  }
  out.ring_energy = best;
  out.mean_ring_energy = total / kCandidates;

  int n0 = static_cast<int>(std::ceil(2.0 * L / solve_spacing));
  n0 += n0 % 2;
  n0 = std::min(n0, fine.n());
  const DomainGrid coarse(L, n0);
  const bool same = coarse == fine;

  const DomainField exterior =
      same ? u_eps : DomainField::sampled(coarse, [&](Vec2 x) { return bilinear(u_eps, x); });
  const DiscreteOperator op = assemble_homogenized(a_hat, coarse, BoundaryMask::disc(out.r0));
  auto sol = solve_dirichlet(op, BoundaryData::sample(op, [&](Vec2 p) { return bilinear(u_eps, p); }), tol, &exterior);
  out.stats = sol.stats;

  if (same) {
    out.u0 = std::move(sol.u);
    return out;
  }
  auto& dst = out.u0.storage();
  const auto src = u_eps.values();
  const double r2 = out.r0 * out.r0;
  for (int j = 0; j <= fine.n(); ++j) {
    for (int i = 0; i <= fine.n(); ++i) {
      const Vec2 x = fine.node(i, j);
      const std::size_t k = fine.index(i, j);
      dst[k] = dot(x, x) < r2 ? bicubic(sol.u, x) : src[k];
    }
  }
  return out;
}

DomainField expansion(const DomainField& u0, const Corrector& chi, double eps) {
  const DomainGrid& g = u0.grid();
  DomainField out = u0;
  bool zero = true;
  for (const auto& c : chi.chi)
    for (double v : c.values()) zero = zero && v == 0.0;
  if (zero) return out;
  for (int j = 0; j <= g.n(); ++j) {
    for (int i = 0; i <= g.n(); ++i) {
      const Vec2 y = (1.0 / eps) * g.node(i, j);
      const Vec2 d = gradient_at(u0, i, j);
      out(i, j) += eps * (periodic_bilinear(chi.chi[0], y) * d.x + periodic_bilinear(chi.chi[1], y) * d.y);
    }
  }
  return out;
}

ConvergenceRow convergence_row(const EpsilonSolution& sol, const RecoveredU0& rec, const Corrector& chi) {
  const DomainField& u = sol.u;
  const DomainGrid& g = u.grid();
  ConvergenceRow row;
  row.eps = sol.eps;
  row.n = g.n();
  row.r0 = rec.r0;
  row.iterations = sol.stats.iterations;

  DomainField diff(g);
  for (std::size_t k = 0; k < g.node_count(); ++k) diff.storage()[k] = u.values()[k] - rec.u0.values()[k];
  row.l2_err = ball_l2_norm(diff, 11.0 / 4.0);

  const DomainField w = expansion(rec.u0, chi, sol.eps);
  for (std::size_t k = 0; k < g.node_count(); ++k) diff.storage()[k] = u.values()[k] - w.values()[k];
  row.h1_err = std::sqrt(ball_grad_sq(diff, 5.0 / 2.0));

  row.u_norm_b3 = ball_l2_norm(u, 3.0);
  row.constant = row.u_norm_b3 > 0.0 ? row.l2_err / (std::sqrt(sol.eps) * row.u_norm_b3) : 0.0;
  return row;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DegenerateInput("slope fit needs at least two points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double m = static_cast<double>(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) throw DegenerateInput("slope fit needs positive values");
    const double lx = std::log(x[k]), ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = m * sxx - sx * sx;
  if (den == 0.0) throw DegenerateInput("slope fit needs distinct abscissae");
  return (m * sxy - sx * sy) / den;
}

ConvergenceStudy convergence_study(const CoefficientField& a, const ScalarFunction& g, const std::vector<double>& eps_list,
                                   double half_extent, const Corrector& chi, const HomogenizedTensor& a_hat, double tol,
                                   int jobs) {
  if (eps_list.empty()) throw ConfigError("eps list is empty");
  for (std::size_t k = 1; k < eps_list.size(); ++k)
    if (!(eps_list[k] < eps_list[k - 1])) throw ConfigError("eps list must be strictly decreasing");

  ConvergenceStudy study;
  study.rows.resize(eps_list.size());
  parallel_for(static_cast<int>(eps_list.size()), jobs, [&](int k) {
    const double eps = eps_list[k];
    const DomainGrid grid = matched_grid(half_extent, eps, chi.grid.n());
    const EpsilonSolution sol = solve_epsilon_problem(a, eps, grid, g, tol);
    const RecoveredU0 rec = recover_u0(sol.u, a_hat, tol);
    study.rows[k] = convergence_row(sol, rec, chi);
  });

  bool zero = true;
  for (const auto& c : chi.chi)
    for (double v : c.values()) zero = zero && v == 0.0;
  study.floor = zero;
  if (study.rows.size() >= 2) {
    std::vector<double> e, l2, h1;
    for (const auto& r : study.rows) {
      e.push_back(r.eps);
      l2.push_back(std::max(r.l2_err, 1e-300));
      h1.push_back(std::max(r.h1_err, 1e-300));
    }
    study.l2_slope = loglog_slope(e, l2);
    study.h1_slope = loglog_slope(e, h1);
  }
  return study;
}

}  // namespace homlab
