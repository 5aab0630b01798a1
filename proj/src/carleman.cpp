#include "homlab/carleman.hpp"

#include <algorithm>
#include <optional>

#include "homlab/elliptic.hpp"
#include "homlab/errors.hpp"
#include "homlab/jet.hpp"
#include "homlab/parallel.hpp"

namespace homlab {

namespace {

using Jet3 = Jet<3>;

// Below this f(t) e^{1/t} t^-6 is under 1e-31, so the jet is taken as exactly zero.
constexpr double kFlatT = 1e-2;

Jet3 flat_f(const Jet3& t) {
  if (t.c[0] < kFlatT) return Jet3{};
  return exp(Jet3::constant(-1.0) / t);
}

Jet3 psi_jet(const Jet3& t) {
  if (t.c[0] <= 0.0) return Jet3{};
  if (t.c[0] >= 1.0) return Jet3::constant(1.0);
  const Jet3 f = flat_f(t);
  const Jet3 g = flat_f(Jet3::constant(1.0) - t);
  return f / (f + g);
}

Jet3 profile_jet(double rho) {
  const Jet3 r = Jet3::variable(rho);
  const Jet3 t1 = 6.0 * (r - Jet3::constant(Cutoff::inner));
  const Jet3 t2 = 6.0 * (Jet3::constant(Cutoff::outer) - r);
  return psi_jet(t1) * psi_jet(t2);
}

bool in_transition(double rho) {
  return (rho > Cutoff::inner && rho < Cutoff::plateau_in) || (rho > Cutoff::plateau_out && rho < Cutoff::outer);
}

template <class Visit>
void for_support(const DomainGrid& g, Visit&& visit) {
  visit_annulus(g, Cutoff::inner, Cutoff::outer, 4, std::forward<Visit>(visit));
}

double a_contract(const Mat2& a, const Hessian2& h) { return a.a11 * h.xx + (a.a12 + a.a21) * h.xy + a.a22 * h.yy; }

Mat2 slice(const CutoffJet& jet, int j) {
  return {jet.third[j][0][0], jet.third[j][0][1], jet.third[j][1][0], jet.third[j][1][1]};
}

Vec2 hess_row(const Mat2& h, int j) { return j == 0 ? Vec2{h.a11, h.a12} : Vec2{h.a21, h.a22}; }

bool all_zero(const Corrector& chi) {
  for (const auto& c : chi.chi)
    for (double v : c.values())
      if (v != 0.0) return false;
  return true;
}

// Evaluates the expanded right-hand side at a node.
class RhsEvaluator {
 public:
  RhsEvaluator(const DomainField& u, const Corrector& chi, double eps, const CoefficientField& a)
      : u_(u), chi_(chi), eps_(eps), a_(a), zero_(all_zero(chi)) {
    if (!zero_) d_ = CorrectorDerivatives::compute(a, chi);
  }

  double operator()(int i, int j, Vec2 x, const CutoffJet& eta) const {
    const Vec2 y = (1.0 / eps_) * x;
    const Mat2 A = a_(y);
    const Vec2 du = gradient_at(u_, i, j);
    const double u = u_(i, j);
    double r = 2.0 * dot(A * du, eta.grad) + contract(A, eta.hess) * u;
    if (zero_) return r;
    for (int k = 0; k < 2; ++k) {
      const double c = periodic_bilinear(chi_.chi[k], y);
      const Vec2 gchi{periodic_bilinear(d_->dchi[k][0], y), periodic_bilinear(d_->dchi[k][1], y)};
      const Vec2 dca{periodic_bilinear(d_->div_chiA[k][0], y), periodic_bilinear(d_->div_chiA[k][1], y)};
      const Vec2 hk = hess_row(eta.hess, k);
      const Vec2 agchi = A * gchi;
      r += dot(agchi, hk) * u + 2.0 * eta.grad[k] * dot(agchi, du) + dot(dca, hk) * u +
           eps_ * c * contract(A, slice(eta, k)) * u + 2.0 * eps_ * c * dot(A * hk, du);
    }
    return r;
  }

 private:
  const DomainField& u_;
  const Corrector& chi_;
  double eps_;
  const CoefficientField& a_;
  bool zero_;
  std::optional<CorrectorDerivatives> d_;
};

void check_same_grid(const DomainField& a, const DomainField& b) {
  if (!(a.grid() == b.grid())) throw ConfigError("fields must share one grid");
}

void check_eps(double eps) {
  if (!(eps > 0.0 && eps <= 1.0)) throw ConfigError("eps must lie in (0, 1]");
}

}  // namespace

CarlemanWeight::CarlemanWeight(double lambda_, double tau_, double phi_ref_)
    : lambda(lambda_), tau(tau_), phi_ref(phi_ref_) {
  if (!(lambda > 0.0) || !(tau >= 0.0) || !std::isfinite(lambda) || !std::isfinite(tau)) {
    throw ConfigError("Carleman weight needs lambda > 0 and tau >= 0");
  }
}

double cutoff_psi(double t) { return psi_jet(Jet3::variable(t)).c[0]; }

double cutoff_profile(double rho) {
  if (rho <= Cutoff::inner || rho >= Cutoff::outer) return 0.0;
  if (rho >= Cutoff::plateau_in && rho <= Cutoff::plateau_out) return 1.0;
  return profile_jet(rho).c[0];
}

CutoffJet cutoff_jet(Vec2 x) {
  CutoffJet out;
  const double rho = norm(x);
  if (rho <= Cutoff::inner || rho >= Cutoff::outer) return out;
  if (!in_transition(rho)) {
    out.value = 1.0;
    return out;
  }
  const Jet3 g = profile_jet(rho);
  const double g1 = g.derivative(1), g2 = g.derivative(2), g3 = g.derivative(3);
  const Vec2 n = (1.0 / rho) * x;
  auto P = [&](int a, int b) { return (a == b ? 1.0 : 0.0) - n[a] * n[b]; };
  out.value = g.c[0];
  out.grad = g1 * n;
  out.hess = {g2 * n.x * n.x + g1 / rho * P(0, 0), g2 * n.x * n.y + g1 / rho * P(0, 1),
              g2 * n.y * n.x + g1 / rho * P(1, 0), g2 * n.y * n.y + g1 / rho * P(1, 1)};
  const double c = g2 / rho - g1 / (rho * rho);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        out.third[i][j][k] = g3 * n[i] * n[j] * n[k] + c * (P(i, k) * n[j] + P(j, k) * n[i] + P(i, j) * n[k]);
  return out;
}

Cutoff make_cutoff(const DomainGrid& grid) {
  if (grid.half_extent() < Cutoff::outer) {
    throw GeometryError("the cutoff needs a grid covering B_{5/2}; L = " + std::to_string(grid.half_extent()));
  }
  return {DomainField::sampled(grid, [](Vec2 x) { return cutoff_profile(norm(x)); })};
}

void CarlemanConstants::validate() const {
  for (double v : {C0, lambda0, tau0, C_l0t0}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("Carleman constants must be positive and finite");
  }
}

WeightedSums weighted_sums(const SupportSamples& s, const CarlemanWeight& w) {
  WeightedSums out;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double phi = w.phi(s.r2[k]);
    const double wa = std::exp(2.0 * w.tau * (phi - w.phi_ref)) * s.area[k];
    out.zero += phi * phi * phi * s.zero[k] * wa;
    out.grad += phi * s.grad[k] * wa;
    out.rhs += s.rhs[k] * wa;
  }
  return out;
}

SupportSamples carleman_lhs_samples(const DomainField& u_eps, const DomainField& u0, const Corrector& chi, double eps) {
  check_same_grid(u_eps, u0);
  check_eps(eps);
  const DomainGrid& g = u_eps.grid();
  DomainField q = u_eps;
  if (!all_zero(chi)) {
    const double reach = Cutoff::outer + 2.0 * g.h();
    for (int j = 0; j <= g.n(); ++j) {
      for (int i = 0; i <= g.n(); ++i) {
        const Vec2 x = g.node(i, j);
        if (std::abs(x.x) > reach || std::abs(x.y) > reach) continue;
        const Vec2 y = (1.0 / eps) * x;
        const Vec2 d = gradient_at(u0, i, j);
        q(i, j) -= eps * (periodic_bilinear(chi.chi[0], y) * d.x + periodic_bilinear(chi.chi[1], y) * d.y);
      }
    }
  }
  SupportSamples s;
  const double h2 = g.h() * g.h();
  for_support(g, [&](int i, int j, double frac) {
    const Vec2 x = g.node(i, j);
    const CutoffJet eta = cutoff_jet(x);
    const double ue = u_eps(i, j) * eta.value;
    const Vec2 gq = eta.value * gradient_at(q, i, j) + q(i, j) * eta.grad;
    s.area.push_back(frac * h2);
    s.r2.push_back(dot(x, x));
    s.zero.push_back(ue * ue);
    s.grad.push_back(dot(gq, gq));
    s.rhs.push_back(0.0);
  });
  return s;
}

std::vector<double> carleman_rhs_values(const DomainField& u_eps, const Corrector& chi, double eps,
                                        const CoefficientField& a) {
  check_eps(eps);
  const DomainGrid& g = u_eps.grid();
  const RhsEvaluator R(u_eps, chi, eps, a);
  std::vector<double> out;
  for_support(g, [&](int i, int j, double) {
    const Vec2 x = g.node(i, j);
    out.push_back(R(i, j, x, cutoff_jet(x)));
  });
  return out;
}

double plateau_rhs_fraction(const DomainField& u_eps, const Corrector& chi, double eps, const CoefficientField& a) {
  const DomainGrid& g = u_eps.grid();
  const std::vector<double> r = carleman_rhs_values(u_eps, chi, eps, a);
  double all = 0.0, plateau = 0.0;
  std::size_t k = 0;
  for_support(g, [&](int i, int j, double) {
    const double rho = norm(g.node(i, j));
    const double v = std::abs(r[k++]);
    all = std::max(all, v);
    if (rho >= Cutoff::plateau_in && rho <= Cutoff::plateau_out) plateau = std::max(plateau, v);
  });
  return all > 0.0 ? plateau / all : 0.0;
}

SupportSamples carleman_samples(const DomainField& u_eps, const DomainField& u0, const Corrector& chi, double eps,
                                const CoefficientField& a) {
  SupportSamples s = carleman_lhs_samples(u_eps, u0, chi, eps);
  const std::vector<double> r = carleman_rhs_values(u_eps, chi, eps, a);
  for (std::size_t k = 0; k < r.size(); ++k) s.rhs[k] = r[k] * r[k];
  return s;
}

CarlemanLhs carleman_lhs(const DomainField& u_eps, const DomainField& u0, const Corrector& chi, double eps,
                         const CarlemanWeight& weight, const Cutoff& eta, double C0) {
  check_same_grid(u_eps, eta.eta);
  const WeightedSums s = weighted_sums(carleman_lhs_samples(u_eps, u0, chi, eps), weight);
  const double l = weight.lambda, t = weight.tau;
  CarlemanLhs out;
  out.term_zero_order = l * l * l * l * t * t * t * s.zero;
  out.term_gradient = l * l * t * s.grad;
  out.combined = 0.5 * C0 * (out.term_zero_order + out.term_gradient);
  return out;
}

double carleman_rhs(const DomainField& u_eps, const Corrector& chi, double eps, const CoefficientField& a,
                    const Cutoff& eta, const CarlemanWeight& weight) {
  check_same_grid(u_eps, eta.eta);
  const DomainGrid& g = u_eps.grid();
  const std::vector<double> r = carleman_rhs_values(u_eps, chi, eps, a);
  double total = 0.0;
  std::size_t k = 0;
  const double h2 = g.h() * g.h();
  for_support(g, [&](int i, int j, double frac) {
    const Vec2 x = g.node(i, j);
    total += r[k] * r[k] * weight.weight(dot(x, x)) * frac * h2;
    ++k;
  });
  return total;
}

double consistency_residual(const DomainField& u_eps, const Corrector& chi, double eps, const CoefficientField& a,
                        const Cutoff& eta) {
  check_same_grid(u_eps, eta.eta);
  check_eps(eps);
  const DomainGrid& g = u_eps.grid();
  const DiscreteOperator op = assemble(a, eps, g);
  const RhsEvaluator R(u_eps, chi, eps, a);
  const bool zero = all_zero(chi);

  DomainField w(g), r(g);
  for (int j = 0; j <= g.n(); ++j) {
    for (int i = 0; i <= g.n(); ++i) {
      const Vec2 x = g.node(i, j);
      const double rho = norm(x);
      if (rho <= Cutoff::inner || rho >= Cutoff::outer) continue;
      const CutoffJet jet = cutoff_jet(x);
      double v = u_eps(i, j) * jet.value;
      if (!zero) {
        const Vec2 y = (1.0 / eps) * x;
        v += eps * u_eps(i, j) * (periodic_bilinear(chi.chi[0], y) * jet.grad.x +
                                  periodic_bilinear(chi.chi[1], y) * jet.grad.y);
      }
      w(i, j) = v;
      r(i, j) = R(i, j, x, jet);
    }
  }
  std::vector<double> lw;
  op.apply(w.storage(), lw);
  const double den = integrate_annulus(g, 0.0, 3.0, 4, [&](int i, int j) { return r(i, j) * r(i, j); });
  if (den == 0.0) return 0.0;
  const double num = integrate_annulus(g, 0.0, 3.0, 4, [&](int i, int j) {
    const double d = lw[g.index(i, j)] + r(i, j);
    return d * d;
  });
  return std::sqrt(num / den);
}

SupportSamples classical_samples(const DomainField& v, const Mat2& a_hat) {
  const DomainGrid& g = v.grid();
  SupportSamples s;
  const double h2 = g.h() * g.h();
  for_support(g, [&](int i, int j, double frac) {
    const Vec2 x = g.node(i, j);
    const CutoffJet eta = cutoff_jet(x);
    const double val = v(i, j);
    const Vec2 dv = gradient_at(v, i, j);
    const Vec2 gp = eta.value * dv + val * eta.grad;
    const double l0 =
        -(eta.value * a_contract(a_hat, hessian_at(v, i, j)) + 2.0 * dot(a_hat * dv, eta.grad) +
          val * contract(a_hat, eta.hess));
    s.area.push_back(frac * h2);
    s.r2.push_back(dot(x, x));
    s.zero.push_back(val * val * eta.value * eta.value);
    s.grad.push_back(dot(gp, gp));
    s.rhs.push_back(l0 * l0);
  });
  return s;
}

double classical_ratio(const SupportSamples& s, const CarlemanWeight& w) {
  const WeightedSums sums = weighted_sums(s, w);
  const double l = w.lambda, t = w.tau;
  const double lhs0 = l * l * l * l * t * t * t * sums.zero + l * l * t * sums.grad;
  if (!(lhs0 > 0.0)) throw DegenerateInput("classical Carleman ratio: v eta vanishes on the cutoff's support");
  return sums.rhs / lhs0;
}

double classical_carleman_ratio(const DomainField& v, const Cutoff& eta, const Mat2& a_hat, double lambda,
                                double tau) {
  check_same_grid(v, eta.eta);
  return classical_ratio(classical_samples(v, a_hat), CarlemanWeight::normalized_at(lambda, tau, Cutoff::inner));
}

double caccioppoli_constant(const DomainField& u, double s1, double s2, double s3, double s4, double lambda,
                            double tau) {
  if (!(0.0 <= s1 && s1 < s2 && s2 < s3 && s3 < s4 && s4 <= 3.0)) {
    throw ConfigError("Caccioppoli radii must satisfy 0 <= s1 < s2 < s3 < s4 <= 3");
  }
  const CarlemanWeight w(lambda, tau, std::exp(-lambda * s1 * s1));
  const DomainGrid& g = u.grid();
  const double num = integrate_annulus(g, s2, s3, 4, [&](int i, int j) {
    const Vec2 d = gradient_at(u, i, j);
    const Vec2 x = g.node(i, j);
    return dot(d, d) * w.weight(dot(x, x));
  });
  double plain = 0.0, moment = 0.0;
  visit_annulus(g, s1, s4, 4, [&](int i, int j, double frac) {
    const Vec2 x = g.node(i, j);
    const double r2 = dot(x, x);
    const double phi = w.phi(r2);
    const double uw = u(i, j) * u(i, j) * w.weight(r2) * frac;
    plain += uw;
    moment += r2 * phi * phi * uw;
  });
  const double h2 = g.h() * g.h();
  const double gap = 1.0 / (s4 - s3) + 1.0 / (s2 - s1);
  const double den = (gap * gap * plain + lambda * lambda * tau * tau * moment) * h2;
  if (!(den > 0.0)) throw DegenerateInput("Caccioppoli constant: u vanishes on the outer annulus");
  return num / den;
}

std::vector<double> tau_range(const CarlemanConstants& c, double norm_b3, double norm_b1, int count) {
  c.validate();
  if (count < 2) throw ConfigError("the tau range needs at least two points");
  if (!(norm_b1 > 0.0)) throw DegenerateInput("degenerate tau range: ||u||_{L2(B_1)} = 0");
  const double hi = 100.0 * c.tau0 + c.C_l0t0 * norm_b3 / norm_b1;
  std::vector<double> t(count);
  for (int k = 0; k < count; ++k) t[k] = c.tau0 * std::pow(hi / c.tau0, static_cast<double>(k) / (count - 1));
  t.back() = hi;
  return t;
}

CarlemanReport carleman_check(const DomainField& u_eps, const DomainField& u0, const Corrector& chi, double eps,
                              const CoefficientField& a, const CarlemanConstants& constants,
                              const std::vector<double>& lambda_grid, const Cutoff& eta, int jobs) {
  constants.validate();
  check_same_grid(u_eps, eta.eta);
  if (lambda_grid.empty()) throw ConfigError("lambda grid is empty");
  for (double l : lambda_grid) {
    if (!(l >= constants.lambda0)) {
      throw ConfigError("lambda = " + std::to_string(l) + " is below lambda0 = " + std::to_string(constants.lambda0));
    }
  }
  CarlemanReport rep;
  rep.eps = eps;
  rep.norm_b1 = ball_l2_norm(u_eps, 1.0);
  rep.norm_b3 = ball_l2_norm(u_eps, 3.0);
  rep.taus = tau_range(constants, rep.norm_b3, rep.norm_b1);

  const SupportSamples s = carleman_samples(u_eps, u0, chi, eps, a);
  const int nt = static_cast<int>(rep.taus.size());
  rep.points.resize(lambda_grid.size() * rep.taus.size());
  parallel_for(static_cast<int>(rep.points.size()), jobs, [&](int k) {
    const double l = lambda_grid[k / nt], t = rep.taus[k % nt];
    const WeightedSums sums = weighted_sums(s, CarlemanWeight::normalized_at(l, t, Cutoff::inner));
    CarlemanPoint& p = rep.points[k];
    p.lambda = l;
    p.tau = t;
    p.lhs_zero = l * l * l * l * t * t * t * sums.zero;
    p.lhs_grad = l * l * t * sums.grad;
    p.lhs = 0.5 * constants.C0 * (p.lhs_zero + p.lhs_grad);
    p.rhs = sums.rhs;
    p.margin = p.rhs - p.lhs;
    p.ratio = p.rhs > 0.0 ? p.lhs / p.rhs : (p.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  });
  rep.degenerate = true;
  for (const auto& p : rep.points) {
    if (p.lhs != 0.0 || p.rhs != 0.0) rep.degenerate = false;
    rep.max_ratio = std::max(rep.max_ratio, p.ratio);
  }
  return rep;
}

DomainField tensor_harmonic(const DomainGrid& grid, const Mat2& a_hat, int k) {
  const Mat2 s = a_hat.symmetric_part();
  const auto [l1, l2] = symmetric_eigenvalues(s);
  if (!(l1 > 0.0)) throw ConfigError("tensor_harmonic needs a positive definite tensor");
  // Unit eigenvector of l1; the other is its rotation.
  Vec2 e1{1.0, 0.0};
  if (s.a12 != 0.0) {
    e1 = {s.a12, l1 - s.a11};
    e1 = (1.0 / norm(e1)) * e1;
  } else if (s.a22 < s.a11) {
    e1 = {0.0, 1.0};
  }
  const Vec2 e2{-e1.y, e1.x};
  const double r1 = 1.0 / std::sqrt(l1), r2 = 1.0 / std::sqrt(l2);
  const Mat2 b{r1 * e1.x * e1.x + r2 * e2.x * e2.x, r1 * e1.x * e1.y + r2 * e2.x * e2.y,
               r1 * e1.y * e1.x + r2 * e2.y * e2.x, r1 * e1.y * e1.y + r2 * e2.y * e2.y};
  const HarmonicPolynomial p(k);
  return DomainField::sampled(grid, [&](Vec2 x) { return p(b * x); });
}

Calibration calibrate(const ProbeSuite& suite, const CarlemanConstants& base, int jobs) {
  base.validate();
  if (suite.tensors.empty() || suite.degrees.empty() || suite.lambdas.empty() || suite.taus.empty()) {
    throw ConfigError("probe suite lists must be nonempty");
  }
  for (double l : suite.lambdas)
    if (!(l >= base.lambda0)) throw ConfigError("probe lambda " + std::to_string(l) + " is below lambda0");
  for (double t : suite.taus)
    if (!(t >= base.tau0)) throw ConfigError("probe tau " + std::to_string(t) + " is below tau0");
  for (int d : suite.degrees)
    if (d < 1) throw ConfigError("probe degrees must be >= 1");
  if (!(suite.spacing > 0.0) || !(suite.safety > 0.0 && suite.safety <= 1.0)) {
    throw ConfigError("probe spacing must be positive and safety in (0, 1]");
  }

  const double L = 2.75;
  int n = static_cast<int>(std::ceil(2.0 * L / suite.spacing));
  n += n % 2;
  const DomainGrid grid(L, n);
  const int nd = static_cast<int>(suite.degrees.size());
  const int nl = static_cast<int>(suite.lambdas.size()), nt = static_cast<int>(suite.taus.size());
  const int per = nl * nt;

  Calibration cal;
  cal.probes.resize(suite.tensors.size() * nd * per);
  parallel_for(static_cast<int>(suite.tensors.size()) * nd, jobs, [&](int job) {
    const int t = job / nd, d = job % nd;
    const Mat2& tensor = suite.tensors[t];
    const SupportSamples s = classical_samples(tensor_harmonic(grid, tensor, suite.degrees[d]), tensor);
    for (int q = 0; q < per; ++q) {
      const double l = suite.lambdas[q / nt], tau = suite.taus[q % nt];
      cal.probes[job * per + q] = {t, suite.degrees[d], l, tau,
                                   classical_ratio(s, CarlemanWeight::normalized_at(l, tau, Cutoff::inner))};
    }
  });

  cal.minima.resize(per);
  for (int q = 0; q < per; ++q) {
    ProbeResult m{-1, -1, suite.lambdas[q / nt], suite.taus[q % nt], std::numeric_limits<double>::infinity()};
    for (std::size_t p = q; p < cal.probes.size(); p += per) {
      if (cal.probes[p].ratio < m.ratio) m = cal.probes[p];
    }
    cal.minima[q] = m;
  }
  double lowest = std::numeric_limits<double>::infinity();
  for (int li = 0; li < nl; ++li) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int ti = 0; ti < nt; ++ti) {
      const double r = cal.minima[li * nt + ti].ratio;
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    lowest = std::min(lowest, lo);
    cal.tau_spread = std::max(cal.tau_spread, lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity());
  }
  if (!(lowest > 0.0) || !std::isfinite(lowest)) {
    throw ConsistencyError("calibration produced a non-positive classical Carleman ratio");
  }
  cal.constants = base;
  cal.constants.C0 = suite.safety * lowest;
  cal.constants.provenance = CarlemanConstants::Provenance::calibrated;
  return cal;
}

}  // namespace homlab
