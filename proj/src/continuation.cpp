#include "homlab/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "homlab/elliptic.hpp"
#include "homlab/errors.hpp"

namespace homlab {

namespace {

constexpr int kSub = 8;

double l2(const DomainField& u, double r) { return ball_l2_norm(u, r, kSub); }

// Mean of |u|^2 over B_r, with the area from the same quadrature.
double mean_square(const DomainField& u, const DomainField& ones, double r) {
  const double n = l2(u, r), a = l2(ones, r);
  return n * n / (a * a);
}

double three_ball(const DomainField& u, double s, double r1, double r2, double r3) {
  const double n1 = l2(u, r1);
  if (!(n1 > 0.0)) throw DegenerateInput("three-ball constant: ||u|| vanishes on the inner ball");
  return l2(u, r2) / (std::pow(n1, s) * std::pow(l2(u, r3), 1.0 - s));
}

}  // namespace

ThreeBallExponent alpha_beta_s(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("alpha_beta_s needs lambda > 0");
  ThreeBallExponent e;
  e.lambda = lambda;
  e.alpha = 1.0 - 2.0 * std::exp(-4.0 * lambda);
  e.beta = 2.0 * (std::exp(-4.0 * lambda) - std::exp(-81.0 * lambda / 16.0));
  if (!(e.alpha > 0.0)) {
    throw DomainError("alpha = 1 - 2 exp(-4 lambda) is not positive for lambda = " + std::to_string(lambda));
  }
  e.s = e.alpha / (e.alpha + e.beta);
  return e;
}

double three_ball_constant(const DomainField& u, double s, double r1, double r2, double r3) {
  if (!(s > 0.0 && s < 1.0)) throw ConfigError("three-ball exponent must lie in (0, 1)");
  if (!(0.0 < r1 && r1 < r2 && r2 < r3)) throw ConfigError("three-ball radii must increase");
  return three_ball(u, s, r1, r2, r3);
}

TauBound optimal_tau_bound(double P, double Q, double R, double alpha, double beta, double tau0) {
  for (double v : {P, Q, R, alpha, beta, tau0}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("optimal_tau_bound needs positive finite inputs");
  }
  const double s = alpha / (alpha + beta);
  TauBound b;
  b.tau_tilde = std::log(R / P) / (alpha + beta);
  if (b.tau_tilde >= tau0) {
    b.branch = TauBound::Branch::balanced;
    b.bound = 2.0 * std::pow(P, 1.0 - s) * std::pow(R, s);
  } else {
    b.branch = TauBound::Branch::small;
    b.bound = 2.0 * std::exp(alpha * tau0) * std::pow(P, 1.0 - s) * std::pow(std::max(P, R), s);
  }
  const double t = std::max(b.tau_tilde, tau0);
  b.two_term = std::exp(alpha * t) * P + std::exp(-beta * t) * R;
  return b;
}

GrowthResult growth_check(double int_b3, double int_b2, const GrowthParams& params) {
  params.validate();
  GrowthResult g;
  g.int_b3 = int_b3;
  g.int_b2 = int_b2;
  g.rhs = params.M * std::max(std::pow(int_b2, params.N1), std::pow(int_b2, 1.0 / params.N2));
  if (int_b3 == 0.0) {
    g.holds = true;
    g.margin = std::numeric_limits<double>::infinity();
    return g;
  }
  g.holds = int_b3 <= g.rhs;
  g.margin = g.rhs / int_b3;
  return g;
}

GrowthResult growth_check(const DomainField& u, const GrowthParams& params) {
  const double b3 = l2(u, 3.0), b2 = l2(u, 2.0);
  return growth_check(b3 * b3, b2 * b2, params);
}

DoublingReport doubling_report(const DomainField& u, const std::vector<double>& radii, double mu, double M) {
  if (radii.empty()) throw ConfigError("doubling radii list is empty");
  if (!(mu > 0.0 && mu <= 1.0) || !(M > 0.0)) throw ConfigError("doubling check needs mu in (0, 1] and M > 0");
  DoublingReport rep;
  rep.radii = radii;
  const DomainField ones(u.grid(), 1.0);
  for (double r : radii) {
    if (!(r > 0.0)) throw ConfigError("doubling radii must be positive");
    const double inner = mean_square(u, ones, 0.5 * r);
    if (!(inner > 0.0)) throw DegenerateInput("doubling ratio: u vanishes on B_{r/2} for r = " + std::to_string(r));
    rep.N.push_back(mean_square(u, ones, r) / inner);
    rep.max_N = std::max(rep.max_N, rep.N.back());
  }
  rep.macro_outer = std::min(4.0, u.grid().half_extent());
  rep.macro_inner = 2.0 * std::sqrt(mu) * rep.macro_outer / 4.0;
  const double inner = mean_square(u, ones, rep.macro_inner);
  if (!(inner > 0.0)) throw DegenerateInput("doubling ratio: u vanishes on the macroscopic inner ball");
  rep.macro_ratio = mean_square(u, ones, rep.macro_outer) / inner;
  rep.macro_ok = rep.macro_ratio <= M;
  return rep;
}

MultiscaleReport multiscale_three_ball(const DomainField& u, double s, const std::vector<double>& r_list) {
  if (!(s > 0.0 && s < 1.0)) throw ConfigError("three-ball exponent must lie in (0, 1)");
  if (r_list.empty()) throw ConfigError("multiscale radii list is empty");
  MultiscaleReport rep;
  for (double r : r_list) {
    if (!(r > 0.0 && r <= 0.5)) throw ConfigError("multiscale radii must lie in (0, 1/2]");
    rep.rows.push_back({r, three_ball(u, s, r, 2.0 * r, 4.0 * r)});
    rep.max_C = std::max(rep.max_C, rep.rows.back().C);
  }
  return rep;
}

CounterexampleStudy counterexample_study(const std::vector<int>& k_list, const GrowthParams& params,
                                         const DomainGrid& grid) {
  params.validate();
  if (k_list.empty()) throw ConfigError("counterexample k list is empty");
  CounterexampleStudy study;
  for (int k : k_list) {
    if (k < 0) throw ConfigError("counterexample degrees must be >= 0");
    const DomainField u = DomainField::sampled(grid, HarmonicPolynomial(k));
    const double b1 = l2(u, 1.0), b3 = l2(u, 3.0);
    CounterexampleRow row;
    row.k = k;
    row.exact = std::pow(3.0, -(2.0 * k + 2.0));
    row.quadrature = (b1 * b1) / (b3 * b3);
    row.rel_error = std::abs(row.quadrature - row.exact) / row.exact;
    row.inv_9_pow_k = std::pow(3.0, -2.0 * k);
    row.growth = growth_check(1.0, std::pow(2.0 / 3.0, 2.0 * k + 2.0), params);
    study.rows.push_back(row);
  }
  std::vector<CounterexampleRow> sorted = study.rows;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.k < b.k; });
  for (auto it = sorted.rbegin(); it != sorted.rend() && !it->growth.holds; ++it) study.k_star = it->k;
  return study;
}

}  // namespace homlab
