#include <gtest/gtest.h>

#include <cmath>

#include "homlab/carleman.hpp"
#include "homlab/elliptic.hpp"
#include "homlab/twoscale.hpp"

using namespace homlab;

namespace {

Corrector zero_corrector() { return solve_corrector(builtin_coefficient("identity"), PeriodicGrid(8)); }

DomainField harmonic(const DomainGrid& g, int k) { return DomainField::sampled(g, HarmonicPolynomial(k)); }

double frob(const Mat2& m) { return std::sqrt(contract(m, m)); }

}  // namespace

TEST(Cutoff, SupportPlateauAndMidpoint) {
  EXPECT_EQ(cutoff_profile(0.0), 0.0);
  EXPECT_EQ(cutoff_profile(0.5), 0.0);
  EXPECT_EQ(cutoff_profile(1.0), 1.0);
  EXPECT_EQ(cutoff_profile(2.0), 1.0);
  EXPECT_EQ(cutoff_profile(2.6), 0.0);
  EXPECT_NEAR(cutoff_profile(7.0 / 12.0), 0.5, 1e-15);
  EXPECT_NEAR(cutoff_profile(29.0 / 12.0), 0.5, 1e-14);
  EXPECT_NEAR(cutoff_psi(0.5), 0.5, 1e-15);
  for (double t = -0.5; t <= 1.5; t += 0.01) {
    EXPECT_GE(cutoff_psi(t), 0.0);
    EXPECT_LE(cutoff_psi(t), 1.0);
  }
}

TEST(Cutoff, GridValuesRespectBounds) {
  const DomainGrid g(3.0, 240);
  const Cutoff c = make_cutoff(g);
  for (int j = 0; j <= g.n(); ++j) {
    for (int i = 0; i <= g.n(); ++i) {
      const double r = norm(g.node(i, j));
      const double v = c.eta(i, j);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      if (r <= 0.5 || r >= 2.5) EXPECT_EQ(v, 0.0);
      if (r >= 2.0 / 3.0 && r <= 7.0 / 3.0) EXPECT_EQ(v, 1.0);
    }
  }
  EXPECT_THROW(make_cutoff(DomainGrid(2.4, 48)), GeometryError);
}

TEST(Cutoff, JetMatchesFiniteDifferences) {
  const double d = 1e-5;
  auto eta = [](Vec2 x) { return cutoff_profile(norm(x)); };
  for (Vec2 x : {Vec2{0.4, 0.3}, Vec2{-0.2, 0.55}, Vec2{1.7, -1.6}, Vec2{0.0, -2.45}}) {
    const CutoffJet j = cutoff_jet(x);
    EXPECT_NEAR(j.value, eta(x), 1e-15);
    for (int a = 0; a < 2; ++a) {
      Vec2 e{0.0, 0.0};
      e[a] = d;
      const double fd = (eta(x + e) - eta(x - e)) / (2.0 * d);
      EXPECT_NEAR(j.grad[a], fd, 1e-7 * (1.0 + std::abs(fd)));
      // Hessian row a from the analytic gradient, third derivatives from the analytic Hessian.
      const CutoffJet jp = cutoff_jet(x + e), jm = cutoff_jet(x - e);
      for (int b = 0; b < 2; ++b) {
        const double h_fd = (jp.grad[b] - jm.grad[b]) / (2.0 * d);
        EXPECT_NEAR(j.hess(a, b), h_fd, 1e-5 * (1.0 + std::abs(h_fd)));
        for (int c = 0; c < 2; ++c) {
          const double t_fd = (jp.hess(b, c) - jm.hess(b, c)) / (2.0 * d);
          EXPECT_NEAR(j.third[a][b][c], t_fd, 1e-4 * (1.0 + std::abs(t_fd)));
        }
      }
    }
    EXPECT_DOUBLE_EQ(j.hess.a12, j.hess.a21);
    EXPECT_DOUBLE_EQ(j.third[0][0][1], j.third[1][0][0]);
    EXPECT_DOUBLE_EQ(j.third[0][1][1], j.third[1][1][0]);
  }
}

TEST(Cutoff, DiscreteGradientBoundedByProfileSlope) {
  double psi_slope = 0.0;
  for (int k = 1; k < 20000; ++k) {
    const double t = k / 20000.0, d = 1e-6;
    psi_slope = std::max(psi_slope, std::abs(cutoff_psi(t + d) - cutoff_psi(t - d)) / (2.0 * d));
  }
  const DomainGrid g(2.75, 220);
  const Cutoff c = make_cutoff(g);
  double grad_max = 0.0;
  for (int j = 1; j < g.n(); ++j)
    for (int i = 1; i < g.n(); ++i) grad_max = std::max(grad_max, norm(gradient_at(c.eta, i, j)));
  EXPECT_GT(grad_max, 0.0);
  EXPECT_LE(grad_max, 12.0 * psi_slope);
  EXPECT_LE(grad_max, 6.0 * psi_slope * 1.001);
}

TEST(CarlemanWeight, RangeAndNormalisation) {
  const CarlemanWeight w(2.0, 10.0);
  EXPECT_EQ(w.phi(0.0), 1.0);
  EXPECT_EQ(w.weight(0.0), 1.0);
  for (double r2 : {0.1, 1.0, 9.0}) {
    EXPECT_GT(w.phi(r2), 0.0);
    EXPECT_LT(w.phi(r2), 1.0);
    EXPECT_GT(w.weight(r2), 0.0);
    EXPECT_LT(w.weight(r2), 1.0);
  }
  const auto n = CarlemanWeight::normalized_at(2.0, 10.0, 0.5);
  EXPECT_NEAR(n.weight(0.25), 1.0, 1e-15);
  const double ratio = n.weight(1.0) / w.weight(1.0);
  EXPECT_NEAR(n.weight(4.0) / w.weight(4.0), ratio, 1e-12 * ratio);
  EXPECT_THROW(CarlemanWeight(0.0, 1.0), ConfigError);
  EXPECT_THROW(CarlemanWeight(1.0, -1.0), ConfigError);
}

TEST(CarlemanLhs, ZeroFieldAndTauScaling) {
  const DomainGrid g(3.25, 260);
  const Cutoff eta = make_cutoff(g);
  const Corrector chi = zero_corrector();
  const DomainField zero(g);
  const auto z = carleman_lhs(zero, zero, chi, 1.0, CarlemanWeight(1.0, 5.0), eta, 2.0);
  EXPECT_EQ(z.term_zero_order, 0.0);
  EXPECT_EQ(z.term_gradient, 0.0);
  EXPECT_EQ(z.combined, 0.0);

  const DomainField u = harmonic(g, 2);
  DomainField ue2 = u;
  for (int j = 0; j <= g.n(); ++j)
    for (int i = 0; i <= g.n(); ++i) ue2(i, j) = std::pow(u(i, j) * eta.eta(i, j), 2);
  const double lambda = 1.5;
  for (double tau : {4.0, 8.0}) {
    const auto l = carleman_lhs(u, u, chi, 1.0, CarlemanWeight(lambda, tau), eta, 2.0);
    const double direct = std::pow(lambda, 4) * std::pow(tau, 3) *
                          annulus_weighted_integral(ue2, 0.5, 2.5, lambda, tau, WeightPower::w_phi3);
    EXPECT_NEAR(l.term_zero_order, direct, 1e-12 * direct);
    EXPECT_NEAR(l.combined, l.term_zero_order + l.term_gradient, 1e-12 * l.combined);
  }
  const auto a = carleman_lhs(u, u, chi, 1.0, CarlemanWeight(lambda, 4.0), eta, 1.0);
  const auto b = carleman_lhs(u, u, chi, 1.0, CarlemanWeight(lambda, 8.0), eta, 1.0);
  const double wa = annulus_weighted_integral(ue2, 0.5, 2.5, lambda, 4.0, WeightPower::w_phi3);
  const double wb = annulus_weighted_integral(ue2, 0.5, 2.5, lambda, 8.0, WeightPower::w_phi3);
  EXPECT_NEAR(b.term_zero_order / a.term_zero_order, 8.0 * wb / wa, 1e-10);
}

TEST(CarlemanLhs, ZeroCorrectorIgnoresU0) {
  const DomainGrid g(3.25, 260);
  const Cutoff eta = make_cutoff(g);
  const DomainField u = harmonic(g, 3);
  const DomainField other = DomainField::sampled(g, [](Vec2 x) { return std::sin(3.0 * x.x) * x.y; });
  const CarlemanWeight w(1.0, 5.0);
  const auto a = carleman_lhs(u, u, zero_corrector(), 0.5, w, eta, 1.0);
  const auto b = carleman_lhs(u, other, zero_corrector(), 0.5, w, eta, 1.0);
  EXPECT_EQ(a.term_gradient, b.term_gradient);
  EXPECT_EQ(a.term_zero_order, b.term_zero_order);
}

TEST(CarlemanRhs, IdentityReducesToProductRule) {
  const DomainGrid g(3.25, 260);
  const HarmonicPolynomial p(2);
  const DomainField u = DomainField::sampled(g, p);
  const auto r = carleman_rhs_values(u, zero_corrector(), 1.0, builtin_coefficient("identity"));
  std::size_t k = 0;
  visit_annulus(g, 0.5, 2.5, 4, [&](int i, int j, double) {
    const Vec2 x = g.node(i, j);
    const CutoffJet e = cutoff_jet(x);
    // Centred differences are exact on quadratics.
    const double expect = 2.0 * dot(p.gradient(x), e.grad) + p(x) * (e.hess.a11 + e.hess.a22);
    EXPECT_NEAR(r[k], expect, 1e-9 * (1.0 + std::abs(expect)));
    ++k;
  });
  EXPECT_EQ(k, r.size());
}

TEST(CarlemanRhs, SupportAndPointwiseBound) {
  const auto lam = builtin_coefficient("laminate");
  const Corrector chi = solve_corrector(lam, PeriodicGrid(8));
  const auto a_hat = homogenize(lam, chi);
  const double eps = 0.25;
  const DomainGrid g = matched_grid(3.25, eps, 8);
  const FourierBoundaryData data(3.25, 11);
  const auto sol = solve_epsilon_problem(lam, eps, g, [&](Vec2 x) { return data(x); });
  const auto r = carleman_rhs_values(sol.u, chi, eps, lam);

  const auto d = CorrectorDerivatives::compute(lam, chi);
  double X = 0.0, DX = 0.0, DV = 0.0;
  for (int j = 0; j < 2; ++j) {
    for (double v : chi.chi[j].values()) X = std::max(X, std::abs(v));
    for (std::size_t q = 0; q < chi.grid.node_count(); ++q) {
      DX = std::max(DX, std::hypot(d.dchi[j][0].values()[q], d.dchi[j][1].values()[q]));
      DV = std::max(DV, std::hypot(d.div_chiA[j][0].values()[q], d.div_chiA[j][1].values()[q]));
    }
  }
  const double amax = 1.0 / lam.mu();

  double rmax = 0.0, plateau = 0.0;
  std::size_t k = 0;
  std::vector<double> bound_ratio;
  visit_annulus(g, 0.5, 2.5, 4, [&](int i, int j, double) {
    const Vec2 x = g.node(i, j);
    const double rho = norm(x);
    rmax = std::max(rmax, std::abs(r[k]));
    if (rho >= 2.0 / 3.0 && rho <= 7.0 / 3.0) plateau = std::max(plateau, std::abs(r[k]));
    const CutoffJet e = cutoff_jet(x);
    const double G = norm(e.grad), H = frob(e.hess);
    double T = 0.0;
    for (int s = 0; s < 2; ++s) {
      const Mat2 sl{e.third[s][0][0], e.third[s][0][1], e.third[s][1][0], e.third[s][1][1]};
      T = std::max(T, frob(sl));
    }
    const double cu = amax * H + 2.0 * (amax * DX * H + DV * H + eps * X * amax * T);
    const double cg = 2.0 * amax * G + 2.0 * (2.0 * G * amax * DX + 2.0 * eps * X * amax * H);
    const double u = sol.u(i, j);
    const Vec2 du = gradient_at(sol.u, i, j);
    const double rhs = 2.0 * std::max(cu * cu, cg * cg) * (u * u + dot(du, du));
    EXPECT_LE(r[k] * r[k], rhs * (1.0 + 1e-12) + 1e-300);
    ++k;
  });
  EXPECT_GT(rmax, 0.0);
  EXPECT_LE(plateau, 1e-12 * rmax);
  EXPECT_NEAR(plateau_rhs_fraction(sol.u, chi, eps, lam), plateau / rmax, 1e-15);
}

TEST(ConsistencyResidual, ZeroFieldAndIdentityRefinement) {
  const auto id = builtin_coefficient("identity");
  const DomainGrid g0(3.25, 208);
  EXPECT_EQ(consistency_residual(DomainField(g0), zero_corrector(), 1.0, id, make_cutoff(g0)), 0.0);
  std::vector<double> res;
  for (int n : {208, 416}) {
    const DomainGrid g(3.25, n);
    res.push_back(consistency_residual(harmonic(g, 3), zero_corrector(), 1.0, id, make_cutoff(g)));
  }
  EXPECT_LT(res[1], 0.1);
  EXPECT_GE(res[0] / res[1], 1.8);
}

TEST(ConsistencyResidual, LaminateDropsUnderRefinement) {
  const auto lam = builtin_coefficient("laminate");
  const FourierBoundaryData data(3.25, 20240917);
  const double eps = 0.125;
  std::vector<double> res;
  for (int m : {8, 16}) {
    const Corrector chi = solve_corrector(lam, PeriodicGrid(m));
    const DomainGrid g = matched_grid(3.25, eps, m);
    const auto sol = solve_epsilon_problem(lam, eps, g, [&](Vec2 x) { return data(x); });
    res.push_back(consistency_residual(sol.u, chi, eps, lam, make_cutoff(g)));
  }
  EXPECT_GE(res[0] / res[1], 1.8);
}

TEST(ClassicalCarleman, PositiveScaleInvariantAndDegenerate) {
  const DomainGrid g(2.75, 440);
  const Cutoff eta = make_cutoff(g);
  const DomainField v = harmonic(g, 2);
  DomainField v10 = v;
  for (double& x : v10.storage()) x *= 10.0;
  for (double tau : {5.0, 10.0, 20.0}) {
    const double r = classical_carleman_ratio(v, eta, Mat2::identity(), 2.0, tau);
    EXPECT_GT(r, 0.0);
    EXPECT_NEAR(classical_carleman_ratio(v10, eta, Mat2::identity(), 2.0, tau), r, 1e-12 * r);
  }
  EXPECT_THROW(classical_carleman_ratio(DomainField(g), eta, Mat2::identity(), 2.0, 5.0), DegenerateInput);
}

TEST(TensorHarmonic, SolvesTheConstantCoefficientEquation) {
  const DomainGrid g(1.0, 200);
  for (const Mat2& a : {Mat2::diagonal(0.5, 1.0 / std::sqrt(3.0)), Mat2{1.2, 0.3, 0.3, 0.7}}) {
    const DomainField v = tensor_harmonic(g, a, 3);
    double worst = 0.0, scale = 0.0;
    for (int j = 1; j < g.n(); ++j) {
      for (int i = 1; i < g.n(); ++i) {
        const Hessian2 h = hessian_at(v, i, j);
        worst = std::max(worst, std::abs(a.a11 * h.xx + 2.0 * a.a12 * h.xy + a.a22 * h.yy));
        scale = std::max(scale, std::abs(h.xx) + std::abs(h.yy));
      }
    }
    EXPECT_LT(worst, 1e-8 * scale);
  }
}

TEST(Caccioppoli, ConstantAndLinearOracles) {
  const DomainGrid g(3.0, 600);
  EXPECT_EQ(caccioppoli_constant(DomainField(g, 1.0), 0.5, 1.0, 2.0, 2.5, 1.0, 5.0), 0.0);
  // u = x1, tau = 0: 3 pi / (16 * 39 pi / 4) = 1/52.
  const DomainField x1 = DomainField::sampled(g, [](Vec2 x) { return x.x; });
  EXPECT_NEAR(caccioppoli_constant(x1, 0.5, 1.0, 2.0, 2.5, 1.0, 0.0), 1.0 / 52.0, 1e-3 / 52.0);
  DomainField x7 = x1;
  for (double& v : x7.storage()) v *= 7.0;
  EXPECT_NEAR(caccioppoli_constant(x7, 0.5, 1.0, 2.0, 2.5, 1.0, 5.0), caccioppoli_constant(x1, 0.5, 1.0, 2.0, 2.5, 1.0, 5.0),
              1e-12);
  EXPECT_THROW(caccioppoli_constant(x1, 1.0, 0.5, 2.0, 2.5, 1.0, 5.0), ConfigError);
  EXPECT_THROW(caccioppoli_constant(x1, 0.5, 1.0, 2.0, 3.5, 1.0, 5.0), ConfigError);
  EXPECT_THROW(caccioppoli_constant(DomainField(g), 0.5, 1.0, 2.0, 2.5, 1.0, 5.0), DegenerateInput);
}

TEST(TauRange, EndpointsAndDegenerate) {
  CarlemanConstants c;
  c.tau0 = 5.0;
  c.C_l0t0 = 5.0;
  const auto t = tau_range(c, 6.0, 2.0);
  ASSERT_EQ(t.size(), 8u);
  EXPECT_EQ(t.front(), 5.0);
  EXPECT_EQ(t.back(), 515.0);
  for (std::size_t k = 1; k + 1 < t.size(); ++k) EXPECT_NEAR(t[k] * t[k], t[k - 1] * t[k + 1], 1e-9 * t[k] * t[k]);
  EXPECT_THROW(tau_range(c, 1.0, 0.0), DegenerateInput);
  c.C0 = -1.0;
  EXPECT_THROW(tau_range(c, 1.0, 1.0), ConfigError);
}

TEST(CarlemanCheck, IdentityHarmonicPassesWithCalibratedConstants) {
  ProbeSuite suite;
  const Calibration cal = calibrate(suite, CarlemanConstants{});
  EXPECT_GT(cal.constants.C0, 0.0);
  EXPECT_EQ(cal.constants.provenance, CarlemanConstants::Provenance::calibrated);
  EXPECT_EQ(cal.probes.size(), 4u * 2u * 4u);
  EXPECT_LE(cal.tau_spread, 10.0);

  const DomainGrid g(3.25, 390);
  const Cutoff eta = make_cutoff(g);
  const auto id = builtin_coefficient("identity");
  for (int k = 1; k <= 3; ++k) {
    const DomainField u = harmonic(g, k);
    const auto rep = carleman_check(u, u, zero_corrector(), 1.0, id, cal.constants, {1.0, 2.0}, eta);
    EXPECT_EQ(rep.points.size(), 16u);
    EXPECT_FALSE(rep.degenerate);
    EXPECT_LE(rep.max_ratio, 1.0) << k;
    DomainField u3 = u;
    for (double& v : u3.storage()) v *= 3.0;
    const auto rep3 = carleman_check(u3, u3, zero_corrector(), 1.0, id, cal.constants, {1.0, 2.0}, eta);
    EXPECT_NEAR(rep3.max_ratio, rep.max_ratio, 1e-12 * rep.max_ratio);
  }
}

TEST(CarlemanCheck, ContractErrors) {
  const DomainGrid g(3.25, 130);
  const Cutoff eta = make_cutoff(g);
  const auto id = builtin_coefficient("identity");
  const DomainField u = harmonic(g, 1);
  CarlemanConstants c;
  EXPECT_THROW(carleman_check(u, u, zero_corrector(), 1.0, id, c, {0.5}, eta), ConfigError);
  EXPECT_THROW(carleman_check(u, u, zero_corrector(), 1.0, id, c, {}, eta), ConfigError);
  EXPECT_THROW(carleman_check(DomainField(g), DomainField(g), zero_corrector(), 1.0, id, c, {1.0}, eta),
               DegenerateInput);
  // Mass only inside B_{1/2}: both sides vanish.
  const DomainField bump = DomainField::sampled(g, [](Vec2 x) { return std::max(0.0, 0.16 - dot(x, x)); });
  const auto rep = carleman_check(bump, bump, zero_corrector(), 1.0, id, c, {1.0}, eta);
  EXPECT_TRUE(rep.degenerate);
  EXPECT_FALSE(rep.passes());

  ProbeSuite bad;
  bad.lambdas = {0.5};
  EXPECT_THROW(calibrate(bad, c), ConfigError);
  bad = ProbeSuite{};
  bad.taus = {1.0};
  EXPECT_THROW(calibrate(bad, c), ConfigError);
}
