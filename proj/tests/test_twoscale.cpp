#include <gtest/gtest.h>

#include <cmath>

#include "homlab/twoscale.hpp"

using namespace homlab;

namespace {

double saddle(Vec2 x) { return x.x * x.x - x.y * x.y + 0.5 * x.x; }

double diff_norm(const DomainField& a, const DomainField& b, double r) {
  DomainField d = a;
  for (std::size_t k = 0; k < d.storage().size(); ++k) d.storage()[k] -= b.values()[k];
  return ball_l2_norm(d, r);
}

}  // namespace

TEST(RecoverU0, IdentityReproducesTheSolution) {
  const auto id = builtin_coefficient("identity");
  const auto a_hat = constant_tensor(Mat2::identity());
  double prev = 0.0;
  for (int n : {208, 416}) {
    const DomainGrid g(3.25, n);
    const auto sol = solve_epsilon_problem(id, 1.0, g, saddle);
    const auto rec = recover_u0(sol.u, a_hat);
    const double err = diff_norm(sol.u, rec.u0, 11.0 / 4.0) / ball_l2_norm(sol.u, 11.0 / 4.0);
    EXPECT_LT(err, 1e-3) << n;
    if (prev > 0.0) EXPECT_LT(err, prev);
    prev = err;
    EXPECT_GE(rec.r0, 11.0 / 4.0);
    EXPECT_LE(rec.r0, 23.0 / 8.0);
  }
}

TEST(RecoverU0, ZeroDataGivesZeroAndFirstCandidate) {
  const DomainGrid g(3.0, 240);
  const auto rec = recover_u0(DomainField(g), constant_tensor(Mat2::diagonal(0.5, 0.6)));
  EXPECT_EQ(rec.r0, 11.0 / 4.0);
  EXPECT_EQ(rec.ring_energy, 0.0);
  for (double v : rec.u0.values()) EXPECT_EQ(v, 0.0);
}

TEST(RecoverU0, ChosenRingHasBelowAverageEnergy) {
  const auto lam = builtin_coefficient("laminate");
  const Corrector chi = solve_corrector(lam, PeriodicGrid(8));
  const auto a_hat = homogenize(lam, chi);
  const DomainGrid g = matched_grid(3.25, 0.25, 8);
  const FourierBoundaryData data(3.25, 7);
  const auto sol = solve_epsilon_problem(lam, 0.25, g, [&](Vec2 x) { return data(x); });
  const auto rec = recover_u0(sol.u, a_hat);
  EXPECT_GT(rec.ring_energy, 0.0);
  EXPECT_LE(rec.ring_energy, rec.mean_ring_energy);
  EXPECT_LT(rec.stats.relative_residual, 1e-10);
}

TEST(RecoverU0, SmallDomainIsGeometryError) {
  EXPECT_THROW(recover_u0(DomainField(DomainGrid(2.8, 64)), constant_tensor(Mat2::identity())), GeometryError);
}

TEST(Expansion, ZeroCorrectorLeavesU0) {
  const Corrector chi = solve_corrector(builtin_coefficient("identity"), PeriodicGrid(8));
  const DomainGrid g(1.0, 32);
  const auto u0 = DomainField::sampled(g, saddle);
  const auto w = expansion(u0, chi, 0.125);
  for (std::size_t k = 0; k < w.values().size(); ++k) EXPECT_EQ(w.values()[k], u0.values()[k]);
}

TEST(Expansion, DeviationIsBoundedByEps) {
  const auto a = builtin_coefficient("smooth2d");
  const Corrector chi = solve_corrector(a, PeriodicGrid(16));
  double chi_max = 0.0;
  for (const auto& c : chi.chi)
    for (double v : c.values()) chi_max = std::max(chi_max, std::abs(v));
  const DomainGrid g(1.0, 128);
  const auto u0 = DomainField::sampled(g, [](Vec2 x) { return std::sin(x.x) + x.y; });
  for (double eps : {0.25, 0.0625}) {
    const auto w = expansion(u0, chi, eps);
    double dev = 0.0;
    for (std::size_t k = 0; k < w.values().size(); ++k) dev = std::max(dev, std::abs(w.values()[k] - u0.values()[k]));
    // |grad u0| <= sqrt(2); bilinear interpolation does not exceed the nodal maximum.
    EXPECT_LE(dev, eps * chi_max * 2.0 * std::sqrt(2.0) + 1e-12);
    EXPECT_GT(dev, 0.0);
  }
}

TEST(Expansion, LaminateFluxOfLinearU0IsHomogenized) {
  const auto lam = builtin_coefficient("laminate");
  const Corrector chi = solve_corrector(lam, PeriodicGrid(8));
  const double eps = 0.25;
  const DomainGrid g = matched_grid(2.0, eps, 8);
  const auto w = expansion(DomainField::sampled(g, [](Vec2 x) { return x.x; }), chi, eps);
  const double h = g.h();
  // Edge fluxes a(x/eps) dw/dx1 away from the one-sided boundary differences.
  for (int j = 2; j < g.n() - 2; j += 7) {
    for (int i = 2; i < g.n() - 3; ++i) {
      const Vec2 mid = 0.5 * (g.node(i, j) + g.node(i + 1, j));
      const double flux = lam((1.0 / eps) * mid).a11 * (w(i + 1, j) - w(i, j)) / h;
      EXPECT_NEAR(flux, 0.5, 1e-8);
    }
  }
}

TEST(LogLogSlope, PowerLawAndDegenerateInputs) {
  EXPECT_NEAR(loglog_slope({1.0, 0.5, 0.25}, {3.0, 1.5, 0.75}), 1.0, 1e-12);
  EXPECT_NEAR(loglog_slope({0.1, 0.01}, {2.0, 2.0 * std::sqrt(0.1)}), 0.5, 1e-12);
  EXPECT_THROW(loglog_slope({1.0}, {1.0}), DegenerateInput);
  EXPECT_THROW(loglog_slope({1.0, 1.0}, {1.0, 2.0}), DegenerateInput);
  EXPECT_THROW(loglog_slope({1.0, 0.5}, {0.0, 2.0}), DegenerateInput);
}

TEST(ConvergenceStudy, IdentityIsFlaggedAsFloor) {
  const auto id = builtin_coefficient("identity");
  const Corrector chi = solve_corrector(id, PeriodicGrid(8));
  const auto study = convergence_study(id, saddle, {0.5, 0.25}, 3.25, chi, constant_tensor(Mat2::identity()));
  EXPECT_TRUE(study.floor);
  ASSERT_EQ(study.rows.size(), 2u);
  for (const auto& r : study.rows) EXPECT_LT(r.l2_err, 1e-3 * r.u_norm_b3);
}

TEST(ConvergenceStudy, LaminateErrorsShrinkWithEps) {
  const auto lam = builtin_coefficient("laminate");
  const Corrector chi = solve_corrector(lam, PeriodicGrid(8));
  const auto a_hat = homogenize(lam, chi);
  const FourierBoundaryData data(3.25, 20240917);
  const auto study =
      convergence_study(lam, [&](Vec2 x) { return data(x); }, {0.25, 0.125}, 3.25, chi, a_hat, 1e-10, 2);
  EXPECT_FALSE(study.floor);
  EXPECT_GT(study.rows[0].l2_err, study.rows[1].l2_err);
  EXPECT_GT(study.rows[0].h1_err, study.rows[1].h1_err);
  EXPECT_GE(study.l2_slope, 0.5);
  for (const auto& r : study.rows) EXPECT_NEAR(r.constant, r.l2_err / (std::sqrt(r.eps) * r.u_norm_b3), 1e-15);
}

TEST(ConvergenceStudy, RejectsUnsortedEps) {
  const auto id = builtin_coefficient("identity");
  const Corrector chi = solve_corrector(id, PeriodicGrid(8));
  EXPECT_THROW(convergence_study(id, saddle, {0.25, 0.5}, 3.25, chi, constant_tensor(Mat2::identity())), ConfigError);
  EXPECT_THROW(convergence_study(id, saddle, {}, 3.25, chi, constant_tensor(Mat2::identity())), ConfigError);
}
