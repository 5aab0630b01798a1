#include <gtest/gtest.h>

#include <random>

#include "homlab/elliptic.hpp"

using namespace homlab;

namespace {

std::vector<double> sample(const DomainGrid& g, double (*fn)(Vec2)) {
  return DomainField::sampled(g, fn).storage();
}

double max_interior_error(const DomainField& u, const std::function<double(Vec2)>& exact) {
  const DomainGrid& g = u.grid();
  double e = 0.0;
  for (int j = 0; j <= g.n(); ++j)
    for (int i = 0; i <= g.n(); ++i) e = std::max(e, std::abs(u(i, j) - exact(g.node(i, j))));
  return e;
}

}  // namespace

TEST(Assemble, IdentityIsFivePointLaplacian) {
  const DomainGrid g(1.0, 16);
  const auto op = assemble(builtin_coefficient("identity"), 1.0, g);
  std::vector<double> out;
  op.apply(std::vector<double>(g.node_count(), 3.0), out);
  for (double v : out) EXPECT_EQ(v, 0.0);
  op.apply(sample(g, [](Vec2 x) { return x.x * x.x; }), out);
  for (int j = 1; j < 16; ++j)
    for (int i = 1; i < 16; ++i) EXPECT_NEAR(out[g.index(i, j)], -2.0, 1e-10);
}

TEST(Assemble, ConstantsInKernelForOscillatingCoefficients) {
  const DomainGrid g(1.0, 64);
  const auto op = assemble(builtin_coefficient("smooth2d"), 0.25, g);
  std::vector<double> out;
  op.apply(std::vector<double>(g.node_count(), -1.7), out);
  for (double v : out) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Assemble, ResolutionRuleIsHardError) {
  const auto a = builtin_coefficient("laminate");
  EXPECT_NO_THROW(assemble(a, 1.0 / 8.0, DomainGrid(3.2, 512)));
  try {
    assemble(a, 1.0 / 8.0, DomainGrid(3.2, 256));
    FAIL() << "expected ResolutionError";
  } catch (const ResolutionError& e) {
    EXPECT_EQ(e.required_n(), 410);
  }
  EXPECT_THROW(assemble(a, 0.0, DomainGrid(1.0, 64)), ConfigError);
  EXPECT_THROW(assemble(a, 1.5, DomainGrid(1.0, 64)), ConfigError);
}

TEST(AssembleHomogenized, AnisotropicAndCrossStencils) {
  const DomainGrid g(1.0, 20);
  std::vector<double> out;
  const auto diag = assemble_homogenized(constant_tensor(Mat2::diagonal(0.5, 1.0 / std::sqrt(3.0))), g);
  diag.apply(sample(g, [](Vec2 x) { return x.x * x.x; }), out);
  for (int j = 1; j < 20; ++j)
    for (int i = 1; i < 20; ++i) EXPECT_NEAR(out[g.index(i, j)], -1.0, 1e-10);

  const auto cross = assemble_homogenized(constant_tensor(Mat2{1.0, 0.1, 0.1, 1.0}), g);
  cross.apply(sample(g, [](Vec2 x) { return x.x * x.y; }), out);
  for (int j = 1; j < 20; ++j)
    for (int i = 1; i < 20; ++i) EXPECT_NEAR(out[g.index(i, j)], -0.2, 1e-10);
  EXPECT_THROW(assemble_homogenized(constant_tensor(Mat2{1.0, 0.1, 0.1, 1.0}), g, BoundaryMask::disc(0.5)),
               ConfigError);
}

TEST(Operator, SelfAdjointOnInteriorSupportedFields) {
  const DomainGrid g(1.0, 64);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const CoefficientField tilted(
      "tilted",
      [](Vec2 y) {
        const double s = 0.2 * std::sin(2 * kPi * (y.x + y.y));
        return Mat2{1.5 + 0.3 * std::cos(2 * kPi * y.x), s, s, 1.2};
      },
      0.3, 5.0);
  for (const auto* a : {&tilted}) {
    const auto op = assemble(*a, 0.25, g);
    std::vector<double> u(g.node_count(), 0.0), v(g.node_count(), 0.0), Au, Av;
    for (int j = 1; j < 64; ++j)
      for (int i = 1; i < 64; ++i) {
        u[g.index(i, j)] = U(rng);
        v[g.index(i, j)] = U(rng);
      }
    op.apply(u, Au);
    op.apply(v, Av);
    const double lhs = dot_product(v, Au), rhs = dot_product(u, Av);
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::abs(lhs));
    EXPECT_GT(dot_product(u, Au), 0.0);
  }
}

TEST(Dirichlet, LinearDataIsReproducedExactly) {
  const DomainGrid g(1.0, 64);
  const auto op = assemble(builtin_coefficient("identity"), 1.0, g);
  const auto sol = solve_dirichlet(op, BoundaryData::sample(op, [](Vec2 x) { return x.x; }), 1e-13);
  EXPECT_LT(max_interior_error(sol.u, [](Vec2 x) { return x.x; }), 1e-11);
}

TEST(Dirichlet, QuadraticHarmonicIsExact) {
  const DomainGrid g(1.0, 64);
  const auto op = assemble(builtin_coefficient("identity"), 1.0, g);
  const HarmonicPolynomial p(2);
  const auto sol = solve_dirichlet(op, BoundaryData::sample(op, p), 1e-13);
  EXPECT_LT(max_interior_error(sol.u, p), 1e-11);
  for (int i = 0; i <= 64; ++i) EXPECT_EQ(sol.u(i, 0), p(g.node(i, 0)));
}

TEST(Dirichlet, SecondOrderForHigherHarmonics) {
  const HarmonicPolynomial p(5);
  double err[2];
  for (int k = 0; k < 2; ++k) {
    const DomainGrid g(1.0, 32 << k);
    const auto op = assemble(builtin_coefficient("identity"), 1.0, g);
    err[k] = max_interior_error(solve_dirichlet(op, BoundaryData::sample(op, p), 1e-12).u, p);
  }
  EXPECT_GT(err[0] / err[1], 3.5);
  EXPECT_LT(err[0] / err[1], 4.5);
}

TEST(Dirichlet, MaximumPrincipleWithRandomBoundaryData) {
  const DomainGrid g(1.0, 40);
  const auto op = assemble(builtin_coefficient("identity"), 1.0, g);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> U(-2.0, 5.0);
  for (int trial = 0; trial < 3; ++trial) {
    BoundaryData d;
    for (std::size_t k = 0; k < op.boundary_points().size(); ++k) d.values.push_back(U(rng));
    const auto sol = solve_dirichlet(op, d, 1e-12);
    const double lo = *std::min_element(d.values.begin(), d.values.end());
    const double hi = *std::max_element(d.values.begin(), d.values.end());
    for (double v : sol.u.values()) {
      EXPECT_GE(v, lo - 1e-10);
      EXPECT_LE(v, hi + 1e-10);
    }
  }
}

TEST(Dirichlet, LaminateSolveMeetsTolerance) {
  const double eps = 1.0 / 8.0;
  const DomainGrid g = matched_grid(1.0, eps, 8);
  const auto op = assemble(builtin_coefficient("laminate"), eps, g);
  const FourierBoundaryData fb(1.0, 42);
  const auto sol = solve_dirichlet(op, BoundaryData::sample(op, fb), 1e-10);
  EXPECT_LE(sol.stats.relative_residual, 1e-10);
  EXPECT_LT(sol.stats.iterations, 80);
  EXPECT_TRUE(sol.u.all_finite());
}

TEST(Dirichlet, EmbeddedDiscConvergesForHarmonicData) {
  const HarmonicPolynomial p(3);
  double err[2];
  for (int k = 0; k < 2; ++k) {
    const DomainGrid g(1.5, 60 << k);
    const auto op = assemble_homogenized(constant_tensor(Mat2::identity()), g, BoundaryMask::disc(1.23));
    const auto sol = solve_dirichlet(op, BoundaryData::sample(op, p), 1e-12);
    double e = 0.0;
    for (int j = 0; j <= g.n(); ++j)
      for (int i = 0; i <= g.n(); ++i)
        if (op.is_active(i, j)) e = std::max(e, std::abs(sol.u(i, j) - p(g.node(i, j))));
    err[k] = e;
  }
  EXPECT_LT(err[1], 1e-3);
  EXPECT_GT(err[0] / err[1], 1.8);
}

TEST(Dirichlet, EmbeddedDiscAnisotropicQuadratic) {
  // 1/sqrt(3) x^2 - 1/2 y^2 solves the laminate homogenized equation.
  const double a1 = 0.5, a2 = 1.0 / std::sqrt(3.0);
  auto exact = [&](Vec2 x) { return a2 * x.x * x.x - a1 * x.y * x.y + x.x; };
  const DomainGrid g(1.5, 120);
  const auto op = assemble_homogenized(constant_tensor(Mat2::diagonal(a1, a2)), g, BoundaryMask::disc(1.1));
  DomainField ext(g, -7.0);
  const auto sol = solve_dirichlet(op, BoundaryData::sample(op, exact), 1e-12, &ext);
  double e = 0.0;
  for (int j = 0; j <= g.n(); ++j)
    for (int i = 0; i <= g.n(); ++i) {
      if (op.is_active(i, j)) {
        e = std::max(e, std::abs(sol.u(i, j) - exact(g.node(i, j))));
      } else {
        EXPECT_EQ(sol.u(i, j), -7.0);
      }
    }
  EXPECT_LT(e, 1e-3);
}

TEST(Dirichlet, BoundaryDataSizeMismatch) {
  const DomainGrid g(1.0, 8);
  const auto op = assemble_homogenized(constant_tensor(Mat2::identity()), g);
  EXPECT_THROW(solve_dirichlet(op, BoundaryData{{1.0, 2.0}}), ConfigError);
  EXPECT_THROW(solve_dirichlet(op, BoundaryData::sample(op, [](Vec2) { return 0.0; }), 1e-6), ConfigError);
}

TEST(Harmonic, LowDegreesAndGradient) {
  EXPECT_EQ(HarmonicPolynomial(0)(Vec2{3.0, -2.0}), 1.0);
  EXPECT_EQ(HarmonicPolynomial(1)(Vec2{3.0, -2.0}), 3.0);
  EXPECT_NEAR(HarmonicPolynomial(2)(Vec2{3.0, -2.0}), 5.0, 1e-12);
  EXPECT_THROW(HarmonicPolynomial(-1), ConfigError);
  const HarmonicPolynomial p(4);
  const Vec2 x{0.7, -0.4};
  const double h = 1e-6;
  const Vec2 g = p.gradient(x);
  EXPECT_NEAR(g.x, (p(x + Vec2{h, 0}) - p(x - Vec2{h, 0})) / (2 * h), 1e-7);
  EXPECT_NEAR(g.y, (p(x + Vec2{0, h}) - p(x - Vec2{0, h})) / (2 * h), 1e-7);
}

TEST(Harmonic, DiscreteLaplacianOfQuadraticVanishes) {
  const DomainGrid g(2.0, 30);
  const auto op = assemble_homogenized(constant_tensor(Mat2::identity()), g);
  std::vector<double> out;
  op.apply(DomainField::sampled(g, HarmonicPolynomial(2)).storage(), out);
  for (double v : out) EXPECT_NEAR(v, 0.0, 1e-10);
}

TEST(Fourier, DeterministicContinuousAndPeriodic) {
  const FourierBoundaryData a(3.25, 1234), b(3.25, 1234), c(3.25, 99);
  EXPECT_EQ(a(Vec2{1.0, 3.25}), b(Vec2{1.0, 3.25}));
  EXPECT_NE(a(Vec2{1.0, 3.25}), c(Vec2{1.0, 3.25}));
  EXPECT_NEAR(a.at_arclength(0.0), a.at_arclength(26.0), 1e-12);
  const double L = 3.25, d = 1e-9;
  for (const Vec2 corner : {Vec2{L, -L}, Vec2{L, L}, Vec2{-L, L}, Vec2{-L, -L}}) {
    const double v0 = a(corner);
    EXPECT_NEAR(a(Vec2{corner.x - d * corner.x / L, corner.y}), v0, 1e-6);
    EXPECT_NEAR(a(Vec2{corner.x, corner.y - d * corner.y / L}), v0, 1e-6);
  }
}

TEST(MatchedGrid, AlignedSizes) {
  EXPECT_EQ(matched_grid(3.25, 1.0 / 8, 8).n(), 416);
  EXPECT_EQ(matched_grid(3.25, 1.0 / 64, 8).n(), 3328);
  EXPECT_EQ(matched_grid(3.25, 1.0 / 16, 16).n(), 1664);
  EXPECT_THROW(matched_grid(3.2, 1.0 / 8, 8), ConfigError);
  EXPECT_THROW(matched_grid(3.25, 1.0 / 8, 6), ConfigError);
}
