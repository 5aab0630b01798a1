#include "homlab/fields.hpp"

#include <limits>
#include <sstream>

namespace homlab {

std::pair<double, double> symmetric_eigenvalues(const Mat2& m) {
  const Mat2 s = m.symmetric_part();
  const double mean = 0.5 * (s.a11 + s.a22);
  const double rad = std::hypot(0.5 * (s.a11 - s.a22), s.a12);
  return {mean - rad, mean + rad};
}

PeriodicGrid::PeriodicGrid(int n) : n_(n) {
  if (n < 8 || (n & (n - 1)) != 0) {
    throw ConfigError("periodic grid needs n >= 8 and a power of two, got " + std::to_string(n));
  }
}

DomainGrid::DomainGrid(double half_extent, int n) : L_(half_extent), n_(n) {
  if (!(half_extent > 0.0) || n < 2) {
    throw ConfigError("domain grid needs L > 0 and n >= 2");
  }
}

CoefficientField::CoefficientField(std::string name, Evaluator eval, double mu, double lip)
    : name_(std::move(name)), eval_(std::move(eval)), mu_(mu), lip_(lip) {
  if (!eval_) throw ConfigError("coefficient field '" + name_ + "' has no evaluator");
  if (!(mu_ > 0.0 && mu_ <= 1.0)) throw ConfigError("coefficient ellipticity constant must lie in (0, 1]");
  if (lip_ < 0.0) throw ConfigError("Lipschitz constant must be nonnegative");
}

void GrowthParams::validate() const {
  if (!(M > 0.0)) throw ConfigError("growth constant M must be positive");
  if (!(N1 >= 1.0) || !(N2 >= 1.0)) throw ConfigError("growth exponents N1, N2 must be >= 1");
}

CoefficientField builtin_coefficient(std::string_view name) {
  if (name == "identity") {
    return CoefficientField("identity", [](Vec2) { return Mat2::identity(); }, 1.0, 0.0)
        .set_diagonal(true);
  }
  if (name == "laminate") {
    // max |a'| = 2 pi sqrt(2 sqrt3 - 3) / (3 - sqrt3)^2, attained where sin = 1 - sqrt3.
    const double s3 = std::sqrt(3.0);
    const double lip = 2.0 * kPi * std::sqrt(2.0 * s3 - 3.0) / ((3.0 - s3) * (3.0 - s3));
    return CoefficientField(
               "laminate",
               [](Vec2 y) {
                 const double a = 1.0 / (2.0 + std::sin(2.0 * kPi * y.x));
                 return Mat2::diagonal(a, a);
               },
               1.0 / 3.0, lip)
        .set_diagonal(true);
  }
  if (name == "smooth2d") {
    return CoefficientField(
               "smooth2d",
               [](Vec2 y) {
                 const double c = 1.5 + 0.5 * std::sin(2.0 * kPi * y.x) * std::sin(2.0 * kPi * y.y);
                 return Mat2::diagonal(c, c);
               },
               0.5, kPi)
        .set_diagonal(true);
  }
  throw ConfigError("unknown coefficient family '" + std::string(name) + "'");
}

namespace {

double spectral_norm_sym(const Mat2& d) {
  const auto [lo, hi] = symmetric_eigenvalues(d);
  return std::max(std::abs(lo), std::abs(hi));
}

Mat2 difference(const Mat2& a, const Mat2& b) {
  return {a.a11 - b.a11, a.a12 - b.a12, a.a21 - b.a21, a.a22 - b.a22};
}

}  // namespace

AssumptionCheck verify_assumptions(const CoefficientField& a, int samples) {
  if (samples < 10000) throw ConfigError("verify_assumptions needs at least 1e4 samples");
  const int s = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(samples))));
  const double d = 1.0 / s;
  // Offset lattice so samples do not sit on the symmetry lines of the builtin families.
  const double off = 0.5 * d;

  std::vector<Mat2> vals(static_cast<std::size_t>(s) * s);
  double lam_min = std::numeric_limits<double>::infinity();
  double lam_max = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < s; ++j) {
    for (int i = 0; i < s; ++i) {
      const Vec2 y{off + i * d, off + j * d};
      const Mat2 m = a(y);
      const double scale = std::max({std::abs(m.a11), std::abs(m.a22), 1.0});
      if (std::abs(m.a12 - m.a21) > 1e-12 * scale) {
        std::ostringstream os;
        os << "A(" << y.x << ", " << y.y << ") has a12 - a21 = " << (m.a12 - m.a21);
        throw AssumptionViolation("symmetry", os.str());
      }
      const auto [lo, hi] = symmetric_eigenvalues(m);
      lam_min = std::min(lam_min, lo);
      lam_max = std::max(lam_max, hi);
      for (const Vec2 z : {Vec2{1.0, 0.0}, Vec2{0.0, 1.0}, Vec2{-2.0, 3.0}}) {
        const Mat2 shifted = a(y + z);
        if (spectral_norm_sym(difference(shifted, m)) > 1e-10 * scale) {
          std::ostringstream os;
          os << "A(y + z) != A(y) at y = (" << y.x << ", " << y.y << ")";
          throw AssumptionViolation("periodicity", os.str());
        }
      }
      vals[static_cast<std::size_t>(j) * s + i] = m;
    }
  }
  if (!(lam_min > 0.0)) {
    throw AssumptionViolation("ellipticity", "smallest sampled eigenvalue " + std::to_string(lam_min) + " <= 0");
  }
  AssumptionCheck out;
  out.mu_hat = std::min(lam_min, 1.0 / lam_max);

  double lip = 0.0;
  for (int j = 0; j < s; ++j) {
    for (int i = 0; i < s; ++i) {
      const Mat2& m = vals[static_cast<std::size_t>(j) * s + i];
      const Mat2& right = vals[static_cast<std::size_t>(j) * s + (i + 1) % s];
      const Mat2& up = vals[static_cast<std::size_t>((j + 1) % s) * s + i];
      lip = std::max(lip, spectral_norm_sym(difference(right, m)) / d);
      lip = std::max(lip, spectral_norm_sym(difference(up, m)) / d);
    }
  }
  out.lip_hat = lip;
  return out;
}

namespace detail {

void check_annulus(const DomainGrid& g, double r_in, double r_out, int m) {
  if (m < 2) throw ConfigError("quadrature subsampling needs m >= 2");
  if (!(r_in >= 0.0) || !(r_out > r_in)) {
    throw GeometryError("annulus needs 0 <= r_in < r_out");
  }
  if (r_out > g.half_extent() * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "ball of radius " << r_out << " exceeds the domain [-" << g.half_extent() << ", "
       << g.half_extent() << "]^2";
    throw GeometryError(os.str());
  }
}

double dual_cell_fraction(const DomainGrid& g, int i, int j, double r_in, double r_out, int m) {
  const double h = g.h();
  const double L = g.half_extent();
  const double cx = g.coord(i);
  const double cy = g.coord(j);
  const double sub = h / m;
  const double r_in2 = r_in * r_in;
  const double r_out2 = r_out * r_out;
  int count = 0;
  for (int b = 0; b < m; ++b) {
    const double py = cy - 0.5 * h + (b + 0.5) * sub;
    if (std::abs(py) > L) continue;
    for (int a = 0; a < m; ++a) {
      const double px = cx - 0.5 * h + (a + 0.5) * sub;
      if (std::abs(px) > L) continue;
      const double r2 = px * px + py * py;
      if (r2 >= r_in2 && r2 < r_out2) ++count;
    }
  }
  return static_cast<double>(count) / (m * m);
}

}  // namespace detail

namespace {

// Fully covered cells use the nodal value; cells cut by the circle or the domain
// edge average transform(bilinear f) over their covered subsample points.
template <class Transform>
double ball_quadrature(const DomainField& f, double r, int m, Transform&& transform) {
  const DomainGrid& g = f.grid();
  const double h = g.h();
  const double L = g.half_extent();
  const double sub = h / m;
  const double r2 = r * r;
  double total = 0.0;
  visit_annulus(g, 0.0, r, m, [&](int i, int j, double) {
    const Vec2 c = g.node(i, j);
    const double far = std::hypot(std::abs(c.x) + 0.5 * h, std::abs(c.y) + 0.5 * h);
    if (far < r && !g.is_boundary(i, j)) {
      total += transform(f(i, j));
      return;
    }
    double acc = 0.0;
    for (int b = 0; b < m; ++b) {
      const double py = c.y - 0.5 * h + (b + 0.5) * sub;
      if (std::abs(py) > L) continue;
      for (int a = 0; a < m; ++a) {
        const double px = c.x - 0.5 * h + (a + 0.5) * sub;
        if (std::abs(px) > L || px * px + py * py >= r2) continue;
        acc += transform(bilinear(f, {px, py}));
      }
    }
    total += acc / (m * m);
  });
  return total * h * h;
}

}  // namespace

double ball_integral(const DomainField& f, double r, int m) {
  return ball_quadrature(f, r, m, [](double v) { return v; });
}

double ball_l2_norm(const DomainField& f, double r, int m) {
  return std::sqrt(ball_quadrature(f, r, m, [](double v) { return v * v; }));
}

double annulus_weighted_integral(const DomainField& f, double r_in, double r_out, double lambda,
                                 double tau, WeightPower power, int m, double phi_ref) {
  if (!(lambda > 0.0) || !(tau >= 0.0)) throw ConfigError("weighted integral needs lambda > 0, tau >= 0");
  const DomainGrid& g = f.grid();
  return integrate_annulus(g, r_in, r_out, m, [&](int i, int j) {
    const Vec2 x = g.node(i, j);
    const double r2 = dot(x, x);
    const double phi = std::exp(-lambda * r2);
    const double w = std::exp(2.0 * tau * (phi - phi_ref));
    double p = 1.0;
    switch (power) {
      case WeightPower::w: p = 1.0; break;
      case WeightPower::w_phi: p = phi; break;
      case WeightPower::w_phi3: p = phi * phi * phi; break;
      case WeightPower::w_x2_phi2: p = r2 * phi * phi; break;
    }
    return f(i, j) * p * w;
  });
}

namespace {

double axis_derivative(const DomainField& f, int i, int j, int di, int dj) {
  const DomainGrid& g = f.grid();
  const int n = g.n();
  const double h = g.h();
  const int k = di != 0 ? i : j;
  auto at = [&](int s) { return di != 0 ? f(i + s * di, j) : f(i, j + s * dj); };
  if (k > 0 && k < n) return (at(1) - at(-1)) / (2.0 * h);
  if (k == 0) return (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
  return (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h);
}

}  // namespace

Vec2 gradient_at(const DomainField& f, int i, int j) {
  return {axis_derivative(f, i, j, 1, 0), axis_derivative(f, i, j, 0, 1)};
}

Hessian2 hessian_at(const DomainField& f, int i, int j) {
  const double h = f.grid().h();
  const double c = f(i, j);
  Hessian2 H;
  H.xx = (f(i + 1, j) - 2.0 * c + f(i - 1, j)) / (h * h);
  H.yy = (f(i, j + 1) - 2.0 * c + f(i, j - 1)) / (h * h);
  H.xy = (f(i + 1, j + 1) - f(i + 1, j - 1) - f(i - 1, j + 1) + f(i - 1, j - 1)) / (4.0 * h * h);
  return H;
}

double bilinear(const DomainField& f, Vec2 x) {
  const DomainGrid& g = f.grid();
  const double h = g.h();
  const double L = g.half_extent();
  const double tx = std::clamp((x.x + L) / h, 0.0, static_cast<double>(g.n()));
  const double ty = std::clamp((x.y + L) / h, 0.0, static_cast<double>(g.n()));
  const int i = std::min(static_cast<int>(tx), g.n() - 1);
  const int j = std::min(static_cast<int>(ty), g.n() - 1);
  const double fx = tx - i;
  const double fy = ty - j;
  return (1 - fx) * (1 - fy) * f(i, j) + fx * (1 - fy) * f(i + 1, j) + (1 - fx) * fy * f(i, j + 1) +
         fx * fy * f(i + 1, j + 1);
}

double periodic_bilinear(const CellField& f, Vec2 y) {
  const int n = f.grid().n();
  auto split = [n](double v, int& cell, double& frac) {
    double t = v * n;
    const double r = std::round(t);
    if (std::abs(t - r) < 1e-9) t = r;
    const double fl = std::floor(t);
    frac = t - fl;
    cell = static_cast<int>(static_cast<long long>(fl) % n);
  };
  int i, j;
  double fx, fy;
  split(y.x, i, fx);
  split(y.y, j, fy);
  if (fx == 0.0 && fy == 0.0) return f(i, j);
  return (1 - fx) * (1 - fy) * f(i, j) + fx * (1 - fy) * f(i + 1, j) + (1 - fx) * fy * f(i, j + 1) +
         fx * fy * f(i + 1, j + 1);
}

}  // namespace homlab
