#pragma once

// Carleman weight and the fixed cutoff, both sides of the Carleman-type
// inequality for u_eps (right side from the expanded operator), and the
// classical Carleman and weighted Caccioppoli checks.

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "homlab/cell.hpp"
#include "homlab/fields.hpp"

namespace homlab {

/// phi = exp(-lambda |x|^2) and w = exp(2 tau (phi - phi_ref)). With phi_ref = 1
/// the weight lies in (0, 1]; any other reference only rescales every weighted
/// integral by the same constant exp(2 tau (1 - phi_ref)).
struct CarlemanWeight {
  double lambda = 1.0;
  double tau = 0.0;
  double phi_ref = 1.0;

  /// Throws ConfigError unless lambda > 0 and tau >= 0.
  CarlemanWeight(double lambda, double tau, double phi_ref = 1.0);

  /// Reference phi(r): the weight is at most 1 on |x| >= r, which keeps large tau finite.
  static CarlemanWeight normalized_at(double lambda, double tau, double r) {
    return {lambda, tau, std::exp(-lambda * r * r)};
  }

  double phi(double r2) const { return std::exp(-lambda * r2); }
  double weight(double r2) const { return std::exp(2.0 * tau * (phi(r2) - phi_ref)); }
};

/// psi(t) = f(t) / (f(t) + f(1 - t)), f(t) = exp(-1/t) for t > 0 and 0 otherwise.
double cutoff_psi(double t);

/// Radial cutoff eta(rho) = psi(6 (rho - 1/2)) psi(6 (5/2 - rho)):
/// 0 for rho <= 1/2 and rho >= 5/2, 1 on [2/3, 7/3].
double cutoff_profile(double rho);

/// Value and exact Cartesian derivatives of eta(|x|) up to third order.
struct CutoffJet {
  double value = 0.0;
  Vec2 grad;
  Mat2 hess;
  std::array<std::array<std::array<double, 2>, 2>, 2> third{};  // d_i d_j d_k eta
};
CutoffJet cutoff_jet(Vec2 x);

struct Cutoff {
  static constexpr double inner = 0.5;
  static constexpr double plateau_in = 2.0 / 3.0;
  static constexpr double plateau_out = 7.0 / 3.0;
  static constexpr double outer = 2.5;

  DomainField eta;

  CutoffJet jet(Vec2 x) const { return cutoff_jet(x); }
};

/// Samples eta on `grid`. Throws GeometryError when the grid does not cover B_{5/2}.
Cutoff make_cutoff(const DomainGrid& grid);

struct CarlemanConstants {
  enum class Provenance { configured, calibrated };

  double C0 = 1.0;
  double lambda0 = 1.0;
  double tau0 = 5.0;
  double C_l0t0 = 5.0;
  Provenance provenance = Provenance::configured;

  /// Throws ConfigError unless all four constants are positive and finite.
  void validate() const;
  std::string provenance_name() const { return provenance == Provenance::calibrated ? "calibrated" : "configured"; }
};

/// Per-node integrands on the cutoff's support 1/2 <= |x| < 5/2, each node
/// carrying its quadrature area. Columns not needed by a check stay zero.
struct SupportSamples {
  std::vector<double> area;
  std::vector<double> r2;
  std::vector<double> zero;  // (u eta)^2
  std::vector<double> grad;  // |grad[(u - eps chi_j d_j u0) eta]|^2
  std::vector<double> rhs;   // R^2

  std::size_t size() const { return area.size(); }
};

/// Unscaled weighted integrals: int phi^3 zero w, int phi grad w, int rhs w.
struct WeightedSums {
  double zero = 0.0;
  double grad = 0.0;
  double rhs = 0.0;
};
WeightedSums weighted_sums(const SupportSamples& s, const CarlemanWeight& w);

/// Zero-order and gradient columns for u_eps, u0 and the correctors (right side left zero).
SupportSamples carleman_lhs_samples(const DomainField& u_eps, const DomainField& u0, const Corrector& chi, double eps);

/// Right-hand integrand R(x)^2 of the expanded operator: R = -L_eps(u eta + eps chi_j d_j eta u)
/// written without any 1/eps term,
///   R = 2 A grad u . grad eta + (A : D^2 eta) u + (A grad_y chi_j) . grad d_j eta u
///     + 2 d_j eta (A grad_y chi_j) . grad u + div_y(chi_j A) . grad d_j eta u
///     + eps chi_j (A : D^2 d_j eta) u + 2 eps chi_j (A grad d_j eta) . grad u,
/// with A, chi and their cell derivatives at y = x / eps.
std::vector<double> carleman_rhs_values(const DomainField& u_eps, const Corrector& chi, double eps,
                                        const CoefficientField& a);

/// max |R| over nodes on the plateau 2/3 <= |x| <= 7/3 of the cutoff, relative to
/// max |R| over the whole support (0 when R vanishes).
double plateau_rhs_fraction(const DomainField& u_eps, const Corrector& chi, double eps, const CoefficientField& a);

/// Everything carleman_check needs, on one pass over the support.
SupportSamples carleman_samples(const DomainField& u_eps, const DomainField& u0, const Corrector& chi, double eps,
                                const CoefficientField& a);

struct CarlemanLhs {
  double term_zero_order = 0.0;  // lambda^4 tau^3 int phi^3 (u eta)^2 w
  double term_gradient = 0.0;    // lambda^2 tau int phi |grad[(u - eps chi d u0) eta]|^2 w
  double combined = 0.0;         // C0 / 2 (sum)
};

CarlemanLhs carleman_lhs(const DomainField& u_eps, const DomainField& u0, const Corrector& chi, double eps,
                         const CarlemanWeight& weight, const Cutoff& eta, double C0);

/// int R^2 w over the support.
double carleman_rhs(const DomainField& u_eps, const Corrector& chi, double eps, const CoefficientField& a,
                    const Cutoff& eta, const CarlemanWeight& weight);

/// ||L_h(u eta + eps chi_j d_j eta u) + R|| / ||R|| in L^2(B_3), with L_h the
/// assembled flux-form operator. 0 when R vanishes identically.
double consistency_residual(const DomainField& u_eps, const Corrector& chi, double eps, const CoefficientField& a,
                        const Cutoff& eta);

/// Zero-order, gradient and [L0(v eta)]^2 columns for the constant tensor a_hat.
SupportSamples classical_samples(const DomainField& v, const Mat2& a_hat);

/// RHS / LHS0 of the classical inequality, RHS = int [L0(v eta)]^2 w and
/// LHS0 = int (lambda^4 tau^3 phi^3 (v eta)^2 + lambda^2 tau phi |grad(v eta)|^2) w.
/// Throws DegenerateInput when LHS0 = 0.
double classical_ratio(const SupportSamples& s, const CarlemanWeight& w);
double classical_carleman_ratio(const DomainField& v, const Cutoff& eta, const Mat2& a_hat, double lambda,
                                double tau);

/// Empirical weighted Caccioppoli constant: int_{s2<|x|<s3} |grad u|^2 w divided by
/// ((s4-s3)^-1 + (s2-s1)^-1)^2 int_{s1<|x|<s4} u^2 w + lambda^2 tau^2 int_{s1<|x|<s4} |x|^2 u^2 phi^2 w,
/// with w normalised at |x| = s1. Throws ConfigError unless 0 <= s1 < s2 < s3 < s4 <= 3
/// and DegenerateInput when the denominator vanishes.
double caccioppoli_constant(const DomainField& u, double s1, double s2, double s3, double s4, double lambda,
                            double tau);

/// count log-spaced values from tau0 to 100 tau0 + C_l0t0 norm_b3 / norm_b1.
std::vector<double> tau_range(const CarlemanConstants& c, double norm_b3, double norm_b1, int count = 8);

struct CarlemanPoint {
  double lambda = 0.0;
  double tau = 0.0;
  double lhs_zero = 0.0;
  double lhs_grad = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;  // lhs / rhs; +inf when rhs = 0 < lhs
  double margin = 0.0; // rhs - lhs
};

struct CarlemanReport {
  double eps = 0.0;
  double norm_b1 = 0.0;
  double norm_b3 = 0.0;
  std::vector<double> taus;
  std::vector<CarlemanPoint> points;  // lambda-major
  double max_ratio = 0.0;
  bool degenerate = false;            // both sides vanish at every point

  bool passes(double slack = 0.0) const { return !degenerate && max_ratio <= 1.0 + slack; }
};

/// Sweeps every lambda in lambda_grid over tau_range. Weights are normalised at
/// |x| = 1/2, the inner edge of the cutoff's support; the ratio does not depend on it.
/// Throws ConfigError for lambda < lambda0 and DegenerateInput when ||u||_{L2(B_1)} = 0.
CarlemanReport carleman_check(const DomainField& u_eps, const DomainField& u0, const Corrector& chi, double eps,
                              const CoefficientField& a, const CarlemanConstants& constants,
                              const std::vector<double>& lambda_grid, const Cutoff& eta, int jobs = 1);

/// v(x) = Re((z1 + i z2)^k) with z = a_hat^{-1/2} x, so div(a_hat grad v) = 0.
DomainField tensor_harmonic(const DomainGrid& grid, const Mat2& a_hat, int k);

struct ProbeResult {
  int tensor = 0;
  int degree = 0;
  double lambda = 0.0;
  double tau = 0.0;
  double ratio = 0.0;
};

struct Calibration {
  CarlemanConstants constants;
  std::vector<ProbeResult> probes;
  /// Minimum ratio over probes for each (lambda, tau), lambda-major.
  std::vector<ProbeResult> minima;
  /// Largest max/min of the per-(lambda, tau) minima across tau at fixed lambda.
  double tau_spread = 0.0;
};

struct ProbeSuite {
  std::vector<Mat2> tensors{Mat2::identity()};
  std::vector<int> degrees{1, 2, 3, 4};
  std::vector<double> lambdas{1.0, 2.0};
  std::vector<double> taus{5.0, 10.0, 20.0, 40.0};
  double spacing = 1.0 / 200.0;
  double safety = 0.5;
};

/// C0 = safety * the smallest classical ratio over the suite; the other three constants
/// are taken from `base`. Throws NumericalError if a probe fails.
Calibration calibrate(const ProbeSuite& suite, const CarlemanConstants& base, int jobs = 1);

}  // namespace homlab
