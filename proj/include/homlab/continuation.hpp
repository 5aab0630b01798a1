#pragma once

// Unique-continuation diagnostics: three-ball exponents and constants, the
// optimal-tau balancing, growth and doubling checks, and the harmonic
// counterexample showing that the growth condition cannot be dropped.

#include <string>
#include <vector>

#include "homlab/fields.hpp"

namespace homlab {

struct ThreeBallExponent {
  double lambda = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double s = 0.0;
};

/// alpha = 1 - 2 e^{-4 lambda}, beta = 2 (e^{-4 lambda} - e^{-81 lambda / 16}),
/// s = alpha / (alpha + beta). Throws DomainError for lambda <= 0 and when
/// alpha <= 0 (lambda <= ln 2 / 4), where s leaves (0, 1).
ThreeBallExponent alpha_beta_s(double lambda);

/// ||u||_{B_r2} / (||u||_{B_r1}^s ||u||_{B_r3}^{1-s}) for radii (r1, r2, r3).
/// Throws DegenerateInput when ||u||_{B_r1} = 0 and ConfigError for s outside (0, 1).
double three_ball_constant(const DomainField& u, double s, double r1 = 1.0, double r2 = 2.0, double r3 = 3.0);

struct TauBound {
  enum class Branch { balanced, small };

  double tau_tilde = 0.0;
  Branch branch = Branch::small;
  /// balanced: 2 P^{1-s} R^s. small: 2 e^{alpha tau0} P^{1-s} max(P, R)^s.
  double bound = 0.0;
  /// e^{alpha tau} P + e^{-beta tau} R at tau = max(tau_tilde, tau0).
  double two_term = 0.0;

  std::string branch_name() const { return branch == Branch::balanced ? "balanced" : "small"; }
};

/// tau_tilde = ln(R / P) / (alpha + beta) balances e^{alpha tau} P against
/// e^{-beta tau} R, where both equal P^{1-s} R^s. Throws DomainError unless
/// P, Q, R, alpha, beta, tau0 are positive (Q enters only through the caller's comparison).
TauBound optimal_tau_bound(double P, double Q, double R, double alpha, double beta, double tau0);

struct GrowthResult {
  bool holds = true;
  double margin = 0.0;  // RHS / LHS; +inf when u vanishes on B_3
  double int_b3 = 0.0;
  double int_b2 = 0.0;
  double rhs = 0.0;     // M max{int_b2^N1, int_b2^(1/N2)}
};

/// Evaluates int_B3 |u|^2 <= M max{(int_B2 |u|^2)^N1, (int_B2 |u|^2)^(1/N2)} as
/// written; the result depends on the normalisation of u.
GrowthResult growth_check(double int_b3, double int_b2, const GrowthParams& params);
GrowthResult growth_check(const DomainField& u, const GrowthParams& params);

struct DoublingReport {
  std::vector<double> radii;
  std::vector<double> N;  // mean over B_r of |u|^2 / mean over B_{r/2}
  double max_N = 0.0;
  /// Macroscopic pair: outer radius min(4, L), inner 2 sqrt(mu) times outer / 4.
  double macro_outer = 0.0;
  double macro_inner = 0.0;
  double macro_ratio = 0.0;
  bool macro_ok = false;  // macro_ratio <= M
};

/// Throws DegenerateInput when a mean over B_{r/2} vanishes.
DoublingReport doubling_report(const DomainField& u, const std::vector<double>& radii, double mu, double M);

struct MultiscaleRow {
  double r = 0.0;
  double C = 0.0;  // ||u||_{B_2r} / (||u||_{B_r}^s ||u||_{B_4r}^{1-s})
};

struct MultiscaleReport {
  std::vector<MultiscaleRow> rows;
  double max_C = 0.0;
};

/// Requires every r in (0, 1/2]; throws ConfigError otherwise.
MultiscaleReport multiscale_three_ball(const DomainField& u, double s, const std::vector<double>& r_list);

struct CounterexampleRow {
  int k = 0;
  double exact = 0.0;       // 3^{-(2k+2)}
  double quadrature = 0.0;  // int_B1 |u_k|^2 / int_B3 |u_k|^2 on the grid
  double rel_error = 0.0;
  double inv_9_pow_k = 0.0;  // 3^{-2k}
  GrowthResult growth;        // exact integrals with int_B3 = 1
};

struct CounterexampleStudy {
  std::vector<CounterexampleRow> rows;
  int k_star = -1;  // smallest k from which growth fails for every listed larger k; -1 if never
};

/// u_k = Re (x1 + i x2)^k normalised to int_B3 |u_k|^2 = 1.
CounterexampleStudy counterexample_study(const std::vector<int>& k_list, const GrowthParams& params,
                                         const DomainGrid& grid);

}  // namespace homlab
