#include "homlab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>

#include "homlab/carleman.hpp"
#include "homlab/continuation.hpp"
#include "homlab/errors.hpp"
#include "homlab/parallel.hpp"
#include "homlab/twoscale.hpp"

namespace homlab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v) { return format_number(v); }
std::string num(int v) { return std::to_string(v); }

double max_abs(const CellField& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

double corrector_max(const Corrector& chi) { return std::max(max_abs(chi.chi[0]), max_abs(chi.chi[1])); }

double flux_max(const FluxCorrector& f) {
  double m = 0.0;
  for (const auto& row : f.b)
    for (const auto& b : row) m = std::max(m, max_abs(b));
  for (const auto& plane : f.F)
    for (const auto& row : plane)
      for (const auto& F : row) m = std::max(m, max_abs(F));
  return m;
}

std::string eps_label(double eps) { return "eps=" + num(eps); }

DomainField harmonic_field(const DomainGrid& g, int k) { return DomainField::sampled(g, HarmonicPolynomial(k)); }

json constants_json(const CarlemanConstants& c) {
  return {{"C0", c.C0}, {"lambda0", c.lambda0}, {"tau0", c.tau0}, {"C_l0t0", c.C_l0t0}, {"provenance", c.provenance_name()}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw ConfigError("cannot write " + path.string());
}

}  // namespace

struct Session::Solved {
  EpsilonSolution sol;
  RecoveredU0 rec;
};

const std::vector<std::string>& pipeline_order() {
  static const std::vector<std::string> order{"cell",     "calibrate", "convergence",   "carleman",
                                              "threeball", "doubling", "counterexample"};
  return order;
}

Session::Session(ExperimentConfig config, std::string outdir, bool use_cached, std::ostream& log)
    : cfg_(std::move(config)),
      outdir_(std::move(outdir)),
      use_cached_(use_cached),
      log_(log),
      family_(builtin_coefficient(cfg_.coefficient)) {
  cfg_.validate();
}

Session::~Session() = default;

PipelineReport Session::run(const std::string& pipeline) {
  const auto t0 = Clock::now();
  PipelineReport r;
  if (pipeline == "cell") {
    r = cell();
  } else if (pipeline == "calibrate") {
    r = calibrate_pipeline();
  } else if (pipeline == "convergence") {
    r = convergence();
  } else if (pipeline == "carleman") {
    r = carleman();
  } else if (pipeline == "threeball") {
    r = threeball();
  } else if (pipeline == "doubling") {
    r = doubling();
  } else if (pipeline == "counterexample") {
    r = counterexample();
  } else {
    throw ConfigError("unknown pipeline '" + pipeline + "'");
  }
  r.name = pipeline;
  r.wall_seconds = seconds_since(t0);
  return r;
}

const Corrector& Session::corrector(int m) {
  auto it = correctors_.find(m);
  if (it == correctors_.end()) it = correctors_.emplace(m, solve_corrector(family_, PeriodicGrid(m))).first;
  return it->second;
}

const HomogenizedTensor& Session::a_hat(int m) {
  auto it = tensors_.find(m);
  if (it == tensors_.end()) it = tensors_.emplace(m, homogenize(family_, corrector(m))).first;
  return it->second;
}

void Session::solve(const std::vector<double>& eps_list) {
  std::vector<double> todo;
  for (double e : eps_list) {
    if (!solutions_.count(e) && std::find(todo.begin(), todo.end(), e) == todo.end()) todo.push_back(e);
  }
  if (todo.empty()) return;
  const int m = cfg_.cells_per_period;
  const HomogenizedTensor& ah = a_hat(m);
  const ScalarFunction g = cfg_.boundary.function(cfg_.half_extent);
  std::vector<std::unique_ptr<Solved>> out(todo.size());
  parallel_for(static_cast<int>(todo.size()), cfg_.jobs, [&](int k) {
    const double eps = todo[k];
    EpsilonSolution sol =
        solve_epsilon_problem(family_, eps, matched_grid(cfg_.half_extent, eps, m), g, cfg_.solver_tol);
    RecoveredU0 rec = recover_u0(sol.u, ah, cfg_.solver_tol);
    out[k] = std::make_unique<Solved>(Solved{std::move(sol), std::move(rec)});
  });
  for (std::size_t k = 0; k < todo.size(); ++k) {
    log_ << "  solved eps = " << num(todo[k]) << " on n = " << out[k]->sol.u.grid().n() << "\n";
    solutions_.emplace(todo[k], std::move(out[k]));
  }
}

const Session::Solved& Session::solution(double eps) {
  solve({eps});
  return *solutions_.at(eps);
}

const DomainField& Session::identity_baseline() {
  if (!baseline_) {
    const DomainGrid g(cfg_.half_extent, cfg_.identity_n);
    auto sol = solve_epsilon_problem(builtin_coefficient("identity"), 1.0, g, cfg_.boundary.function(cfg_.half_extent),
                                     cfg_.solver_tol);
    baseline_ = std::make_unique<DomainField>(std::move(sol.u));
  }
  return *baseline_;
}

// ---------------------------------------------------------------------------
// Constants

namespace {

json probe_key(const ExperimentConfig& c) {
  return {{"coefficient", c.coefficient},
          {"cells_per_period", c.cells_per_period},
          {"lambda0", c.constants.lambda0},
          {"tau0", c.constants.tau0},
          {"C_l0t0", c.constants.C_l0t0},
          {"degrees", c.probes.degrees},
          {"lambdas", c.probes.lambdas},
          {"taus", c.probes.taus},
          {"spacing", c.probes.spacing},
          {"safety", c.probes.safety}};
}

json probes_json(const std::vector<ProbeResult>& probes) {
  json a = json::array();
  for (const auto& p : probes) {
    a.push_back({{"tensor", p.tensor}, {"degree", p.degree}, {"lambda", p.lambda}, {"tau", p.tau}, {"ratio", p.ratio}});
  }
  return a;
}

std::vector<ProbeResult> probes_from(const json& a) {
  std::vector<ProbeResult> out;
  for (const auto& p : a) {
    out.push_back({p.at("tensor").get<int>(), p.at("degree").get<int>(), p.at("lambda").get<double>(),
                   p.at("tau").get<double>(), p.at("ratio").get<double>()});
  }
  return out;
}

}  // namespace

bool Session::load_cached_constants() {
  const fs::path path = fs::path(outdir_) / "constants.json";
  std::ifstream in(path);
  if (!in) return false;
  try {
    const json j = json::parse(in);
    if (j.at("key") != probe_key(cfg_)) {
      log_ << "  " << path.string() << " was produced for a different probe setup; recalibrating\n";
      return false;
    }
    Calibration cal;
    const json& k = j.at("constants");
    cal.constants.C0 = k.at("C0").get<double>();
    cal.constants.lambda0 = k.at("lambda0").get<double>();
    cal.constants.tau0 = k.at("tau0").get<double>();
    cal.constants.C_l0t0 = k.at("C_l0t0").get<double>();
    cal.constants.provenance = CarlemanConstants::Provenance::calibrated;
    cal.constants.validate();
    cal.tau_spread = j.at("tau_spread").get<double>();
    cal.probes = probes_from(j.at("probes"));
    cal.minima = probes_from(j.at("minima"));
    calibration_ = cal;
    constants_ = cal.constants;
    constants_cached_ = true;
    log_ << "  loaded constants from " << path.string() << "\n";
    return true;
  } catch (const json::exception& e) {
    log_ << "  ignoring unreadable " << path.string() << ": " << e.what() << "\n";
    return false;
  } catch (const ConfigError& e) {
    log_ << "  ignoring " << path.string() << ": " << e.what() << "\n";
    return false;
  }
}

void Session::store_constants() const {
  if (outdir_.empty() || !calibration_) return;
  fs::create_directories(outdir_);
  const json j = {{"version", HOMLAB_VERSION},
                  {"constants", constants_json(calibration_->constants)},
                  {"tau_spread", calibration_->tau_spread},
                  {"key", probe_key(cfg_)},
                  {"minima", probes_json(calibration_->minima)},
                  {"probes", probes_json(calibration_->probes)}};
  write_text(fs::path(outdir_) / "constants.json", j.dump(2) + "\n");
}

const CarlemanConstants& Session::constants() {
  if (constants_) return *constants_;
  if (cfg_.constants_configured) {
    constants_ = cfg_.constants;
    constants_->provenance = CarlemanConstants::Provenance::configured;
    return *constants_;
  }
  if (use_cached_ && load_cached_constants()) return *constants_;
  ProbeSuite suite = cfg_.probes;
  suite.tensors = {Mat2::identity()};
  const Mat2 ah = a_hat(cfg_.cells_per_period).a_hat;
  if (ah.a11 != 1.0 || ah.a12 != 0.0 || ah.a21 != 0.0 || ah.a22 != 1.0) suite.tensors.push_back(ah);
  calibration_ = calibrate(suite, cfg_.constants, cfg_.jobs);
  constants_ = calibration_->constants;
  store_constants();
  return *constants_;
}

// ---------------------------------------------------------------------------
// Pipelines

PipelineReport Session::cell() {
  PipelineReport r;
  Table t{"cell",
          {"coefficient", "n", "a11", "a12", "a22", "asymmetry", "corrector_residual", "corrector_iterations",
           "corrector_max", "flux_residual", "flux_max_mean", "flux_max"}};
  const AssumptionCheck assumptions = verify_assumptions(family_);
  r.details["mu_hat"] = assumptions.mu_hat;
  r.details["lip_hat"] = assumptions.lip_hat;

  const PeriodicGrid grid(cfg_.cell_n);
  auto row = [&](const CoefficientField& a) {
    const Corrector chi = solve_corrector(a, grid);
    const HomogenizedTensor ah = homogenize(a, chi);
    const FluxCorrector flux = flux_correctors(a, chi, ah);
    t.add({a.name(), num(cfg_.cell_n), num(ah.a_hat.a11), num(ah.a_hat.a12), num(ah.a_hat.a22), num(ah.asymmetry),
           num(chi.residual_norm), num(chi.iterations), num(corrector_max(chi)), num(flux.divergence_residual),
           num(flux.max_mean), num(flux_max(flux))});
    return std::make_tuple(chi, ah, flux);
  };

  const auto [chi, ah, flux] = row(family_);
  (void)chi;
  (void)flux;
  if (family_.name() == "laminate") {
    // Harmonic mean of a across the layers, arithmetic mean along them.
    const double a11 = 0.5, a22 = 1.0 / std::sqrt(3.0);
    r.checks.push_back(Check::at_most("laminate.a11_error", std::abs(ah.a_hat.a11 - a11), cfg_.tol.cell_oracle));
    r.checks.push_back(Check::at_most("laminate.a12_error", std::abs(ah.a_hat.a12), cfg_.tol.cell_oracle));
    r.checks.push_back(Check::at_most("laminate.a22_error", std::abs(ah.a_hat.a22 - a22), cfg_.tol.cell_oracle));
  }
  const auto [lo, hi] = symmetric_eigenvalues(ah.a_hat);
  r.checks.push_back(Check::holds(family_.name() + ".a_hat_elliptic",
                                  lo >= family_.mu() - 1e-12 && hi <= 1.0 / family_.mu() + 1e-12));

  const CoefficientField identity = builtin_coefficient("identity");
  if (family_.name() != "identity") row(identity);
  const Corrector chi_id = solve_corrector(identity, grid);
  const HomogenizedTensor ah_id = homogenize(identity, chi_id);
  const FluxCorrector flux_id = flux_correctors(identity, chi_id, ah_id);
  const Mat2& m = ah_id.a_hat;
  const double dev = std::max({std::abs(m.a11 - 1.0), std::abs(m.a12), std::abs(m.a21), std::abs(m.a22 - 1.0)});
  r.checks.push_back(Check::at_most("identity.corrector_residual", chi_id.residual_norm, cfg_.tol.identity_residual));
  r.checks.push_back(Check::equals("identity.corrector_max", corrector_max(chi_id), 0.0));
  r.checks.push_back(Check::equals("identity.a_hat_deviation", dev, 0.0));
  r.checks.push_back(Check::equals("identity.flux_max", flux_max(flux_id), 0.0));
  r.tables.push_back(std::move(t));
  return r;
}

PipelineReport Session::calibrate_pipeline() {
  PipelineReport r;
  if (cfg_.constants_configured) {
    log_ << "  constants.C0 is set in the config; calibration skipped\n";
    const CarlemanConstants& c = constants();
    r.checks.push_back(Check::holds("C0_positive", c.C0 > 0.0));
    r.tables.push_back(Table{"calibrate", {"tensor", "degree", "lambda", "tau", "ratio"}});
    return r;
  }
  const CarlemanConstants& c = constants();
  const Calibration& cal = *calibration_;
  Table probes{"calibrate", {"tensor", "degree", "lambda", "tau", "ratio"}};
  for (const auto& p : cal.probes) {
    probes.add({p.tensor == 0 ? "identity" : "homogenized", num(p.degree), num(p.lambda), num(p.tau), num(p.ratio)});
  }
  Table minima{"calibrate_minima", {"lambda", "tau", "min_ratio", "tensor", "degree"}};
  std::map<double, Series> by_lambda;
  for (const auto& p : cal.minima) {
    minima.add({num(p.lambda), num(p.tau), num(p.ratio), p.tensor == 0 ? "identity" : "homogenized", num(p.degree)});
    Series& s = by_lambda[p.lambda];
    s.label = "lambda=" + num(p.lambda);
    s.x.push_back(p.tau);
    s.y.push_back(p.ratio);
  }
  r.checks.push_back(Check{"C0", c.C0, ">", 0.0, c.C0 > 0.0});
  r.checks.push_back(Check::at_most("tau_spread", cal.tau_spread, cfg_.tol.tau_spread));
  r.details["cached"] = constants_cached_;
  r.details["C0"] = c.C0;
  r.tables.push_back(std::move(probes));
  r.tables.push_back(std::move(minima));
  r.plot = {"Classical Carleman ratio, minimum over probes", "tau", "LHS/RHS", true, true, {}};
  for (auto& [l, s] : by_lambda) r.plot.series.push_back(std::move(s));
  return r;
}

PipelineReport Session::convergence() {
  PipelineReport r;
  const Corrector& chi = corrector(cfg_.cells_per_period);
  solve(cfg_.eps_list);
  Table t{"convergence", {"eps", "n", "l2_err", "h1_err", "u_norm_b3", "constant", "r0", "iterations"}};
  std::vector<ConvergenceRow> rows;
  for (double eps : cfg_.eps_list) {
    const Solved& s = solution(eps);
    rows.push_back(convergence_row(s.sol, s.rec, chi));
    const auto& w = rows.back();
    t.add({num(w.eps), num(w.n), num(w.l2_err), num(w.h1_err), num(w.u_norm_b3), num(w.constant), num(w.r0),
           num(w.iterations)});
  }
  r.tables.push_back(std::move(t));

  Series l2{"L2 error", {}, {}}, h1{"H1 error (two-scale)", {}, {}}, ref{"sqrt(eps) reference", {}, {}};
  for (const auto& w : rows) {
    l2.x.push_back(w.eps);
    l2.y.push_back(w.l2_err);
    h1.x.push_back(w.eps);
    h1.y.push_back(w.h1_err);
    ref.x.push_back(w.eps);
    ref.y.push_back(rows.front().l2_err * std::sqrt(w.eps / rows.front().eps));
  }
  r.plot = {"Homogenization error", "eps", "error", true, true, {l2, h1, ref}};

  if (corrector_max(chi) == 0.0) {
    r.details["floor"] = true;
    for (const auto& w : rows) {
      r.checks.push_back(Check::at_most(eps_label(w.eps) + ".l2_err_relative", w.l2_err / w.u_norm_b3, 1e-3));
    }
    return r;
  }
  r.details["floor"] = false;
  if (rows.size() < 2) {
    log_ << "  a single eps gives no slope; rate checks skipped\n";
    return r;
  }
  std::vector<double> e, l, h;
  double cmin = std::numeric_limits<double>::infinity(), cmax = 0.0;
  bool h1_decreasing = true;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    e.push_back(rows[k].eps);
    l.push_back(rows[k].l2_err);
    h.push_back(rows[k].h1_err);
    cmin = std::min(cmin, rows[k].constant);
    cmax = std::max(cmax, rows[k].constant);
    if (k > 0 && !(rows[k].h1_err < rows[k - 1].h1_err)) h1_decreasing = false;
  }
  const double slope = loglog_slope(e, l);
  r.details["l2_slope"] = slope;
  r.details["h1_slope"] = loglog_slope(e, h);
  r.checks.push_back(Check::at_least("l2_slope", slope, cfg_.tol.convergence_slope));
  r.checks.push_back(Check::at_most("constant_spread", cmax / cmin, cfg_.tol.convergence_spread));
  r.checks.push_back(Check::holds("h1_err_strictly_decreasing", h1_decreasing));
  return r;
}

PipelineReport Session::carleman() {
  PipelineReport r;
  const CarlemanConstants& c = constants();
  const int m = cfg_.cells_per_period;
  const double slack = cfg_.tol.carleman_slack;
  Table t{"carleman", {"case", "eps", "lambda", "tau", "lhs_zero", "lhs_grad", "lhs", "rhs", "ratio"}};
  std::map<std::string, Series> curves;
  auto emit = [&](const std::string& label, const CarlemanReport& rep) {
    for (const auto& p : rep.points) {
      t.add({label, num(rep.eps), num(p.lambda), num(p.tau), num(p.lhs_zero), num(p.lhs_grad), num(p.lhs), num(p.rhs),
             num(p.ratio)});
      Series& s = curves[label + (label == family_.name() ? " " + eps_label(rep.eps) : "") + " lambda=" + num(p.lambda)];
      s.x.push_back(p.tau);
      s.y.push_back(p.ratio);
    }
  };

  {
    const CoefficientField identity = builtin_coefficient("identity");
    const Corrector zero = solve_corrector(identity, PeriodicGrid(m));
    const DomainGrid g(cfg_.half_extent, cfg_.identity_n);
    const Cutoff eta = make_cutoff(g);
    for (int k : cfg_.identity_degrees) {
      const DomainField u = harmonic_field(g, k);
      const auto rep = carleman_check(u, u, zero, 1.0, identity, c, cfg_.lambda_grid, eta, cfg_.jobs);
      const std::string label = "identity_k" + std::to_string(k);
      emit(label, rep);
      r.checks.push_back(Check::at_most(label + ".max_ratio", rep.degenerate ? std::numeric_limits<double>::infinity()
                                                                             : rep.max_ratio,
                                        1.0 + slack));
    }
  }

  const Corrector& chi = corrector(m);
  solve(cfg_.eps_list);
  double largest_pass = 0.0;
  Table cacc{"carleman_caccioppoli", {"eps", "s1", "s2", "s3", "s4", "lambda", "tau", "C_hat"}};
  double cmin = std::numeric_limits<double>::infinity(), cmax = 0.0;
  const auto& s = cfg_.caccioppoli_radii;
  for (double eps : cfg_.eps_list) {
    const Solved& sv = solution(eps);
    const Cutoff eta = make_cutoff(sv.sol.u.grid());
    const auto rep = carleman_check(sv.sol.u, sv.rec.u0, chi, eps, family_, c, cfg_.lambda_grid, eta, cfg_.jobs);
    emit(family_.name(), rep);
    if (rep.passes(slack)) largest_pass = std::max(largest_pass, eps);
    if (eps <= cfg_.tol.carleman_eps_max * (1.0 + 1e-12)) {
      r.checks.push_back(Check::at_most(family_.name() + "." + eps_label(eps) + ".max_ratio",
                                        rep.degenerate ? std::numeric_limits<double>::infinity() : rep.max_ratio,
                                        1.0 + slack));
    }
    const double ch =
        caccioppoli_constant(sv.sol.u, s[0], s[1], s[2], s[3], cfg_.caccioppoli_lambda, cfg_.caccioppoli_tau);
    cacc.add({num(eps), num(s[0]), num(s[1]), num(s[2]), num(s[3]), num(cfg_.caccioppoli_lambda),
              num(cfg_.caccioppoli_tau), num(ch)});
    cmin = std::min(cmin, ch);
    cmax = std::max(cmax, ch);
  }
  r.details["largest_passing_eps"] = largest_pass;
  r.details["constants"] = constants_json(c);
  r.checks.push_back(Check::at_most("caccioppoli_spread", cmin > 0.0 ? cmax / cmin : std::numeric_limits<double>::infinity(),
                                    cfg_.tol.caccioppoli_spread));

  Table consistency{"carleman_consistency", {"eps", "cells_per_period", "n", "residual", "plateau_fraction"}};
  const double eps = cfg_.consistency_eps;
  const ScalarFunction g = cfg_.boundary.function(cfg_.half_extent);
  std::vector<double> res;
  for (int mm : {m, 2 * m}) {
    const Corrector& ch = mm == m ? chi : corrector(mm);
    std::optional<EpsilonSolution> fresh;
    const DomainField* u = nullptr;
    if (mm == m && solutions_.count(eps)) {
      u = &solutions_.at(eps)->sol.u;
    } else {
      fresh.emplace(solve_epsilon_problem(family_, eps, matched_grid(cfg_.half_extent, eps, mm), g, cfg_.solver_tol));
      u = &fresh->u;
    }
    const double rr = consistency_residual(*u, ch, eps, family_, make_cutoff(u->grid()));
    const double plateau = plateau_rhs_fraction(*u, ch, eps, family_);
    consistency.add({num(eps), num(mm), num(u->grid().n()), num(rr), num(plateau)});
    res.push_back(rr);
    if (mm == m) r.checks.push_back(Check::at_most("consistency.plateau_fraction", plateau, cfg_.tol.plateau));
  }
  r.checks.push_back(
      Check::at_least("consistency.refinement_drop", res[1] > 0.0 ? res[0] / res[1] : 0.0, cfg_.tol.consistency_drop));

  r.tables.push_back(std::move(t));
  r.tables.push_back(std::move(consistency));
  r.tables.push_back(std::move(cacc));
  r.plot = {"Carleman ratio over the tau sweep", "tau", "LHS/RHS", true, true, {}};
  for (auto& [label, ser] : curves) {
    ser.label = label;
    r.plot.series.push_back(std::move(ser));
  }
  return r;
}

PipelineReport Session::threeball() {
  PipelineReport r;
  Table ex{"threeball_exponents", {"lambda", "alpha", "beta", "s"}};
  bool beta_positive = true;
  for (int k = 0; k < 50; ++k) {
    const double lambda = 0.2 + 0.1 * k;
    const auto e = alpha_beta_s(lambda);
    ex.add({num(lambda), num(e.alpha), num(e.beta), num(e.s)});
    beta_positive = beta_positive && e.beta > 0.0;
  }
  const auto one = alpha_beta_s(1.0);
  r.checks.push_back(Check::at_most("alpha(1)_error", std::abs(one.alpha - 0.963369), cfg_.tol.exponents));
  r.checks.push_back(Check::at_most("beta(1)_error", std::abs(one.beta - 0.0239716), cfg_.tol.exponents));
  r.checks.push_back(Check::at_most("s(1)_error", std::abs(one.s - 0.97572), cfg_.tol.exponents));
  r.checks.push_back(Check::holds("beta_positive_on_grid", beta_positive));

  const auto e = alpha_beta_s(cfg_.three_ball_lambda);
  const double C = cfg_.tau_bound_C;
  Table t{"threeball",
          {"case", "eps", "n", "norm_b1", "norm_b2", "norm_b3", "s", "C_emp", "P", "Q", "R", "tau_tilde", "branch",
           "bound", "Q_le_two_term"}};
  auto row = [&](const std::string& label, double eps, const DomainField& u) {
    const double b1 = ball_l2_norm(u, 1.0, 8), b2 = ball_l2_norm(u, 2.0, 8), b3 = ball_l2_norm(u, 3.0, 8);
    const double Cemp = three_ball_constant(u, e.s);
    const double P = (C + 1.0) * b1 * b1, Q = C * b2 * b2, R = b3 * b3;
    const TauBound tb = optimal_tau_bound(P, Q, R, e.alpha, e.beta, constants_ ? constants_->tau0 : cfg_.constants.tau0);
    t.add({label, num(eps), num(u.grid().n()), num(b1), num(b2), num(b3), num(e.s), num(Cemp), num(P), num(Q), num(R),
           num(tb.tau_tilde), tb.branch_name(), num(tb.bound), Q <= tb.two_term ? "true" : "false"});
    return Cemp;
  };
  const double base = row("identity", 1.0, identity_baseline());
  solve(cfg_.eps_list);
  double worst = 0.0;
  Series curve{family_.name(), {}, {}}, flat{"identity baseline", {}, {}};
  for (double eps : cfg_.eps_list) {
    const double Cemp = row(family_.name(), eps, solution(eps).sol.u);
    worst = std::max(worst, Cemp);
    curve.x.push_back(eps);
    curve.y.push_back(Cemp);
    flat.x.push_back(eps);
    flat.y.push_back(base);
  }
  r.details["baseline_C_emp"] = base;
  r.details["s"] = e.s;
  r.checks.push_back(Check::at_most("C_emp_over_baseline", worst / base, cfg_.tol.three_ball_factor));

  const DomainField& u = solution(cfg_.multiscale_eps).sol.u;
  const double macro = three_ball_constant(u, e.s);
  const auto ms = multiscale_three_ball(u, e.s, cfg_.multiscale_radii);
  Table mt{"threeball_multiscale", {"eps", "r", "C_r", "C_macro"}};
  for (const auto& w : ms.rows) mt.add({num(cfg_.multiscale_eps), num(w.r), num(w.C), num(macro)});
  r.checks.push_back(Check::at_most("multiscale_over_macro", ms.max_C / macro, cfg_.tol.multiscale_factor));

  r.tables.push_back(std::move(t));
  r.tables.push_back(std::move(mt));
  r.tables.push_back(std::move(ex));
  r.plot = {"Empirical three-ball constant", "eps", "C_emp", true, false, {curve, flat}};
  return r;
}

PipelineReport Session::doubling() {
  PipelineReport r;
  solve(cfg_.eps_list);
  Table t{"doubling", {"eps", "kind", "r_outer", "r_inner", "ratio"}};
  Table gt{"doubling_growth", {"eps", "int_b3", "int_b2", "rhs", "holds", "margin"}};
  for (double eps : cfg_.eps_list) {
    const DomainField& u = solution(eps).sol.u;
    const auto rep = doubling_report(u, cfg_.doubling_radii, family_.mu(), cfg_.doubling_M);
    Series s{eps_label(eps), {}, {}};
    for (std::size_t k = 0; k < rep.radii.size(); ++k) {
      t.add({num(eps), "r", num(rep.radii[k]), num(0.5 * rep.radii[k]), num(rep.N[k])});
      s.x.push_back(rep.radii[k]);
      s.y.push_back(rep.N[k]);
    }
    t.add({num(eps), "macro", num(rep.macro_outer), num(rep.macro_inner), num(rep.macro_ratio)});
    r.checks.push_back(Check::at_most(eps_label(eps) + ".macro_ratio", rep.macro_ratio, cfg_.doubling_M));
    const auto gr = growth_check(u, cfg_.growth);
    gt.add({num(eps), num(gr.int_b3), num(gr.int_b2), num(gr.rhs), gr.holds ? "true" : "false", num(gr.margin)});
    r.plot.series.push_back(std::move(s));
  }
  r.plot.title = "Doubling ratio";
  r.plot.xlabel = "r";
  r.plot.ylabel = "mean over B_r / mean over B_r/2";
  r.tables.push_back(std::move(t));
  r.tables.push_back(std::move(gt));
  return r;
}

PipelineReport Session::counterexample() {
  PipelineReport r;
  const DomainGrid g(cfg_.half_extent, cfg_.counterexample_n);
  const auto study = counterexample_study(cfg_.counterexample_degrees, cfg_.growth, g);
  Table t{"counterexample",
          {"k", "exact", "quadrature", "rel_error", "inv_9_pow_k", "int_b3", "int_b2", "growth_rhs", "growth_holds"}};
  Series ex{"exact 3^-(2k+2)", {}, {}}, qu{"quadrature", {}, {}};
  double worst = 0.0;
  for (const auto& w : study.rows) {
    t.add({num(w.k), num(w.exact), num(w.quadrature), num(w.rel_error), num(w.inv_9_pow_k), num(w.growth.int_b3),
           num(w.growth.int_b2), num(w.growth.rhs), w.growth.holds ? "true" : "false"});
    if (w.k <= cfg_.tol.counterexample_k_max) worst = std::max(worst, w.rel_error);
    ex.x.push_back(w.k);
    ex.y.push_back(w.exact);
    qu.x.push_back(w.k);
    qu.y.push_back(w.quadrature);
  }
  r.details["k_star"] = study.k_star;
  r.checks.push_back(Check::at_most("max_rel_error", worst, cfg_.tol.counterexample_rel));
  r.checks.push_back(Check::holds("growth_fails_from_k_star",
                                  study.k_star >= 0 && study.k_star <= cfg_.tol.counterexample_k_max));
  r.tables.push_back(std::move(t));
  r.plot = {"B_1 / B_3 mass ratio of Re z^k", "k", "ratio", false, true, {ex, qu}};
  return r;
}

// ---------------------------------------------------------------------------
// Command

json summary_json(const std::string& subcommand, const CommandResult& result, const json& config,
                  const json& constants) {
  json pipes = json::array();
  for (const auto& r : result.reports) {
    json checks = json::array();
    for (const auto& c : r.checks) {
      checks.push_back({{"name", c.name},
                        {"value", std::isfinite(c.value) ? json(c.value) : json(nullptr)},
                        {"relation", c.relation},
                        {"threshold", c.threshold},
                        {"pass", c.pass}});
    }
    json outputs = json::array();
    for (const auto& t : r.tables) outputs.push_back(t.name + ".csv");
    pipes.push_back({{"name", r.name},
                     {"pass", r.pass()},
                     {"wall_seconds", r.wall_seconds},
                     {"checks", checks},
                     {"outputs", outputs},
                     {"details", r.details}});
  }
  json error = nullptr;
  if (result.exit_code == kExitConfig || result.exit_code == kExitNumerical) {
    error = {{"kind", result.exit_code == kExitConfig ? "config" : "numerical"}, {"message", result.error}};
  }
  return {{"version", HOMLAB_VERSION},
          {"subcommand", subcommand},
          {"exit_code", result.exit_code},
          {"pass", result.exit_code == kExitPass},
          {"wall_seconds", result.wall_seconds},
          {"config", config},
          {"constants", constants},
          {"pipelines", pipes},
          {"error", error}};
}

CommandResult execute(const std::string& subcommand, const std::string& config_path, const RunOptions& options,
                      std::ostream& log) {
  const auto t0 = Clock::now();
  CommandResult result;
  result.outdir = options.outdir;
  json config_echo = nullptr, constants_echo = nullptr;
  std::unique_ptr<Session> session;

  auto finish = [&](int code, const std::string& message) {
    result.exit_code = code;
    result.error = message;
    if (!message.empty()) log << "error: " << message << "\n";
  };

  try {
    std::vector<std::string> pipelines;
    if (subcommand == "all") {
      pipelines = pipeline_order();
    } else if (std::find(pipeline_order().begin(), pipeline_order().end(), subcommand) != pipeline_order().end()) {
      pipelines = {subcommand};
    } else {
      throw ConfigError("unknown subcommand '" + subcommand + "'");
    }
    ExperimentConfig cfg = ExperimentConfig::load(config_path);
    if (!options.outdir.empty()) cfg.outdir = options.outdir;
    if (options.jobs > 0) cfg.jobs = options.jobs;
    cfg.validate();
    result.outdir = cfg.outdir;
    config_echo = cfg.to_json();
    constants_echo = constants_json(cfg.constants);
    fs::create_directories(cfg.outdir);
    session = std::make_unique<Session>(cfg, cfg.outdir, options.use_cached, log);

    for (const auto& name : pipelines) {
      log << "[" << name << "]\n";
      PipelineReport r = session->run(name);
      for (const auto& t : r.tables) write_text(fs::path(cfg.outdir) / (t.name + ".csv"), csv_text(t));
      if (options.plots && !r.plot.empty()) write_text(fs::path(cfg.outdir) / (name + ".svg"), render_svg(r.plot));
      for (const auto& c : r.checks) {
        log << "  " << (c.pass ? "pass" : "FAIL") << "  " << c.name << " = " << num(c.value) << " (" << c.relation
            << " " << num(c.threshold) << ")\n";
      }
      log << "  " << (r.pass() ? "passed" : "failed") << " in " << num(std::round(r.wall_seconds * 100) / 100) << " s\n";
      result.reports.push_back(std::move(r));
    }
    bool ok = true;
    for (const auto& r : result.reports) ok = ok && r.pass();
    finish(ok ? kExitPass : kExitAcceptance, "");
  } catch (const ConfigError& e) {
    finish(kExitConfig, e.what());
  } catch (const NumericalError& e) {
    finish(kExitNumerical, e.what());
  } catch (const std::exception& e) {
    finish(kExitNumerical, e.what());
  }

  if (session && session->resolved_constants()) {
    constants_echo = constants_json(*session->resolved_constants());
    constants_echo["cached"] = session->constants_from_cache();
  } else if (!constants_echo.is_null()) {
    constants_echo["provenance"] = "unused";
    constants_echo["cached"] = false;
  }
  result.wall_seconds = seconds_since(t0);
  if (!result.outdir.empty()) {
    try {
      fs::create_directories(result.outdir);
      const json s = summary_json(subcommand, result, config_echo, constants_echo);
      write_text(fs::path(result.outdir) / "summary.json", s.dump(2) + "\n");
    } catch (const std::exception& e) {
      log << "error: could not write summary.json: " << e.what() << "\n";
    }
  }
  return result;
}

}  // namespace homlab
