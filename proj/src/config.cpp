#include "homlab/config.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <set>

#include "homlab/elliptic.hpp"
#include "homlab/errors.hpp"

namespace homlab {

using nlohmann::json;

namespace {

// Strict reader over one JSON object: every key must be consumed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    out = convert<T>(*it, join(key));
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <class Fn>
  void object(const char* key, Fn&& fn) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    Reader sub(*it, join(key));
    fn(sub);
    sub.finish();
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown key " + join(k.c_str()));
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  std::string join(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  static T convert(const json& v, const std::string& name) {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError(name + " must be a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, int>) {
      if (!v.is_number_integer()) throw ConfigError(name + " must be an integer");
      return v.get<int>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw ConfigError(name + " must be a non-negative integer");
      return v.get<std::uint64_t>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(name + " must be a string");
      return v.get<std::string>();
    } else {
      if (!v.is_array()) throw ConfigError(name + " must be an array");
      T out;
      for (std::size_t k = 0; k < v.size(); ++k) {
        out.push_back(convert<typename T::value_type>(v[k], name + "[" + std::to_string(k) + "]"));
      }
      return out;
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

bool positive(double v) { return v > 0.0 && std::isfinite(v); }

void check_matched(double L, double eps, int m, const std::string& name) {
  try {
    (void)matched_grid(L, eps, m);
  } catch (const ConfigError& e) {
    throw ConfigError(name + ": " + e.what());
  }
}

}  // namespace

ScalarFunction BoundarySpec::function(double half_extent) const {
  switch (kind) {
    case Kind::fourier: {
      auto data = std::make_shared<FourierBoundaryData>(half_extent, seed, modes);
      return [data](Vec2 x) { return (*data)(x); };
    }
    case Kind::harmonic: {
      const HarmonicPolynomial p(degree);
      return [p](Vec2 x) { return p(x); };
    }
    case Kind::constant: {
      const double v = value;
      return [v](Vec2) { return v; };
    }
  }
  return {};
}

std::string BoundarySpec::kind_name() const {
  switch (kind) {
    case Kind::fourier:
      return "fourier";
    case Kind::harmonic:
      return "harmonic";
    case Kind::constant:
      return "constant";
  }
  return "";
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  Reader r(j, "");
  r.get("coefficient", c.coefficient);
  r.get("half_extent", c.half_extent);
  r.get("cell_n", c.cell_n);
  r.get("cells_per_period", c.cells_per_period);
  r.get("eps_list", c.eps_list);
  r.get("lambda_grid", c.lambda_grid);
  r.get("solver_tol", c.solver_tol);
  r.get("jobs", c.jobs);
  r.get("outdir", c.outdir);
  r.object("boundary", [&](Reader& b) {
    std::string kind = "fourier";
    b.get("kind", kind);
    if (kind == "fourier") {
      c.boundary.kind = BoundarySpec::Kind::fourier;
    } else if (kind == "harmonic") {
      c.boundary.kind = BoundarySpec::Kind::harmonic;
    } else if (kind == "constant") {
      c.boundary.kind = BoundarySpec::Kind::constant;
    } else {
      throw ConfigError("boundary.kind must be fourier, harmonic or constant, got '" + kind + "'");
    }
    c.boundary.has_seed = b.has("seed");
    b.get("seed", c.boundary.seed);
    b.get("modes", c.boundary.modes);
    b.get("degree", c.boundary.degree);
    b.get("value", c.boundary.value);
  });
  r.object("growth", [&](Reader& g) {
    g.get("M", c.growth.M);
    g.get("N1", c.growth.N1);
    g.get("N2", c.growth.N2);
  });
  r.object("constants", [&](Reader& k) {
    c.constants_configured = k.has("C0");
    k.get("C0", c.constants.C0);
    k.get("lambda0", c.constants.lambda0);
    k.get("tau0", c.constants.tau0);
    k.get("C_l0t0", c.constants.C_l0t0);
  });
  r.object("calibration", [&](Reader& p) {
    p.get("degrees", c.probes.degrees);
    p.get("lambdas", c.probes.lambdas);
    p.get("taus", c.probes.taus);
    p.get("spacing", c.probes.spacing);
    p.get("safety", c.probes.safety);
  });
  r.object("identity", [&](Reader& s) {
    s.get("n", c.identity_n);
    s.get("degrees", c.identity_degrees);
  });
  r.object("consistency", [&](Reader& s) { s.get("eps", c.consistency_eps); });
  r.object("caccioppoli", [&](Reader& s) {
    s.get("radii", c.caccioppoli_radii);
    s.get("lambda", c.caccioppoli_lambda);
    s.get("tau", c.caccioppoli_tau);
  });
  r.object("three_ball", [&](Reader& s) {
    s.get("lambda", c.three_ball_lambda);
    s.get("tau_bound_C", c.tau_bound_C);
  });
  r.object("multiscale", [&](Reader& s) {
    s.get("eps", c.multiscale_eps);
    s.get("radii", c.multiscale_radii);
  });
  r.object("doubling", [&](Reader& s) {
    s.get("radii", c.doubling_radii);
    s.get("M", c.doubling_M);
  });
  r.object("counterexample", [&](Reader& s) {
    s.get("degrees", c.counterexample_degrees);
    s.get("n", c.counterexample_n);
  });
  r.object("tolerances", [&](Reader& t) {
    t.get("cell_oracle", c.tol.cell_oracle);
    t.get("identity_residual", c.tol.identity_residual);
    t.get("convergence_slope", c.tol.convergence_slope);
    t.get("convergence_spread", c.tol.convergence_spread);
    t.get("consistency_drop", c.tol.consistency_drop);
    t.get("plateau", c.tol.plateau);
    t.get("carleman_slack", c.tol.carleman_slack);
    t.get("carleman_eps_max", c.tol.carleman_eps_max);
    t.get("tau_spread", c.tol.tau_spread);
    t.get("caccioppoli_spread", c.tol.caccioppoli_spread);
    t.get("three_ball_factor", c.tol.three_ball_factor);
    t.get("multiscale_factor", c.tol.multiscale_factor);
    t.get("counterexample_rel", c.tol.counterexample_rel);
    t.get("counterexample_k_max", c.tol.counterexample_k_max);
    t.get("exponents", c.tol.exponents);
  });
  r.finish();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  json b = {{"kind", boundary.kind_name()}};
  switch (boundary.kind) {
    case BoundarySpec::Kind::fourier:
      b["seed"] = boundary.seed;
      b["modes"] = boundary.modes;
      break;
    case BoundarySpec::Kind::harmonic:
      b["degree"] = boundary.degree;
      break;
    case BoundarySpec::Kind::constant:
      b["value"] = boundary.value;
      break;
  }
  json k = {{"lambda0", constants.lambda0}, {"tau0", constants.tau0}, {"C_l0t0", constants.C_l0t0}};
  if (constants_configured) k["C0"] = constants.C0;
  return {
      {"coefficient", coefficient},
      {"half_extent", half_extent},
      {"cell_n", cell_n},
      {"cells_per_period", cells_per_period},
      {"eps_list", eps_list},
      {"lambda_grid", lambda_grid},
      {"boundary", b},
      {"solver_tol", solver_tol},
      {"growth", {{"M", growth.M}, {"N1", growth.N1}, {"N2", growth.N2}}},
      {"constants", k},
      {"calibration",
       {{"degrees", probes.degrees},
        {"lambdas", probes.lambdas},
        {"taus", probes.taus},
        {"spacing", probes.spacing},
        {"safety", probes.safety}}},
      {"identity", {{"n", identity_n}, {"degrees", identity_degrees}}},
      {"consistency", {{"eps", consistency_eps}}},
      {"caccioppoli", {{"radii", caccioppoli_radii}, {"lambda", caccioppoli_lambda}, {"tau", caccioppoli_tau}}},
      {"three_ball", {{"lambda", three_ball_lambda}, {"tau_bound_C", tau_bound_C}}},
      {"multiscale", {{"eps", multiscale_eps}, {"radii", multiscale_radii}}},
      {"doubling", {{"radii", doubling_radii}, {"M", doubling_M}}},
      {"counterexample", {{"degrees", counterexample_degrees}, {"n", counterexample_n}}},
      {"tolerances",
       {{"cell_oracle", tol.cell_oracle},
        {"identity_residual", tol.identity_residual},
        {"convergence_slope", tol.convergence_slope},
        {"convergence_spread", tol.convergence_spread},
        {"consistency_drop", tol.consistency_drop},
        {"plateau", tol.plateau},
        {"carleman_slack", tol.carleman_slack},
        {"carleman_eps_max", tol.carleman_eps_max},
        {"tau_spread", tol.tau_spread},
        {"caccioppoli_spread", tol.caccioppoli_spread},
        {"three_ball_factor", tol.three_ball_factor},
        {"multiscale_factor", tol.multiscale_factor},
        {"counterexample_rel", tol.counterexample_rel},
        {"counterexample_k_max", tol.counterexample_k_max},
        {"exponents", tol.exponents}}},
      {"jobs", jobs},
      {"outdir", outdir},
  };
}

void ExperimentConfig::validate() const {
  (void)builtin_coefficient(coefficient);
  require(half_extent >= 3.0 && std::isfinite(half_extent), "half_extent must be at least 3 (B_3 lies inside the domain)");
  require(cell_n >= 8, "cell_n must be at least 8");
  require(cells_per_period >= 8, "cells_per_period must be at least 8 (resolution rule h <= eps/8)");
  require(!eps_list.empty(), "eps_list is empty");
  for (std::size_t k = 0; k < eps_list.size(); ++k) {
    require(positive(eps_list[k]) && eps_list[k] <= 1.0, "eps_list entries must lie in (0, 1]");
    require(k == 0 || eps_list[k] < eps_list[k - 1], "eps_list must be strictly decreasing");
    check_matched(half_extent, eps_list[k], cells_per_period, "eps_list[" + std::to_string(k) + "]");
  }
  require(solver_tol > 0.0 && solver_tol <= 1e-6, "solver_tol must lie in (0, 1e-6]");
  if (boundary.kind == BoundarySpec::Kind::fourier) {
    require(boundary.has_seed, "boundary.seed is required for fourier boundary data");
    require(boundary.modes >= 1, "boundary.modes must be at least 1");
  }
  require(boundary.degree >= 0, "boundary.degree must be non-negative");
  require(std::isfinite(boundary.value), "boundary.value must be finite");

  growth.validate();
  constants.validate();
  require(!lambda_grid.empty(), "lambda_grid is empty");
  for (double l : lambda_grid) {
    require(std::isfinite(l) && l >= constants.lambda0,
            "lambda_grid value " + std::to_string(l) + " is below lambda0 = " + std::to_string(constants.lambda0) +
                "; the Carleman estimate is only claimed for lambda >= lambda0");
  }
  require(!probes.degrees.empty() && !probes.lambdas.empty() && !probes.taus.empty(),
          "calibration lists must be nonempty");
  for (int d : probes.degrees) require(d >= 1, "calibration.degrees must be at least 1");
  for (double l : probes.lambdas) require(l >= constants.lambda0, "calibration.lambdas must be >= lambda0");
  for (double t : probes.taus) require(t >= constants.tau0, "calibration.taus must be >= tau0");
  require(positive(probes.spacing) && probes.spacing <= 0.1, "calibration.spacing must lie in (0, 0.1]");
  require(positive(probes.safety) && probes.safety <= 1.0, "calibration.safety must lie in (0, 1]");

  require(identity_n >= 16, "identity.n must be at least 16");
  require(!identity_degrees.empty(), "identity.degrees is empty");
  for (int d : identity_degrees) require(d >= 1, "identity.degrees must be at least 1");
  require(positive(consistency_eps) && consistency_eps <= 1.0, "consistency.eps must lie in (0, 1]");
  check_matched(half_extent, consistency_eps, cells_per_period, "consistency.eps");
  check_matched(half_extent, consistency_eps, 2 * cells_per_period, "consistency.eps");

  require(caccioppoli_radii.size() == 4, "caccioppoli.radii needs four radii");
  const auto& s = caccioppoli_radii;
  require(s[0] > 0.0 && s[0] < s[1] && s[1] < s[2] && s[2] < s[3] && s[3] <= half_extent,
          "caccioppoli.radii must increase and stay inside the domain");
  require(positive(caccioppoli_lambda) && caccioppoli_tau >= 0.0, "caccioppoli needs lambda > 0 and tau >= 0");
  require(three_ball_lambda > std::log(2.0) / 4.0, "three_ball.lambda must exceed ln(2)/4 so that alpha > 0");
  require(positive(tau_bound_C), "three_ball.tau_bound_C must be positive");

  require(positive(multiscale_eps) && multiscale_eps <= 1.0, "multiscale.eps must lie in (0, 1]");
  check_matched(half_extent, multiscale_eps, cells_per_period, "multiscale.eps");
  require(!multiscale_radii.empty(), "multiscale.radii is empty");
  for (double r : multiscale_radii) require(r > 0.0 && r <= 0.5, "multiscale.radii must lie in (0, 1/2]");
  require(!doubling_radii.empty(), "doubling.radii is empty");
  for (double r : doubling_radii) require(r > 0.0 && r <= half_extent, "doubling.radii must lie in (0, half_extent]");
  require(positive(doubling_M), "doubling.M must be positive");
  require(!counterexample_degrees.empty(), "counterexample.degrees is empty");
  for (int k : counterexample_degrees) require(k >= 0, "counterexample.degrees must be non-negative");
  require(counterexample_n >= 16, "counterexample.n must be at least 16");

  for (double t : {tol.cell_oracle, tol.identity_residual, tol.convergence_slope, tol.convergence_spread,
                   tol.consistency_drop, tol.plateau, tol.carleman_slack, tol.carleman_eps_max, tol.tau_spread,
                   tol.caccioppoli_spread, tol.three_ball_factor, tol.multiscale_factor, tol.counterexample_rel,
                   tol.exponents}) {
    require(positive(t), "tolerances must be positive");
  }
  require(tol.counterexample_k_max >= 0, "tolerances.counterexample_k_max must be non-negative");
  require(jobs >= 1, "jobs must be at least 1");
  require(!outdir.empty(), "outdir is empty");
}

}  // namespace homlab
