// Runs the full `all` pipeline on the shipped configuration and prints one
// PASS/FAIL line per acceptance criterion. Thresholds live here, not in the config.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "homlab/experiment.hpp"

using namespace homlab;

namespace {

constexpr double kCellOracle = 1e-3;
constexpr double kCellSeconds = 30.0;
constexpr double kIdentityResidual = 1e-10;
constexpr double kSlope = 0.5;
constexpr double kConstantSpread = 3.0;
constexpr double kConvergenceSeconds = 600.0;
constexpr double kConsistencyDrop = 1.8;
constexpr double kPlateau = 1e-12;
constexpr double kCarlemanBound = 1.1;
constexpr double kCarlemanEpsMax = 1.0 / 32.0;
constexpr double kTauSpread = 10.0;
constexpr double kCaccioppoliSpread = 5.0;
constexpr double kThreeBallFactor = 10.0;
constexpr double kMultiscaleFactor = 2.0;
constexpr double kCounterexampleRel = 1e-3;
constexpr int kCounterexampleKMax = 6;
constexpr double kExponentTol = 1e-5;
constexpr double kFullRunSeconds = 1200.0;

struct Line {
  std::string label;
  bool pass = true;
  std::ostringstream text;

  void value(const std::string& what, double v, const std::string& rel, double thr, bool ok) {
    if (text.tellp() > 0) text << "; ";
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s = %.4g (%s %.4g)", what.c_str(), v, rel.c_str(), thr);
    text << buf;
    pass = pass && ok;
  }
  void at_most(const std::string& what, double v, double thr) { value(what, v, "<=", thr, v <= thr); }
  void at_least(const std::string& what, double v, double thr) { value(what, v, ">=", thr, v >= thr); }
  void fact(const std::string& what, bool ok) {
    if (text.tellp() > 0) text << "; ";
    text << what << (ok ? "" : " [violated]");
    pass = pass && ok;
  }
};

const PipelineReport* report(const CommandResult& r, const std::string& name) {
  for (const auto& p : r.reports) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

double value(const CommandResult& r, const std::string& pipeline, const std::string& check) {
  const PipelineReport* p = report(r, pipeline);
  const Check* c = p ? p->find(check) : nullptr;
  return c ? c->value : std::nan("");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: acceptance <config.json> <outdir>\n";
    return 2;
  }
  const ExperimentConfig cfg = ExperimentConfig::load(argv[1]);
  RunOptions opts;
  opts.outdir = argv[2];
  opts.plots = true;
  const CommandResult r = execute("all", argv[1], opts, std::cerr);
  if (r.exit_code == kExitConfig || r.exit_code == kExitNumerical) {
    std::cout << "FAIL  run aborted: " << r.error << "\n";
    return 1;
  }
  const std::string fam = cfg.coefficient;
  std::vector<Line> lines(13);

  {
    Line& l = lines[0];
    l.label = "1  homogenized tensor oracle";
    l.fact("laminate family at cell_n = 256", fam == "laminate" && cfg.cell_n == 256);
    l.at_most("|a11 - 1/2|", value(r, "cell", "laminate.a11_error"), kCellOracle);
    l.at_most("|a22 - 1/sqrt3|", value(r, "cell", "laminate.a22_error"), kCellOracle);
    l.at_most("|a12|", value(r, "cell", "laminate.a12_error"), kCellOracle);
    const PipelineReport* p = report(r, "cell");
    l.value("cell seconds", p ? p->wall_seconds : INFINITY, "<", kCellSeconds, p && p->wall_seconds < kCellSeconds);
  }
  {
    Line& l = lines[1];
    l.label = "2  identity sanity";
    l.at_most("corrector residual", value(r, "cell", "identity.corrector_residual"), kIdentityResidual);
    l.value("max |chi|", value(r, "cell", "identity.corrector_max"), "==", 0.0,
            value(r, "cell", "identity.corrector_max") == 0.0);
    l.value("max |a_hat - I|", value(r, "cell", "identity.a_hat_deviation"), "==", 0.0,
            value(r, "cell", "identity.a_hat_deviation") == 0.0);
    l.value("max |b|, |F|", value(r, "cell", "identity.flux_max"), "==", 0.0,
            value(r, "cell", "identity.flux_max") == 0.0);
  }
  const std::vector<double> sweep{1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64};
  {
    Line& l = lines[2];
    l.label = "3  convergence rate";
    l.fact("eps sweep 1/8 .. 1/64", cfg.eps_list == sweep);
    l.at_least("L2 slope", value(r, "convergence", "l2_slope"), kSlope);
    l.at_most("max C / min C", value(r, "convergence", "constant_spread"), kConstantSpread);
    const PipelineReport* p = report(r, "convergence");
    l.at_most("convergence seconds", p ? p->wall_seconds : INFINITY, kConvergenceSeconds);
  }
  {
    Line& l = lines[3];
    l.label = "4  two-scale H1 error";
    l.fact("h1_err strictly decreasing over the sweep", value(r, "convergence", "h1_err_strictly_decreasing") == 1.0);
  }
  {
    Line& l = lines[4];
    l.label = "5  expansion consistency";
    l.fact("eps = 1/8", cfg.consistency_eps == 0.125);
    l.at_least("residual(n) / residual(2n)", value(r, "carleman", "consistency.refinement_drop"), kConsistencyDrop);
    l.at_most("plateau |R| / max |R|", value(r, "carleman", "consistency.plateau_fraction"), kPlateau);
  }
  {
    Line& l = lines[5];
    l.label = "6  Carleman-type inequality";
    l.fact("lambda grid {1, 2}", cfg.lambda_grid == std::vector<double>{1.0, 2.0});
    for (int k = 1; k <= 3; ++k) {
      const std::string name = "identity_k" + std::to_string(k) + ".max_ratio";
      l.at_most("A=I k=" + std::to_string(k), value(r, "carleman", name), kCarlemanBound);
    }
    for (double eps : cfg.eps_list) {
      if (eps > kCarlemanEpsMax) continue;
      const std::string name = fam + ".eps=" + format_number(eps) + ".max_ratio";
      l.at_most(fam + " eps=" + format_number(eps), value(r, "carleman", name), kCarlemanBound);
    }
    const PipelineReport* p = report(r, "carleman");
    if (p) l.text << "; largest passing eps = " << p->details.value("largest_passing_eps", 0.0);
  }
  {
    Line& l = lines[6];
    l.label = "7  classical Carleman";
    l.value("C0", value(r, "calibrate", "C0"), ">", 0.0, value(r, "calibrate", "C0") > 0.0);
    l.at_most("tau spread", value(r, "calibrate", "tau_spread"), kTauSpread);
  }
  {
    Line& l = lines[7];
    l.label = "8  weighted Caccioppoli";
    l.at_most("max C / min C", value(r, "carleman", "caccioppoli_spread"), kCaccioppoliSpread);
  }
  {
    Line& l = lines[8];
    l.label = "9  three-ball";
    l.at_most("max C_emp / baseline", value(r, "threeball", "C_emp_over_baseline"), kThreeBallFactor);
  }
  {
    Line& l = lines[9];
    l.label = "10 multiscale three-ball";
    l.fact("eps = 1/64, r in {1/2, 1/4, 1/8}",
           cfg.multiscale_eps == 1.0 / 64 && cfg.multiscale_radii == std::vector<double>{0.5, 0.25, 0.125});
    l.at_most("max C_r / C_emp", value(r, "threeball", "multiscale_over_macro"), kMultiscaleFactor);
  }
  {
    Line& l = lines[10];
    l.label = "11 counterexample";
    l.fact("growth M = 10, N1 = N2 = 2", cfg.growth.M == 10.0 && cfg.growth.N1 == 2.0 && cfg.growth.N2 == 2.0);
    l.at_most("max relative error (k <= 6)", value(r, "counterexample", "max_rel_error"), kCounterexampleRel);
    const PipelineReport* p = report(r, "counterexample");
    const int k_star = p ? p->details.value("k_star", -1) : -1;
    l.fact("growth fails from k* = " + std::to_string(k_star), k_star >= 0 && k_star <= kCounterexampleKMax);
  }
  {
    Line& l = lines[11];
    l.label = "12 exponent formulas";
    l.at_most("|alpha(1) - 0.963369|", value(r, "threeball", "alpha(1)_error"), kExponentTol);
    l.at_most("|beta(1) - 0.0239716|", value(r, "threeball", "beta(1)_error"), kExponentTol);
    l.at_most("|s(1) - 0.97572|", value(r, "threeball", "s(1)_error"), kExponentTol);
    l.fact("beta > 0 on 50 lambdas", value(r, "threeball", "beta_positive_on_grid") == 1.0);
  }
  {
    Line& l = lines[12];
    l.label = "   full run time";
    l.at_most("seconds", r.wall_seconds, kFullRunSeconds);
  }

  bool all = true;
  for (auto& l : lines) {
    std::cout << (l.pass ? "PASS  " : "FAIL  ") << l.label << ": " << l.text.str() << "\n";
    all = all && l.pass;
  }
  return all ? 0 : 1;
}
