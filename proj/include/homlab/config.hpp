#pragma once

// Experiment configuration: a JSON file where every key is optional except the
// seed of random boundary data. Unknown keys are rejected.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "homlab/carleman.hpp"
#include "homlab/twoscale.hpp"

namespace homlab {

struct BoundarySpec {
  enum class Kind { fourier, harmonic, constant };

  Kind kind = Kind::fourier;
  std::uint64_t seed = 0;
  bool has_seed = false;
  int modes = 4;
  int degree = 2;
  double value = 1.0;

  ScalarFunction function(double half_extent) const;
  std::string kind_name() const;
};

/// Acceptance thresholds. Defaults are the values the acceptance suite pins.
struct Tolerances {
  double cell_oracle = 1e-3;
  double identity_residual = 1e-10;
  double convergence_slope = 0.5;
  double convergence_spread = 3.0;
  double consistency_drop = 1.8;
  double plateau = 1e-12;
  double carleman_slack = 0.1;
  double carleman_eps_max = 1.0 / 32.0;
  double tau_spread = 10.0;
  double caccioppoli_spread = 5.0;
  double three_ball_factor = 10.0;
  double multiscale_factor = 2.0;
  double counterexample_rel = 1e-3;
  int counterexample_k_max = 6;
  double exponents = 1e-5;
};

struct ExperimentConfig {
  std::string coefficient = "laminate";
  double half_extent = 3.25;
  int cell_n = 256;
  int cells_per_period = 8;
  std::vector<double> eps_list{1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0};
  std::vector<double> lambda_grid{1.0, 2.0};
  BoundarySpec boundary;
  double solver_tol = 1e-10;

  GrowthParams growth;
  CarlemanConstants constants;
  bool constants_configured = false;  // C0 given explicitly: calibration is skipped
  ProbeSuite probes;

  int identity_n = 416;
  std::vector<int> identity_degrees{1, 2, 3};
  double consistency_eps = 1.0 / 8.0;
  std::vector<double> caccioppoli_radii{9.0 / 4.0, 7.0 / 3.0, 5.0 / 2.0, 3.0};
  double caccioppoli_lambda = 1.0;
  double caccioppoli_tau = 5.0;
  double three_ball_lambda = 1.0;
  double tau_bound_C = 1.0;
  double multiscale_eps = 1.0 / 64.0;
  std::vector<double> multiscale_radii{0.5, 0.25, 0.125};
  std::vector<double> doubling_radii{0.5, 1.0, 2.0, 3.0};
  double doubling_M = 10.0;
  std::vector<int> counterexample_degrees{0, 1, 2, 3, 4, 5, 6};
  int counterexample_n = 512;

  Tolerances tol;
  int jobs = 1;
  std::string outdir = "out";

  /// Throws ConfigError on unknown keys, wrong types or failed validation.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
  nlohmann::json to_json() const;

  /// Lists nonempty, eps strictly decreasing with a matched grid of spacing
  /// <= eps / 8 for each, lambda_grid >= lambda0, radii ordered.
  void validate() const;
};

}  // namespace homlab
