#pragma once

// Pipelines behind the command line: each one computes a PipelineReport from an
// ExperimentConfig, sharing correctors, eps-solutions and constants through a Session.

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "homlab/config.hpp"
#include "homlab/report.hpp"

namespace homlab {

enum ExitCode : int { kExitPass = 0, kExitAcceptance = 1, kExitConfig = 2, kExitNumerical = 3 };

/// cell, calibrate, convergence, carleman, threeball, doubling, counterexample.
const std::vector<std::string>& pipeline_order();

class Session {
 public:
  /// `outdir` receives constants.json whenever calibration runs. With
  /// `use_cached`, a matching constants.json there replaces the probe sweep.
  Session(ExperimentConfig config, std::string outdir, bool use_cached, std::ostream& log);
  ~Session();

  /// Throws ConfigError for an unknown pipeline name.
  PipelineReport run(const std::string& pipeline);

  const ExperimentConfig& config() const { return cfg_; }
  /// Configured, cached or freshly calibrated constants (calibrating on first use).
  const CarlemanConstants& constants();
  bool constants_from_cache() const { return constants_cached_; }
  /// Constants some pipeline has already resolved, if any.
  const std::optional<CarlemanConstants>& resolved_constants() const { return constants_; }

 private:
  struct Solved;

  const Corrector& corrector(int m);
  const HomogenizedTensor& a_hat(int m);
  void solve(const std::vector<double>& eps_list);
  const Solved& solution(double eps);
  const DomainField& identity_baseline();
  bool load_cached_constants();
  void store_constants() const;

  PipelineReport cell();
  PipelineReport calibrate_pipeline();
  PipelineReport convergence();
  PipelineReport carleman();
  PipelineReport threeball();
  PipelineReport doubling();
  PipelineReport counterexample();

  ExperimentConfig cfg_;
  std::string outdir_;
  bool use_cached_;
  std::ostream& log_;
  CoefficientField family_;
  std::map<int, Corrector> correctors_;
  std::map<int, HomogenizedTensor> tensors_;
  std::map<double, std::unique_ptr<Solved>> solutions_;
  std::unique_ptr<DomainField> baseline_;
  std::optional<Calibration> calibration_;
  std::optional<CarlemanConstants> constants_;
  bool constants_cached_ = false;
};

struct RunOptions {
  std::string outdir;  // empty: the config's outdir
  bool plots = false;
  bool use_cached = false;
  int jobs = 0;  // 0: the config's jobs
};

struct CommandResult {
  int exit_code = kExitPass;
  std::vector<PipelineReport> reports;
  std::string error;  // set for exit codes 2 and 3
  std::string outdir;
  double wall_seconds = 0.0;
};

/// Runs a subcommand ("all" or a pipeline name) and writes <outdir>/<table>.csv,
/// summary.json and, with plots, <outdir>/<pipeline>.svg. Progress goes to `log`.
CommandResult execute(const std::string& subcommand, const std::string& config_path, const RunOptions& options,
                      std::ostream& log);

/// summary.json content for a finished (or aborted) command.
nlohmann::json summary_json(const std::string& subcommand, const CommandResult& result, const nlohmann::json& config,
                            const nlohmann::json& constants);

}  // namespace homlab
