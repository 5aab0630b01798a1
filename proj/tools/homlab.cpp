#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "homlab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for periodic homogenization and unique continuation"};
  app.set_version_flag("--version", std::string("homlab ") + HOMLAB_VERSION);

  std::vector<std::string> choices = homlab::pipeline_order();
  choices.push_back("all");
  std::string subcommand, config;
  homlab::RunOptions opts;
  app.add_option("subcommand", subcommand, "Pipeline to run")->required()->check(CLI::IsMember(choices));
  app.add_option("--config", config, "Experiment configuration (JSON)")->required();
  app.add_option("--outdir", opts.outdir, "Output directory (default: the config's outdir)");
  app.add_flag("--plots", opts.plots, "Also write <pipeline>.svg line plots");
  app.add_flag("--use-cached", opts.use_cached, "Reuse <outdir>/constants.json instead of recalibrating");
  app.add_option("--jobs", opts.jobs, "Worker threads (default: the config's jobs)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return homlab::kExitConfig;
  }

  const homlab::CommandResult r = homlab::execute(subcommand, config, opts, std::cerr);
  if (!r.outdir.empty()) std::cerr << "summary: " << r.outdir << "/summary.json (exit " << r.exit_code << ")\n";
  return r.exit_code;
}
