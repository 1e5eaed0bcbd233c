#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "mwq/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"max-weight queue power control simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::string format = "csv";
  long long seed_override = -1;
  int decimate_override = 0;

  app.add_option("--config", config_path, "INI config file (defaults used when absent)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--format", format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--seed", seed_override, "override the base seed");
  app.add_option("--decimate", decimate_override,
                 "override time-series decimation");

  auto* sim = app.add_subcommand("simulate", "run one episode and write summary/time series");
  auto* fading = app.add_subcommand("sweep-fading", "tracking error vs fading rate");
  auto* tradeoff = app.add_subcommand("sweep-tradeoff", "power/delay curve vs V");
  auto* bound = app.add_subcommand("bound", "queue bound vs fading rate");
  auto* validate = app.add_subcommand("validate", "run the invariant checks");

  CLI11_PARSE(app, argc, argv);

  try {
    mwq::ExperimentSpec spec = config_path.empty()
                                   ? mwq::default_spec()
                                   : mwq::parse_config(config_path);
    spec.out_dir = out_dir;
    spec.format = format == "json" ? mwq::OutputFormat::Json
                                   : mwq::OutputFormat::Csv;
    if (seed_override >= 0)
      spec.sim.seed = static_cast<std::uint64_t>(seed_override);
    if (decimate_override > 0) spec.sim.decimate = decimate_override;

    if (sim->parsed()) return mwq::cmd_simulate(spec);
    if (fading->parsed()) return mwq::cmd_sweep_fading(spec);
    if (tradeoff->parsed()) return mwq::cmd_sweep_tradeoff(spec);
    if (bound->parsed()) return mwq::cmd_bound(spec);
    if (validate->parsed()) return mwq::cmd_validate(spec);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
