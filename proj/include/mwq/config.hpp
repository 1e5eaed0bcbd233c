#pragma once

#include <string>
#include <vector>

#include "mwq/sim.hpp"

namespace mwq {

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class OutputFormat { Csv, Json };

/// Parsed experiment description: the simulation config plus the grids the
/// sweep/bound commands consume. Defaults (no file, or empty sections) are
/// the reference setting: 5-node/6-link mesh, tau = 1 ms, a = 200/s,
/// h0 = 0.05, lambda = 20/s, kappa = 500/s.
struct ExperimentSpec {
  SimConfig sim;
  std::vector<double> a_grid = {50, 100, 200, 400};
  std::vector<double> v_grid = {0.5, 1, 2, 4, 8, 16};
  std::vector<double> bound_a_grid = {0.01, 0.0316, 0.1, 0.316, 1,
                                      3.16, 10,     31.6, 100,  316, 1000};
  std::vector<std::pair<double, double>> gamma_scenarios = {
      {0.0, 0.0}, {0.1, 0.2}, {0.2, 0.4}};
  std::vector<PolicyKind> policies = {PolicyKind::Mwq, PolicyKind::Compensated,
                                      PolicyKind::Oracle};
  int seed_count = 1;
  double lambda_max = std::numeric_limits<double>::quiet_NaN();  // NaN: max lambda
  int mc_samples = 4000;
  double hypothesis_floor = 0.01;
  bool p_max_auto = true;  // p_max derived as 2^(L*lambda_max)/h0^2

  std::string out_dir = "out";
  OutputFormat format = OutputFormat::Csv;

  std::vector<std::uint64_t> seeds() const;
  double effective_lambda_max() const;
};

/// Builds the default spec (equivalent to parsing an empty file).
ExperimentSpec default_spec();

/// Parses an INI-style config. Unknown sections or keys, malformed lines and
/// type mismatches are reported with their line number; value constraints
/// are reported with the offending key.
ExperimentSpec parse_config(const std::string& path);
ExperimentSpec parse_config_text(const std::string& text,
                                 const std::string& origin = "<memory>");

/// Serializes the effective configuration; parse_config_text of the result
/// reproduces the spec.
std::string emit_ini(const ExperimentSpec& spec);

/// Field-by-field equality with NaN == NaN, for round-trip checks.
bool equivalent(const ExperimentSpec& a, const ExperimentSpec& b);

}  // namespace mwq
