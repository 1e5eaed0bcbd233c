#pragma once

#include <string>

#include "mwq/config.hpp"
#include "mwq/validate.hpp"

namespace mwq {

/// Serialization helpers shared by the commands and the acceptance suite;
/// output is byte-stable for a fixed spec and seed.
std::string summary_csv(const RunSummary& s, int link_count);
nlohmann::json summary_json(const RunSummary& s);
std::string timeseries_csv(const TimeSeries& ts);
std::string fading_cells_csv(const FadingSweep& sweep);
std::string fading_agg_csv(const FadingSweep& sweep);
std::string tradeoff_cells_csv(const TradeoffSweep& sweep);
std::string tradeoff_agg_csv(const TradeoffSweep& sweep);
std::string bound_csv(const std::vector<BoundRow>& rows);
nlohmann::json fading_json(const FadingSweep& sweep);
nlohmann::json tradeoff_json(const TradeoffSweep& sweep);
nlohmann::json bound_json(const std::vector<BoundRow>& rows);

/// Runs the bound sweep described by the spec (grid, scenarios, channel,
/// sampling sizes).
std::vector<BoundRow> run_bound_sweep(const ExperimentSpec& spec, Exec exec);

/// Command entry points; each writes its files under spec.out_dir and
/// returns a process exit code (0 = success, 1 = failures present).
int cmd_simulate(const ExperimentSpec& spec);
int cmd_sweep_fading(const ExperimentSpec& spec);
int cmd_sweep_tradeoff(const ExperimentSpec& spec);
int cmd_bound(const ExperimentSpec& spec);
int cmd_validate(const ExperimentSpec& spec,
                 const ValidationOptions& opts = {});

}  // namespace mwq
