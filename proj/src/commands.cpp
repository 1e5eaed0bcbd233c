#include "mwq/commands.hpp"

#include <cstdio>
#include <filesystem>

#include "mwq/output.hpp"

namespace mwq {

namespace {

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

}  // namespace

std::string summary_csv(const RunSummary& s, int link_count) {
  std::vector<std::string> header;
  for (int l = 1; l <= link_count; ++l) header.push_back("avg_queue_" + std::to_string(l));
  for (int l = 1; l <= link_count; ++l) header.push_back("avg_delay_" + std::to_string(l));
  for (int l = 1; l <= link_count; ++l) header.push_back("avg_power_" + std::to_string(l));
  header.insert(header.end(),
                {"worst_avg_queue", "mean_node_power", "mean_node_power_db",
                 "avg_tracking_error", "slot_count", "measured_slots",
                 "fallback_count", "p_const_used"});
  CsvTable t(std::move(header));
  t.new_row();
  for (double v : s.avg_queue) t.add(v);
  for (double v : s.avg_delay) t.add(v);
  for (double v : s.avg_power) t.add(v);
  t.add(s.worst_avg_queue);
  t.add(s.mean_node_power);
  t.add(s.mean_node_power_db);
  t.add(s.avg_tracking_error);
  t.add(s.slot_count);
  t.add(s.measured_slots);
  t.add(s.fallback_count);
  t.add(s.p_const_used);
  return t.to_string();
}

nlohmann::json summary_json(const RunSummary& s) {
  nlohmann::json j;
  j["avg_queue"] = s.avg_queue;
  j["worst_avg_queue"] = s.worst_avg_queue;
  j["avg_delay"] = s.avg_delay;
  j["avg_power"] = s.avg_power;
  j["tx_nodes"] = s.tx_nodes;
  j["node_power"] = s.node_power;
  j["node_power_db"] = s.node_power_db;
  j["mean_node_power"] = s.mean_node_power;
  j["mean_node_power_db"] = s.mean_node_power_db;
  j["avg_tracking_error"] = s.avg_tracking_error;
  j["slot_count"] = s.slot_count;
  j["measured_slots"] = s.measured_slots;
  j["fallback_count"] = s.fallback_count;
  j["p_const_used"] = s.p_const_used;
  return j;
}

std::string timeseries_csv(const TimeSeries& ts) {
  std::vector<std::string> header{"t"};
  for (int l = 1; l <= ts.link_count; ++l) header.push_back("q_" + std::to_string(l));
  for (int l = 1; l <= ts.link_count; ++l) header.push_back("p_" + std::to_string(l));
  for (int l = 1; l <= ts.link_count; ++l)
    header.push_back("pstar_" + std::to_string(l));
  header.push_back("err");
  CsvTable t(std::move(header));
  for (std::size_t i = 0; i < ts.t.size(); ++i) {
    t.new_row();
    t.add(ts.t[i]);
    for (double v : ts.q[i]) t.add(v);
    for (double v : ts.p[i]) t.add(v);
    for (double v : ts.pstar[i]) t.add(v);
    t.add(ts.err[i]);
  }
  return t.to_string();
}

std::string fading_cells_csv(const FadingSweep& sweep) {
  CsvTable t({"policy", "a_A", "seed", "tracking_error", "avg_delay",
              "avg_power", "failed", "error"});
  for (const FadingCell& c : sweep.cells) {
    t.new_row();
    t.add(c.policy);
    t.add(c.a_A);
    t.add(static_cast<unsigned long long>(c.seed));
    t.add(c.tracking_error);
    t.add(c.avg_delay);
    t.add(c.avg_power);
    t.add(std::string(c.failed ? "1" : "0"));
    t.add(c.error);
  }
  return t.to_string();
}

std::string fading_agg_csv(const FadingSweep& sweep) {
  CsvTable t({"policy", "a_A", "n", "mean_error", "stderr_error", "mean_delay",
              "mean_power"});
  for (const FadingAggregate& a : sweep.aggregates) {
    t.new_row();
    t.add(a.policy);
    t.add(a.a_A);
    t.add(a.n);
    t.add(a.mean_error);
    t.add(a.stderr_error);
    t.add(a.mean_delay);
    t.add(a.mean_power);
  }
  return t.to_string();
}

std::string tradeoff_cells_csv(const TradeoffSweep& sweep) {
  CsvTable t({"policy", "V", "seed", "avg_delay", "avg_power", "avg_power_db",
              "failed", "error"});
  for (const TradeoffCell& c : sweep.cells) {
    t.new_row();
    t.add(c.policy);
    t.add(c.V);
    t.add(static_cast<unsigned long long>(c.seed));
    t.add(c.avg_delay);
    t.add(c.avg_power);
    t.add(c.avg_power_db);
    t.add(std::string(c.failed ? "1" : "0"));
    t.add(c.error);
  }
  return t.to_string();
}

std::string tradeoff_agg_csv(const TradeoffSweep& sweep) {
  CsvTable t({"policy", "V", "n", "mean_delay", "stderr_delay", "mean_power",
              "mean_power_db"});
  for (const TradeoffAggregate& a : sweep.aggregates) {
    t.new_row();
    t.add(a.policy);
    t.add(a.V);
    t.add(a.n);
    t.add(a.mean_delay);
    t.add(a.stderr_delay);
    t.add(a.mean_power);
    t.add(a.mean_power_db);
  }
  return t.to_string();
}

std::string bound_csv(const std::vector<BoundRow>& rows) {
  CsvTable t({"a_A", "gamma_h", "gamma_q", "bound", "sigma_bar", "alpha_bar0",
              "gamma_bar0", "g_bar", "clamped"});
  for (const BoundRow& r : rows) {
    t.new_row();
    t.add(r.a_A);
    t.add(r.gamma_h);
    t.add(r.gamma_q);
    t.add(r.bound);
    t.add(r.sigma_bar);
    t.add(r.alpha_bar0);
    t.add(r.gamma_bar0);
    t.add(r.g_bar);
    t.add(r.clamped);
  }
  return t.to_string();
}

namespace {

nlohmann::json fading_cell_json(const FadingCell& c) {
  nlohmann::json j;
  j["policy"] = c.policy;
  j["a_A"] = c.a_A;
  j["seed"] = c.seed;
  j["tracking_error"] = c.tracking_error;
  j["avg_delay"] = c.avg_delay;
  j["avg_power"] = c.avg_power;
  j["failed"] = c.failed;
  j["error"] = c.error;
  return j;
}

nlohmann::json tradeoff_cell_json(const TradeoffCell& c) {
  nlohmann::json j;
  j["policy"] = c.policy;
  j["V"] = c.V;
  j["seed"] = c.seed;
  j["avg_delay"] = c.avg_delay;
  j["avg_power"] = c.avg_power;
  j["avg_power_db"] = c.avg_power_db;
  j["failed"] = c.failed;
  j["error"] = c.error;
  return j;
}

}  // namespace

nlohmann::json fading_json(const FadingSweep& sweep) {
  nlohmann::json j;
  j["cells"] = nlohmann::json::array();
  for (const auto& c : sweep.cells) j["cells"].push_back(fading_cell_json(c));
  j["aggregates"] = nlohmann::json::array();
  for (const auto& a : sweep.aggregates) {
    nlohmann::json row;
    row["policy"] = a.policy;
    row["a_A"] = a.a_A;
    row["n"] = a.n;
    row["mean_error"] = a.mean_error;
    row["stderr_error"] = a.stderr_error;
    row["mean_delay"] = a.mean_delay;
    row["mean_power"] = a.mean_power;
    j["aggregates"].push_back(row);
  }
  return j;
}

nlohmann::json tradeoff_json(const TradeoffSweep& sweep) {
  nlohmann::json j;
  j["cells"] = nlohmann::json::array();
  for (const auto& c : sweep.cells) j["cells"].push_back(tradeoff_cell_json(c));
  j["aggregates"] = nlohmann::json::array();
  for (const auto& a : sweep.aggregates) {
    nlohmann::json row;
    row["policy"] = a.policy;
    row["V"] = a.V;
    row["n"] = a.n;
    row["mean_delay"] = a.mean_delay;
    row["stderr_delay"] = a.stderr_delay;
    row["mean_power"] = a.mean_power;
    row["mean_power_db"] = a.mean_power_db;
    j["aggregates"].push_back(row);
  }
  return j;
}

nlohmann::json bound_json(const std::vector<BoundRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const BoundRow& r : rows) {
    nlohmann::json j;
    j["a_A"] = r.a_A;
    j["gamma_h"] = r.gamma_h;
    j["gamma_q"] = r.gamma_q;
    j["bound"] = r.bound;
    j["sigma_bar"] = r.sigma_bar;
    j["alpha_bar0"] = r.alpha_bar0;
    j["gamma_bar0"] = r.gamma_bar0;
    j["g_bar"] = r.g_bar;
    j["clamped"] = r.clamped;
    arr.push_back(j);
  }
  nlohmann::json out;
  out["rows"] = arr;
  return out;
}

std::vector<BoundRow> run_bound_sweep(const ExperimentSpec& spec, Exec exec) {
  StationarySamplingConfig scfg;
  scfg.sample_count = spec.mc_samples;
  scfg.hypothesis_floor = spec.hypothesis_floor;
  return bound_sweep(spec.bound_a_grid, spec.gamma_scenarios, spec.sim.channel,
                     spec.sim.topo, spec.effective_lambda_max(),
                     spec.sim.policy_cfg.V, spec.sim.policy_cfg.kappa, scfg,
                     spec.sim.seed, exec);
}

int cmd_simulate(const ExperimentSpec& spec) {
  EpisodeResult r = run_episode(spec.sim);
  if (spec.format == OutputFormat::Json) {
    write_file(join_path(spec.out_dir, "summary.json"),
               canonical_json(summary_json(r.summary)));
  } else {
    write_file(join_path(spec.out_dir, "summary.csv"),
               summary_csv(r.summary, spec.sim.topo.link_count()));
  }
  if (r.series)
    write_file(join_path(spec.out_dir, "timeseries.csv"),
               timeseries_csv(*r.series));
  write_file(join_path(spec.out_dir, "effective.ini"), emit_ini(spec));
  std::printf("simulate: worst avg queue %s, mean node power %s dB\n",
              format_double(r.summary.worst_avg_queue).c_str(),
              format_double(r.summary.mean_node_power_db).c_str());
  return 0;
}

int cmd_sweep_fading(const ExperimentSpec& spec) {
  FadingSweep sweep =
      sweep_fading(spec.sim, spec.a_grid, spec.policies, spec.seeds());
  if (spec.format == OutputFormat::Json) {
    write_file(join_path(spec.out_dir, "fading.json"),
               canonical_json(fading_json(sweep)));
  } else {
    write_file(join_path(spec.out_dir, "fading_cells.csv"),
               fading_cells_csv(sweep));
    write_file(join_path(spec.out_dir, "fading_agg.csv"), fading_agg_csv(sweep));
  }
  std::printf("sweep-fading: %zu cells, %zu aggregates%s\n", sweep.cells.size(),
              sweep.aggregates.size(),
              sweep.any_failed ? " (failures present)" : "");
  return sweep.any_failed ? 1 : 0;
}

int cmd_sweep_tradeoff(const ExperimentSpec& spec) {
  TradeoffSweep sweep =
      sweep_tradeoff(spec.sim, spec.v_grid, spec.policies, spec.seeds());
  if (spec.format == OutputFormat::Json) {
    write_file(join_path(spec.out_dir, "tradeoff.json"),
               canonical_json(tradeoff_json(sweep)));
  } else {
    write_file(join_path(spec.out_dir, "tradeoff_cells.csv"),
               tradeoff_cells_csv(sweep));
    write_file(join_path(spec.out_dir, "tradeoff_agg.csv"),
               tradeoff_agg_csv(sweep));
  }
  std::printf("sweep-tradeoff: %zu cells, %zu aggregates%s\n",
              sweep.cells.size(), sweep.aggregates.size(),
              sweep.any_failed ? " (failures present)" : "");
  return sweep.any_failed ? 1 : 0;
}

int cmd_bound(const ExperimentSpec& spec) {
  std::vector<BoundRow> rows = run_bound_sweep(spec, Exec::Parallel);
  if (spec.format == OutputFormat::Json) {
    write_file(join_path(spec.out_dir, "bound.json"),
               canonical_json(bound_json(rows)));
  } else {
    write_file(join_path(spec.out_dir, "bound.csv"), bound_csv(rows));
  }
  std::printf("bound: %zu rows\n", rows.size());
  return 0;
}

int cmd_validate(const ExperimentSpec& spec, const ValidationOptions& opts) {
  std::vector<CheckResult> checks = run_validation(spec, opts);
  write_file(join_path(spec.out_dir, "validation.json"),
             canonical_json(validation_report(checks)));
  for (const CheckResult& c : checks)
    std::printf("%-32s %s  measured=%s threshold=%s\n", c.name.c_str(),
                c.pass ? "PASS" : "FAIL", format_double(c.measured).c_str(),
                format_double(c.threshold).c_str());
  return all_passed(checks) ? 0 : 1;
}

}  // namespace mwq
