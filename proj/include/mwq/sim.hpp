#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mwq/parallel.hpp"
#include "mwq/policy.hpp"
#include "mwq/stability.hpp"

namespace mwq {

enum class PolicyKind { Mwq, Compensated, ConstantPower, Oracle, Tdm };

const char* policy_name(PolicyKind k);
PolicyKind policy_from_name(const std::string& name);

struct SimConfig {
  Topology topo = Topology::default_mesh();
  ChannelModel channel;
  ArrivalModel arrivals;
  PolicyKind policy = PolicyKind::Mwq;
  PolicyConfig policy_cfg;
  double horizon = 60.0;  // simulated seconds
  double warmup = 5.0;    // excluded from averages
  std::uint64_t seed = 1;
  bool track_equilibrium = false;  // solve the per-slot optimum for p* logging
  bool emit_timeseries = false;
  int decimate = 100;  // every k-th slot lands in the time series
  double p_const = std::numeric_limits<double>::quiet_NaN();  // NaN: calibrate
  bool packet_tagging = false;  // debug sojourn measurement

  void validate() const;
};

struct RunSummary {
  std::vector<double> avg_queue;
  double worst_avg_queue = 0.0;
  std::vector<double> avg_delay;  // q_bar/lambda; NaN where lambda == 0
  std::vector<double> avg_power;
  std::vector<int> tx_nodes;
  std::vector<double> node_power;     // linear mean over the node's links
  std::vector<double> node_power_db;  // 10*log10 of the above
  double mean_node_power = 0.0;
  double mean_node_power_db = std::numeric_limits<double>::quiet_NaN();
  double avg_tracking_error = std::numeric_limits<double>::quiet_NaN();
  long slot_count = 0;
  long measured_slots = 0;
  long fallback_count = 0;
  double p_const_used = std::numeric_limits<double>::quiet_NaN();
};

struct TimeSeries {
  int link_count = 0;
  std::vector<double> t;
  std::vector<std::vector<double>> q;      // per row, length L
  std::vector<std::vector<double>> p;
  std::vector<std::vector<double>> pstar;  // NaN-filled when not tracked
  std::vector<double> err;
};

struct TaggingStats {
  std::vector<double> mean_sojourn;  // seconds, NaN when no packet departed
  std::vector<long> departed;
};

struct EpisodeResult {
  RunSummary summary;
  std::optional<TimeSeries> series;
  std::optional<TaggingStats> tagging;
};

/// Runs one seeded episode. Each slot: channel step, arrivals, policy update
/// on the fresh (h, q), SIC rates for the chosen powers, queue update, and
/// (when tracked) the per-slot optimum for the tracking error.
EpisodeResult run_episode(const SimConfig& cfg);

struct FadingCell {
  std::string policy;
  double a_A = 0.0;
  std::uint64_t seed = 0;
  double tracking_error = std::numeric_limits<double>::quiet_NaN();
  double avg_delay = std::numeric_limits<double>::quiet_NaN();
  double avg_power = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  std::string error;
};

struct FadingAggregate {
  std::string policy;
  double a_A = 0.0;
  int n = 0;
  double mean_error = 0.0, stderr_error = 0.0;
  double mean_delay = 0.0, mean_power = 0.0;
};

struct FadingSweep {
  std::vector<FadingCell> cells;
  std::vector<FadingAggregate> aggregates;
  bool any_failed = false;
};

/// Tracking error versus fading rate. Equilibrium tracking is forced on.
/// Cells run independently (possibly in parallel) and are assembled in
/// (policy, grid, seed) order.
FadingSweep sweep_fading(const SimConfig& base, const std::vector<double>& a_grid,
                         const std::vector<PolicyKind>& policies,
                         const std::vector<std::uint64_t>& seeds,
                         Exec exec = Exec::Parallel);

struct TradeoffCell {
  std::string policy;
  double V = 0.0;
  std::uint64_t seed = 0;
  double avg_delay = std::numeric_limits<double>::quiet_NaN();
  double avg_power = std::numeric_limits<double>::quiet_NaN();     // linear
  double avg_power_db = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  std::string error;
};

struct TradeoffAggregate {
  std::string policy;
  double V = 0.0;
  int n = 0;
  double mean_delay = 0.0, stderr_delay = 0.0;
  double mean_power = 0.0;     // linear
  double mean_power_db = 0.0;  // 10*log10(mean linear)
};

struct TradeoffSweep {
  std::vector<TradeoffCell> cells;
  std::vector<TradeoffAggregate> aggregates;
  bool any_failed = false;
};

/// Delay/power tradeoff versus the weight V.
TradeoffSweep sweep_tradeoff(const SimConfig& base,
                             const std::vector<double>& v_grid,
                             const std::vector<PolicyKind>& policies,
                             const std::vector<std::uint64_t>& seeds,
                             Exec exec = Exec::Parallel);

}  // namespace mwq
