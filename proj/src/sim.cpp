#include "mwq/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace mwq {

const char* policy_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::Mwq: return "mwq";
    case PolicyKind::Compensated: return "compensated";
    case PolicyKind::ConstantPower: return "constant";
    case PolicyKind::Oracle: return "oracle";
    case PolicyKind::Tdm: return "tdm";
  }
  return "?";
}

PolicyKind policy_from_name(const std::string& name) {
  if (name == "mwq") return PolicyKind::Mwq;
  if (name == "compensated") return PolicyKind::Compensated;
  if (name == "constant") return PolicyKind::ConstantPower;
  if (name == "oracle") return PolicyKind::Oracle;
  if (name == "tdm") return PolicyKind::Tdm;
  throw std::invalid_argument("unknown policy: " + name);
}

void SimConfig::validate() const {
  channel.validate(topo.link_count());
  arrivals.validate(topo.link_count());
  policy_cfg.validate();
  if (!(horizon >= 0.0) || !(warmup >= 0.0) || warmup > horizon)
    throw std::invalid_argument("run: need horizon >= warmup >= 0");
  if (decimate < 1) throw std::invalid_argument("run: decimate must be >= 1");
}

namespace {

struct KahanSum {
  double s = 0.0, c = 0.0;
  void add(double x) {
    double y = x - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
};

/// FIFO sojourn bookkeeping for the fluid queue: packet j departs once the
/// cumulative drained volume passes j.
struct LinkTagger {
  std::deque<double> arrival_time;
  double drained = 0.0;
  long next_index = 0;  // packets fully departed so far
  KahanSum sojourn;
  long departed = 0;

  void on_slot(double drain_amount, long arrivals, double t_end, double warmup) {
    drained += drain_amount;
    while (!arrival_time.empty() &&
           drained >= static_cast<double>(next_index) + 1.0) {
      double at = arrival_time.front();
      arrival_time.pop_front();
      ++next_index;
      if (at >= warmup) {
        sojourn.add(t_end - at);
        ++departed;
      }
    }
    for (long i = 0; i < arrivals; ++i) arrival_time.push_back(t_end);
  }
};

double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

EpisodeResult run_episode(const SimConfig& cfg) {
  cfg.validate();
  const Topology& topo = cfg.topo;
  const int L = topo.link_count();
  const double tau = cfg.channel.tau;
  const long slots = std::llround(cfg.horizon / tau);
  const long warm_slots = std::llround(cfg.warmup / tau);

  double p_const_used = nan_value();
  if (cfg.policy == PolicyKind::ConstantPower) {
    p_const_used = cfg.p_const;
    if (!std::isfinite(p_const_used)) {
      // calibrate against the per-slot optimum at the same weight V
      SimConfig probe = cfg;
      probe.policy = PolicyKind::Oracle;
      probe.emit_timeseries = false;
      probe.packet_tagging = false;
      probe.track_equilibrium = false;
      RunSummary ref = run_episode(probe).summary;
      double mean = 0.0;
      for (double v : ref.avg_power) mean += v;
      p_const_used = L > 0 ? mean / L : 0.0;
    }
  }

  RngStreams rng(cfg.seed, L);
  RandomStream init_stream = RngStreams::derive(cfg.seed, 2, 0);
  ChannelState h = stationary_channel_sample(cfg.channel, L, init_stream);
  QueueState q;
  q.q.assign(L, 0.0);

  PowerAllocation p0{std::vector<double>(L, 0.0), cfg.policy_cfg.p_max};
  if (cfg.policy == PolicyKind::ConstantPower)
    p0 = constant_power_policy(cfg.policy_cfg, p_const_used, L);
  PolicyState state = make_policy_state(p0, h, q);

  LagrangianEvaluator ev(topo);
  detail::OracleScratch oracle_ws;
  std::vector<double> mu(L), gains(L);
  std::optional<PowerAllocation> warm;

  const bool tracked = cfg.track_equilibrium || cfg.policy == PolicyKind::Oracle;

  std::vector<KahanSum> q_sum(L), p_sum(L);
  KahanSum err_sum;
  long measured = 0;
  long fallbacks = 0;

  std::optional<TimeSeries> series;
  if (cfg.emit_timeseries) {
    series.emplace();
    series->link_count = L;
  }
  std::vector<LinkTagger> taggers;
  if (cfg.packet_tagging) taggers.resize(L);

  for (long k = 0; k < slots; ++k) {
    h = channel_step(h, cfg.channel, rng);
    std::vector<long> arrivals = arrivals_step(cfg.arrivals, tau, rng);

    std::optional<EquilibriumResult> eq;
    auto solve_optimum = [&]() {
      const std::vector<double>& gq = q.q;
      gains = h.gains();
      eq = detail::solve_equilibrium(ev, gains, gq, cfg.policy_cfg,
                                     warm ? warm->p.data() : nullptr, oracle_ws);
      warm = eq->p;
    };

    switch (cfg.policy) {
      case PolicyKind::Mwq:
        mwq_gradient_step(state, h, q, topo, cfg.policy_cfg, tau);
        break;
      case PolicyKind::Compensated:
        fallbacks += mwq_compensated_step(state, h, q, topo, cfg.policy_cfg, tau)
                         ? 1
                         : 0;
        break;
      case PolicyKind::ConstantPower:
        break;  // power fixed at construction
      case PolicyKind::Oracle:
        solve_optimum();
        state.p = eq->p;
        state.prev_h = h;
        state.prev_q = q;
        break;
      case PolicyKind::Tdm: {
        TdmDecision td = tdm_policy(h, q, topo, cfg.policy_cfg);
        state.p = td.p;
        state.prev_h = h;
        state.prev_q = q;
        break;
      }
    }

    double err = nan_value();
    if (tracked) {
      if (!eq) solve_optimum();
      set_equilibrium(state, *eq);
      err = tracking_error(state);
    }

    gains = h.gains();
    ev.rates(state.p.p, gains, q.q, mu);
    QueueState q_next = queue_step(q, mu, tau, arrivals);

    if (cfg.packet_tagging) {
      double t_end = static_cast<double>(k + 1) * tau;
      for (int l = 0; l < L; ++l) {
        double drain = std::min(q.q[l], mu[l] * tau);
        taggers[l].on_slot(drain, arrivals[l], t_end, cfg.warmup);
      }
    }
    q = std::move(q_next);

    if (k >= warm_slots) {
      ++measured;
      for (int l = 0; l < L; ++l) {
        q_sum[l].add(q.q[l]);
        p_sum[l].add(state.p.p[l]);
      }
      if (tracked) err_sum.add(err);
    }
    if (series && k % cfg.decimate == 0) {
      series->t.push_back(static_cast<double>(k + 1) * tau);
      series->q.push_back(q.q);
      series->p.push_back(state.p.p);
      if (tracked && state.p_star)
        series->pstar.push_back(state.p_star->p);
      else
        series->pstar.push_back(std::vector<double>(L, nan_value()));
      series->err.push_back(err);
    }
  }

  RunSummary s;
  s.slot_count = slots;
  s.measured_slots = measured;
  s.fallback_count = fallbacks;
  s.p_const_used = p_const_used;
  s.avg_queue.resize(L);
  s.avg_delay.resize(L);
  s.avg_power.resize(L);
  const double inv = measured > 0 ? 1.0 / static_cast<double>(measured) : 0.0;
  for (int l = 0; l < L; ++l) {
    s.avg_queue[l] = q_sum[l].s * inv;
    s.avg_power[l] = p_sum[l].s * inv;
    s.avg_delay[l] = cfg.arrivals.lambda[l] > 0.0
                         ? s.avg_queue[l] / cfg.arrivals.lambda[l]
                         : nan_value();
    s.worst_avg_queue = std::max(s.worst_avg_queue, s.avg_queue[l]);
  }
  s.tx_nodes = topo.transmitters();
  for (int node : s.tx_nodes) {
    double sum = 0.0;
    int cnt = 0;
    for (const Link& link : topo.links()) {
      if (link.tx == node) {
        sum += s.avg_power[link.id];
        ++cnt;
      }
    }
    double mean = cnt > 0 ? sum / cnt : 0.0;
    s.node_power.push_back(mean);
    s.node_power_db.push_back(mean > 0.0 ? 10.0 * std::log10(mean) : nan_value());
  }
  if (!s.node_power.empty()) {
    double m = 0.0;
    for (double v : s.node_power) m += v;
    s.mean_node_power = m / static_cast<double>(s.node_power.size());
    s.mean_node_power_db = s.mean_node_power > 0.0
                               ? 10.0 * std::log10(s.mean_node_power)
                               : nan_value();
  }
  if (tracked && measured > 0) s.avg_tracking_error = err_sum.s * inv;

  EpisodeResult out;
  out.summary = std::move(s);
  out.series = std::move(series);
  if (cfg.packet_tagging) {
    TaggingStats stats;
    stats.mean_sojourn.resize(L);
    stats.departed.resize(L);
    for (int l = 0; l < L; ++l) {
      stats.departed[l] = taggers[l].departed;
      stats.mean_sojourn[l] =
          taggers[l].departed > 0
              ? taggers[l].sojourn.s / static_cast<double>(taggers[l].departed)
              : nan_value();
    }
    out.tagging = std::move(stats);
  }
  return out;
}

namespace {

double mean_finite(const std::vector<double>& v) {
  double s = 0.0;
  int n = 0;
  for (double x : v) {
    if (std::isfinite(x)) {
      s += x;
      ++n;
    }
  }
  return n > 0 ? s / n : nan_value();
}

struct MeanStderr {
  double mean = 0.0, se = 0.0;
  int n = 0;
};

MeanStderr mean_stderr(const std::vector<double>& v) {
  MeanStderr m;
  m.n = static_cast<int>(v.size());
  if (m.n == 0) return m;
  double s = 0.0;
  for (double x : v) s += x;
  m.mean = s / m.n;
  if (m.n > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.se = std::sqrt(ss / (m.n - 1) / m.n);
  }
  return m;
}

}  // namespace

FadingSweep sweep_fading(const SimConfig& base, const std::vector<double>& a_grid,
                         const std::vector<PolicyKind>& policies,
                         const std::vector<std::uint64_t>& seeds, Exec exec) {
  if (a_grid.empty() || policies.empty() || seeds.empty())
    throw std::invalid_argument("sweep_fading: empty grid");
  const int P = static_cast<int>(policies.size());
  const int A = static_cast<int>(a_grid.size());
  const int S = static_cast<int>(seeds.size());
  FadingSweep sweep;
  sweep.cells.resize(static_cast<std::size_t>(P) * A * S);

  for_each_index(P * A * S, exec, [&](int idx) {
    int pi = idx / (A * S);
    int ai = (idx / S) % A;
    int si = idx % S;
    FadingCell& cell = sweep.cells[idx];
    cell.policy = policy_name(policies[pi]);
    cell.a_A = a_grid[ai];
    cell.seed = seeds[si];
    try {
      SimConfig cfg = base;
      cfg.policy = policies[pi];
      cfg.channel.a.assign(cfg.topo.link_count(), a_grid[ai]);
      cfg.seed = seeds[si];
      cfg.track_equilibrium = true;
      cfg.emit_timeseries = false;
      RunSummary r = run_episode(cfg).summary;
      cell.tracking_error = r.avg_tracking_error;
      cell.avg_delay = mean_finite(r.avg_delay);
      cell.avg_power = r.mean_node_power;
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.error = e.what();
    }
  });

  for (int pi = 0; pi < P; ++pi) {
    for (int ai = 0; ai < A; ++ai) {
      std::vector<double> errs, delays, powers;
      for (int si = 0; si < S; ++si) {
        const FadingCell& c =
            sweep.cells[(static_cast<std::size_t>(pi) * A + ai) * S + si];
        if (c.failed) {
          sweep.any_failed = true;
          continue;
        }
        errs.push_back(c.tracking_error);
        delays.push_back(c.avg_delay);
        powers.push_back(c.avg_power);
      }
      FadingAggregate agg;
      agg.policy = policy_name(policies[pi]);
      agg.a_A = a_grid[ai];
      MeanStderr e = mean_stderr(errs);
      agg.n = e.n;
      agg.mean_error = e.mean;
      agg.stderr_error = e.se;
      agg.mean_delay = mean_stderr(delays).mean;
      agg.mean_power = mean_stderr(powers).mean;
      sweep.aggregates.push_back(agg);
    }
  }
  return sweep;
}

TradeoffSweep sweep_tradeoff(const SimConfig& base,
                             const std::vector<double>& v_grid,
                             const std::vector<PolicyKind>& policies,
                             const std::vector<std::uint64_t>& seeds,
                             Exec exec) {
  if (v_grid.empty() || policies.empty() || seeds.empty())
    throw std::invalid_argument("sweep_tradeoff: empty grid");
  for (double v : v_grid)
    if (!(v > 0.0)) throw std::invalid_argument("sweep_tradeoff: V must be > 0");
  const int P = static_cast<int>(policies.size());
  const int G = static_cast<int>(v_grid.size());
  const int S = static_cast<int>(seeds.size());
  TradeoffSweep sweep;
  sweep.cells.resize(static_cast<std::size_t>(P) * G * S);

  for_each_index(P * G * S, exec, [&](int idx) {
    int pi = idx / (G * S);
    int gi = (idx / S) % G;
    int si = idx % S;
    TradeoffCell& cell = sweep.cells[idx];
    cell.policy = policy_name(policies[pi]);
    cell.V = v_grid[gi];
    cell.seed = seeds[si];
    try {
      SimConfig cfg = base;
      cfg.policy = policies[pi];
      cfg.policy_cfg.V = v_grid[gi];
      cfg.seed = seeds[si];
      cfg.emit_timeseries = false;
      RunSummary r = run_episode(cfg).summary;
      cell.avg_delay = mean_finite(r.avg_delay);
      cell.avg_power = r.mean_node_power;
      cell.avg_power_db = r.mean_node_power_db;
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.error = e.what();
    }
  });

  for (int pi = 0; pi < P; ++pi) {
    for (int gi = 0; gi < G; ++gi) {
      std::vector<double> delays, powers;
      for (int si = 0; si < S; ++si) {
        const TradeoffCell& c =
            sweep.cells[(static_cast<std::size_t>(pi) * G + gi) * S + si];
        if (c.failed) {
          sweep.any_failed = true;
          continue;
        }
        delays.push_back(c.avg_delay);
        powers.push_back(c.avg_power);
      }
      TradeoffAggregate agg;
      agg.policy = policy_name(policies[pi]);
      agg.V = v_grid[gi];
      MeanStderr d = mean_stderr(delays);
      agg.n = d.n;
      agg.mean_delay = d.mean;
      agg.stderr_delay = d.se;
      agg.mean_power = mean_stderr(powers).mean;
      agg.mean_power_db =
          agg.mean_power > 0.0 ? 10.0 * std::log10(agg.mean_power) : nan_value();
      sweep.aggregates.push_back(agg);
    }
  }
  return sweep;
}

}  // namespace mwq
