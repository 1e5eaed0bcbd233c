// Times the OpenMP batch kernels against the serial reference path and
// verifies that both produce identical numbers.

#include <chrono>
#include <cstdio>

#include "mwq/commands.hpp"
#include "mwq/stability.hpp"

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

struct BenchResult {
  double serial_s;
  double parallel_s;
  bool identical;
};

BenchResult bench_expectations(int samples) {
  mwq::Topology topo = mwq::Topology::single_receiver(4);
  mwq::ChannelModel chan;
  chan.a.assign(4, 10.0);
  chan.h0 = 0.5;
  chan.tau = 1e-3;
  mwq::PolicyConfig pcfg;
  pcfg.V = 1.0;
  pcfg.kappa = 500.0;
  pcfg.p_max = mwq::literal_power_cap(4, 1.0, chan.h0);
  mwq::StationarySamplingConfig cfg;
  cfg.sample_count = samples;
  std::vector<std::pair<double, double>> scenarios{{0.1, 0.2}};

  auto t0 = std::chrono::steady_clock::now();
  auto serial = mwq::estimate_stationary_expectations(
      chan, topo, pcfg, 1.0, scenarios, cfg, 42, mwq::Exec::Serial);
  double ts = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  auto parallel = mwq::estimate_stationary_expectations(
      chan, topo, pcfg, 1.0, scenarios, cfg, 42, mwq::Exec::Parallel);
  double tp = seconds_since(t0);

  bool same = serial.sigma_bar.mean == parallel.sigma_bar.mean &&
              serial.alpha_bar0.mean == parallel.alpha_bar0.mean &&
              serial.scenarios[0].g_bar.mean == parallel.scenarios[0].g_bar.mean &&
              serial.scenarios[0].gamma_bar0.mean ==
                  parallel.scenarios[0].gamma_bar0.mean;
  return {ts, tp, same};
}

BenchResult bench_sweep(double horizon) {
  mwq::ExperimentSpec spec = mwq::default_spec();
  spec.sim.horizon = horizon;
  spec.sim.warmup = horizon / 10.0;
  std::vector<double> grid{100.0, 200.0};
  std::vector<mwq::PolicyKind> pols{mwq::PolicyKind::Mwq,
                                    mwq::PolicyKind::Compensated};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4};

  auto t0 = std::chrono::steady_clock::now();
  auto serial =
      mwq::sweep_fading(spec.sim, grid, pols, seeds, mwq::Exec::Serial);
  double ts = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  auto parallel =
      mwq::sweep_fading(spec.sim, grid, pols, seeds, mwq::Exec::Parallel);
  double tp = seconds_since(t0);

  bool same = mwq::fading_cells_csv(serial) == mwq::fading_cells_csv(parallel);
  return {ts, tp, same};
}

void report(const char* name, const BenchResult& r) {
  std::printf("%-24s serial %8.3f s   parallel %8.3f s   speedup %5.2fx   %s\n",
              name, r.serial_s, r.parallel_s,
              r.parallel_s > 0 ? r.serial_s / r.parallel_s : 0.0,
              r.identical ? "results identical" : "RESULTS DIFFER");
}

}  // namespace

int main(int argc, char** argv) {
  int samples = argc > 1 ? std::atoi(argv[1]) : 2000;
  double horizon = argc > 2 ? std::atof(argv[2]) : 5.0;
  std::printf("threads available: %d\n", mwq::max_threads());
  BenchResult mc = bench_expectations(samples);
  report("mc-expectations", mc);
  BenchResult sw = bench_sweep(horizon);
  report("fading-sweep", sw);
  return (mc.identical && sw.identical) ? 0 : 1;
}
