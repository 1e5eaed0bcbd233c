#include "doctest.h"

#include <cstdlib>
#include <numeric>
#include <vector>

#include "mwq/commands.hpp"
#include "mwq/parallel.hpp"
#include "mwq/stability.hpp"

using namespace mwq;

TEST_CASE("indexed loop: serial and parallel fill identical slots") {
  const int n = 1000;
  std::vector<double> serial(n), parallel(n);
  for_each_index(n, Exec::Serial, [&](int i) { serial[i] = std::sqrt(i) * 3.5; });
  for_each_index(n, Exec::Parallel,
                 [&](int i) { parallel[i] = std::sqrt(i) * 3.5; });
  CHECK(serial == parallel);
}

TEST_CASE("thread cap respects the environment variable") {
  CHECK(max_threads() >= 1);
  setenv("MWQ_SIM_THREADS", "1", 1);
  CHECK(max_threads() == 1);
  unsetenv("MWQ_SIM_THREADS");
}

TEST_CASE("monte carlo expectations agree bit-for-bit across exec policies") {
  Topology topo = Topology::single_receiver(3);
  ChannelModel chan;
  chan.a.assign(3, 10.0);
  chan.h0 = 0.5;
  chan.tau = 1e-3;
  PolicyConfig pcfg;
  pcfg.V = 1.0;
  pcfg.kappa = 500.0;
  pcfg.p_max = 8.0;
  StationarySamplingConfig cfg;
  cfg.sample_count = 300;
  std::vector<std::pair<double, double>> scen{{0.1, 0.3}};
  auto a = estimate_stationary_expectations(chan, topo, pcfg, 1.0, scen, cfg, 9,
                                            Exec::Serial);
  auto b = estimate_stationary_expectations(chan, topo, pcfg, 1.0, scen, cfg, 9,
                                            Exec::Parallel);
  CHECK(a.sigma_bar.mean == b.sigma_bar.mean);
  CHECK(a.sigma_bar.ci_half == b.sigma_bar.ci_half);
  CHECK(a.alpha_bar0.mean == b.alpha_bar0.mean);
  CHECK(a.scenarios[0].g_bar.mean == b.scenarios[0].g_bar.mean);
  CHECK(a.scenarios[0].gamma_bar0.mean == b.scenarios[0].gamma_bar0.mean);
  CHECK(a.mean_S_min == b.mean_S_min);
}

TEST_CASE("fading sweep serializes identically across exec policies") {
  ExperimentSpec spec = default_spec();
  spec.sim.horizon = 0.2;
  spec.sim.warmup = 0.05;
  FadingSweep s = sweep_fading(spec.sim, {100.0, 200.0},
                               {PolicyKind::Mwq, PolicyKind::Oracle}, {1, 2},
                               Exec::Serial);
  FadingSweep p = sweep_fading(spec.sim, {100.0, 200.0},
                               {PolicyKind::Mwq, PolicyKind::Oracle}, {1, 2},
                               Exec::Parallel);
  CHECK(fading_cells_csv(s) == fading_cells_csv(p));
  CHECK(fading_agg_csv(s) == fading_agg_csv(p));
}
