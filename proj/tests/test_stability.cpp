#include "doctest.h"

#include <cmath>

#include "mwq/stability.hpp"

using namespace mwq;

namespace {

ChannelState from_gains(const std::vector<double>& gains) {
  ChannelState h;
  for (double g : gains) h.h.push_back({std::sqrt(g), 0.0});
  return h;
}

}  // namespace

TEST_CASE("curvature floor: one-link closed form and scaling in q") {
  Topology topo = Topology::single_receiver(1);
  ChannelState h = from_gains({1.0});
  auto a1 = estimate_alpha(h, QueueState{{2.0}}, topo, 10.0);
  REQUIRE(a1.has_value());
  CHECK(*a1 == doctest::Approx(2.0 / 121.0).epsilon(1e-9));
  auto a2 = estimate_alpha(h, QueueState{{4.0}}, topo, 10.0);
  CHECK(*a2 == doctest::Approx(2.0 * *a1).epsilon(1e-9));
  CHECK_FALSE(estimate_alpha(h, QueueState{{0.5}}, topo, 10.0).has_value());
}

TEST_CASE("lipschitz estimate: affine single link is exact and monotone") {
  Topology topo = Topology::single_receiver(1);
  ChannelState h = from_gains({3.0});
  double b16 = estimate_beta(h, topo, 10.0, 16);
  double b64 = estimate_beta(h, topo, 10.0, 64);
  CHECK(b16 == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(b64 >= b16);
}

TEST_CASE("sensitivity sup estimate approaches 1/V on one link") {
  Topology topo = Topology::single_receiver(1);
  ChannelModel chan;
  chan.a = {1.0};
  chan.h0 = 0.3;
  PolicyConfig cfg;
  cfg.V = 2.0;
  cfg.p_max = 100.0;
  cfg.oracle_tol = 1e-12;
  RandomStream rng = RngStreams::derive(3, 9, 0);
  GammaEstimate g = estimate_gammas(topo, chan, cfg, 3.0, 8.0, 40, rng);
  CHECK(g.skipped == 0);
  CHECK(g.gamma_q == doctest::Approx(1.0 / cfg.V).epsilon(1e-3));
  CHECK(g.gamma_h > 0.0);
}

TEST_CASE("sensitivity sup estimates grow with the sample budget") {
  Topology topo = Topology::single_receiver(2);
  ChannelModel chan;
  chan.a = {1.0, 1.0};
  chan.h0 = 0.3;
  PolicyConfig cfg;
  cfg.V = 1.0;
  cfg.p_max = 200.0;
  cfg.oracle_tol = 1e-11;
  RandomStream small_rng = RngStreams::derive(4, 9, 0);
  RandomStream big_rng = RngStreams::derive(4, 9, 0);
  GammaEstimate small = estimate_gammas(topo, chan, cfg, 1.0, 6.0, 10, small_rng);
  GammaEstimate big = estimate_gammas(topo, chan, cfg, 1.0, 6.0, 30, big_rng);
  CHECK(big.gamma_q >= small.gamma_q);
  CHECK(big.gamma_h >= small.gamma_h);
}

TEST_CASE("queue bound arithmetic is exact") {
  StabilityConstants k;
  k.a_A = 1.0;
  k.gamma_h = 0.0;
  k.gamma_q = 0.0;
  k.lambda_max = 1.0;
  k.kappa = 500.0;
  k.gamma_bar0.mean = 0.125;
  k.sigma_bar.mean = 1.0;
  k.g_bar.mean = 0.0;
  CHECK(queue_bound(k, 4, 1.0) == 20.125);

  // the alpha term vanishes with gamma_q = 0 even without alpha_bar0
  CHECK(std::isnan(k.alpha_bar0.mean));

  StabilityConstants missing = k;
  missing.sigma_bar = McEstimate{};
  CHECK_THROWS_WITH_AS(queue_bound(missing, 4, 1.0),
                       doctest::Contains("sigma_bar"), std::invalid_argument);

  // gamma_q > 0 requires the curvature expectation
  StabilityConstants needs_alpha = k;
  needs_alpha.gamma_q = 0.5;
  CHECK_THROWS_WITH_AS(queue_bound(needs_alpha, 4, 1.0),
                       doctest::Contains("alpha_bar0"), std::invalid_argument);

  // the bound blows up as the fading rate vanishes
  StabilityConstants slow = k;
  slow.a_A = 1e-9;
  CHECK(queue_bound(slow, 4, 1.0) > 1e7);
}

TEST_CASE("drift bound: zero state reduces to the constant term") {
  Topology topo = Topology::single_receiver(4);
  ChannelModel chan;
  chan.a.assign(4, 1.0);
  chan.h0 = 0.5;
  ArrivalModel arr;
  arr.lambda.assign(4, 1.0);
  PolicyConfig pcfg;
  pcfg.V = 1.0;
  pcfg.kappa = 500.0;
  pcfg.p_max = 64.0;
  StabilityConstants k;
  k.gamma_q = 0.3;
  k.gamma_h = 0.2;
  k.kappa = 500.0;

  ChannelState h0;
  h0.h.assign(4, {0.0, 0.0});
  std::vector<double> pe(4, 0.0);
  double bound =
      lyapunov_drift_bound(pe, h0, QueueState{{0, 0, 0, 0}}, k, chan, arr, topo, pcfg);
  double c = 4.0 * (2.0 * 1.0 * (1.0 + 0.04) + 0.09 + 1.0);
  CHECK(bound == doctest::Approx(c).epsilon(1e-12));

  // monotone in gamma_q at a nonzero state
  ChannelState h = from_gains({1.0, 0.8, 1.2, 0.9});
  QueueState q{{4.0, 3.0, 2.0, 1.5}};
  std::vector<double> pe2{0.5, -0.2, 0.1, 0.3};
  double b1 = lyapunov_drift_bound(pe2, h, q, k, chan, arr, topo, pcfg);
  StabilityConstants k2 = k;
  k2.gamma_q = 0.6;
  double b2 = lyapunov_drift_bound(pe2, h, q, k2, chan, arr, topo, pcfg);
  CHECK(b2 > b1);
}

TEST_CASE("drift bound decreases in backlog past the service crossover") {
  Topology topo = Topology::single_receiver(1);
  ChannelModel chan;
  chan.a = {1.0};
  chan.h0 = 0.5;
  ArrivalModel arr;
  arr.lambda = {1.0};
  PolicyConfig pcfg;
  pcfg.V = 1.0;
  pcfg.kappa = 500.0;
  pcfg.p_max = 1e4;
  StabilityConstants k;
  k.gamma_q = 0.2;
  k.gamma_h = 0.1;
  k.kappa = 500.0;
  k.alpha = 1e-3;
  ChannelState h = from_gains({1.0});
  std::vector<double> pe{0.4};
  double prev = lyapunov_drift_bound(pe, h, QueueState{{4.0}}, k, chan, arr,
                                     topo, pcfg);
  for (double qv : {8.0, 16.0, 32.0, 64.0}) {
    double cur =
        lyapunov_drift_bound(pe, h, QueueState{{qv}}, k, chan, arr, topo, pcfg);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("stationary expectations: degenerate channel gives exact sigma") {
  Topology topo = Topology::single_receiver(3);
  ChannelModel chan;
  chan.a.assign(3, 0.0);  // frozen process
  chan.h0 = 0.5;
  chan.tau = 1e-3;
  PolicyConfig pcfg;
  pcfg.V = 1.0;
  pcfg.kappa = 500.0;
  pcfg.p_max = 32.0;
  StationarySamplingConfig cfg;
  cfg.sample_count = 50;
  cfg.evolve_steps = 8;
  ChannelState fixed = from_gains({2.0, 2.0, 2.0});
  cfg.fixed_initial = fixed;
  StationaryExpectations exp = estimate_stationary_expectations(
      chan, topo, pcfg, 1.0, {{0.0, 0.0}}, cfg, 5, Exec::Serial);
  CHECK(exp.sigma_bar.mean == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(exp.sigma_bar.ci_half == doctest::Approx(0.0));
  CHECK(exp.scenarios[0].gamma_bar0.mean == doctest::Approx(0.125));
}

TEST_CASE("confidence half-width shrinks like the square root of n") {
  Topology topo = Topology::single_receiver(2);
  ChannelModel chan;
  chan.a.assign(2, 5.0);
  chan.h0 = 0.4;
  chan.tau = 1e-3;
  PolicyConfig pcfg;
  pcfg.V = 1.0;
  pcfg.kappa = 500.0;
  pcfg.p_max = 16.0;
  StationarySamplingConfig small;
  small.sample_count = 250;
  StationarySamplingConfig big = small;
  big.sample_count = 4000;
  auto e_small = estimate_stationary_expectations(chan, topo, pcfg, 1.0,
                                                  {{0.0, 0.0}}, small, 11,
                                                  Exec::Serial);
  auto e_big = estimate_stationary_expectations(chan, topo, pcfg, 1.0,
                                                {{0.0, 0.0}}, big, 11,
                                                Exec::Serial);
  double ratio = e_big.sigma_bar.ci_half / e_small.sigma_bar.ci_half;
  CHECK(ratio < 0.5);
  CHECK(ratio > 0.1);
}

TEST_CASE("bound sweep: gamma monotonicity and grid edges") {
  Topology topo = Topology::single_receiver(4);
  ChannelModel chan;
  chan.a.assign(4, 1.0);
  chan.h0 = 0.5;
  chan.tau = 1e-3;
  StationarySamplingConfig cfg;
  cfg.sample_count = 150;
  std::vector<double> grid{0.01, 1.0, 100.0};
  std::vector<std::pair<double, double>> scen{{0.0, 0.0}, {0.1, 0.2}, {0.2, 0.4}};
  auto rows = bound_sweep(grid, scen, chan, topo, 1.0, 1.0, 500.0, cfg, 3,
                          Exec::Serial);
  REQUIRE(rows.size() == 9);
  for (std::size_t a = 0; a < grid.size(); ++a) {
    CHECK(rows[3 * a + 0].bound < rows[3 * a + 1].bound);
    CHECK(rows[3 * a + 1].bound < rows[3 * a + 2].bound);
  }
  for (std::size_t s = 0; s < scen.size(); ++s) {
    CHECK(rows[0 + s].bound > rows[3 + s].bound);   // small-a blowup
    CHECK(rows[6 + s].bound > rows[3 + s].bound);   // large-a growth
  }
}
