#include "doctest.h"

#include <cmath>

#include "mwq/policy.hpp"

using namespace mwq;

namespace {

ChannelState from_gains(const std::vector<double>& gains) {
  ChannelState h;
  for (double g : gains) h.h.push_back({std::sqrt(g), 0.0});
  return h;
}

PolicyConfig single_link_cfg() {
  PolicyConfig cfg;
  cfg.V = 1.0;
  cfg.kappa = 500.0;
  cfg.p_max = 50.0;
  cfg.oracle_tol = 1e-12;
  return cfg;
}

}  // namespace

TEST_CASE("ascent step: one-link arithmetic and fixed point") {
  Topology topo = Topology::single_receiver(1);
  ChannelState h = from_gains({1.0});
  QueueState q{{2.0}};
  PolicyConfig cfg = single_link_cfg();
  cfg.kappa = 0.5;  // kappa * tau = 0.5 with tau = 1

  PolicyState st = make_policy_state(PowerAllocation{{0.0}, cfg.p_max}, h, q);
  mwq_gradient_step(st, h, q, topo, cfg, 1.0);
  CHECK(st.p.p[0] == doctest::Approx(0.5).epsilon(1e-14));

  // gradient vanishes at p = 1, so the step keeps it there
  PolicyState fixed = make_policy_state(PowerAllocation{{1.0}, cfg.p_max}, h, q);
  mwq_gradient_step(fixed, h, q, topo, cfg, 1.0);
  CHECK(fixed.p.p[0] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("frozen-state ascent converges to the closed form") {
  Topology topo = Topology::single_receiver(1);
  ChannelState h = from_gains({1.0});
  QueueState q{{2.0}};
  PolicyConfig cfg = single_link_cfg();
  cfg.kappa = 0.5;
  PolicyState st = make_policy_state(PowerAllocation{{0.0}, cfg.p_max}, h, q);
  for (int k = 0; k < 200; ++k) mwq_gradient_step(st, h, q, topo, cfg, 1.0);
  CHECK(st.p.p[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("equilibrium solver: closed form, zero backlog, warm start") {
  Topology topo = Topology::single_receiver(1);
  PolicyConfig cfg = single_link_cfg();
  EquilibriumResult eq =
      equilibrium_oracle(from_gains({1.0}), QueueState{{2.0}}, topo, cfg);
  CHECK(eq.p.p[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(eq.kkt_residual < cfg.oracle_tol * 2.0);

  EquilibriumResult zero =
      equilibrium_oracle(from_gains({1.0}), QueueState{{0.0}}, topo, cfg);
  CHECK(zero.p.p[0] == 0.0);
  CHECK(zero.mult_lo[0] == doctest::Approx(1.0));  // gradient is -V at 0

  EquilibriumResult warm = equilibrium_oracle(from_gains({1.0}),
                                              QueueState{{2.0}}, topo, cfg, &eq.p);
  CHECK(warm.p.p[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(warm.iterations <= eq.iterations);
}

TEST_CASE("equilibrium solver reports its best iterate on failure") {
  Topology topo = Topology::single_receiver(2);
  PolicyConfig cfg = single_link_cfg();
  cfg.oracle_max_iters = 1;
  try {
    equilibrium_oracle(from_gains({1.0, 2.0}), QueueState{{4.0, 7.0}}, topo, cfg);
    FAIL("expected oracle_error");
  } catch (const oracle_error& e) {
    CHECK(e.best.p.p.size() == 2);
    CHECK(e.best.kkt_residual > 0.0);
  }
}

TEST_CASE("sensitivities: one-link closed forms") {
  Topology topo = Topology::single_receiver(1);
  PolicyConfig cfg = single_link_cfg();
  ChannelState h = from_gains({1.0});
  QueueState q{{2.0}};
  EquilibriumResult eq = equilibrium_oracle(h, q, topo, cfg);
  auto sens = kkt_sensitivities(eq.p, eq.mult_lo, eq.mult_hi, h, q, topo, cfg);
  REQUIRE(sens.has_value());
  // optimum p* = q/V - 1/|h|^2 moves 1/V per unit of backlog
  CHECK(sens->phi_q(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  // d(-1/(x^2+y^2))/dx = 2x at x=1, y=0
  CHECK(sens->phi_h(0, 0).real() == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(sens->phi_h(0, 0).imag() == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("sensitivities: pinned coordinate has a zero row") {
  Topology topo = Topology::single_receiver(2);
  PolicyConfig cfg = single_link_cfg();
  ChannelState h = from_gains({1.0, 1.0});
  QueueState q{{0.01, 5.0}};  // first link priced out, gradient strictly < 0
  EquilibriumResult eq = equilibrium_oracle(h, q, topo, cfg);
  REQUIRE(eq.p.p[0] == 0.0);
  REQUIRE(eq.mult_lo[0] > cfg.active_tol);
  auto sens = kkt_sensitivities(eq.p, eq.mult_lo, eq.mult_hi, h, q, topo, cfg);
  REQUIRE(sens.has_value());
  for (int m = 0; m < 2; ++m) {
    CHECK(sens->phi_q(0, m) == 0.0);
    CHECK(sens->phi_h(0, m) == std::complex<double>{0.0, 0.0});
  }
  CHECK(sens->phi_q(1, 1) != 0.0);
}

TEST_CASE("compensated step equals plain ascent under zero increments") {
  Topology topo = Topology::default_mesh();
  ChannelState h = from_gains({1.0, 0.5, 2.0, 1.5, 0.8, 1.2});
  QueueState q{{3.0, 1.0, 4.0, 2.0, 0.5, 6.0}};
  PolicyConfig cfg;
  cfg.p_max = 20.0;
  PowerAllocation p0{{0.5, 1.0, 0.0, 2.0, 3.0, 0.7}, cfg.p_max};
  PolicyState a = make_policy_state(p0, h, q);
  PolicyState b = make_policy_state(p0, h, q);
  mwq_gradient_step(a, h, q, topo, cfg, 1e-3);
  bool fallback = mwq_compensated_step(b, h, q, topo, cfg, 1e-3);
  CHECK_FALSE(fallback);
  for (int l = 0; l < 6; ++l) CHECK(a.p.p[l] == b.p.p[l]);
}

TEST_CASE("compensated step tracks a backlog jump exactly on one link") {
  Topology topo = Topology::single_receiver(1);
  PolicyConfig cfg = single_link_cfg();
  ChannelState h = from_gains({1.0});
  QueueState q_prev{{2.0}};
  QueueState q_new{{2.1}};
  // start on the optimum of the previous measurement: gradient term is zero
  PolicyState st = make_policy_state(PowerAllocation{{1.0}, cfg.p_max}, h, q_prev);
  bool fallback = mwq_compensated_step(st, h, q_new, topo, cfg, 1e-3);
  CHECK_FALSE(fallback);
  CHECK(st.p.p[0] == doctest::Approx(1.1).epsilon(1e-6));
  EquilibriumResult eq = equilibrium_oracle(h, q_new, topo, cfg);
  CHECK(st.p.p[0] == doctest::Approx(eq.p.p[0]).epsilon(1e-6));
  CHECK(st.prev_q.q[0] == 2.1);
}

TEST_CASE("constant power policy fills the vector and validates the level") {
  PolicyConfig cfg;
  cfg.p_max = 10.0;
  PowerAllocation p = constant_power_policy(cfg, 1.0, 6);
  CHECK(p.p == std::vector<double>(6, 1.0));
  PowerAllocation z = constant_power_policy(cfg, 0.0, 3);
  CHECK(z.p == std::vector<double>(3, 0.0));
  CHECK_THROWS_AS(constant_power_policy(cfg, 11.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(constant_power_policy(cfg, -0.5, 3), std::invalid_argument);
}

TEST_CASE("single-link selector follows the closed-form utilities") {
  Topology topo = Topology::single_receiver(2);
  PolicyConfig cfg;
  cfg.V = 1.0;
  cfg.p_max = 1e6;
  ChannelState h = from_gains({1.0, 4.0});
  QueueState q{{4.0, 2.0}};
  TdmDecision td = tdm_policy(h, q, topo, cfg);
  CHECK(td.selected_link == 0);
  CHECK(td.p.p[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(td.p.p[1] == 0.0);
  CHECK(td.mu.mu[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(td.mu.mu[1] == 0.0);
}

TEST_CASE("single-link selector degenerates gracefully") {
  Topology topo = Topology::single_receiver(2);
  PolicyConfig cfg;
  cfg.V = 5.0;
  cfg.p_max = 100.0;
  ChannelState h = from_gains({1.0, 2.0});
  QueueState q{{1.0, 2.0}};  // q*gain <= V on both links
  TdmDecision td = tdm_policy(h, q, topo, cfg);
  CHECK(td.p.p == std::vector<double>{0.0, 0.0});
  CHECK(td.mu.mu == std::vector<double>{0.0, 0.0});

  Topology one = Topology::single_receiver(1);
  PolicyConfig c1 = single_link_cfg();
  ChannelState h1 = from_gains({1.0});
  QueueState q1{{2.0}};
  TdmDecision td1 = tdm_policy(h1, q1, one, c1);
  EquilibriumResult eq = equilibrium_oracle(h1, q1, one, c1);
  CHECK(td1.p.p[0] == doctest::Approx(eq.p.p[0]).epsilon(1e-9));
}

TEST_CASE("tracking error is the max-norm gap") {
  Topology topo = Topology::single_receiver(2);
  PolicyState st = make_policy_state(PowerAllocation{{1.0, 2.0}, 10.0},
                                     from_gains({1.0, 1.0}), QueueState{{1, 1}});
  CHECK_THROWS_AS(tracking_error(st), std::logic_error);
  EquilibriumResult eq;
  eq.p = PowerAllocation{{1.5, 2.2}, 10.0};
  eq.mult_lo.assign(2, 0.0);
  eq.mult_hi.assign(2, 0.0);
  set_equilibrium(st, eq);
  CHECK(tracking_error(st) == doctest::Approx(0.5).epsilon(1e-15));
  st.p.p = st.p_star->p;
  set_equilibrium(st, eq);
  CHECK(tracking_error(st) == 0.0);
  // invariant under a common shift of iterate and target
  for (double& v : st.p.p) v += 0.75;
  for (double& v : st.p_star->p) v += 0.75;
  CHECK(tracking_error(st) == 0.0);
}
