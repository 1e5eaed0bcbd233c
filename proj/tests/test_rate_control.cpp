#include "doctest.h"

#include <cmath>

#include "mwq/rate_control.hpp"

using namespace mwq;

namespace {

ChannelState from_gains(const std::vector<double>& gains) {
  ChannelState h;
  for (double g : gains) h.h.push_back({std::sqrt(g), 0.0});
  return h;
}

}  // namespace

TEST_CASE("single-link rate is the log formula") {
  Topology topo = Topology::single_receiver(1);
  PowerAllocation p{{3.0}, 10.0};
  ChannelState h = from_gains({1.0});
  QueueState q{{2.0}};
  RateAllocation mu = rate_allocation(p, h, q, topo);
  CHECK(mu.mu[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("zero power yields zero rates") {
  Topology topo = Topology::default_mesh();
  PowerAllocation p{std::vector<double>(6, 0.0), 10.0};
  ChannelState h = from_gains({1, 2, 3, 4, 5, 6});
  QueueState q{{1, 2, 3, 4, 5, 6}};
  RateAllocation mu = rate_allocation(p, h, q, topo);
  for (double m : mu.mu) CHECK(m == 0.0);
  CHECK(capacity_member(mu, p, h, topo, 1e-9));
}

TEST_CASE("two links at one receiver telescope exactly") {
  Topology topo = Topology::single_receiver(2);
  PowerAllocation p{{1.0, 1.0}, 10.0};
  ChannelState h = from_gains({1.0, 3.0});
  QueueState q{{5.0, 2.0}};
  RateAllocation mu = rate_allocation(p, h, q, topo);
  CHECK(mu.mu[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(mu.mu[1] == doctest::Approx(std::log(2.5)).epsilon(1e-12));
  CHECK(mu.mu[0] + mu.mu[1] ==
        doctest::Approx(std::log(5.0)).epsilon(1e-14));
  // the longer queue is decoded first in the SIC order listing
  CHECK(mu.sic_order[2] == std::vector<int>{0, 1});
}

TEST_CASE("decode order sorts by backlog with id tie-break") {
  Topology topo = Topology::single_receiver(3);
  QueueState q{{2.0, 5.0, 2.0}};
  auto order = sic_decode_order(q, topo);
  CHECK(order[3] == std::vector<int>{1, 0, 2});
}

TEST_CASE("greedy vertex is feasible, scaled rates are not") {
  RandomStream rng = RngStreams::derive(17, 0, 0);
  for (int t = 0; t < 50; ++t) {
    int L = 2 + static_cast<int>(rng.uniform01() * 4);
    Topology topo = Topology::single_receiver(L);
    std::vector<double> gains(L);
    for (double& g : gains) g = 0.2 + 3.0 * rng.uniform01();
    ChannelState h = from_gains(gains);
    QueueState q;
    for (int l = 0; l < L; ++l) q.q.push_back(10.0 * rng.uniform01());
    PowerAllocation p{{}, 10.0};
    for (int l = 0; l < L; ++l) p.p.push_back(0.5 + 8.0 * rng.uniform01());
    RateAllocation mu = rate_allocation(p, h, q, topo);
    CHECK(capacity_member(mu, p, h, topo, 1e-9));
    RateAllocation scaled = mu;
    for (double& m : scaled.mu) m *= 1.01;
    CHECK_FALSE(capacity_member(scaled, p, h, topo, 1e-9));
  }
}

TEST_CASE("oversized receiver groups are rejected") {
  Topology topo = Topology::single_receiver(21);
  PowerAllocation p{std::vector<double>(21, 1.0), 10.0};
  ChannelState h = from_gains(std::vector<double>(21, 1.0));
  QueueState q{std::vector<double>(21, 1.0)};
  RateAllocation mu;
  mu.mu.assign(21, 0.0);
  CHECK_THROWS_AS(capacity_member(mu, p, h, topo, 1e-9), capability_error);
}

TEST_CASE("objective value at simple points") {
  Topology topo = Topology::single_receiver(1);
  ChannelState h = from_gains({1.0});
  QueueState q{{2.0}};
  CHECK(lagrangian(PowerAllocation{{0.0}, 10.0}, h, q, topo, 1.0) == 0.0);
  CHECK(lagrangian(PowerAllocation{{1.0}, 10.0}, h, q, topo, 1.0) ==
        doctest::Approx(2 * std::log(2.0) - 1.0).epsilon(1e-12));
}

TEST_CASE("objective is invariant to relabeling links with their data") {
  Topology topo = Topology::single_receiver(2);
  ChannelState h = from_gains({1.0, 3.0});
  QueueState q{{5.0, 2.0}};
  PowerAllocation p{{1.0, 0.4}, 10.0};
  double v0 = lagrangian(p, h, q, topo, 1.3);
  std::swap(h.h[0], h.h[1]);
  std::swap(q.q[0], q.q[1]);
  std::swap(p.p[0], p.p[1]);
  double v1 = lagrangian(p, h, q, topo, 1.3);
  CHECK(v0 == v1);
}

TEST_CASE("gradient closed form on one link") {
  Topology topo = Topology::single_receiver(1);
  ChannelState h = from_gains({1.0});
  QueueState q{{2.0}};
  std::vector<double> g =
      grad_lagrangian(PowerAllocation{{1.0}, 10.0}, h, q, topo, 1.0);
  CHECK(g[0] == doctest::Approx(0.0).epsilon(1e-14));

  QueueState zero_q{{0.0}};
  std::vector<double> g0 =
      grad_lagrangian(PowerAllocation{{0.0}, 10.0}, h, zero_q, topo, 1.7);
  CHECK(g0[0] == -1.7);
}

TEST_CASE("gradient matches central differences on a mesh") {
  RandomStream rng = RngStreams::derive(23, 0, 0);
  Topology topo = Topology::default_mesh();
  const int L = 6;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> gains(L);
    for (double& g : gains) g = 0.3 + 2.0 * rng.uniform01();
    ChannelState h = from_gains(gains);
    QueueState q;
    for (int l = 0; l < L; ++l) q.q.push_back(0.5 + 8.0 * rng.uniform01());
    PowerAllocation p{{}, 10.0};
    for (int l = 0; l < L; ++l) p.p.push_back(0.3 + 5.0 * rng.uniform01());
    double V = 0.5 + rng.uniform01();
    std::vector<double> g = grad_lagrangian(p, h, q, topo, V);
    for (int l = 0; l < L; ++l) {
      PowerAllocation pp = p, pm = p;
      pp.p[l] += 1e-6;
      pm.p[l] -= 1e-6;
      double fd = (lagrangian(pp, h, q, topo, V) - lagrangian(pm, h, q, topo, V)) /
                  2e-6;
      CHECK(g[l] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("hessian closed form, symmetry and curvature sign") {
  Topology topo = Topology::single_receiver(1);
  ChannelState h = from_gains({1.0});
  QueueState q{{2.0}};
  Eigen::MatrixXd H =
      hessian_lagrangian(PowerAllocation{{1.0}, 10.0}, h, q, topo, 1.0);
  CHECK(H(0, 0) == doctest::Approx(-0.5).epsilon(1e-12));

  RandomStream rng = RngStreams::derive(31, 0, 0);
  Topology mesh = Topology::default_mesh();
  for (int t = 0; t < 20; ++t) {
    std::vector<double> gains(6);
    for (double& g : gains) g = 0.2 + 3.0 * rng.uniform01();
    ChannelState hm = from_gains(gains);
    QueueState qm;
    for (int l = 0; l < 6; ++l) qm.q.push_back(1.0 + 8.0 * rng.uniform01());
    PowerAllocation pm{{}, 10.0};
    for (int l = 0; l < 6; ++l) pm.p.push_back(9.0 * rng.uniform01());
    Eigen::MatrixXd Hm = hessian_lagrangian(pm, hm, qm, mesh, 1.0);
    CHECK((Hm - Hm.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Hm);
    CHECK(es.eigenvalues()(5) <= 1e-9);
  }
}

TEST_CASE("hessian matches differenced gradients") {
  Topology topo = Topology::single_receiver(3);
  ChannelState h = from_gains({0.8, 2.0, 1.4});
  QueueState q{{6.0, 3.5, 1.2}};
  PowerAllocation p{{1.2, 0.7, 2.5}, 10.0};
  const double V = 0.9;
  Eigen::MatrixXd H = hessian_lagrangian(p, h, q, topo, V);
  for (int m = 0; m < 3; ++m) {
    PowerAllocation pp = p, pm = p;
    pp.p[m] += 1e-6;
    pm.p[m] -= 1e-6;
    std::vector<double> gp = grad_lagrangian(pp, h, q, topo, V);
    std::vector<double> gm = grad_lagrangian(pm, h, q, topo, V);
    for (int l = 0; l < 3; ++l) {
      double fd = (gp[l] - gm[l]) / 2e-6;
      CHECK(H(l, m) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("gradient parameter jacobians match differences") {
  Topology topo = Topology::single_receiver(3);
  std::vector<double> gains{0.8, 2.0, 1.4};
  std::vector<double> qv{6.0, 3.5, 1.2};
  std::vector<double> pv{1.2, 0.7, 2.5};
  const double V = 0.9;
  LagrangianEvaluator ev(topo);
  Eigen::MatrixXd dGq, dGg;
  ev.grad_jacobians(pv, gains, qv, dGq, dGg);
  std::vector<double> gp(3), gm(3);
  for (int m = 0; m < 3; ++m) {
    auto qp = qv, qm2 = qv;
    qp[m] += 1e-6;
    qm2[m] -= 1e-6;
    ev.value_and_grad(pv, gains, qp, V, gp);
    ev.value_and_grad(pv, gains, qm2, V, gm);
    for (int l = 0; l < 3; ++l)
      CHECK(dGq(l, m) == doctest::Approx((gp[l] - gm[l]) / 2e-6).epsilon(1e-5));
    auto ggp = gains, ggm = gains;
    ggp[m] += 1e-6;
    ggm[m] -= 1e-6;
    ev.value_and_grad(pv, ggp, qv, V, gp);
    ev.value_and_grad(pv, ggm, qv, V, gm);
    for (int l = 0; l < 3; ++l)
      CHECK(dGg(l, m) == doctest::Approx((gp[l] - gm[l]) / 2e-6).epsilon(1e-5));
  }
}

TEST_CASE("box projection clamps and is idempotent") {
  PowerAllocation p = project_box({12.0, -1.0, 5.0}, 10.0);
  CHECK(p.p == std::vector<double>{10.0, 0.0, 5.0});
  PowerAllocation again = project_box(p.p, 10.0);
  CHECK(again.p == p.p);
}

TEST_CASE("literal power cap") {
  CHECK(literal_power_cap(4, 1.0, 0.5) == doctest::Approx(64.0));
  CHECK(literal_power_cap(1, 0.0, 0.1) == doctest::Approx(100.0));
}
