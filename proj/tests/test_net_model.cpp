#include "doctest.h"

#include <cmath>

#include "mwq/net_model.hpp"

using namespace mwq;

TEST_CASE("topology groups links by receiver") {
  Topology t = Topology::default_mesh();
  CHECK(t.node_count() == 5);
  CHECK(t.link_count() == 6);
  CHECK(t.links_to(2) == std::vector<int>{0, 1, 4});
  CHECK(t.links_to(3) == std::vector<int>{2, 3, 5});
  CHECK(t.receivers() == std::vector<int>{2, 3});

  // every link appears in exactly one receiver group
  std::vector<int> seen(t.link_count(), 0);
  for (int n = 0; n < t.node_count(); ++n)
    for (int l : t.links_to(n)) seen[l]++;
  for (int c : seen) CHECK(c == 1);
}

TEST_CASE("topology rejects malformed link sets") {
  CHECK_THROWS_AS(Topology(3, {{0, 0, 1}, {0, 1, 2}}), model_error);
  CHECK_THROWS_AS(Topology(3, {{0, 1, 1}}), model_error);
  CHECK_THROWS_AS(Topology(2, {{0, 0, 5}}), model_error);
}

TEST_CASE("channel step: pure drift with zero noise") {
  ChannelModel m;
  m.a = {0.5};
  m.h0 = 0.01;
  m.tau = 0.01;
  ChannelState s{{{1.0, 0.0}}};
  std::vector<std::complex<double>> noise{{0.0, 0.0}};
  ChannelState next = channel_step(s, m, noise);
  CHECK(next.h[0].real() == doctest::Approx(0.9975).epsilon(1e-12));
  CHECK(next.h[0].imag() == 0.0);
}

TEST_CASE("channel step: zero rate freezes the process") {
  ChannelModel m;
  m.a = {0.0, 0.0};
  m.h0 = 0.05;
  m.tau = 0.3;
  ChannelState s{{{0.7, -0.2}, {1.1, 0.4}}};
  std::vector<std::complex<double>> noise{{1.3, -0.8}, {0.2, 2.0}};
  ChannelState next = channel_step(s, m, noise);
  CHECK(next.h[0] == s.h[0]);
  CHECK(next.h[1] == s.h[1]);
}

TEST_CASE("channel step: radial reflection onto the floor") {
  ChannelModel m;
  m.a = {1.0};
  m.h0 = 0.1;
  m.tau = 1.0;  // drift factor 1 - a*tau/2 = 0.5
  ChannelState s{{{0.1, 0.0}}};
  std::vector<std::complex<double>> noise{{0.0, 0.0}};
  ChannelState next = channel_step(s, m, noise);  // raw value 0.05 + 0i
  CHECK(next.h[0].real() == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(next.h[0].imag() == 0.0);
  CHECK(std::abs(next.h[0]) >= m.h0);

  m.a = {2.0};  // drift factor exactly 0: raw value is the origin
  ChannelState z = channel_step(s, m, noise);
  CHECK(z.h[0] == std::complex<double>{0.1, 0.0});
}

TEST_CASE("channel step rejects non-finite input") {
  ChannelModel m;
  m.a = {1.0};
  m.h0 = 0.05;
  m.tau = 1e-3;
  ChannelState s{{{1.0, 0.0}}};
  std::vector<std::complex<double>> bad{{std::nan(""), 0.0}};
  CHECK_THROWS_AS(channel_step(s, m, bad), model_error);
  ChannelState bad_state{{{1.0, std::numeric_limits<double>::infinity()}}};
  std::vector<std::complex<double>> noise{{0.0, 0.0}};
  CHECK_THROWS_AS(channel_step(bad_state, m, noise), model_error);
}

TEST_CASE("channel reflection invariant and determinism over a run") {
  ChannelModel m;
  m.a = {200.0, 200.0, 200.0};
  m.h0 = 0.05;
  m.tau = 1e-3;
  RngStreams rng_a(99, 3), rng_b(99, 3);
  RandomStream init = RngStreams::derive(99, 2, 0);
  ChannelState a = stationary_channel_sample(m, 3, init);
  ChannelState b = a;
  for (int k = 0; k < 500; ++k) {
    a = channel_step(a, m, rng_a);
    b = channel_step(b, m, rng_b);
    for (int l = 0; l < 3; ++l) {
      CHECK(std::abs(a.h[l]) >= m.h0);
      CHECK(a.h[l] == b.h[l]);
    }
  }
}

TEST_CASE("arrivals: zero intensity gives zero counts") {
  ArrivalModel am;
  am.lambda = {0.0, 0.0};
  RngStreams rng(7, 2);
  for (int k = 0; k < 100; ++k) {
    std::vector<long> counts = arrivals_step(am, 1e-3, rng);
    CHECK(counts[0] == 0);
    CHECK(counts[1] == 0);
  }
}

TEST_CASE("arrivals: sample mean tracks lambda*tau") {
  ArrivalModel am;
  am.lambda = {20.0};
  RngStreams rng(11, 1);
  double sum = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) sum += arrivals_step(am, 1e-3, rng)[0];
  double mean = sum / n;
  CHECK(mean == doctest::Approx(0.02).epsilon(0.05));
}

TEST_CASE("queue step applies departures before arrivals") {
  QueueState q{{5.0, 0.001, 0.0}};
  std::vector<double> mu{2.0, 10.0, 0.0};
  std::vector<long> arrivals{1, 0, 3};
  QueueState next = queue_step(q, mu, 1.0, arrivals);
  CHECK(next.q[0] == doctest::Approx(4.0));
  CHECK(next.q[1] == 0.0);
  CHECK(next.q[2] == 3.0);
}

TEST_CASE("queue stays nonnegative for any drain") {
  RandomStream s = RngStreams::derive(5, 3, 0);
  QueueState q{{0.5, 2.0, 0.0, 7.0}};
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> mu(4);
    std::vector<long> arr(4);
    for (int l = 0; l < 4; ++l) {
      mu[l] = 30.0 * s.uniform01();
      arr[l] = s.uniform01() < 0.2 ? 1 : 0;
    }
    q = queue_step(q, mu, 1.0, arr);
    for (double v : q.q) CHECK(v >= 0.0);
  }
}
