#include "mwq/validate.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "mwq/stability.hpp"

namespace mwq {

namespace {

bool bits_equal(double a, double b) {
  if (std::isnan(a) && std::isnan(b)) return true;
  return a == b;
}

bool vec_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!bits_equal(a[i], b[i])) return false;
  return true;
}

struct Instance {
  Topology topo;
  ChannelState h;
  QueueState q;
  PowerAllocation p;
};

Topology random_topology(RandomStream& rng, int max_links) {
  int L = 1 + static_cast<int>(rng.uniform01() * max_links);
  L = std::min(L, max_links);
  int N = 2 + static_cast<int>(rng.uniform01() * 4.0);
  std::vector<Link> links;
  for (int l = 0; l < L; ++l) {
    int rx = static_cast<int>(rng.uniform01() * N) % N;
    int tx = static_cast<int>(rng.uniform01() * N) % N;
    while (tx == rx) tx = (tx + 1) % N;
    links.push_back({l, tx, rx});
  }
  return Topology(N, std::move(links));
}

ChannelState random_channel(RandomStream& rng, int L, double h0 = 0.05) {
  ChannelModel m;
  m.a.assign(L, 0.0);
  m.h0 = h0;
  return stationary_channel_sample(m, L, rng);
}

QueueState random_queue(RandomStream& rng, int L, double lo, double hi) {
  QueueState q;
  q.q.resize(L);
  for (int l = 0; l < L; ++l) q.q[l] = lo + (hi - lo) * rng.uniform01();
  return q;
}

PowerAllocation random_power(RandomStream& rng, int L, double p_max) {
  std::vector<double> p(L);
  for (int l = 0; l < L; ++l) p[l] = p_max * rng.uniform01();
  return PowerAllocation{std::move(p), p_max};
}

double golden_max(const std::function<double(double)>& f, double lo, double hi) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && b - a > 1e-12 * (1.0 + hi); ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  double mid = 0.5 * (a + b);
  return std::max({f(mid), f(a), f(b)});
}

class Checker {
 public:
  Checker(const ExperimentSpec& spec, const ValidationOptions& opts)
      : spec_(spec), opts_(opts) {
    grad_ = opts.grad_override
                ? opts.grad_override
                : GradFn([](const PowerAllocation& p, const ChannelState& h,
                            const QueueState& q, const Topology& t, double V) {
                    return grad_lagrangian(p, h, q, t, V);
                  });
  }

  std::vector<CheckResult> run();

 private:
  RandomStream stream(std::uint64_t purpose) {
    return RngStreams::derive(opts_.seed, purpose, 0);
  }
  int scaled(int full, int quick) const { return opts_.quick ? quick : full; }

  void add(std::string name, bool pass, double measured, double threshold,
           std::string note = "") {
    results_.push_back(
        {std::move(name), pass, measured, threshold, std::move(note)});
  }

  void check_reflection_floor();
  void check_seed_reproducibility();
  void check_stationary_moment();
  void check_cross_independence();
  void check_arrival_moments();
  void check_queue_nonnegative();
  void check_telescoping();
  void check_vertex_feasibility();
  void check_gradient_consistency();
  void check_hessian();
  void check_projection();
  void check_relabel_invariance();
  void check_fixed_point();
  void check_static_convergence();
  void check_sensitivity_fd();
  void check_static_reduction();
  void check_tdm_optimality();
  void check_ascent_monotonicity();
  void check_contraction();
  void check_rate_gap_sandwich();
  void check_weighted_rate_bound();
  void check_pure_birth();
  void check_littles_law();
  void check_no_blowup();
  void check_sigma_jensen();

  const ExperimentSpec& spec_;
  const ValidationOptions& opts_;
  GradFn grad_;
  std::vector<CheckResult> results_;
};

void Checker::check_reflection_floor() {
  RandomStream rng = stream(1);
  const int L = 4;
  ChannelModel m;
  m.a.assign(L, 200.0);
  m.h0 = 0.2;
  m.tau = 1e-3;
  ChannelState h = stationary_channel_sample(m, L, rng);
  double min_mag = 1e300;
  std::vector<std::complex<double>> noise(L);
  const int steps = scaled(20000, 2000);
  for (int k = 0; k < steps; ++k) {
    for (int l = 0; l < L; ++l) noise[l] = rng.complex_normal_unit();
    h = channel_step(h, m, noise);
    for (int l = 0; l < L; ++l) min_mag = std::min(min_mag, std::abs(h.h[l]));
  }
  add("channel-reflection-floor", min_mag >= m.h0, min_mag, m.h0,
      "min |h| over the run vs the floor");
}

void Checker::check_seed_reproducibility() {
  SimConfig cfg = spec_.sim;
  cfg.horizon = opts_.quick ? 0.5 : 2.0;
  cfg.warmup = 0.1;
  cfg.track_equilibrium = true;
  cfg.emit_timeseries = false;
  RunSummary a = run_episode(cfg).summary;
  RunSummary b = run_episode(cfg).summary;
  bool same = summaries_identical(a, b);
  add("seed-reproducibility", same, same ? 0.0 : 1.0, 0.0,
      "two runs with one seed must agree exactly");
}

void Checker::check_stationary_moment() {
  RandomStream rng = stream(2);
  const int L = 6;
  ChannelModel m;
  m.a.assign(L, 1.0);
  m.h0 = 0.05;
  m.tau = 1e-3;
  ChannelState h = stationary_channel_sample(m, L, rng);
  std::vector<std::complex<double>> noise(L);
  const int steps = scaled(1000000, 100000);
  const int burn = steps / 10;
  const int batches = 50;
  const int batch_len = steps / batches;
  std::vector<double> batch_means;
  double acc = 0.0;
  long count = 0;
  for (int k = 0; k < burn + steps; ++k) {
    for (int l = 0; l < L; ++l) noise[l] = rng.complex_normal_unit();
    h = channel_step(h, m, noise);
    if (k < burn) continue;
    for (int l = 0; l < L; ++l) acc += std::norm(h.h[l]);
    count += L;
    if (count >= static_cast<long>(batch_len) * L) {
      batch_means.push_back(acc / count);
      acc = 0.0;
      count = 0;
    }
  }
  double mean = 0.0;
  for (double b : batch_means) mean += b;
  mean /= batch_means.size();
  double ss = 0.0;
  for (double b : batch_means) ss += (b - mean) * (b - mean);
  double se = std::sqrt(ss / (batch_means.size() - 1) / batch_means.size());
  double half = 2.5758 * se;
  add("channel-stationary-moment", std::abs(mean - 1.0) <= half,
      std::abs(mean - 1.0), half, "batch-means 99% interval around 1.0");
}

void Checker::check_cross_independence() {
  RandomStream rng = stream(3);
  const int L = 4;
  ChannelModel m;
  m.a.assign(L, 200.0);
  m.h0 = 0.05;
  m.tau = 1e-3;
  ChannelState h = stationary_channel_sample(m, L, rng);
  std::vector<std::complex<double>> noise(L);
  const int samples = scaled(2000, 400);
  const int spacing = 50;  // ~5 correlation times at a = 200
  std::vector<std::vector<double>> g(L);
  for (int s = 0; s < samples; ++s) {
    for (int k = 0; k < spacing; ++k) {
      for (int l = 0; l < L; ++l) noise[l] = rng.complex_normal_unit();
      h = channel_step(h, m, noise);
    }
    for (int l = 0; l < L; ++l) g[l].push_back(std::norm(h.h[l]));
  }
  auto corr = [&](int i, int j) {
    double mi = 0, mj = 0;
    for (int s = 0; s < samples; ++s) {
      mi += g[i][s];
      mj += g[j][s];
    }
    mi /= samples;
    mj /= samples;
    double cij = 0, cii = 0, cjj = 0;
    for (int s = 0; s < samples; ++s) {
      cij += (g[i][s] - mi) * (g[j][s] - mj);
      cii += (g[i][s] - mi) * (g[i][s] - mi);
      cjj += (g[j][s] - mj) * (g[j][s] - mj);
    }
    return cij / std::sqrt(cii * cjj);
  };
  double worst = 0.0;
  for (int i = 0; i < L; ++i)
    for (int j = i + 1; j < L; ++j) worst = std::max(worst, std::abs(corr(i, j)));
  double threshold = 3.5 / std::sqrt(static_cast<double>(samples));
  add("channel-cross-independence", worst <= threshold, worst, threshold,
      "max |corr| of per-link gains");
}

void Checker::check_arrival_moments() {
  const int n = scaled(1000000, 100000);
  ArrivalModel am;
  am.lambda = {20.0};
  RngStreams rng(opts_.seed ^ 0x5u, 1);
  const double mean_target = 20.0 * 1e-3;
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    double x = static_cast<double>(arrivals_step(am, 1e-3, rng)[0]);
    s1 += x;
    s2 += x * x;
    s3 += x * x * x;
    s4 += x * x * x * x;
  }
  double m1 = s1 / n;
  double m2 = s2 / n - m1 * m1;
  double mean_se = std::sqrt(m2 / n);
  double z_mean = std::abs(m1 - mean_target) / mean_se;
  // central fourth moment for the variance-of-variance estimate
  double c4 = s4 / n - 4 * m1 * (s3 / n) + 6 * m1 * m1 * (s2 / n) - 3 * m1 * m1 * m1 * m1;
  double var_se = std::sqrt(std::max(c4 - m2 * m2, 1e-30) / n);
  double z_var = std::abs(m2 - mean_target) / var_se;
  double worst = std::max(z_mean, z_var);
  add("arrival-moments", worst <= 2.5758, worst, 2.5758,
      "z-scores of Poisson mean and variance vs lambda*tau");
}

void Checker::check_queue_nonnegative() {
  RandomStream rng = stream(6);
  double min_q = 0.0;
  for (int t = 0; t < scaled(2000, 200); ++t) {
    int L = 1 + static_cast<int>(rng.uniform01() * 5);
    QueueState q = random_queue(rng, L, 0.0, 3.0);
    std::vector<double> mu(L);
    std::vector<long> arr(L);
    for (int l = 0; l < L; ++l) {
      mu[l] = 50.0 * rng.uniform01();
      arr[l] = static_cast<long>(rng.uniform01() * 3);
    }
    QueueState next = queue_step(q, mu, 1.0, arr);
    for (double v : next.q) min_q = std::min(min_q, v);
  }
  add("queue-nonnegative", min_q >= 0.0, min_q, 0.0,
      "backlogs stay nonnegative under aggressive drains");
}

void Checker::check_telescoping() {
  RandomStream rng = stream(7);
  double worst = 0.0;
  for (int t = 0; t < scaled(300, 50); ++t) {
    Topology topo = random_topology(rng, 6);
    int L = topo.link_count();
    ChannelState h = random_channel(rng, L);
    QueueState q = random_queue(rng, L, 0.0, 10.0);
    PowerAllocation p = random_power(rng, L, 10.0);
    RateAllocation mu = rate_allocation(p, h, q, topo);
    std::vector<double> gains = h.gains();
    for (int n : topo.receivers()) {
      double mu_sum = 0.0, gp = 0.0;
      for (int l : topo.links_to(n)) {
        mu_sum += mu.mu[l];
        gp += gains[l] * p.p[l];
      }
      worst = std::max(worst, std::abs(mu_sum - std::log1p(gp)));
    }
  }
  add("rate-telescoping", worst <= 1e-12, worst, 1e-12,
      "per-receiver rate sum vs the pooled log");
}

void Checker::check_vertex_feasibility() {
  RandomStream rng = stream(8);
  int failures = 0;
  const int trials = scaled(1000, 100);
  for (int t = 0; t < trials; ++t) {
    Topology topo = random_topology(rng, 6);
    int L = topo.link_count();
    ChannelState h = random_channel(rng, L);
    QueueState q = random_queue(rng, L, 0.0, 10.0);
    PowerAllocation p = random_power(rng, L, 10.0);
    RateAllocation mu = rate_allocation(p, h, q, topo);
    if (!capacity_member(mu, p, h, topo, 1e-9)) ++failures;
  }
  add("rate-vertex-feasibility", failures == 0, failures, 0.0,
      "greedy vertices satisfy every subset constraint");
}

void Checker::check_gradient_consistency() {
  RandomStream rng = stream(9);
  double worst = 0.0;
  const int trials = scaled(100, 20);
  for (int t = 0; t < trials; ++t) {
    Topology topo = random_topology(rng, 4);
    int L = topo.link_count();
    ChannelState h = random_channel(rng, L);
    QueueState q = random_queue(rng, L, 0.2, 8.0);
    PowerAllocation p = random_power(rng, L, 6.0);
    for (double& x : p.p) x = 0.2 + x * 0.9;  // interior
    p.p_max = 10.0;
    double V = 0.3 + 2.0 * rng.uniform01();
    std::vector<double> g = grad_(p, h, q, topo, V);
    double scale = 1.0;
    for (int l = 0; l < L; ++l) {
      PowerAllocation pp = p, pm = p;
      const double dp = 1e-6;
      pp.p[l] += dp;
      pm.p[l] -= dp;
      double fd =
          (lagrangian(pp, h, q, topo, V) - lagrangian(pm, h, q, topo, V)) /
          (2 * dp);
      scale = std::max({scale, std::abs(fd)});
      worst = std::max(worst, std::abs(g[l] - fd) / scale);
    }
  }
  add("gradient-consistency", worst <= 1e-6, worst, 1e-6,
      "analytic gradient vs central differences");
}

void Checker::check_hessian() {
  RandomStream rng = stream(10);
  double worst_eig = -1e300;
  double worst_sym = 0.0;
  for (int t = 0; t < scaled(100, 20); ++t) {
    Topology topo = random_topology(rng, 5);
    int L = topo.link_count();
    ChannelState h = random_channel(rng, L);
    QueueState q = random_queue(rng, L, 1.0, 9.0);
    PowerAllocation p = random_power(rng, L, 8.0);
    Eigen::MatrixXd H = hessian_lagrangian(p, h, q, topo, 1.0);
    worst_sym = std::max(worst_sym, (H - H.transpose()).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    worst_eig = std::max(worst_eig, es.eigenvalues()(L - 1));
  }
  bool pass = worst_sym == 0.0 && worst_eig <= 1e-9;
  add("hessian-symmetry-concavity", pass, worst_eig, 1e-9,
      "exact symmetry and nonpositive spectrum for q >= 1");
}

void Checker::check_projection() {
  RandomStream rng = stream(11);
  bool ok = true;
  for (int t = 0; t < 200; ++t) {
    int L = 1 + static_cast<int>(rng.uniform01() * 6);
    std::vector<double> raw(L);
    for (double& x : raw) x = -5.0 + 20.0 * rng.uniform01();
    PowerAllocation once = project_box(raw, 10.0);
    PowerAllocation twice = project_box(once.p, 10.0);
    for (int l = 0; l < L; ++l) {
      ok = ok && once.p[l] >= 0.0 && once.p[l] <= 10.0;
      ok = ok && once.p[l] == twice.p[l];
    }
  }
  add("projection-idempotent", ok, ok ? 0.0 : 1.0, 0.0,
      "clamp is idempotent and lands in the box");
}

void Checker::check_relabel_invariance() {
  RandomStream rng = stream(12);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    Topology topo = Topology::single_receiver(3);
    ChannelState h = random_channel(rng, 3);
    QueueState q = random_queue(rng, 3, 0.5, 9.0);
    PowerAllocation p = random_power(rng, 3, 5.0);
    double v0 = lagrangian(p, h, q, topo, 1.0);
    std::swap(h.h[0], h.h[1]);
    std::swap(q.q[0], q.q[1]);
    std::swap(p.p[0], p.p[1]);
    double v1 = lagrangian(p, h, q, topo, 1.0);
    worst = std::max(worst, std::abs(v0 - v1));
  }
  add("relabel-invariance", worst == 0.0, worst, 0.0,
      "swapping links with their data leaves the objective untouched");
}

void Checker::check_fixed_point() {
  RandomStream rng = stream(13);
  double worst = 0.0;
  double least_escape = 1e300;
  for (int t = 0; t < scaled(30, 10); ++t) {
    Topology topo = random_topology(rng, 4);
    int L = topo.link_count();
    ChannelState h = random_channel(rng, L);
    QueueState q = random_queue(rng, L, 0.5, 8.0);
    PolicyConfig cfg;
    cfg.p_max = 12.0;
    cfg.oracle_tol = 1e-12;
    cfg.V = 1.0;
    cfg.kappa = 400.0;
    EquilibriumResult eq = equilibrium_oracle(h, q, topo, cfg);
    PolicyState st = make_policy_state(eq.p, h, q);
    mwq_gradient_step(st, h, q, topo, cfg, 1e-3);
    for (int l = 0; l < L; ++l)
      worst = std::max(worst, std::abs(st.p.p[l] - eq.p.p[l]));

    // conversely, an interior point off the optimum must move
    PowerAllocation shifted = eq.p;
    int pick = 0;
    for (int l = 0; l < L; ++l)
      if (shifted.p[l] > shifted.p[pick]) pick = l;
    shifted.p[pick] = std::clamp(shifted.p[pick] + 1.0, 0.0, cfg.p_max - 0.5);
    PolicyState moved = make_policy_state(shifted, h, q);
    mwq_gradient_step(moved, h, q, topo, cfg, 1e-3);
    double displacement = 0.0;
    for (int l = 0; l < L; ++l)
      displacement =
          std::max(displacement, std::abs(moved.p.p[l] - shifted.p[l]));
    least_escape = std::min(least_escape, displacement);
  }
  bool pass = worst <= 1e-9 && least_escape > 1e-6;
  add("equilibrium-fixed-point", pass, worst, 1e-9,
      "the optimum is stationary and off-optimum points move");
}

void Checker::check_static_convergence() {
  RandomStream rng = stream(14);
  double worst = 0.0;
  for (int t = 0; t < scaled(20, 6); ++t) {
    Topology topo = random_topology(rng, 3);
    int L = topo.link_count();
    ChannelState h = random_channel(rng, L);
    QueueState q = random_queue(rng, L, 0.5, 6.0);
    PolicyConfig cfg;
    cfg.p_max = 10.0;
    cfg.oracle_tol = 1e-12;
    EquilibriumResult eq = equilibrium_oracle(h, q, topo, cfg);
    Eigen::MatrixXd H = hessian_lagrangian(
        PowerAllocation{std::vector<double>(L, 0.0), cfg.p_max}, h, q, topo,
        cfg.V);
    double curve = H.cwiseAbs().rowwise().sum().maxCoeff();
    cfg.kappa = 1.0 / std::max(curve, 1e-6);
    PolicyState st = make_policy_state(random_power(rng, L, cfg.p_max), h, q);
    for (int k = 0; k < 200000; ++k) {
      std::vector<double> before = st.p.p;
      mwq_gradient_step(st, h, q, topo, cfg, 1.0);
      double move = 0.0;
      for (int l = 0; l < L; ++l)
        move = std::max(move, std::abs(before[l] - st.p.p[l]));
      if (move < 1e-13) break;
    }
    for (int l = 0; l < L; ++l)
      worst = std::max(worst, std::abs(st.p.p[l] - eq.p.p[l]));
  }
  add("static-convergence", worst <= 1e-5, worst, 1e-5,
      "frozen-state ascent reaches the solver optimum");
}

void Checker::check_sensitivity_fd() {
  RandomStream rng = stream(15);
  double worst = 0.0;
  int tested = 0;
  for (int t = 0; t < scaled(25, 8); ++t) {
    Topology topo = random_topology(rng, 4);
    int L = topo.link_count();
    ChannelState h = random_channel(rng, L, 0.3);
    QueueState q = random_queue(rng, L, 2.0, 8.0);
    PolicyConfig cfg;
    cfg.p_max = 500.0;
    cfg.oracle_tol = 1e-13;
    EquilibriumResult eq = equilibrium_oracle(h, q, topo, cfg);
    bool interior = true;
    for (int l = 0; l < L; ++l)
      interior = interior && eq.p.p[l] > 1e-6 && eq.p.p[l] < cfg.p_max - 1e-6;
    if (!interior) continue;
    auto sens = kkt_sensitivities(eq.p, eq.mult_lo, eq.mult_hi, h, q, topo, cfg);
    if (!sens) continue;
    ++tested;
    const double d = 1e-5;
    for (int m = 0; m < L; ++m) {
      QueueState qp = q, qm = q;
      qp.q[m] += d;
      qm.q[m] -= d;
      auto up = equilibrium_oracle(h, qp, topo, cfg, &eq.p);
      auto um = equilibrium_oracle(h, qm, topo, cfg, &eq.p);
      for (int l = 0; l < L; ++l) {
        double fd = (up.p.p[l] - um.p.p[l]) / (2 * d);
        double rel = std::abs(sens->phi_q(l, m) - fd) / std::max(1.0, std::abs(fd));
        worst = std::max(worst, rel);
      }
      ChannelState hp = h, hm = h;
      hp.h[m] += d;
      hm.h[m] -= d;
      auto ux = equilibrium_oracle(hp, q, topo, cfg, &eq.p);
      auto uxm = equilibrium_oracle(hm, q, topo, cfg, &eq.p);
      for (int l = 0; l < L; ++l) {
        double fd = (ux.p.p[l] - uxm.p.p[l]) / (2 * d);
        double rel =
            std::abs(sens->phi_h(l, m).real() - fd) / std::max(1.0, std::abs(fd));
        worst = std::max(worst, rel);
      }
    }
  }
  add("sensitivity-fd-consistency", tested > 0 && worst <= 1e-3, worst, 1e-3,
      "implicit-function derivatives vs differenced optima");
}

void Checker::check_static_reduction() {
  RandomStream rng = stream(16);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    Topology topo = random_topology(rng, 4);
    int L = topo.link_count();
    ChannelState h = random_channel(rng, L);
    QueueState q = random_queue(rng, L, 0.5, 6.0);
    PolicyConfig cfg;
    cfg.p_max = 10.0;
    PowerAllocation p0 = random_power(rng, L, cfg.p_max);
    PolicyState a = make_policy_state(p0, h, q);
    PolicyState b = make_policy_state(p0, h, q);
    mwq_gradient_step(a, h, q, topo, cfg, 1e-3);
    mwq_compensated_step(b, h, q, topo, cfg, 1e-3);
    for (int l = 0; l < L; ++l)
      worst = std::max(worst, std::abs(a.p.p[l] - b.p.p[l]));
  }
  add("compensated-static-reduction", worst == 0.0, worst, 0.0,
      "zero increments reduce the compensated step to plain ascent");
}

void Checker::check_tdm_optimality() {
  RandomStream rng = stream(17);
  double worst = 0.0;
  for (int t = 0; t < scaled(60, 15); ++t) {
    Topology topo = random_topology(rng, 5);
    int L = topo.link_count();
    ChannelState h = random_channel(rng, L);
    QueueState q = random_queue(rng, L, 0.0, 8.0);
    PolicyConfig cfg;
    cfg.p_max = 40.0;
    cfg.V = 0.5 + 2.0 * rng.uniform01();
    TdmDecision td = tdm_policy(h, q, topo, cfg);
    double tdm_utility =
        q.q[td.selected_link] * td.mu.mu[td.selected_link] -
        cfg.V * td.p.p[td.selected_link];
    std::vector<double> gains = h.gains();
    double best = 0.0;
    for (int l = 0; l < L; ++l) {
      double u = golden_max(
          [&](double p) {
            return q.q[l] * std::log1p(gains[l] * p) - cfg.V * p;
          },
          0.0, cfg.p_max);
      best = std::max(best, u);
    }
    worst = std::max(worst, std::abs(best - tdm_utility));
  }
  add("tdm-scalar-optimality", worst <= 1e-8, worst, 1e-8,
      "selected link attains the best single-link utility");
}

void Checker::check_ascent_monotonicity() {
  RandomStream rng = stream(18);
  double worst = 0.0;
  for (int t = 0; t < scaled(50, 15); ++t) {
    Topology topo = random_topology(rng, 4);
    int L = topo.link_count();
    ChannelState h = random_channel(rng, L);
    QueueState q = random_queue(rng, L, 0.5, 8.0);
    PolicyConfig cfg;
    cfg.p_max = 10.0;
    Eigen::MatrixXd H = hessian_lagrangian(
        PowerAllocation{std::vector<double>(L, 0.0), cfg.p_max}, h, q, topo,
        cfg.V);
    double curve = std::max(H.cwiseAbs().rowwise().sum().maxCoeff(), 1e-9);
    cfg.kappa = 1.0 / curve;
    PolicyState st = make_policy_state(random_power(rng, L, cfg.p_max), h, q);
    double before = lagrangian(st.p, h, q, topo, cfg.V);
    for (int k = 0; k < 20; ++k) {
      mwq_gradient_step(st, h, q, topo, cfg, 1.0);
      double after = lagrangian(st.p, h, q, topo, cfg.V);
      worst = std::max(worst, before - after);
      before = after;
    }
  }
  add("ascent-monotonicity", worst <= 1e-10, worst, 1e-10,
      "small-step ascent never lowers the objective");
}

void Checker::check_contraction() {
  RandomStream rng = stream(19);
  double worst = -1e300;
  for (int t = 0; t < scaled(60, 15); ++t) {
    Topology topo = random_topology(rng, 4);
    int L = topo.link_count();
    ChannelState h = random_channel(rng, L);
    QueueState q = random_queue(rng, L, 1.0, 8.0);
    PolicyConfig cfg;
    cfg.p_max = 10.0;
    cfg.oracle_tol = 1e-12;
    double alpha = estimate_alpha(h, q, topo, cfg.p_max).value();
    EquilibriumResult eq = equilibrium_oracle(h, q, topo, cfg);
    for (int s = 0; s < 8; ++s) {
      PowerAllocation p = random_power(rng, L, cfg.p_max);
      std::vector<double> g = grad_lagrangian(p, h, q, topo, cfg.V);
      double lhs = 0.0, pe2 = 0.0;
      for (int l = 0; l < L; ++l) {
        double pe = p.p[l] - eq.p.p[l];
        lhs += pe * g[l] * cfg.kappa;
        pe2 += pe * pe;
      }
      worst = std::max(worst, lhs + cfg.kappa * alpha * pe2);
    }
  }
  add("contraction-inequality", worst <= 1e-6, worst, 1e-6,
      "ascent field contracts toward the optimum at rate kappa*alpha");
}

void Checker::check_rate_gap_sandwich() {
  RandomStream rng = stream(20);
  double worst = -1e300;
  for (int t = 0; t < scaled(200, 40); ++t) {
    Topology topo = random_topology(rng, 4);
    int L = topo.link_count();
    ChannelState h = random_channel(rng, L);
    QueueState q = random_queue(rng, L, 0.5, 8.0);
    PolicyConfig cfg;
    cfg.p_max = 10.0;
    cfg.oracle_tol = 1e-11;
    double beta = estimate_beta(h, topo, cfg.p_max, 128);
    EquilibriumResult eq = equilibrium_oracle(h, q, topo, cfg);
    PowerAllocation p = random_power(rng, L, cfg.p_max);
    RateAllocation mu_hat = rate_allocation(p, h, q, topo);
    RateAllocation mu_star = rate_allocation(eq.p, h, q, topo);
    double pe_inf = 0.0, a_inf = 0.0, b_inf = 0.0;
    for (int l = 0; l < L; ++l) {
      pe_inf = std::max(pe_inf, std::abs(p.p[l] - eq.p.p[l]));
      a_inf = std::max(a_inf, mu_hat.mu[l]);
      b_inf = std::max(b_inf, mu_star.mu[l]);
    }
    worst = std::max(
        worst, std::abs(a_inf - b_inf) - std::log1p(beta * pe_inf));
  }
  add("rate-gap-sandwich", worst <= 1e-6, worst, 1e-6,
      "rate norm gap bounded by log(1 + beta |p_e|)");
}

void Checker::check_weighted_rate_bound() {
  RandomStream rng = stream(21);
  double worst = -1e300;
  int tested = 0;
  const double lambda_max = 1.0;
  for (int t = 0; t < scaled(500, 60); ++t) {
    Topology topo = random_topology(rng, 4);
    int L = topo.link_count();
    ChannelState h = random_channel(rng, L);
    QueueState q = random_queue(rng, L, 0.5, 8.0);
    PolicyConfig cfg;
    cfg.V = 0.4 + 1.2 * rng.uniform01();
    cfg.oracle_tol = 1e-11;
    cfg.p_max = literal_power_cap(L, lambda_max, 0.05);
    std::vector<double> gains = h.gains();
    double s_min = *std::min_element(gains.begin(), gains.end());
    double q_norm = *std::max_element(q.q.begin(), q.q.end());
    if (!(q_norm * s_min > cfg.V)) continue;
    ++tested;
    EquilibriumResult eq = equilibrium_oracle(h, q, topo, cfg);
    RateAllocation mu = rate_allocation(eq.p, h, q, topo);
    double weighted = 0.0;
    for (int l = 0; l < L; ++l) weighted += q.q[l] * mu.mu[l];
    double cap = L * lambda_max * M_LN2 + std::log(s_min / (0.05 * 0.05));
    double bound = q_norm * std::min(std::log(s_min * q_norm / cfg.V), cap);
    worst = std::max(worst, bound - weighted);
  }
  add("weighted-rate-lower-bound", tested > 0 && worst <= 1e-6, worst, 1e-6,
      "optimal weighted rate dominates the single-link floor");
}

void Checker::check_pure_birth() {
  SimConfig cfg = spec_.sim;
  cfg.policy = PolicyKind::ConstantPower;
  cfg.p_const = 0.0;
  cfg.arrivals.lambda.assign(cfg.topo.link_count(), 5.0);
  cfg.horizon = opts_.quick ? 5.0 : 20.0;
  cfg.warmup = 0.0;
  cfg.track_equilibrium = false;
  RunSummary r = run_episode(cfg).summary;
  // with zero service the final backlog is Poisson(lambda*T); the time
  // average of a pure-birth path is about half the final value
  double worst_z = 0.0;
  for (int l = 0; l < cfg.topo.link_count(); ++l) {
    double lt = 5.0 * cfg.horizon;
    double expected = 0.5 * lt;  // mean of the integrated path / T
    double sd = std::sqrt(lt / 3.0);
    worst_z = std::max(worst_z, std::abs(r.avg_queue[l] - expected) / sd);
  }
  add("zero-power-pure-birth", worst_z <= 3.5, worst_z, 3.5,
      "no-service growth matches the arrival intensity");
}

void Checker::check_littles_law() {
  SimConfig cfg = spec_.sim;
  cfg.topo = Topology::single_receiver(2);
  int L = 2;
  cfg.channel.a.assign(L, 50.0);
  cfg.channel.h0 = 0.05;
  cfg.arrivals.lambda.assign(L, 2.0);
  cfg.policy = PolicyKind::Mwq;
  cfg.policy_cfg.V = 0.1;
  cfg.policy_cfg.kappa = 500.0;
  cfg.policy_cfg.p_max = 1e4;
  cfg.horizon = opts_.quick ? 80.0 : 300.0;
  cfg.warmup = opts_.quick ? 20.0 : 50.0;
  cfg.track_equilibrium = false;
  cfg.packet_tagging = true;
  EpisodeResult r = run_episode(cfg);
  double worst = 0.0;
  bool have_packets = true;
  for (int l = 0; l < L; ++l) {
    have_packets = have_packets && r.tagging->departed[l] > 50;
    if (!have_packets) break;
    double littles = r.summary.avg_queue[l] / cfg.arrivals.lambda[l];
    double tagged = r.tagging->mean_sojourn[l];
    worst = std::max(worst, std::abs(littles - tagged) / tagged);
  }
  double tol = opts_.quick ? 0.2 : 0.05;
  add("littles-law-tagging", have_packets && worst <= tol, worst, tol,
      "queue/arrival ratio vs tagged sojourn times");
}

void Checker::check_no_blowup() {
  SimConfig cfg = spec_.sim;
  cfg.policy = PolicyKind::Mwq;
  cfg.track_equilibrium = false;
  double T = opts_.quick ? 16.0 : 60.0;
  cfg.horizon = T;
  cfg.warmup = T / 2;
  RunSummary half = run_episode(cfg).summary;
  cfg.horizon = 0.75 * T;
  cfg.warmup = T / 2;
  RunSummary quarter = run_episode(cfg).summary;
  double ratio = half.worst_avg_queue / std::max(quarter.worst_avg_queue, 1e-9);
  add("no-blowup-desk-scale", ratio <= 2.0, ratio, 2.0,
      "late-window backlog vs the preceding window");
}

void Checker::check_sigma_jensen() {
  Topology topo = Topology::single_receiver(4);
  ChannelModel chan;
  chan.a.assign(4, 1.0);
  chan.h0 = 0.5;
  chan.tau = 1e-3;
  PolicyConfig pcfg;
  pcfg.V = 1.0;
  pcfg.kappa = 500.0;
  pcfg.p_max = literal_power_cap(4, 1.0, chan.h0);
  StationarySamplingConfig scfg;
  scfg.sample_count = opts_.quick ? 200 : 800;
  StationaryExpectations exp = estimate_stationary_expectations(
      chan, topo, pcfg, 1.0, {{0.0, 0.0}}, scfg, opts_.seed ^ 0x77,
      Exec::Serial);
  double product = exp.sigma_bar.mean * exp.mean_S_min;
  add("sigma-jensen", product >= 1.0, product, 1.0,
      "E[1/S_min] dominates 1/E[S_min]");
}

std::vector<CheckResult> Checker::run() {
  check_reflection_floor();
  check_seed_reproducibility();
  check_stationary_moment();
  check_cross_independence();
  check_arrival_moments();
  check_queue_nonnegative();
  check_telescoping();
  check_vertex_feasibility();
  check_gradient_consistency();
  check_hessian();
  check_projection();
  check_relabel_invariance();
  check_fixed_point();
  check_static_convergence();
  check_sensitivity_fd();
  check_static_reduction();
  check_tdm_optimality();
  check_ascent_monotonicity();
  check_contraction();
  check_rate_gap_sandwich();
  check_weighted_rate_bound();
  check_pure_birth();
  check_littles_law();
  check_no_blowup();
  check_sigma_jensen();
  return results_;
}

}  // namespace

bool summaries_identical(const RunSummary& a, const RunSummary& b) {
  return vec_equal(a.avg_queue, b.avg_queue) &&
         bits_equal(a.worst_avg_queue, b.worst_avg_queue) &&
         vec_equal(a.avg_delay, b.avg_delay) &&
         vec_equal(a.avg_power, b.avg_power) && a.tx_nodes == b.tx_nodes &&
         vec_equal(a.node_power, b.node_power) &&
         vec_equal(a.node_power_db, b.node_power_db) &&
         bits_equal(a.mean_node_power, b.mean_node_power) &&
         bits_equal(a.mean_node_power_db, b.mean_node_power_db) &&
         bits_equal(a.avg_tracking_error, b.avg_tracking_error) &&
         a.slot_count == b.slot_count && a.measured_slots == b.measured_slots &&
         a.fallback_count == b.fallback_count &&
         bits_equal(a.p_const_used, b.p_const_used);
}

std::vector<CheckResult> run_validation(const ExperimentSpec& spec,
                                        const ValidationOptions& opts) {
  Checker checker(spec, opts);
  return checker.run();
}

bool all_passed(const std::vector<CheckResult>& checks) {
  for (const CheckResult& c : checks)
    if (!c.pass) return false;
  return true;
}

nlohmann::json validation_report(const std::vector<CheckResult>& checks) {
  nlohmann::json out;
  out["check_count"] = checks.size();
  out["all_passed"] = all_passed(checks);
  nlohmann::json arr = nlohmann::json::array();
  for (const CheckResult& c : checks) {
    nlohmann::json j;
    j["name"] = c.name;
    j["pass"] = c.pass;
    j["measured"] = c.measured;
    j["threshold"] = c.threshold;
    j["note"] = c.note;
    arr.push_back(j);
  }
  out["checks"] = arr;
  return out;
}

}  // namespace mwq
