#include "mwq/stability.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mwq {

namespace {

constexpr int kPrimes[20] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                             31, 37, 41, 43, 47, 53, 59, 61, 67, 71};

double halton(unsigned index, int base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * (index % base);
    index /= base;
  }
  return r;
}

void halton_point(unsigned index, double scale, std::vector<double>& out) {
  for (std::size_t d = 0; d < out.size(); ++d)
    out[d] = scale * halton(index, kPrimes[d % 20]);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0, c = 0.0;
  for (double x : v) {  // Kahan: reductions stay order-independent safe
    double y = x - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

McEstimate make_estimate(const std::vector<double>& v) {
  McEstimate e;
  e.samples = static_cast<long>(v.size());
  if (v.empty()) return e;
  e.mean = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - e.mean) * (x - e.mean);
  double var = v.size() > 1 ? ss / static_cast<double>(v.size() - 1) : 0.0;
  e.ci_half = 2.5758 * std::sqrt(var / static_cast<double>(v.size()));
  return e;
}

}  // namespace

std::optional<double> estimate_alpha(const ChannelState& h, const QueueState& q,
                                     const Topology& topo, double p_max,
                                     const AlphaConfig& cfg) {
  const int L = topo.link_count();
  for (double ql : q.q)
    if (!(ql >= 1.0)) return std::nullopt;

  std::vector<double> gains = h.gains();
  LagrangianEvaluator ev(topo);
  Eigen::MatrixXd H(L, L);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  std::vector<double> p(L, 0.0);

  auto curvature_floor = [&](const std::vector<double>& point) {
    ev.hessian(point, gains, q.q, H);
    es.compute(H, Eigen::EigenvaluesOnly);
    return -es.eigenvalues()(L - 1);
  };

  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_p(L, 0.0);
  auto consider = [&](const std::vector<double>& point) {
    double v = curvature_floor(point);
    if (v < best) {
      best = v;
      best_p = point;
    }
  };

  if (L <= 8) {
    for (unsigned mask = 0; mask < (1u << L); ++mask) {
      for (int l = 0; l < L; ++l) p[l] = (mask >> l) & 1u ? p_max : 0.0;
      consider(p);
    }
  }
  for (int i = 1; i <= cfg.grid_samples; ++i) {
    halton_point(static_cast<unsigned>(i), p_max, p);
    consider(p);
  }

  double step = p_max / 4.0;
  for (int it = 0; it < cfg.refine_iters && step > p_max * 1e-12; ++it) {
    bool improved = false;
    for (int l = 0; l < L; ++l) {
      for (double sign : {1.0, -1.0}) {
        p = best_p;
        double moved = std::clamp(p[l] + sign * step, 0.0, p_max);
        if (moved == p[l]) continue;
        p[l] = moved;
        double v = curvature_floor(p);
        if (v < best) {
          best = v;
          best_p = p;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return best;
}

double estimate_beta(const ChannelState& h, const Topology& topo, double p_max,
                     int sample_count) {
  const int L = topo.link_count();
  std::vector<double> gains = h.gains();
  double best = 0.0;

  // Exact directional limits at the box corners: the stage-k ratio gradient
  // has 1-norm gain_k (1 + p_max * sum of the gains decoded before k), which
  // is largest when every other link in the group precedes k.
  for (int n : topo.receivers()) {
    const auto& group = topo.links_to(n);
    double total = 0.0;
    for (int l : group) total += gains[l];
    for (int l : group)
      best = std::max(best, gains[l] * (1.0 + p_max * (total - gains[l])));
  }

  std::vector<double> a(L), b(L);
  auto stage_gap = [&](const std::vector<double>& pa,
                       const std::vector<double>& pb) {
    double denom = 0.0;
    for (int l = 0; l < L; ++l) denom = std::max(denom, std::abs(pa[l] - pb[l]));
    if (denom == 0.0) return 0.0;
    double gap = 0.0;
    for (int n : topo.receivers()) {
      const auto& group = topo.links_to(n);
      double sa = 0.0, sb = 0.0;
      double prev_a = 1.0, prev_b = 1.0;
      for (int l : group) {
        sa += gains[l] * pa[l];
        sb += gains[l] * pb[l];
        double ra = (1.0 + sa) / prev_a;
        double rb = (1.0 + sb) / prev_b;
        gap = std::max(gap, std::abs(ra - rb));
        prev_a = 1.0 + sa;
        prev_b = 1.0 + sb;
      }
    }
    return gap / denom;
  };

  for (int i = 0; i < sample_count; ++i) {
    halton_point(static_cast<unsigned>(2 * i + 1), p_max, a);
    if (i % 2 == 0) {
      halton_point(static_cast<unsigned>(2 * i + 2), p_max, b);
    } else {
      // short displacement around a shared center
      b = a;
      double delta = p_max * 1e-6;
      for (int l = 0; l < L; ++l) {
        double dir = halton(static_cast<unsigned>(i + l + 1), kPrimes[(l + 3) % 20]);
        b[l] = std::clamp(a[l] + (dir < 0.5 ? -delta : delta), 0.0, p_max);
      }
    }
    best = std::max(best, stage_gap(a, b));
  }
  return best;
}

GammaEstimate estimate_gammas(const Topology& topo, const ChannelModel& chan,
                              const PolicyConfig& cfg, double q_lo, double q_hi,
                              int sample_count, RandomStream& rng) {
  const int L = topo.link_count();
  GammaEstimate out;
  std::vector<double> row_q(L), row_h(L);

  for (int i = 0; i < sample_count; ++i) {
    ChannelState h = stationary_channel_sample(chan, L, rng);
    QueueState q;
    q.q.resize(L);
    for (int l = 0; l < L; ++l)
      q.q[l] = q_lo + (q_hi - q_lo) * rng.uniform01();
    try {
      EquilibriumResult base = equilibrium_oracle(h, q, topo, cfg);
      std::fill(row_q.begin(), row_q.end(), 0.0);
      std::fill(row_h.begin(), row_h.end(), 0.0);

      const double dq = 1e-5;
      for (int m = 0; m < L; ++m) {
        QueueState qp = q, qm = q;
        qp.q[m] += dq;
        qm.q[m] -= dq;
        auto up = equilibrium_oracle(h, qp, topo, cfg, &base.p);
        auto um = equilibrium_oracle(h, qm, topo, cfg, &base.p);
        for (int l = 0; l < L; ++l)
          row_q[l] += std::abs((up.p.p[l] - um.p.p[l]) / (2.0 * dq));
      }
      const double dh = 1e-5;
      for (int m = 0; m < L; ++m) {
        for (int part = 0; part < 2; ++part) {
          ChannelState hp = h, hm = h;
          std::complex<double> delta =
              part == 0 ? std::complex<double>(dh, 0.0)
                        : std::complex<double>(0.0, dh);
          hp.h[m] += delta;
          hm.h[m] -= delta;
          auto up = equilibrium_oracle(hp, q, topo, cfg, &base.p);
          auto um = equilibrium_oracle(hm, q, topo, cfg, &base.p);
          for (int l = 0; l < L; ++l)
            row_h[l] += std::abs((up.p.p[l] - um.p.p[l]) / (2.0 * dh));
        }
      }
      for (int l = 0; l < L; ++l) {
        out.gamma_q = std::max(out.gamma_q, row_q[l]);
        out.gamma_h = std::max(out.gamma_h, row_h[l]);
      }
    } catch (const oracle_error&) {
      ++out.skipped;
    }
  }
  return out;
}

double lyapunov_drift_bound(const std::vector<double>& p_e,
                            const ChannelState& h, const QueueState& q,
                            const StabilityConstants& constants,
                            const ChannelModel& chan, const ArrivalModel& arr,
                            const Topology& topo, const PolicyConfig& pcfg) {
  const int L = topo.link_count();
  double pe_inf = 0.0, pe_sq = 0.0;
  for (double v : p_e) {
    pe_inf = std::max(pe_inf, std::abs(v));
    pe_sq += v * v;
  }
  double h_inf = 0.0;
  for (auto z : h.h) h_inf = std::max(h_inf, std::abs(z));
  double a_A = 0.0;
  for (double a : chan.a) a_A = std::max(a_A, a);
  double lambda_max = 0.0;
  for (double v : arr.lambda) lambda_max = std::max(lambda_max, v);

  bool q_above_one = true;
  for (double ql : q.q) q_above_one = q_above_one && ql >= 1.0;
  double contraction = 0.0;
  if (q_above_one && std::isfinite(constants.alpha))
    contraction = -2.0 * constants.kappa * constants.alpha * pe_sq;

  EquilibriumResult eq = equilibrium_oracle(h, q, topo, pcfg);
  std::vector<double> p_shift(L);
  for (int l = 0; l < L; ++l)
    p_shift[l] = std::clamp(eq.p.p[l] + p_e[l], 0.0, pcfg.p_max);
  RateAllocation mu =
      rate_allocation(PowerAllocation{p_shift, pcfg.p_max}, h, q, topo);
  double mu_inf = 0.0;
  for (double m : mu.mu) mu_inf = std::max(mu_inf, m);

  const double gq = constants.gamma_q;
  const double gh = constants.gamma_h;
  double rate_coupling = 2.0 * gq * L * pe_inf * mu_inf;
  double fading_coupling = gh * a_A * L * pe_inf * h_inf;
  double arrival_coupling = 2.0 * gq * L * pe_inf * lambda_max;
  double fading_decay = 0.0;
  for (int l = 0; l < L; ++l) fading_decay -= chan.a[l] * std::norm(h.h[l]);
  double service_drift = 0.0;
  for (int l = 0; l < L; ++l)
    service_drift -= 2.0 * q.q[l] * (mu.mu[l] - arr.lambda[l]);
  double constant_term = L * gq * gq;
  for (int l = 0; l < L; ++l)
    constant_term += 2.0 * chan.a[l] * (1.0 + gh * gh) + arr.lambda[l];

  return contraction + rate_coupling + fading_coupling + arrival_coupling +
         fading_decay + service_drift + constant_term;
}

namespace {

double power_of_two(double x) {
  double rounded = std::nearbyint(x);
  if (rounded == x && std::abs(x) < 1020.0)
    return std::ldexp(1.0, static_cast<int>(rounded));
  return std::exp2(x);
}

}  // namespace

double queue_bound(const StabilityConstants& k, int link_count, double V) {
  std::ostringstream missing;
  auto require = [&](double v, const char* name) {
    if (!std::isfinite(v)) missing << ' ' << name;
  };
  require(k.a_A, "a_A");
  require(k.gamma_h, "gamma_h");
  require(k.gamma_q, "gamma_q");
  require(k.lambda_max, "lambda_max");
  require(k.gamma_bar0.mean, "gamma_bar0");
  require(k.sigma_bar.mean, "sigma_bar");
  require(k.g_bar.mean, "g_bar");
  if (k.gamma_q != 0.0) {
    require(k.alpha_bar0.mean, "alpha_bar0");
    require(k.kappa, "kappa");
  }
  std::string list = missing.str();
  if (!list.empty())
    throw std::invalid_argument("queue_bound: missing constants:" + list);

  const double L = static_cast<double>(link_count);
  double bound =
      L * (2.0 * k.a_A * (1.0 + k.gamma_h * k.gamma_h) +
           k.gamma_q * k.gamma_q + k.lambda_max);
  bound += k.gamma_bar0.mean / k.a_A;
  if (k.gamma_q != 0.0)
    bound += k.alpha_bar0.mean * k.gamma_q * k.gamma_q * k.lambda_max *
             k.lambda_max / k.kappa;
  bound += V * power_of_two(L * k.lambda_max - 1.0) * k.sigma_bar.mean;
  bound += k.g_bar.mean;
  return bound;
}

namespace {

struct GSampleParams {
  double s_min, s_max, alpha, beta, gamma_q;
  double L, lambda_max, V, kappa, h0, p_max;
};

double g1_objective(double x, double y, const GSampleParams& c) {
  double cap_branch =
      c.L * c.lambda_max * M_LN2 + std::log(c.s_min / (c.h0 * c.h0));
  double drain = std::min(std::log(c.s_min * y / c.V), cap_branch);
  double lb = std::log1p(c.beta * x);
  return -c.kappa * c.alpha * x * x + 2.0 * c.gamma_q * x * std::log(c.s_max * y / c.V) +
         2.0 * c.gamma_q * x * lb + c.L * c.lambda_max * y +
         2.0 * c.L * y * lb - y * drain + x + y;
}

double g2_objective(double x, const GSampleParams& c) {
  double lb = std::log1p(c.beta * x);
  return -c.kappa * c.alpha * x * x +
         2.0 * c.gamma_q * x * std::log(c.s_max * c.s_min) +
         2.0 * c.gamma_q * x * lb + (c.V / c.s_min) * lb;
}

double g_sample(const GSampleParams& c, int grid, int refine_iters) {
  const double x_hi = 4.0 * c.p_max;
  const double y_hi = 4.0 * c.V / c.s_min;
  const double y_lo = y_hi / grid;

  double best = -std::numeric_limits<double>::infinity();
  double bx = 0.0, by = y_lo;
  for (int i = 0; i <= grid; ++i) {
    double x = x_hi * i / grid;
    for (int j = 1; j <= grid; ++j) {
      double y = y_hi * j / grid;
      double v = g1_objective(x, y, c);
      if (v > best) {
        best = v;
        bx = x;
        by = y;
      }
    }
  }
  double sx = x_hi / grid, sy = y_hi / grid;
  for (int it = 0; it < refine_iters; ++it) {
    bool improved = false;
    const double cand[4][2] = {{sx, 0.0}, {-sx, 0.0}, {0.0, sy}, {0.0, -sy}};
    for (auto& d : cand) {
      double x = std::clamp(bx + d[0], 0.0, x_hi);
      double y = std::clamp(by + d[1], y_lo, y_hi);
      double v = g1_objective(x, y, c);
      if (v > best) {
        best = v;
        bx = x;
        by = y;
        improved = true;
      }
    }
    if (!improved) {
      sx *= 0.5;
      sy *= 0.5;
    }
  }

  double best2 = -std::numeric_limits<double>::infinity();
  double b2 = 0.0;
  for (int i = 0; i <= grid * 4; ++i) {
    double x = x_hi * i / (grid * 4);
    double v = g2_objective(x, c);
    if (v > best2) {
      best2 = v;
      b2 = x;
    }
  }
  double s2 = x_hi / (grid * 4);
  for (int it = 0; it < refine_iters; ++it) {
    bool improved = false;
    for (double d : {s2, -s2}) {
      double x = std::clamp(b2 + d, 0.0, x_hi);
      double v = g2_objective(x, c);
      if (v > best2) {
        best2 = v;
        b2 = x;
        improved = true;
      }
    }
    if (!improved) s2 *= 0.5;
  }
  return std::max(best, best2);
}

}  // namespace

StationaryExpectations estimate_stationary_expectations(
    const ChannelModel& chan, const Topology& topo, const PolicyConfig& pcfg,
    double lambda_max, const std::vector<std::pair<double, double>>& scenarios,
    const StationarySamplingConfig& cfg, std::uint64_t seed, Exec exec) {
  const int L = topo.link_count();
  const int n = cfg.sample_count;
  const int S = static_cast<int>(scenarios.size());
  double a_A = 0.0;
  for (double a : chan.a) a_A = std::max(a_A, a);

  std::vector<double> q_ref(L);
  for (int l = 0; l < L; ++l) q_ref[l] = 1.0 + l;  // distinct backlogs >= 1

  std::vector<double> sigma(n), alpha_inv(n), smin_v(n);
  std::vector<double> g_all(static_cast<std::size_t>(n) * S);
  std::vector<double> g0_all(static_cast<std::size_t>(n) * S);
  std::vector<unsigned char> clamped(static_cast<std::size_t>(n) * S, 0);

  auto worker = [&](int i) {
    RandomStream stream =
        RngStreams::derive(seed, 11, static_cast<std::uint64_t>(i));
    ChannelState h = cfg.fixed_initial
                         ? *cfg.fixed_initial
                         : stationary_channel_sample(chan, L, stream);
    std::vector<std::complex<double>> noise(L);
    for (int s = 0; s < cfg.evolve_steps; ++s) {
      for (int l = 0; l < L; ++l) noise[l] = stream.complex_normal_unit();
      h = channel_step(h, chan, noise);
    }
    std::vector<double> gains = h.gains();
    double s_min = gains[0], s_max = gains[0];
    for (double g : gains) {
      s_min = std::min(s_min, g);
      s_max = std::max(s_max, g);
    }
    double alpha =
        estimate_alpha(h, QueueState{q_ref}, topo, pcfg.p_max, cfg.alpha_cfg)
            .value();
    double beta = estimate_beta(h, topo, pcfg.p_max, cfg.beta_pairs);

    sigma[i] = 1.0 / s_min;
    smin_v[i] = s_min;
    alpha_inv[i] = 1.0 / alpha;
    for (int s = 0; s < S; ++s) {
      auto [gh, gq] = scenarios[s];
      double denom = 1.0 - gh * gh * a_A / (pcfg.kappa * alpha);
      if (denom < cfg.hypothesis_floor) {
        denom = cfg.hypothesis_floor;
        clamped[static_cast<std::size_t>(s) * n + i] = 1;
      }
      g0_all[static_cast<std::size_t>(s) * n + i] = 1.0 / (8.0 * denom);
      GSampleParams gp;
      gp.s_min = s_min;
      gp.s_max = s_max;
      gp.alpha = alpha;
      gp.beta = beta;
      gp.gamma_q = gq;
      gp.L = static_cast<double>(L);
      gp.lambda_max = lambda_max;
      gp.V = pcfg.V;
      gp.kappa = pcfg.kappa;
      gp.h0 = chan.h0;
      gp.p_max = pcfg.p_max;
      g_all[static_cast<std::size_t>(s) * n + i] =
          g_sample(gp, cfg.g_grid, cfg.g_refine_iters);
    }
  };
  for_each_index(n, exec, worker);

  StationaryExpectations out;
  out.sigma_bar = make_estimate(sigma);
  out.alpha_bar0 = make_estimate(alpha_inv);
  out.mean_S_min = mean_of(smin_v);
  out.scenarios.resize(S);
  for (int s = 0; s < S; ++s) {
    std::vector<double> gs(g_all.begin() + static_cast<std::size_t>(s) * n,
                           g_all.begin() + static_cast<std::size_t>(s + 1) * n);
    std::vector<double> g0s(g0_all.begin() + static_cast<std::size_t>(s) * n,
                            g0_all.begin() + static_cast<std::size_t>(s + 1) * n);
    out.scenarios[s].g_bar = make_estimate(gs);
    out.scenarios[s].gamma_bar0 = make_estimate(g0s);
    long c = 0;
    for (int i = 0; i < n; ++i)
      c += clamped[static_cast<std::size_t>(s) * n + i];
    out.scenarios[s].clamped = c;
  }
  return out;
}

std::vector<BoundRow> bound_sweep(
    const std::vector<double>& a_grid,
    const std::vector<std::pair<double, double>>& scenarios,
    const ChannelModel& chan_template, const Topology& topo, double lambda_max,
    double V, double kappa, const StationarySamplingConfig& cfg,
    std::uint64_t seed, Exec exec) {
  if (a_grid.empty() || scenarios.empty())
    throw std::invalid_argument("bound_sweep: empty grid");
  const int L = topo.link_count();
  PolicyConfig pcfg;
  pcfg.V = V;
  pcfg.kappa = kappa;
  pcfg.p_max = literal_power_cap(L, lambda_max, chan_template.h0);

  std::vector<BoundRow> rows;
  rows.reserve(a_grid.size() * scenarios.size());
  for (double a : a_grid) {
    ChannelModel chan = chan_template;
    chan.a.assign(L, a);
    // common random numbers across cells: same base seed at every a_A
    StationaryExpectations exp_a = estimate_stationary_expectations(
        chan, topo, pcfg, lambda_max, scenarios, cfg, seed, exec);
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
      StabilityConstants k;
      k.a_A = a;
      k.gamma_h = scenarios[s].first;
      k.gamma_q = scenarios[s].second;
      k.lambda_max = lambda_max;
      k.V = V;
      k.kappa = kappa;
      k.sigma_bar = exp_a.sigma_bar;
      k.alpha_bar0 = exp_a.alpha_bar0;
      k.gamma_bar0 = exp_a.scenarios[s].gamma_bar0;
      k.g_bar = exp_a.scenarios[s].g_bar;
      BoundRow row;
      row.a_A = a;
      row.gamma_h = k.gamma_h;
      row.gamma_q = k.gamma_q;
      row.bound = queue_bound(k, L, V);
      row.sigma_bar = k.sigma_bar.mean;
      row.alpha_bar0 = k.alpha_bar0.mean;
      row.gamma_bar0 = k.gamma_bar0.mean;
      row.g_bar = k.g_bar.mean;
      row.clamped = exp_a.scenarios[s].clamped;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace mwq
