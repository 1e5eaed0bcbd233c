#include "mwq/policy.hpp"

#include <algorithm>
#include <cmath>

namespace mwq {

void PolicyConfig::validate() const {
  if (!(kappa > 0.0)) throw std::invalid_argument("policy: kappa must be > 0");
  if (!(V > 0.0)) throw std::invalid_argument("policy: V must be > 0");
  if (iterations_per_slot < 1)
    throw std::invalid_argument("policy: iterations_per_slot must be >= 1");
  if (!(ridge >= 0.0)) throw std::invalid_argument("policy: ridge must be >= 0");
  if (!(oracle_tol > 0.0))
    throw std::invalid_argument("policy: oracle_tol must be > 0");
  if (!(p_max > 0.0)) throw std::invalid_argument("policy: p_max must be > 0");
}

PolicyState make_policy_state(const PowerAllocation& p0, const ChannelState& h0,
                              const QueueState& q0) {
  PolicyState st;
  st.p = p0;
  st.prev_h = h0;
  st.prev_q = q0;
  return st;
}

namespace {

inline double clamp_box(double x, double hi) {
  if (x < 0.0) return 0.0;
  if (x > hi) return hi;
  return x;
}

}  // namespace

namespace detail {

double kkt_residual(std::span<const double> p, std::span<const double> grad,
                    double p_max) {
  double r = 0.0;
  for (std::size_t l = 0; l < p.size(); ++l) {
    double v;
    if (p[l] == 0.0)
      v = std::max(0.0, grad[l]);
    else if (p[l] == p_max)
      v = std::max(0.0, -grad[l]);
    else
      v = std::abs(grad[l]);
    r = std::max(r, v);
  }
  return r;
}

EquilibriumResult solve_equilibrium(LagrangianEvaluator& ev,
                                    std::span<const double> gains,
                                    std::span<const double> q,
                                    const PolicyConfig& cfg,
                                    const double* warm_start,
                                    OracleScratch& ws) {
  const int L = static_cast<int>(gains.size());
  const double p_max = cfg.p_max;
  ws.p.assign(L, 0.0);
  if (warm_start)
    for (int l = 0; l < L; ++l) ws.p[l] = clamp_box(warm_start[l], p_max);
  ws.grad.resize(L);
  ws.grad_old.resize(L);
  ws.trial.resize(L);
  ws.diff_p.resize(L);
  ws.diff_g.resize(L);

  double q_scale = 1.0;
  for (int l = 0; l < L; ++l) q_scale = std::max(q_scale, std::abs(q[l]));
  const double tol = cfg.oracle_tol * q_scale;

  double f = ev.value_and_grad(ws.p, gains, q, cfg.V, ws.grad);
  double step = 1.0;
  bool have_history = false;
  int it = 0;
  double residual = kkt_residual(ws.p, ws.grad, p_max);
  std::vector<double> p_best = ws.p;
  double res_best = residual;
  int since_improved = 0;

  for (; it < cfg.oracle_max_iters && residual >= tol; ++it) {
    // BB residuals are non-monotone; only a long dry spell means the floor
    if (since_improved > 200) break;
    if (have_history) {
      double pp = 0.0, pg = 0.0;
      for (int l = 0; l < L; ++l) {
        pp += ws.diff_p[l] * ws.diff_p[l];
        pg += ws.diff_p[l] * ws.diff_g[l];
      }
      if (pg < 0.0) step = pp / (-pg);
    }
    step = std::clamp(step, 1e-14, 1e14);

    bool moved = false;
    for (int bt = 0; bt < 80; ++bt) {
      double expected = 0.0;
      for (int l = 0; l < L; ++l) {
        ws.trial[l] = clamp_box(ws.p[l] + step * ws.grad[l], p_max);
        expected += ws.grad[l] * (ws.trial[l] - ws.p[l]);
      }
      if (expected <= 0.0) break;  // projection arc stalled
      // Near the optimum the sufficient-increase test asks for less than one
      // ulp of the objective; take the (safe, BB-sized) step anyway.
      if (expected <= 4e-14 * (1.0 + std::abs(f))) {
        moved = true;
        break;
      }
      double f_trial = ev.value(ws.trial, gains, q, cfg.V);
      if (f_trial >= f + 1e-4 * expected) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;

    std::swap(ws.grad, ws.grad_old);
    for (int l = 0; l < L; ++l) {
      ws.diff_p[l] = ws.trial[l] - ws.p[l];
      ws.p[l] = ws.trial[l];
    }
    f = ev.value_and_grad(ws.p, gains, q, cfg.V, ws.grad);
    for (int l = 0; l < L; ++l) ws.diff_g[l] = ws.grad[l] - ws.grad_old[l];
    have_history = true;
    residual = kkt_residual(ws.p, ws.grad, p_max);
    if (residual < res_best) {
      res_best = residual;
      p_best = ws.p;
      since_improved = 0;
    } else {
      ++since_improved;
    }
  }

  if (res_best < residual) {
    ws.p = p_best;
    f = ev.value_and_grad(ws.p, gains, q, cfg.V, ws.grad);
    residual = kkt_residual(ws.p, ws.grad, p_max);
  }
  EquilibriumResult res;
  res.p = PowerAllocation{ws.p, p_max};
  res.kkt_residual = residual;
  res.iterations = it;
  res.mult_lo.assign(L, 0.0);
  res.mult_hi.assign(L, 0.0);
  for (int l = 0; l < L; ++l) {
    if (ws.p[l] == 0.0)
      res.mult_lo[l] = std::max(0.0, -ws.grad[l]);
    else if (ws.p[l] == p_max)
      res.mult_hi[l] = std::max(0.0, ws.grad[l]);
  }
  if (residual >= tol)
    throw oracle_error("equilibrium solve did not reach tolerance", res);
  return res;
}

}  // namespace detail

EquilibriumResult equilibrium_oracle(const ChannelState& h, const QueueState& q,
                                     const Topology& topo,
                                     const PolicyConfig& cfg,
                                     const PowerAllocation* warm_start) {
  LagrangianEvaluator ev(topo);
  detail::OracleScratch ws;
  std::vector<double> gains = h.gains();
  return detail::solve_equilibrium(ev, gains, q.q, cfg,
                                   warm_start ? warm_start->p.data() : nullptr,
                                   ws);
}

namespace detail {

struct GainSens {
  Eigen::MatrixXd phi_q;     // L x L
  Eigen::MatrixXd phi_gain;  // L x L, response to |h|^2 increments
};

/// Sensitivity core over (q, gains). Pinned coordinates get zero rows; the
/// free block is inverted on its trustworthy eigenspace only: near-tied
/// backlogs make split directions nearly singular (their curvature weight is
/// a backlog difference) and the optimum genuinely jumps there, so a
/// first-order estimate along them is meaningless.
std::optional<GainSens> gain_sensitivities(
    LagrangianEvaluator& ev, std::span<const double> p, double p_max,
    std::span<const double> mult_lo, std::span<const double> mult_hi,
    std::span<const double> gains, std::span<const double> q,
    const PolicyConfig& cfg) {
  const int L = static_cast<int>(p.size());
  std::vector<int> free_ix;
  free_ix.reserve(L);
  for (int l = 0; l < L; ++l) {
    bool pinned_lo = p[l] == 0.0 && mult_lo[l] > cfg.active_tol;
    bool pinned_hi = p[l] == p_max && mult_hi[l] > cfg.active_tol;
    if (!pinned_lo && !pinned_hi) free_ix.push_back(l);
  }

  GainSens out;
  out.phi_q = Eigen::MatrixXd::Zero(L, L);
  out.phi_gain = Eigen::MatrixXd::Zero(L, L);
  const int F = static_cast<int>(free_ix.size());
  if (F == 0) return out;  // fully pinned: the optimum does not move

  Eigen::MatrixXd H, dG_dq, dG_dgain;
  ev.hessian(p, gains, q, H);
  ev.grad_jacobians(p, gains, q, dG_dq, dG_dgain);

  double h_norm = 0.0;
  for (int i = 0; i < L; ++i) {
    double row = 0.0;
    for (int j = 0; j < L; ++j) row += std::abs(H(i, j));
    h_norm = std::max(h_norm, row);
  }
  const double eps = cfg.ridge * (1.0 + h_norm);

  Eigen::MatrixXd M(F, F);
  for (int i = 0; i < F; ++i)
    for (int j = 0; j < F; ++j)
      M(i, j) = -H(free_ix[i], free_ix[j]) + (i == j ? eps : 0.0);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  if (es.info() != Eigen::Success) return std::nullopt;
  const double emin = es.eigenvalues()(0);
  const double emax = es.eigenvalues()(F - 1);
  if (!(emin > 0.0) || !(emax > 0.0) || emax / emin > 1e12)
    return std::nullopt;

  Eigen::MatrixXd rhs_q(F, L), rhs_g(F, L);
  for (int i = 0; i < F; ++i) {
    for (int m = 0; m < L; ++m) {
      rhs_q(i, m) = dG_dq(free_ix[i], m);
      rhs_g(i, m) = dG_dgain(free_ix[i], m);
    }
  }
  Eigen::VectorXd inv_eig(F);
  const double trunc = 1e-3 * emax;
  for (int i = 0; i < F; ++i) {
    double lam = es.eigenvalues()(i);
    inv_eig(i) = lam >= trunc ? 1.0 / lam : 0.0;
  }
  Eigen::MatrixXd pinv = es.eigenvectors() * inv_eig.asDiagonal() *
                         es.eigenvectors().transpose();
  Eigen::MatrixXd sol_q = pinv * rhs_q;
  Eigen::MatrixXd sol_g = pinv * rhs_g;

  for (int i = 0; i < F; ++i) {
    for (int m = 0; m < L; ++m) {
      out.phi_q(free_ix[i], m) = sol_q(i, m);
      out.phi_gain(free_ix[i], m) = sol_g(i, m);
    }
  }
  double largest =
      std::max(out.phi_q.cwiseAbs().maxCoeff(), out.phi_gain.cwiseAbs().maxCoeff());
  if (!std::isfinite(largest) || largest > cfg.sens_cap) return std::nullopt;
  return out;
}

}  // namespace detail

std::optional<Sensitivities> kkt_sensitivities(
    const PowerAllocation& p_star, std::span<const double> mult_lo,
    std::span<const double> mult_hi, const ChannelState& h,
    const QueueState& q, const Topology& topo, const PolicyConfig& cfg) {
  const int L = static_cast<int>(p_star.p.size());
  std::vector<double> gains = h.gains();
  LagrangianEvaluator ev(topo);
  auto core = detail::gain_sensitivities(ev, p_star.p, p_star.p_max, mult_lo,
                                         mult_hi, gains, q.q, cfg);
  if (!core) return std::nullopt;
  Sensitivities out;
  out.phi_q = std::move(core->phi_q);
  out.phi_gain = std::move(core->phi_gain);
  out.phi_h.resize(L, L);
  // dp* = P_x dx + P_y dy packed as Re[(P_x - i P_y) dh] with
  // P_x = phi_gain * 2x, P_y = phi_gain * 2y, i.e. phi_h = phi_gain 2 conj(h)
  for (int l = 0; l < L; ++l)
    for (int m = 0; m < L; ++m)
      out.phi_h(l, m) = out.phi_gain(l, m) * 2.0 * std::conj(h.h[m]);
  return out;
}

void mwq_gradient_step(PolicyState& state, const ChannelState& h,
                       const QueueState& q, const Topology& topo,
                       const PolicyConfig& cfg, double tau) {
  const int L = static_cast<int>(state.p.p.size());
  LagrangianEvaluator ev(topo);
  std::vector<double> gains = h.gains();
  std::vector<double> grad(L);
  const double kt = cfg.kappa * tau;
  for (int it = 0; it < cfg.iterations_per_slot; ++it) {
    ev.value_and_grad(state.p.p, gains, q.q, cfg.V, grad);
    for (int l = 0; l < L; ++l)
      state.p.p[l] = clamp_box(state.p.p[l] + kt * grad[l], state.p.p_max);
  }
  state.prev_h = h;
  state.prev_q = q;
}

namespace {

void quasi_multipliers(std::span<const double> p, double p_max,
                       std::span<const double> grad, std::vector<double>& lo,
                       std::vector<double>& hi) {
  const int L = static_cast<int>(p.size());
  lo.assign(L, 0.0);
  hi.assign(L, 0.0);
  for (int l = 0; l < L; ++l) {
    if (p[l] == 0.0)
      lo[l] = std::max(0.0, -grad[l]);
    else if (p[l] == p_max)
      hi[l] = std::max(0.0, grad[l]);
  }
}

}  // namespace

bool mwq_compensated_step(PolicyState& state, const ChannelState& h,
                          const QueueState& q, const Topology& topo,
                          const PolicyConfig& cfg, double tau) {
  const int L = static_cast<int>(state.p.p.size());
  LagrangianEvaluator ev(topo);
  std::vector<double> gains_prev = state.prev_h.gains();
  std::vector<double> grad(L);
  const double kt = cfg.kappa * tau;
  const double p_max = state.p.p_max;

  ev.value_and_grad(state.p.p, gains_prev, state.prev_q.q, cfg.V, grad);

  // Estimate the optimum's movement over the elapsed slot by integrating the
  // implicit-function field along the measurement increment. Increments are
  // taken in the gain domain (|dh|^2 carries first-order drift at slot-sized
  // fading jumps); substeps with a midpoint correction keep the curvature of
  // the optimum map from biasing the estimate.
  std::vector<double> dq(L), dgain(L);
  bool any_change = false;
  for (int m = 0; m < L; ++m) {
    dq[m] = q.q[m] - state.prev_q.q[m];
    dgain[m] = std::norm(h.h[m]) - std::norm(state.prev_h.h[m]);
    any_change = any_change || dq[m] != 0.0 || dgain[m] != 0.0;
  }

  const int steps = std::max(1, cfg.comp_substeps);
  std::vector<double> x = state.p.p;     // moving estimate of the optimum path
  std::vector<double> trial(L), g_here(L);
  std::vector<double> gains_a(L), q_a(L), gains_b(L), q_b(L);
  std::vector<double> lo(L), hi(L), cap(L);
  bool ok = true;

  // The optimum never exceeds the group backlog over V, so overshoot of the
  // estimate (extreme sensitivities near a fade floor) is clipped there.
  auto optimum_cap = [&](const std::vector<double>& q_at) {
    for (int n : topo.receivers()) {
      double sum = 0.0;
      for (int m : topo.links_to(n)) sum += q_at[m];
      double c = std::min(p_max, sum / cfg.V);
      for (int m : topo.links_to(n)) cap[m] = c;
    }
  };

  for (int j = 0; j < steps && ok && any_change; ++j) {
    double sa = static_cast<double>(j) / steps;
    double sb = static_cast<double>(j + 1) / steps;
    for (int m = 0; m < L; ++m) {
      gains_a[m] = gains_prev[m] + sa * dgain[m];
      q_a[m] = state.prev_q.q[m] + sa * dq[m];
      gains_b[m] = gains_prev[m] + sb * dgain[m];
      q_b[m] = state.prev_q.q[m] + sb * dq[m];
    }
    ev.value_and_grad(x, gains_a, q_a, cfg.V, g_here);
    quasi_multipliers(x, p_max, g_here, lo, hi);
    auto sa_sens =
        detail::gain_sensitivities(ev, x, p_max, lo, hi, gains_a, q_a, cfg);
    if (!sa_sens) {
      ok = false;
      break;
    }
    optimum_cap(q_b);
    for (int l = 0; l < L; ++l) {
      double move = 0.0;
      for (int m = 0; m < L; ++m)
        move += sa_sens->phi_q(l, m) * dq[m] / steps +
                sa_sens->phi_gain(l, m) * dgain[m] / steps;
      trial[l] = std::min(clamp_box(x[l] + move, p_max), cap[l]);
    }
    ev.value_and_grad(trial, gains_b, q_b, cfg.V, g_here);
    quasi_multipliers(trial, p_max, g_here, lo, hi);
    auto sb_sens =
        detail::gain_sensitivities(ev, trial, p_max, lo, hi, gains_b, q_b, cfg);
    if (sb_sens) {
      for (int l = 0; l < L; ++l) {
        double move = 0.0;
        for (int m = 0; m < L; ++m) {
          move += 0.5 * (sa_sens->phi_q(l, m) + sb_sens->phi_q(l, m)) *
                  dq[m] / steps;
          move += 0.5 * (sa_sens->phi_gain(l, m) + sb_sens->phi_gain(l, m)) *
                  dgain[m] / steps;
        }
        x[l] = std::min(clamp_box(x[l] + move, p_max), cap[l]);
      }
    } else {
      x = trial;
    }
  }

  bool fallback = !ok;
  for (int l = 0; l < L; ++l) {
    double comp = ok ? x[l] - state.p.p[l] : 0.0;
    double base = state.p.p[l] + kt * grad[l];
    state.p.p[l] = clamp_box(base + comp, p_max);
  }
  for (int it = 1; it < cfg.iterations_per_slot; ++it) {
    ev.value_and_grad(state.p.p, gains_prev, state.prev_q.q, cfg.V, grad);
    for (int l = 0; l < L; ++l)
      state.p.p[l] = clamp_box(state.p.p[l] + kt * grad[l], p_max);
  }
  state.prev_h = h;
  state.prev_q = q;
  return fallback;
}

PowerAllocation constant_power_policy(const PolicyConfig& cfg, double p_const,
                                      int link_count) {
  if (!(p_const >= 0.0) || p_const > cfg.p_max)
    throw std::invalid_argument("constant power outside [0, p_max]");
  return PowerAllocation{std::vector<double>(link_count, p_const), cfg.p_max};
}

TdmDecision tdm_policy(const ChannelState& h, const QueueState& q,
                       const Topology& topo, const PolicyConfig& cfg) {
  const int L = static_cast<int>(h.h.size());
  std::vector<double> gains = h.gains();
  TdmDecision out;
  out.p = PowerAllocation{std::vector<double>(L, 0.0), cfg.p_max};
  out.mu.mu.assign(L, 0.0);
  out.mu.sic_order = sic_decode_order(q, topo);

  double best_utility = 0.0;
  int best = -1;
  std::vector<double> cand(L);
  for (int l = 0; l < L; ++l) {
    double raw = q.q[l] / cfg.V - 1.0 / gains[l];
    cand[l] = clamp_box(raw, cfg.p_max);
    double u = q.q[l] * std::log1p(gains[l] * cand[l]) - cfg.V * cand[l];
    if (best < 0 || u > best_utility) {
      best_utility = u;
      best = l;
    }
  }
  out.selected_link = best;
  if (best >= 0) {
    out.p.p[best] = cand[best];
    out.mu.mu[best] = std::log1p(gains[best] * cand[best]);
  }
  return out;
}

double tracking_error(const PolicyState& state) {
  if (!state.p_star) throw std::logic_error("tracking_error: no equilibrium set");
  double e = 0.0;
  for (std::size_t l = 0; l < state.p.p.size(); ++l)
    e = std::max(e, std::abs(state.p.p[l] - state.p_star->p[l]));
  return e;
}

void set_equilibrium(PolicyState& state, const EquilibriumResult& eq) {
  state.p_star = eq.p;
  state.mult_lo = eq.mult_lo;
  state.mult_hi = eq.mult_hi;
  state.p_e.resize(state.p.p.size());
  for (std::size_t l = 0; l < state.p.p.size(); ++l)
    state.p_e[l] = state.p.p[l] - eq.p.p[l];
}

}  // namespace mwq
