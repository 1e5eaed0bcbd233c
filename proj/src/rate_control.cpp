#include "mwq/rate_control.hpp"

#include <algorithm>
#include <cmath>

namespace mwq {

double literal_power_cap(int link_count, double lambda_max, double h0) {
  return std::exp2(static_cast<double>(link_count) * lambda_max) / (h0 * h0);
}

LagrangianEvaluator::LagrangianEvaluator(const Topology& topo) : topo_(&topo) {
  int L = topo.link_count();
  order_.reserve(L);
  prefix_.resize(L + 1);
  logs_.resize(L + 1);
  dq_.resize(L + 1);
  suffix1_.resize(L + 2);
  suffix2_.resize(L + 2);
}

void LagrangianEvaluator::sort_group(const std::vector<int>& group,
                                     std::span<const double> q) {
  order_.assign(group.begin(), group.end());
  std::sort(order_.begin(), order_.end(), [&](int a, int b) {
    if (q[a] != q[b]) return q[a] > q[b];
    return a < b;
  });
}

void LagrangianEvaluator::prefixes(std::span<const double> p,
                                   std::span<const double> gains, int K) {
  double s = 0.0;
  prefix_[0] = 0.0;
  logs_[0] = 0.0;
  for (int k = 1; k <= K; ++k) {
    int l = order_[k - 1];
    s += gains[l] * p[l];
    prefix_[k] = s;
    logs_[k] = std::log1p(s);
  }
}

double LagrangianEvaluator::value(std::span<const double> p,
                                  std::span<const double> gains,
                                  std::span<const double> q, double V) {
  // accumulate in decode order so the value is exactly label-independent
  double total = 0.0;
  for (int n : topo_->receivers()) {
    const auto& group = topo_->links_to(n);
    sort_group(group, q);
    int K = static_cast<int>(order_.size());
    prefixes(p, gains, K);
    for (int k = 1; k <= K; ++k) {
      int l = order_[k - 1];
      total += q[l] * (logs_[k] - logs_[k - 1]) - V * p[l];
    }
  }
  return total;
}

double LagrangianEvaluator::value_and_grad(std::span<const double> p,
                                           std::span<const double> gains,
                                           std::span<const double> q, double V,
                                           std::span<double> grad) {
  double total = 0.0;
  for (std::size_t l = 0; l < p.size(); ++l) grad[l] = -V;
  for (int n : topo_->receivers()) {
    const auto& group = topo_->links_to(n);
    sort_group(group, q);
    int K = static_cast<int>(order_.size());
    prefixes(p, gains, K);
    for (int k = 1; k <= K; ++k) {
      int l = order_[k - 1];
      total += q[l] * (logs_[k] - logs_[k - 1]) - V * p[l];
      dq_[k] = q[l] - (k < K ? q[order_[k]] : 0.0);
    }
    suffix1_[K + 1] = 0.0;
    for (int k = K; k >= 1; --k)
      suffix1_[k] = suffix1_[k + 1] + dq_[k] / (1.0 + prefix_[k]);
    for (int j = 1; j <= K; ++j) {
      int l = order_[j - 1];
      grad[l] += gains[l] * suffix1_[j];
    }
  }
  return total;
}

void LagrangianEvaluator::hessian(std::span<const double> p,
                                  std::span<const double> gains,
                                  std::span<const double> q,
                                  Eigen::MatrixXd& H) {
  const int L = static_cast<int>(p.size());
  H.setZero(L, L);
  for (int n : topo_->receivers()) {
    const auto& group = topo_->links_to(n);
    sort_group(group, q);
    int K = static_cast<int>(order_.size());
    prefixes(p, gains, K);
    for (int k = 1; k <= K; ++k)
      dq_[k] = q[order_[k - 1]] - (k < K ? q[order_[k]] : 0.0);
    suffix2_[K + 1] = 0.0;
    for (int k = K; k >= 1; --k) {
      double den = 1.0 + prefix_[k];
      suffix2_[k] = suffix2_[k + 1] + dq_[k] / (den * den);
    }
    for (int j = 1; j <= K; ++j) {
      int lj = order_[j - 1];
      for (int m = j; m <= K; ++m) {
        int lm = order_[m - 1];
        double v = -gains[lj] * gains[lm] * suffix2_[m];
        H(lj, lm) = v;
        H(lm, lj) = v;
      }
    }
  }
}

void LagrangianEvaluator::rates(std::span<const double> p,
                                std::span<const double> gains,
                                std::span<const double> q,
                                std::span<double> mu) {
  for (std::size_t l = 0; l < mu.size(); ++l) mu[l] = 0.0;
  for (int n : topo_->receivers()) {
    const auto& group = topo_->links_to(n);
    sort_group(group, q);
    int K = static_cast<int>(order_.size());
    prefixes(p, gains, K);
    for (int k = 1; k <= K; ++k) mu[order_[k - 1]] = logs_[k] - logs_[k - 1];
  }
}

void LagrangianEvaluator::grad_jacobians(std::span<const double> p,
                                         std::span<const double> gains,
                                         std::span<const double> q,
                                         Eigen::MatrixXd& dG_dq,
                                         Eigen::MatrixXd& dG_dgain) {
  const int L = static_cast<int>(p.size());
  dG_dq.setZero(L, L);
  dG_dgain.setZero(L, L);
  for (int n : topo_->receivers()) {
    const auto& group = topo_->links_to(n);
    sort_group(group, q);
    int K = static_cast<int>(order_.size());
    prefixes(p, gains, K);
    for (int k = 1; k <= K; ++k)
      dq_[k] = q[order_[k - 1]] - (k < K ? q[order_[k]] : 0.0);
    suffix1_[K + 1] = 0.0;
    suffix2_[K + 1] = 0.0;
    for (int k = K; k >= 1; --k) {
      double den = 1.0 + prefix_[k];
      suffix1_[k] = suffix1_[k + 1] + dq_[k] / den;
      suffix2_[k] = suffix2_[k + 1] + dq_[k] / (den * den);
    }
    // grad_{pi(j)} = gain_{pi(j)} * sum_{k>=j} dq_k/(1+S_k) - V, so the
    // q-derivative telescopes: q_{pi(m)} enters dq_m with +1 and dq_{m-1}
    // with -1.
    for (int j = 1; j <= K; ++j) {
      int lj = order_[j - 1];
      for (int m = j; m <= K; ++m) {
        int lm = order_[m - 1];
        double dj = 1.0 / (1.0 + prefix_[m]);
        if (m > j) dj -= 1.0 / (1.0 + prefix_[m - 1]);
        dG_dq(lj, lm) = gains[lj] * dj;
      }
      for (int m = 1; m <= K; ++m) {
        int lm = order_[m - 1];
        double v = -gains[lj] * p[lm] * suffix2_[std::max(j, m)];
        if (m == j) v += suffix1_[j];
        dG_dgain(lj, lm) = v;
      }
    }
  }
}

std::vector<std::vector<int>> sic_decode_order(const QueueState& q,
                                               const Topology& topo) {
  std::vector<std::vector<int>> order(topo.node_count());
  for (int n : topo.receivers()) {
    order[n] = topo.links_to(n);
    std::sort(order[n].begin(), order[n].end(), [&](int a, int b) {
      if (q.q[a] != q.q[b]) return q.q[a] > q.q[b];
      return a < b;
    });
  }
  return order;
}

RateAllocation rate_allocation(const PowerAllocation& p, const ChannelState& h,
                               const QueueState& q, const Topology& topo) {
  RateAllocation out;
  out.mu.resize(p.p.size());
  out.sic_order = sic_decode_order(q, topo);
  LagrangianEvaluator ev(topo);
  ev.rates(p.p, h.gains(), q.q, out.mu);
  return out;
}

bool capacity_member(const RateAllocation& mu, const PowerAllocation& p,
                     const ChannelState& h, const Topology& topo, double tol) {
  std::vector<double> gains = h.gains();
  for (int n : topo.receivers()) {
    const auto& group = topo.links_to(n);
    int K = static_cast<int>(group.size());
    if (K > 20)
      throw capability_error("capacity_member: receiver group above 20 links");
    for (unsigned mask = 1; mask < (1u << K); ++mask) {
      double mu_sum = 0.0;
      double gp_sum = 0.0;
      for (int i = 0; i < K; ++i) {
        if (mask & (1u << i)) {
          int l = group[i];
          mu_sum += mu.mu[l];
          gp_sum += gains[l] * p.p[l];
        }
      }
      if (mu_sum > std::log1p(gp_sum) + tol) return false;
    }
  }
  return true;
}

double lagrangian(const PowerAllocation& p, const ChannelState& h,
                  const QueueState& q, const Topology& topo, double V) {
  LagrangianEvaluator ev(topo);
  return ev.value(p.p, h.gains(), q.q, V);
}

std::vector<double> grad_lagrangian(const PowerAllocation& p,
                                    const ChannelState& h, const QueueState& q,
                                    const Topology& topo, double V) {
  std::vector<double> g(p.p.size());
  LagrangianEvaluator ev(topo);
  ev.value_and_grad(p.p, h.gains(), q.q, V, g);
  return g;
}

Eigen::MatrixXd hessian_lagrangian(const PowerAllocation& p,
                                   const ChannelState& h, const QueueState& q,
                                   const Topology& topo, double V) {
  (void)V;  // the linear power term has no curvature
  Eigen::MatrixXd H;
  LagrangianEvaluator ev(topo);
  ev.hessian(p.p, h.gains(), q.q, H);
  return H;
}

PowerAllocation project_box(std::vector<double> raw, double p_max) {
  for (double& x : raw) {
    if (x < 0.0)
      x = 0.0;
    else if (x > p_max)
      x = p_max;
  }
  return PowerAllocation{std::move(raw), p_max};
}

}  // namespace mwq
