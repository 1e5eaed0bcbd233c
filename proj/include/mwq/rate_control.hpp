#pragma once

#include <Eigen/Dense>
#include <span>
#include <stdexcept>
#include <vector>

#include "mwq/net_model.hpp"

namespace mwq {

/// Raised when an exact check is asked for a receiver group too large to
/// enumerate.
struct capability_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Normalized transmit power per link, boxed to [0, p_max].
struct PowerAllocation {
  std::vector<double> p;
  double p_max;
};

/// Rates (nats/second) plus the successive-decoding order per receiver node
/// that attains them.
struct RateAllocation {
  std::vector<double> mu;
  std::vector<std::vector<int>> sic_order;  // indexed by node, empty if none
};

/// Default power cap 2^(L*lambda_max) / h0^2.
double literal_power_cap(int link_count, double lambda_max, double h0);

/// Decoding order per receiver: backlog descending, ties by lower link id.
std::vector<std::vector<int>> sic_decode_order(const QueueState& q,
                                               const Topology& topo);

/// Queue-greedy vertex of the per-receiver polymatroid region: the link with
/// the largest backlog is decoded last (sees no interference), each earlier
/// stage gets the marginal log increment.
RateAllocation rate_allocation(const PowerAllocation& p, const ChannelState& h,
                               const QueueState& q, const Topology& topo);

/// True iff every nonempty per-receiver subset S satisfies
///   sum_{l in S} mu_l <= log(1 + sum_{l in S} |h_l|^2 p_l) + tol.
/// Receiver groups larger than 20 links are rejected.
bool capacity_member(const RateAllocation& mu, const PowerAllocation& p,
                     const ChannelState& h, const Topology& topo, double tol);

/// Objective sum_l q_l mu_l(p) - V sum_l p_l with the queue-greedy rates.
double lagrangian(const PowerAllocation& p, const ChannelState& h,
                  const QueueState& q, const Topology& topo, double V);

/// Analytic gradient of the objective in p, with the decoding order frozen
/// at the current q.
std::vector<double> grad_lagrangian(const PowerAllocation& p,
                                    const ChannelState& h, const QueueState& q,
                                    const Topology& topo, double V);

/// Analytic Hessian (symmetric, block diagonal across receivers).
Eigen::MatrixXd hessian_lagrangian(const PowerAllocation& p,
                                   const ChannelState& h, const QueueState& q,
                                   const Topology& topo, double V);

/// Componentwise clamp onto [0, p_max].
PowerAllocation project_box(std::vector<double> raw, double p_max);

/// Reusable evaluator over a fixed topology; operates on raw spans
/// (gains = |h_l|^2) and keeps its scratch buffers, so repeated calls do not
/// allocate. All inputs are per-link, length L.
class LagrangianEvaluator {
 public:
  explicit LagrangianEvaluator(const Topology& topo);

  double value(std::span<const double> p, std::span<const double> gains,
               std::span<const double> q, double V);

  /// Returns the objective and fills grad (length L).
  double value_and_grad(std::span<const double> p,
                        std::span<const double> gains,
                        std::span<const double> q, double V,
                        std::span<double> grad);

  /// Fills the L x L Hessian (resized as needed).
  void hessian(std::span<const double> p, std::span<const double> gains,
               std::span<const double> q, Eigen::MatrixXd& H);

  /// Fills rates (length L) for the queue-greedy vertex.
  void rates(std::span<const double> p, std::span<const double> gains,
             std::span<const double> q, std::span<double> mu);

  /// d(grad)/dq and d(grad)/d(gain): L x L blocks used by the equilibrium
  /// sensitivity solve. Entries outside a receiver block are zero.
  void grad_jacobians(std::span<const double> p, std::span<const double> gains,
                      std::span<const double> q, Eigen::MatrixXd& dG_dq,
                      Eigen::MatrixXd& dG_dgain);

  const Topology& topology() const { return *topo_; }

 private:
  void sort_group(const std::vector<int>& group, std::span<const double> q);
  void prefixes(std::span<const double> p, std::span<const double> gains,
                int K);

  const Topology* topo_;
  std::vector<int> order_;       // sorted link ids of the current group
  std::vector<double> prefix_;   // S_k, k = 1..K
  std::vector<double> logs_;     // log1p(S_k)
  std::vector<double> dq_;       // q_{pi(k)} - q_{pi(k+1)}
  std::vector<double> suffix1_;  // sum_{k>=j} dq_k / (1+S_k)
  std::vector<double> suffix2_;  // sum_{k>=j} dq_k / (1+S_k)^2
};

}  // namespace mwq
