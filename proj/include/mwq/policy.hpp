#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mwq/rate_control.hpp"

namespace mwq {

struct PolicyConfig {
  double kappa = 500.0;        // gradient gain, 1/s
  double V = 1.0;              // power-delay tradeoff weight
  int iterations_per_slot = 1;
  double ridge = 1e-9;         // KKT solve regularization factor
  double oracle_tol = 1e-10;   // KKT residual target, scaled by max(1, |q|_inf)
  int oracle_max_iters = 5000;
  double p_max = 0.0;          // box cap; fill via literal_power_cap or config
  double active_tol = 1e-9;    // multiplier threshold that pins a coordinate
  double sens_cap = 1e8;       // sensitivity entries beyond this are garbage
  int comp_substeps = 4;       // compensation path-integration substeps

  void validate() const;
};

/// Per-slot controller state. prev_h/prev_q hold the measurement the last
/// step was taken against; the compensated step differences new measurements
/// against them.
struct PolicyState {
  PowerAllocation p;
  std::optional<PowerAllocation> p_star;
  std::vector<double> mult_lo;  // multipliers for p_l >= 0
  std::vector<double> mult_hi;  // multipliers for p_l <= p_max
  std::vector<double> p_e;      // p - p_star, valid when p_star is set
  ChannelState prev_h;
  QueueState prev_q;
};

struct EquilibriumResult {
  PowerAllocation p;
  std::vector<double> mult_lo;
  std::vector<double> mult_hi;
  double kkt_residual = 0.0;
  int iterations = 0;
};

/// Non-convergence carries the best iterate found and its residual.
struct oracle_error : std::runtime_error {
  oracle_error(std::string msg, EquilibriumResult best_iterate)
      : std::runtime_error(std::move(msg)), best(std::move(best_iterate)) {}
  EquilibriumResult best;
};

/// Equilibrium sensitivities: dp* = phi_q dq + Re[phi_h dh]. phi_gain is the
/// same h-response routed through the gains (phi_h = phi_gain * (2x - 2iy));
/// applying it to exact gain increments keeps the quadratic variation of the
/// fading process that the linear-in-dh form drops.
struct Sensitivities {
  Eigen::MatrixXd phi_q;     // L x L
  Eigen::MatrixXcd phi_h;    // L x L
  Eigen::MatrixXd phi_gain;  // L x L, d p* / d |h|^2
};

PolicyState make_policy_state(const PowerAllocation& p0, const ChannelState& h0,
                              const QueueState& q0);

/// One slot of the conventional iteration: iterations_per_slot projected
/// ascent steps of size kappa*tau at fixed (h, q). Records (h, q) as the
/// previous measurement.
void mwq_gradient_step(PolicyState& state, const ChannelState& h,
                       const QueueState& q, const Topology& topo,
                       const PolicyConfig& cfg, double tau);

/// One slot of the compensated iteration. The ascent direction and the
/// sensitivities are evaluated at the previously recorded measurement; the
/// movement of the optimum over the elapsed slot is estimated from the
/// measurement increments (dh, dq) and added, so a converged iterate lands
/// on the optimum of the new measurement. Falls back to the plain gradient
/// step (returns true) when the sensitivity solve is unavailable.
bool mwq_compensated_step(PolicyState& state, const ChannelState& h,
                          const QueueState& q, const Topology& topo,
                          const PolicyConfig& cfg, double tau);

/// Box-constrained maximizer of the objective at fixed (h, q): projected
/// gradient ascent with a Barzilai-Borwein trial step and backtracking line
/// search. Throws oracle_error when the residual target is not met within
/// oracle_max_iters.
EquilibriumResult equilibrium_oracle(const ChannelState& h, const QueueState& q,
                                     const Topology& topo,
                                     const PolicyConfig& cfg,
                                     const PowerAllocation* warm_start = nullptr);

/// Implicit-function sensitivities of the equilibrium at (p_star, h, q).
/// Coordinates sitting on a box face with a multiplier above active_tol are
/// pinned (zero rows); the free block solves (-H + ridge I) X = dG/d(param).
/// Returns nullopt when the regularized system is still too ill-conditioned
/// (condition number above 1e12).
std::optional<Sensitivities> kkt_sensitivities(
    const PowerAllocation& p_star, std::span<const double> mult_lo,
    std::span<const double> mult_hi, const ChannelState& h,
    const QueueState& q, const Topology& topo, const PolicyConfig& cfg);

/// Equal power on every link.
PowerAllocation constant_power_policy(const PolicyConfig& cfg, double p_const,
                                      int link_count);

struct TdmDecision {
  PowerAllocation p;
  RateAllocation mu;
  int selected_link = -1;
};

/// Single-link policy: each link's candidate power is the clamped
/// closed-form q/V - 1/|h|^2; the link with the best utility
/// q*log(1+|h|^2 p) - V*p wins (ties to the lowest id) and transmits alone.
TdmDecision tdm_policy(const ChannelState& h, const QueueState& q,
                       const Topology& topo, const PolicyConfig& cfg);

/// Max-norm distance between the iterate and the tracked equilibrium.
double tracking_error(const PolicyState& state);

/// Stores the tracked equilibrium and refreshes p_e.
void set_equilibrium(PolicyState& state, const EquilibriumResult& eq);

namespace detail {

struct OracleScratch {
  std::vector<double> p, grad, grad_old, trial, diff_p, diff_g;
};

/// Allocation-free core used by the simulator's hot loop.
EquilibriumResult solve_equilibrium(LagrangianEvaluator& ev,
                                    std::span<const double> gains,
                                    std::span<const double> q,
                                    const PolicyConfig& cfg,
                                    const double* warm_start,
                                    OracleScratch& scratch);

double kkt_residual(std::span<const double> p, std::span<const double> grad,
                    double p_max);

}  // namespace detail
}  // namespace mwq
