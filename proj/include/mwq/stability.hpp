#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "mwq/parallel.hpp"
#include "mwq/policy.hpp"

namespace mwq {

/// Monte Carlo estimate with a 99% confidence half-width.
struct McEstimate {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double ci_half = std::numeric_limits<double>::quiet_NaN();
  long samples = 0;
};

/// Constants of the drift analysis. Scalar fields may be NaN until the
/// corresponding estimator has run; queue_bound reports which ones it needs.
struct StabilityConstants {
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double beta = std::numeric_limits<double>::quiet_NaN();
  double gamma_q = std::numeric_limits<double>::quiet_NaN();
  double gamma_h = std::numeric_limits<double>::quiet_NaN();
  double a_A = std::numeric_limits<double>::quiet_NaN();
  double lambda_max = std::numeric_limits<double>::quiet_NaN();
  double V = std::numeric_limits<double>::quiet_NaN();
  double kappa = std::numeric_limits<double>::quiet_NaN();
  McEstimate alpha_bar0;  // E[1/alpha]
  McEstimate gamma_bar0;  // E[1/(8(1 - gamma_h^2 a_A / (kappa alpha)))]
  McEstimate sigma_bar;   // E[1/S_min]
  McEstimate g_bar;       // E[g(S_min, S_max)]
};

struct AlphaConfig {
  int grid_samples = 256;  // low-discrepancy points over the power box
  int refine_iters = 40;   // compass refinement around the minimizer
};

/// Curvature floor of the objective over the power box at fixed (h, q):
/// the smallest value of -lambda_max(Hessian) over sampled p. Requires every
/// backlog >= 1; returns nullopt otherwise.
std::optional<double> estimate_alpha(const ChannelState& h, const QueueState& q,
                                     const Topology& topo, double p_max,
                                     const AlphaConfig& cfg = {});

/// Lipschitz constant estimate for the per-stage SINR ratios over the power
/// box: max over sampled pairs of |rho_k(p) - rho_k(p')| / |p - p'|_inf,
/// seeded with the exact corner directional limits. Deterministic and
/// nondecreasing in sample_count.
double estimate_beta(const ChannelState& h, const Topology& topo, double p_max,
                     int sample_count);

struct GammaEstimate {
  double gamma_q = 0.0;
  double gamma_h = 0.0;
  long skipped = 0;  // samples whose equilibrium solve failed
};

/// Empirical sup of the equilibrium sensitivities over sampled (h, q):
/// h from the stationary fading law, q uniform over [q_lo, q_hi]^L, with
/// central finite differences of the equilibrium solve.
GammaEstimate estimate_gammas(const Topology& topo, const ChannelModel& chan,
                              const PolicyConfig& cfg, double q_lo, double q_hi,
                              int sample_count, RandomStream& rng);

/// Termwise upper bound on the drift generator at the given joint state.
/// Exact state-dependent terms are evaluated as written; sensitivity matrices
/// enter through their norm bounds gamma_q/gamma_h.
double lyapunov_drift_bound(const std::vector<double>& p_e,
                            const ChannelState& h, const QueueState& q,
                            const StabilityConstants& constants,
                            const ChannelModel& chan, const ArrivalModel& arr,
                            const Topology& topo, const PolicyConfig& pcfg);

/// Long-run worst-queue bound
///   L(2 a_A (1+gamma_h^2) + gamma_q^2 + lambda_max)
///   + gamma_bar0 / a_A + alpha_bar0 gamma_q^2 lambda_max^2 / kappa
///   + V 2^(L lambda_max - 1) sigma_bar + g_bar.
/// Throws std::invalid_argument naming any constant still missing.
double queue_bound(const StabilityConstants& constants, int link_count,
                   double V);

struct StationarySamplingConfig {
  int sample_count = 4000;
  int evolve_steps = 64;      // SDE steps applied after the stationary draw
  double hypothesis_floor = 0.01;  // clamp for the gamma_bar0 denominator
  AlphaConfig alpha_cfg{48, 16};
  int beta_pairs = 32;
  int g_grid = 64;            // bivariate grid per axis
  int g_refine_iters = 24;
  std::optional<ChannelState> fixed_initial;  // degenerate-channel override
};

struct ScenarioExpectations {
  McEstimate gamma_bar0;
  McEstimate g_bar;
  long clamped = 0;  // samples where the step-size hypothesis failed
};

struct StationaryExpectations {
  McEstimate sigma_bar;
  McEstimate alpha_bar0;
  double mean_S_min = 0.0;
  std::vector<ScenarioExpectations> scenarios;  // one per (gamma_h, gamma_q)
};

/// Samples the stationary fading process and returns the Monte Carlo
/// expectations feeding queue_bound. One channel ensemble is shared across
/// all requested (gamma_h, gamma_q) scenarios.
StationaryExpectations estimate_stationary_expectations(
    const ChannelModel& chan, const Topology& topo, const PolicyConfig& pcfg,
    double lambda_max, const std::vector<std::pair<double, double>>& scenarios,
    const StationarySamplingConfig& cfg, std::uint64_t seed,
    Exec exec = Exec::Parallel);

struct BoundRow {
  double a_A;
  double gamma_h;
  double gamma_q;
  double bound;
  double sigma_bar;
  double alpha_bar0;
  double gamma_bar0;
  double g_bar;
  long clamped;
};

/// Queue bound over a fading-rate grid under assumed sensitivity scenarios;
/// the Monte Carlo constants are re-estimated at every a_A with the same
/// base seed. Rows are ordered (a_A index, scenario index).
std::vector<BoundRow> bound_sweep(
    const std::vector<double>& a_grid,
    const std::vector<std::pair<double, double>>& scenarios,
    const ChannelModel& chan_template, const Topology& topo, double lambda_max,
    double V, double kappa, const StationarySamplingConfig& cfg,
    std::uint64_t seed, Exec exec = Exec::Parallel);

}  // namespace mwq
