#pragma once

#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mwq/rng.hpp"

namespace mwq {

/// Raised when a step operation receives non-finite state or noise.
struct model_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Link {
  int id;
  int tx;
  int rx;
};

/// Directed single-hop topology: L links over N nodes, with the links
/// grouped by receiving node. Every link belongs to exactly one receiver
/// group and link ids are 0..L-1.
class Topology {
 public:
  Topology(int node_count, std::vector<Link> links);

  int node_count() const { return node_count_; }
  int link_count() const { return static_cast<int>(links_.size()); }
  const std::vector<Link>& links() const { return links_; }

  /// Links terminating at node n, ordered by link id.
  const std::vector<int>& links_to(int node) const { return rev_map_[node]; }

  /// Nodes with at least one incoming link, ascending.
  const std::vector<int>& receivers() const { return receivers_; }

  /// Nodes with at least one outgoing link, ascending.
  const std::vector<int>& transmitters() const { return transmitters_; }

  /// The 5-node, 6-link network used throughout: links 0,1,4 terminate at
  /// node 2 and links 2,3,5 terminate at node 3.
  static Topology default_mesh();

  /// All links share one receiver (node = link_count).
  static Topology single_receiver(int link_count);

 private:
  int node_count_;
  std::vector<Link> links_;
  std::vector<std::vector<int>> rev_map_;
  std::vector<int> receivers_;
  std::vector<int> transmitters_;
};

/// Fading model: per-link correlation rate a_l (1/s), reflection floor h0
/// on the channel amplitude, and slot duration tau (s).
struct ChannelModel {
  std::vector<double> a;
  double h0 = 0.05;
  double tau = 1e-3;

  void validate(int link_count) const;
};

/// Complex gain per link; |h_l| >= h0 always.
struct ChannelState {
  std::vector<std::complex<double>> h;

  std::vector<double> gains() const;  // |h_l|^2
};

struct ArrivalModel {
  std::vector<double> lambda;  // packets/second, >= 0

  void validate(int link_count) const;
};

/// Fluid-valued nonnegative backlog per link (packets).
struct QueueState {
  std::vector<double> q;
};

/// One Euler step of the reflected fading process:
///   h' = reflect(h * (1 - a*tau/2) + sqrt(a*tau) * noise)
/// where reflect pushes any point inside the |h| = h0 circle radially back
/// onto it (and maps 0 to h0). Noise entries must have unit second moment
/// (independent real/imag parts of variance 1/2 each).
ChannelState channel_step(const ChannelState& state, const ChannelModel& model,
                          std::span<const std::complex<double>> noise);

/// Same, drawing the noise from the per-link channel substreams.
ChannelState channel_step(const ChannelState& state, const ChannelModel& model,
                          RngStreams& rng);

/// Independent Poisson(lambda_l * tau) counts, one per link.
std::vector<long> arrivals_step(const ArrivalModel& model, double tau,
                                RngStreams& rng);

/// Departures before arrivals: q' = max(0, q - mu*tau) + arrivals.
QueueState queue_step(const QueueState& q, const std::vector<double>& mu,
                      double tau, const std::vector<long>& arrivals);

/// Draw from the stationary law of the reflected fading process: a unit
/// complex normal projected onto {|h| >= h0}.
ChannelState stationary_channel_sample(const ChannelModel& model,
                                       int link_count, RandomStream& rng);

}  // namespace mwq
