#include "mwq/net_model.hpp"

#include <algorithm>
#include <cmath>

namespace mwq {

Topology::Topology(int node_count, std::vector<Link> links)
    : node_count_(node_count), links_(std::move(links)) {
  if (node_count <= 0) throw model_error("topology: node_count must be positive");
  rev_map_.assign(node_count, {});
  std::vector<bool> seen(links_.size(), false);
  std::vector<bool> sends(node_count, false);
  for (const Link& l : links_) {
    if (l.id < 0 || l.id >= static_cast<int>(links_.size()) || seen[l.id])
      throw model_error("topology: link ids must be 0..L-1 and unique");
    seen[l.id] = true;
    if (l.tx < 0 || l.tx >= node_count || l.rx < 0 || l.rx >= node_count)
      throw model_error("topology: link endpoint out of range");
    if (l.tx == l.rx) throw model_error("topology: self links not allowed");
    rev_map_[l.rx].push_back(l.id);
    sends[l.tx] = true;
  }
  std::sort(links_.begin(), links_.end(),
            [](const Link& a, const Link& b) { return a.id < b.id; });
  for (int n = 0; n < node_count; ++n) {
    std::sort(rev_map_[n].begin(), rev_map_[n].end());
    if (!rev_map_[n].empty()) receivers_.push_back(n);
    if (sends[n]) transmitters_.push_back(n);
  }
}

Topology Topology::default_mesh() {
  return Topology(5, {{0, 0, 2}, {1, 1, 2}, {2, 0, 3}, {3, 1, 3}, {4, 4, 2}, {5, 4, 3}});
}

Topology Topology::single_receiver(int link_count) {
  std::vector<Link> links;
  links.reserve(link_count);
  for (int l = 0; l < link_count; ++l) links.push_back({l, l, link_count});
  return Topology(link_count + 1, std::move(links));
}

void ChannelModel::validate(int link_count) const {
  if (static_cast<int>(a.size()) != link_count)
    throw model_error("channel: need one correlation rate per link");
  for (double al : a)
    if (!(al >= 0.0) || !std::isfinite(al))
      throw model_error("channel: correlation rates must be finite and >= 0");
  if (!(h0 > 0.0)) throw model_error("channel: h0 must be positive");
  if (!(tau > 0.0)) throw model_error("channel: tau must be positive");
}

std::vector<double> ChannelState::gains() const {
  std::vector<double> g(h.size());
  for (std::size_t l = 0; l < h.size(); ++l) g[l] = std::norm(h[l]);
  return g;
}

void ArrivalModel::validate(int link_count) const {
  if (static_cast<int>(lambda.size()) != link_count)
    throw model_error("arrivals: need one intensity per link");
  for (double v : lambda)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw model_error("arrivals: intensities must be finite and >= 0");
}

namespace {

std::complex<double> reflect(std::complex<double> z, double h0) {
  double mag = std::abs(z);
  if (mag >= h0) return z;
  if (mag == 0.0) return {h0, 0.0};
  std::complex<double> s = z * (h0 / mag);
  // rounding can land one ulp inside the disc; the floor is a hard invariant
  while (std::abs(s) < h0)
    s *= 1.0 + 4.0 * std::numeric_limits<double>::epsilon();
  return s;
}

}  // namespace

ChannelState channel_step(const ChannelState& state, const ChannelModel& model,
                          std::span<const std::complex<double>> noise) {
  const std::size_t L = state.h.size();
  if (noise.size() != L || model.a.size() != L)
    throw model_error("channel_step: dimension mismatch");
  ChannelState next;
  next.h.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    const std::complex<double> hl = state.h[l];
    const std::complex<double> nl = noise[l];
    if (!std::isfinite(hl.real()) || !std::isfinite(hl.imag()) ||
        !std::isfinite(nl.real()) || !std::isfinite(nl.imag()))
      throw model_error("channel_step: non-finite state or noise");
    const double at = model.a[l] * model.tau;
    std::complex<double> raw = hl * (1.0 - 0.5 * at) + std::sqrt(at) * nl;
    next.h[l] = reflect(raw, model.h0);
  }
  return next;
}

ChannelState channel_step(const ChannelState& state, const ChannelModel& model,
                          RngStreams& rng) {
  std::vector<std::complex<double>> noise(state.h.size());
  for (std::size_t l = 0; l < noise.size(); ++l)
    noise[l] = rng.channel[l].complex_normal_unit();
  return channel_step(state, model, noise);
}

std::vector<long> arrivals_step(const ArrivalModel& model, double tau,
                                RngStreams& rng) {
  std::vector<long> counts(model.lambda.size());
  for (std::size_t l = 0; l < counts.size(); ++l) {
    double mean = model.lambda[l] * tau;
    if (!std::isfinite(mean)) throw model_error("arrivals_step: non-finite mean");
    counts[l] = rng.arrival[l].poisson(mean);
  }
  return counts;
}

QueueState queue_step(const QueueState& q, const std::vector<double>& mu,
                      double tau, const std::vector<long>& arrivals) {
  QueueState next;
  next.q.resize(q.q.size());
  for (std::size_t l = 0; l < q.q.size(); ++l) {
    double drained = q.q[l] - mu[l] * tau;
    next.q[l] = (drained > 0.0 ? drained : 0.0) + static_cast<double>(arrivals[l]);
  }
  return next;
}

ChannelState stationary_channel_sample(const ChannelModel& model,
                                       int link_count, RandomStream& rng) {
  ChannelState s;
  s.h.resize(link_count);
  for (int l = 0; l < link_count; ++l)
    s.h[l] = reflect(rng.complex_normal_unit(), model.h0);
  return s;
}

}  // namespace mwq
