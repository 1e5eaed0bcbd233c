#pragma once

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mwq/config.hpp"

namespace mwq {

struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string note;
};

using GradFn = std::function<std::vector<double>(
    const PowerAllocation&, const ChannelState&, const QueueState&,
    const Topology&, double)>;

struct ValidationOptions {
  std::uint64_t seed = 13579;
  bool quick = false;      // smaller Monte Carlo sizes for unit tests
  GradFn grad_override;    // hook for mutation tests; default analytic gradient
};

/// Runs every invariant check. Sample sizes follow opts.quick; everything is
/// deterministic in opts.seed.
std::vector<CheckResult> run_validation(const ExperimentSpec& spec,
                                        const ValidationOptions& opts = {});

bool all_passed(const std::vector<CheckResult>& checks);

nlohmann::json validation_report(const std::vector<CheckResult>& checks);

/// NaN-tolerant field equality of two run summaries (bit-stable contract).
bool summaries_identical(const RunSummary& a, const RunSummary& b);

}  // namespace mwq
