#include "mwq/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mwq/output.hpp"

namespace mwq {

namespace {

struct Entry {
  std::string value;
  int line;
};

using SectionMap = std::map<std::string, std::map<std::string, Entry>>;

const std::map<std::string, std::set<std::string>> kSchema = {
    {"topology", {"nodes", "link_tx", "link_rx"}},
    {"channel", {"a", "h0", "tau"}},
    {"arrivals", {"lambda"}},
    {"policy",
     {"type", "kappa", "v", "iterations_per_slot", "ridge", "oracle_tol",
      "oracle_max_iters", "p_max", "p_const"}},
    {"run",
     {"horizon", "warmup", "seed", "seeds", "track_equilibrium", "timeseries",
      "decimate", "a_grid", "v_grid", "bound_a_grid", "gamma_scenarios",
      "policies", "lambda_max", "mc_samples", "hypothesis_floor"}},
};

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& origin, int line,
                       const std::string& msg) {
  std::ostringstream os;
  os << origin << ":" << line << ": " << msg;
  throw config_error(os.str());
}

SectionMap tokenize(const std::string& text, const std::string& origin) {
  SectionMap out;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::size_t cut = raw.find_first_of("#;");
    std::string line = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(origin, line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!kSchema.count(section))
        fail(origin, line_no, "unknown section [" + section + "]");
      out[section];
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(origin, line_no, "expected key = value");
    if (section.empty()) fail(origin, line_no, "key outside any section");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!kSchema.at(section).count(key))
      fail(origin, line_no, "unknown key '" + key + "' in [" + section + "]");
    if (out[section].count(key))
      fail(origin, line_no, "duplicate key '" + key + "'");
    out[section][key] = Entry{value, line_no};
  }
  return out;
}

class Reader {
 public:
  Reader(SectionMap sections, std::string origin)
      : sections_(std::move(sections)), origin_(std::move(origin)) {}

  bool has(const std::string& sec, const std::string& key) const {
    auto s = sections_.find(sec);
    return s != sections_.end() && s->second.count(key);
  }

  const Entry& entry(const std::string& sec, const std::string& key) const {
    return sections_.at(sec).at(key);
  }

  double number(const std::string& sec, const std::string& key,
                double fallback) const {
    if (!has(sec, key)) return fallback;
    const Entry& e = entry(sec, key);
    return parse_number(e.value, e.line, key);
  }

  long integer(const std::string& sec, const std::string& key,
               long fallback) const {
    if (!has(sec, key)) return fallback;
    const Entry& e = entry(sec, key);
    double v = parse_number(e.value, e.line, key);
    long r = std::lround(v);
    if (static_cast<double>(r) != v)
      fail(origin_, e.line, "'" + key + "' must be an integer");
    return r;
  }

  bool boolean(const std::string& sec, const std::string& key,
               bool fallback) const {
    if (!has(sec, key)) return fallback;
    const Entry& e = entry(sec, key);
    std::string v = e.value;
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(origin_, e.line, "'" + key + "' must be a boolean");
  }

  std::string text(const std::string& sec, const std::string& key,
                   const std::string& fallback) const {
    return has(sec, key) ? entry(sec, key).value : fallback;
  }

  std::vector<double> number_list(const std::string& sec,
                                  const std::string& key) const {
    const Entry& e = entry(sec, key);
    std::vector<double> out;
    for (const std::string& tok : split(e.value, ','))
      out.push_back(parse_number(tok, e.line, key));
    if (out.empty()) fail(origin_, e.line, "'" + key + "' list is empty");
    return out;
  }

  /// Scalar broadcast or per-link comma list.
  std::vector<double> per_link(const std::string& sec, const std::string& key,
                               double fallback, int link_count) const {
    if (!has(sec, key)) return std::vector<double>(link_count, fallback);
    std::vector<double> vals = number_list(sec, key);
    if (vals.size() == 1) return std::vector<double>(link_count, vals[0]);
    if (static_cast<int>(vals.size()) != link_count)
      fail(origin_, entry(sec, key).line,
           "'" + key + "' needs 1 or " + std::to_string(link_count) +
               " values");
    return vals;
  }

  double parse_number(const std::string& tok, int line,
                      const std::string& key) const {
    std::string t = trim(tok);
    if (t.empty()) fail(origin_, line, "'" + key + "' has an empty value");
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size())
      fail(origin_, line, "'" + key + "' is not a number: '" + t + "'");
    return v;
  }

  static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == sep) {
        out.push_back(trim(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    out.push_back(trim(cur));
    if (out.size() == 1 && out[0].empty()) out.clear();
    return out;
  }

  const std::string& origin() const { return origin_; }

 private:
  SectionMap sections_;
  std::string origin_;
};

[[noreturn]] void bad_value(const std::string& section, const std::string& key,
                            const std::string& why) {
  throw config_error("invalid value for [" + section + "] " + key + ": " + why);
}

}  // namespace

std::vector<std::uint64_t> ExperimentSpec::seeds() const {
  std::vector<std::uint64_t> out;
  out.reserve(seed_count);
  for (int i = 0; i < seed_count; ++i) out.push_back(sim.seed + i);
  return out;
}

double ExperimentSpec::effective_lambda_max() const {
  if (std::isfinite(lambda_max)) return lambda_max;
  double m = 0.0;
  for (double l : sim.arrivals.lambda) m = std::max(m, l);
  return m;
}

ExperimentSpec default_spec() { return parse_config_text("", "<default>"); }

ExperimentSpec parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

ExperimentSpec parse_config_text(const std::string& text,
                                 const std::string& origin) {
  Reader r(tokenize(text, origin), origin);
  ExperimentSpec spec;

  // topology first: everything per-link depends on L
  bool has_tx = r.has("topology", "link_tx");
  bool has_rx = r.has("topology", "link_rx");
  if (has_tx != has_rx)
    throw config_error("[topology] link_tx and link_rx must come together");
  if (has_tx) {
    std::vector<double> tx = r.number_list("topology", "link_tx");
    std::vector<double> rx = r.number_list("topology", "link_rx");
    if (tx.size() != rx.size())
      bad_value("topology", "link_tx", "tx/rx lists differ in length");
    int max_node = 0;
    std::vector<Link> links;
    for (std::size_t i = 0; i < tx.size(); ++i) {
      links.push_back({static_cast<int>(i), static_cast<int>(tx[i]),
                       static_cast<int>(rx[i])});
      max_node = std::max({max_node, links.back().tx, links.back().rx});
    }
    long nodes = r.integer("topology", "nodes", max_node + 1);
    try {
      spec.sim.topo = Topology(static_cast<int>(nodes), std::move(links));
    } catch (const model_error& e) {
      throw config_error(std::string("[topology] ") + e.what());
    }
  } else if (r.has("topology", "nodes")) {
    if (r.integer("topology", "nodes", 5) != 5)
      throw config_error("[topology] custom node count requires link lists");
  }
  const int L = spec.sim.topo.link_count();

  spec.sim.channel.a = r.per_link("channel", "a", 200.0, L);
  spec.sim.channel.h0 = r.number("channel", "h0", 0.05);
  spec.sim.channel.tau = r.number("channel", "tau", 1e-3);
  if (!(spec.sim.channel.h0 > 0)) bad_value("channel", "h0", "must be > 0");
  if (!(spec.sim.channel.tau > 0)) bad_value("channel", "tau", "must be > 0");
  for (double a : spec.sim.channel.a)
    if (!(a >= 0)) bad_value("channel", "a", "rates must be >= 0");

  spec.sim.arrivals.lambda = r.per_link("arrivals", "lambda", 20.0, L);
  for (double l : spec.sim.arrivals.lambda)
    if (!(l >= 0)) bad_value("arrivals", "lambda", "must be >= 0");

  spec.sim.policy = policy_from_name(r.text("policy", "type", "mwq"));
  PolicyConfig& pc = spec.sim.policy_cfg;
  pc.kappa = r.number("policy", "kappa", 500.0);
  pc.V = r.number("policy", "v", 1.0);
  pc.iterations_per_slot =
      static_cast<int>(r.integer("policy", "iterations_per_slot", 1));
  pc.ridge = r.number("policy", "ridge", 1e-9);
  pc.oracle_tol = r.number("policy", "oracle_tol", 1e-10);
  pc.oracle_max_iters =
      static_cast<int>(r.integer("policy", "oracle_max_iters", 5000));
  if (!(pc.kappa > 0)) bad_value("policy", "kappa", "must be > 0");
  if (!(pc.V > 0)) bad_value("policy", "v", "must be > 0");
  if (pc.iterations_per_slot < 1)
    bad_value("policy", "iterations_per_slot", "must be >= 1");
  if (!(pc.ridge >= 0)) bad_value("policy", "ridge", "must be >= 0");
  if (!(pc.oracle_tol > 0)) bad_value("policy", "oracle_tol", "must be > 0");
  if (pc.oracle_max_iters < 1)
    bad_value("policy", "oracle_max_iters", "must be >= 1");

  spec.sim.horizon = r.number("run", "horizon", 60.0);
  spec.sim.warmup = r.number("run", "warmup", 5.0);
  spec.sim.seed = static_cast<std::uint64_t>(r.integer("run", "seed", 1));
  spec.seed_count = static_cast<int>(r.integer("run", "seeds", 1));
  spec.sim.track_equilibrium = r.boolean("run", "track_equilibrium", false);
  spec.sim.emit_timeseries = r.boolean("run", "timeseries", false);
  spec.sim.decimate = static_cast<int>(r.integer("run", "decimate", 100));
  spec.lambda_max = r.number("run", "lambda_max",
                             std::numeric_limits<double>::quiet_NaN());
  spec.mc_samples = static_cast<int>(r.integer("run", "mc_samples", 4000));
  spec.hypothesis_floor = r.number("run", "hypothesis_floor", 0.01);
  if (!(spec.sim.horizon >= 0)) bad_value("run", "horizon", "must be >= 0");
  if (!(spec.sim.warmup >= 0) || spec.sim.warmup > spec.sim.horizon)
    bad_value("run", "warmup", "needs horizon >= warmup >= 0");
  if (spec.sim.decimate < 1) bad_value("run", "decimate", "must be >= 1");
  if (spec.seed_count < 1) bad_value("run", "seeds", "must be >= 1");
  if (spec.mc_samples < 2) bad_value("run", "mc_samples", "must be >= 2");
  if (!(spec.hypothesis_floor > 0))
    bad_value("run", "hypothesis_floor", "must be > 0");

  if (r.has("run", "a_grid")) spec.a_grid = r.number_list("run", "a_grid");
  if (r.has("run", "v_grid")) spec.v_grid = r.number_list("run", "v_grid");
  if (r.has("run", "bound_a_grid"))
    spec.bound_a_grid = r.number_list("run", "bound_a_grid");
  for (double a : spec.a_grid)
    if (!(a > 0)) bad_value("run", "a_grid", "rates must be > 0");
  for (double v : spec.v_grid)
    if (!(v > 0)) bad_value("run", "v_grid", "weights must be > 0");
  for (double a : spec.bound_a_grid)
    if (!(a > 0)) bad_value("run", "bound_a_grid", "rates must be > 0");

  if (r.has("run", "policies")) {
    spec.policies.clear();
    for (const std::string& name : Reader::split(r.text("run", "policies", ""), ','))
      spec.policies.push_back(policy_from_name(name));
    if (spec.policies.empty()) bad_value("run", "policies", "list is empty");
  }
  if (r.has("run", "gamma_scenarios")) {
    spec.gamma_scenarios.clear();
    const Entry& e = r.entry("run", "gamma_scenarios");
    for (const std::string& pair : Reader::split(e.value, ',')) {
      std::size_t colon = pair.find(':');
      if (colon == std::string::npos)
        bad_value("run", "gamma_scenarios", "expected gamma_h:gamma_q pairs");
      double gh = r.parse_number(pair.substr(0, colon), e.line, "gamma_scenarios");
      double gq = r.parse_number(pair.substr(colon + 1), e.line, "gamma_scenarios");
      if (gh < 0 || gq < 0)
        bad_value("run", "gamma_scenarios", "gammas must be >= 0");
      spec.gamma_scenarios.emplace_back(gh, gq);
    }
    if (spec.gamma_scenarios.empty())
      bad_value("run", "gamma_scenarios", "list is empty");
  }

  // power cap after arrivals/lambda_max are known
  std::string p_max_text = r.text("policy", "p_max", "auto");
  if (p_max_text == "auto") {
    spec.p_max_auto = true;
    pc.p_max = literal_power_cap(L, spec.effective_lambda_max(),
                                 spec.sim.channel.h0);
  } else {
    spec.p_max_auto = false;
    pc.p_max = r.parse_number(p_max_text, r.entry("policy", "p_max").line, "p_max");
  }
  if (!(pc.p_max > 0) || !std::isfinite(pc.p_max))
    bad_value("policy", "p_max", "must be finite and > 0");

  std::string p_const_text = r.text("policy", "p_const", "auto");
  if (p_const_text == "auto") {
    spec.sim.p_const = std::numeric_limits<double>::quiet_NaN();
  } else {
    spec.sim.p_const = r.parse_number(
        p_const_text, r.entry("policy", "p_const").line, "p_const");
    if (spec.sim.p_const < 0 || spec.sim.p_const > pc.p_max)
      bad_value("policy", "p_const", "must lie in [0, p_max]");
  }
  return spec;
}

namespace {

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_double(v[i]);
  }
  return out;
}

}  // namespace

std::string emit_ini(const ExperimentSpec& spec) {
  std::ostringstream os;
  const SimConfig& s = spec.sim;
  os << "[topology]\n";
  os << "nodes = " << s.topo.node_count() << "\n";
  std::string tx, rx;
  for (const Link& l : s.topo.links()) {
    if (!tx.empty()) tx += ",", rx += ",";
    tx += std::to_string(l.tx);
    rx += std::to_string(l.rx);
  }
  os << "link_tx = " << tx << "\nlink_rx = " << rx << "\n\n";

  os << "[channel]\n";
  os << "a = " << join(s.channel.a) << "\n";
  os << "h0 = " << format_double(s.channel.h0) << "\n";
  os << "tau = " << format_double(s.channel.tau) << "\n\n";

  os << "[arrivals]\n";
  os << "lambda = " << join(s.arrivals.lambda) << "\n\n";

  os << "[policy]\n";
  os << "type = " << policy_name(s.policy) << "\n";
  os << "kappa = " << format_double(s.policy_cfg.kappa) << "\n";
  os << "v = " << format_double(s.policy_cfg.V) << "\n";
  os << "iterations_per_slot = " << s.policy_cfg.iterations_per_slot << "\n";
  os << "ridge = " << format_double(s.policy_cfg.ridge) << "\n";
  os << "oracle_tol = " << format_double(s.policy_cfg.oracle_tol) << "\n";
  os << "oracle_max_iters = " << s.policy_cfg.oracle_max_iters << "\n";
  os << "p_max = "
     << (spec.p_max_auto ? std::string("auto") : format_double(s.policy_cfg.p_max))
     << "\n";
  os << "p_const = "
     << (std::isfinite(s.p_const) ? format_double(s.p_const)
                                  : std::string("auto"))
     << "\n\n";

  os << "[run]\n";
  os << "horizon = " << format_double(s.horizon) << "\n";
  os << "warmup = " << format_double(s.warmup) << "\n";
  os << "seed = " << s.seed << "\n";
  os << "seeds = " << spec.seed_count << "\n";
  os << "track_equilibrium = " << (s.track_equilibrium ? "true" : "false") << "\n";
  os << "timeseries = " << (s.emit_timeseries ? "true" : "false") << "\n";
  os << "decimate = " << s.decimate << "\n";
  os << "a_grid = " << join(spec.a_grid) << "\n";
  os << "v_grid = " << join(spec.v_grid) << "\n";
  os << "bound_a_grid = " << join(spec.bound_a_grid) << "\n";
  std::string scen;
  for (std::size_t i = 0; i < spec.gamma_scenarios.size(); ++i) {
    if (i) scen += ",";
    scen += format_double(spec.gamma_scenarios[i].first) + ":" +
            format_double(spec.gamma_scenarios[i].second);
  }
  os << "gamma_scenarios = " << scen << "\n";
  std::string pols;
  for (std::size_t i = 0; i < spec.policies.size(); ++i) {
    if (i) pols += ",";
    pols += policy_name(spec.policies[i]);
  }
  os << "policies = " << pols << "\n";
  os << "lambda_max = "
     << (std::isfinite(spec.lambda_max) ? format_double(spec.lambda_max)
                                        : format_double(spec.effective_lambda_max()))
     << "\n";
  os << "mc_samples = " << spec.mc_samples << "\n";
  os << "hypothesis_floor = " << format_double(spec.hypothesis_floor) << "\n";
  return os.str();
}

namespace {

bool num_eq(double a, double b) {
  if (std::isnan(a) && std::isnan(b)) return true;
  return a == b;
}

bool list_eq(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!num_eq(a[i], b[i])) return false;
  return true;
}

}  // namespace

bool equivalent(const ExperimentSpec& a, const ExperimentSpec& b) {
  const SimConfig& x = a.sim;
  const SimConfig& y = b.sim;
  if (x.topo.node_count() != y.topo.node_count()) return false;
  if (x.topo.link_count() != y.topo.link_count()) return false;
  for (int i = 0; i < x.topo.link_count(); ++i) {
    if (x.topo.links()[i].tx != y.topo.links()[i].tx) return false;
    if (x.topo.links()[i].rx != y.topo.links()[i].rx) return false;
  }
  if (!list_eq(x.channel.a, y.channel.a)) return false;
  if (!num_eq(x.channel.h0, y.channel.h0)) return false;
  if (!num_eq(x.channel.tau, y.channel.tau)) return false;
  if (!list_eq(x.arrivals.lambda, y.arrivals.lambda)) return false;
  if (x.policy != y.policy) return false;
  if (!num_eq(x.policy_cfg.kappa, y.policy_cfg.kappa)) return false;
  if (!num_eq(x.policy_cfg.V, y.policy_cfg.V)) return false;
  if (x.policy_cfg.iterations_per_slot != y.policy_cfg.iterations_per_slot)
    return false;
  if (!num_eq(x.policy_cfg.ridge, y.policy_cfg.ridge)) return false;
  if (!num_eq(x.policy_cfg.oracle_tol, y.policy_cfg.oracle_tol)) return false;
  if (x.policy_cfg.oracle_max_iters != y.policy_cfg.oracle_max_iters)
    return false;
  if (!num_eq(x.policy_cfg.p_max, y.policy_cfg.p_max)) return false;
  if (!num_eq(x.p_const, y.p_const)) return false;
  if (!num_eq(x.horizon, y.horizon) || !num_eq(x.warmup, y.warmup)) return false;
  if (x.seed != y.seed || a.seed_count != b.seed_count) return false;
  if (x.track_equilibrium != y.track_equilibrium) return false;
  if (x.emit_timeseries != y.emit_timeseries) return false;
  if (x.decimate != y.decimate) return false;
  if (!list_eq(a.a_grid, b.a_grid)) return false;
  if (!list_eq(a.v_grid, b.v_grid)) return false;
  if (!list_eq(a.bound_a_grid, b.bound_a_grid)) return false;
  if (a.gamma_scenarios.size() != b.gamma_scenarios.size()) return false;
  for (std::size_t i = 0; i < a.gamma_scenarios.size(); ++i) {
    if (!num_eq(a.gamma_scenarios[i].first, b.gamma_scenarios[i].first))
      return false;
    if (!num_eq(a.gamma_scenarios[i].second, b.gamma_scenarios[i].second))
      return false;
  }
  if (a.policies != b.policies) return false;
  if (!num_eq(a.effective_lambda_max(), b.effective_lambda_max())) return false;
  if (a.mc_samples != b.mc_samples) return false;
  if (!num_eq(a.hypothesis_floor, b.hypothesis_floor)) return false;
  return true;
}

}  // namespace mwq
