#include "doctest.h"

#include <charconv>
#include <cstdio>
#include <filesystem>

#include "mwq/commands.hpp"
#include "mwq/output.hpp"
#include "mwq/validate.hpp"

using namespace mwq;

TEST_CASE("defaults cover the reference setting") {
  ExperimentSpec spec = default_spec();
  CHECK(spec.sim.topo.node_count() == 5);
  CHECK(spec.sim.topo.link_count() == 6);
  CHECK(spec.sim.channel.h0 == 0.05);
  CHECK(spec.sim.channel.tau == 1e-3);
  for (double a : spec.sim.channel.a) CHECK(a == 200.0);
  for (double l : spec.sim.arrivals.lambda) CHECK(l == 20.0);
  CHECK(spec.sim.policy_cfg.kappa == 500.0);
  CHECK(spec.sim.policy_cfg.V == 1.0);
  CHECK(spec.effective_lambda_max() == 20.0);
  CHECK(spec.sim.policy_cfg.p_max ==
        doctest::Approx(literal_power_cap(6, 20.0, 0.05)));
}

TEST_CASE("empty channel section keeps the default fading rate") {
  ExperimentSpec spec = parse_config_text("[channel]\n");
  for (double a : spec.sim.channel.a) CHECK(a == 200.0);
}

TEST_CASE("validation errors name the offending key") {
  CHECK_THROWS_WITH_AS(parse_config_text("[policy]\nkappa = -1\n"),
                       doctest::Contains("kappa"), config_error);
  CHECK_THROWS_WITH_AS(parse_config_text("[channel]\nh0 = 0\n"),
                       doctest::Contains("h0"), config_error);
  CHECK_THROWS_WITH_AS(parse_config_text("[run]\nwarmup = 10\nhorizon = 5\n"),
                       doctest::Contains("warmup"), config_error);
}

TEST_CASE("parse errors carry the line number") {
  CHECK_THROWS_WITH_AS(parse_config_text("[channel]\nbogus = 1\n", "cfg.ini"),
                       doctest::Contains("cfg.ini:2"), config_error);
  CHECK_THROWS_WITH_AS(parse_config_text("[channel]\ntau\n", "cfg.ini"),
                       doctest::Contains(":2"), config_error);
  CHECK_THROWS_WITH_AS(parse_config_text("[nope]\n", "cfg.ini"),
                       doctest::Contains(":1"), config_error);
  CHECK_THROWS_WITH_AS(parse_config_text("[channel]\ntau = fast\n", "cfg.ini"),
                       doctest::Contains(":2"), config_error);
}

TEST_CASE("per-link lists broadcast or match the link count") {
  ExperimentSpec spec = parse_config_text("[channel]\na = 1,2,3,4,5,6\n");
  CHECK(spec.sim.channel.a == std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK_THROWS_AS(parse_config_text("[channel]\na = 1,2\n"), config_error);
}

TEST_CASE("scenario pairs and policy lists parse") {
  ExperimentSpec spec = parse_config_text(
      "[run]\ngamma_scenarios = 0:0, 0.3:0.7\npolicies = oracle,tdm\n");
  REQUIRE(spec.gamma_scenarios.size() == 2);
  CHECK(spec.gamma_scenarios[1].first == 0.3);
  CHECK(spec.gamma_scenarios[1].second == 0.7);
  REQUIRE(spec.policies.size() == 2);
  CHECK(spec.policies[0] == PolicyKind::Oracle);
  CHECK(spec.policies[1] == PolicyKind::Tdm);
}

TEST_CASE("emitted config round-trips to an equivalent spec") {
  ExperimentSpec spec = parse_config_text(
      "[topology]\nlink_tx = 0,1\nlink_rx = 2,2\n"
      "[channel]\na = 7,9\nh0 = 0.1\ntau = 0.002\n"
      "[arrivals]\nlambda = 3\n"
      "[policy]\ntype = compensated\nkappa = 250\nv = 2.5\np_max = 12\n"
      "[run]\nhorizon = 10\nwarmup = 1\nseed = 42\nseeds = 3\n"
      "a_grid = 10,20\ngamma_scenarios = 0.1:0.2\n");
  std::string ini = emit_ini(spec);
  ExperimentSpec back = parse_config_text(ini);
  CHECK(equivalent(spec, back));

  ExperimentSpec defaults = default_spec();
  CHECK(equivalent(defaults, parse_config_text(emit_ini(defaults))));
}

TEST_CASE("doubles render as shortest round-trip decimals") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.5e-7) == "-2.5e-07");
  CHECK(format_double(std::nan("")) == "nan");
  RandomStream rng = RngStreams::derive(77, 0, 0);
  for (int i = 0; i < 500; ++i) {
    double v = (rng.uniform01() - 0.5) * std::pow(10.0, 40.0 * rng.uniform01() - 20.0);
    std::string s = format_double(v);
    double parsed = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), parsed);
    REQUIRE(res.ec == std::errc());
    CHECK(parsed == v);
  }
}

TEST_CASE("canonical json sorts keys") {
  nlohmann::json j;
  j["zeta"] = 1;
  j["alpha"] = 2;
  std::string text = canonical_json(j);
  CHECK(text.find("alpha") < text.find("zeta"));
  CHECK(text.back() == '\n');
}

TEST_CASE("simulate command writes byte-identical files on re-run") {
  ExperimentSpec spec = default_spec();
  spec.sim.horizon = 0.2;
  spec.sim.warmup = 0.05;
  spec.sim.emit_timeseries = true;
  spec.sim.decimate = 20;
  spec.sim.track_equilibrium = true;
  spec.out_dir = (std::filesystem::temp_directory_path() / "mwq_sim_test").string();

  CHECK(cmd_simulate(spec) == 0);
  std::string summary1 = read_file(spec.out_dir + "/summary.csv");
  std::string series1 = read_file(spec.out_dir + "/timeseries.csv");
  CHECK(cmd_simulate(spec) == 0);
  CHECK(read_file(spec.out_dir + "/summary.csv") == summary1);
  CHECK(read_file(spec.out_dir + "/timeseries.csv") == series1);

  std::string header = series1.substr(0, series1.find('\n'));
  int commas = 0;
  for (char c : header) commas += c == ',';
  CHECK(commas + 1 == 2 + 3 * spec.sim.topo.link_count());

  spec.format = OutputFormat::Json;
  CHECK(cmd_simulate(spec) == 0);
  std::string js = read_file(spec.out_dir + "/summary.json");
  CHECK(js.find("\"worst_avg_queue\"") != std::string::npos);
  std::filesystem::remove_all(spec.out_dir);
}

TEST_CASE("quick validation passes and catches an injected gradient bug") {
  ExperimentSpec spec = default_spec();
  ValidationOptions opts;
  opts.quick = true;
  std::vector<CheckResult> checks = run_validation(spec, opts);
  CHECK(checks.size() >= 12);
  for (const CheckResult& c : checks) {
    INFO(c.name, " measured=", c.measured, " threshold=", c.threshold);
    CHECK(c.pass);
  }

  ValidationOptions broken = opts;
  broken.grad_override = [](const PowerAllocation& p, const ChannelState& h,
                            const QueueState& q, const Topology& t, double V) {
    std::vector<double> g = grad_lagrangian(p, h, q, t, V);
    for (double& x : g) x = -x;
    return g;
  };
  std::vector<CheckResult> bad = run_validation(spec, broken);
  bool gradient_failed = false;
  for (const CheckResult& c : bad)
    if (c.name == "gradient-consistency") gradient_failed = !c.pass;
  CHECK(gradient_failed);

  nlohmann::json report = validation_report(checks);
  CHECK(report["check_count"].get<int>() >= 12);
  CHECK(report["all_passed"].get<bool>());
}
