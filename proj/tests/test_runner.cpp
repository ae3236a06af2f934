#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace twincal;
namespace ts = testing_support;

namespace {

std::string json_of(const TrialReport& r) { return report_to_json(r).dump(2); }

Scenario quick_bbo(Duration integration) {
  Scenario s = ts::preset("bbo_conditional");
  s.scan->integration = integration;
  return s;
}

}  // namespace

TEST(Config, PresetsRoundTrip) {
  for (const char* name : {"bbo_conditional", "lilo3_coincidence"}) {
    const Scenario s = ts::preset(name);
    const Json once = scenario_to_json(s);
    const Json twice = scenario_to_json(scenario_from_json(once));
    EXPECT_EQ(once.dump(), twice.dump()) << name;
  }
}

TEST(Config, UnknownKeyNamesPath) {
  Json j = scenario_to_json(ts::preset("lilo3_coincidence"));
  j["detectors"]["DUT"]["colour"] = "red";
  try {
    scenario_from_json(j);
    FAIL() << "accepted unknown key";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("detectors.DUT.colour"), std::string::npos) << e.what();
    EXPECT_EQ(e.exit_code(), 2);
  }
}

TEST(Config, DurationsParse) {
  EXPECT_EQ(parse_duration("250 ns", "x"), nanoseconds(250));
  EXPECT_EQ(parse_duration("10us", "x"), microseconds(10));
  EXPECT_EQ(parse_duration("42", "x"), Duration{42});
  EXPECT_THROW(parse_duration("3 furlongs", "x"), ConfigError);
  EXPECT_EQ(format_duration(nanoseconds(1500)), "1500 ns");
}

TEST(Config, TopologyErrors) {
  Scenario s = ts::preset("bbo_conditional");
  s.signal_chain.elements.push_back(*s.pockels());
  EXPECT_THROW(s.validate(), ConfigError);

  s = ts::preset("bbo_conditional");
  s.pockels()->trigger = s.idler_chain.detector;
  EXPECT_THROW(s.validate(), ConfigError);

  s = ts::preset("lilo3_coincidence");
  s.electronics->start = "nobody";
  EXPECT_THROW(s.validate(), ConfigError);

  s = ts::preset("lilo3_coincidence");
  s.method = RunMethod::ConditionalRotation;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Runner, IdealCoincidenceRecoversEta) {
  const Scenario s = ts::ideal_coincidence(0.4);
  const auto r = run_scenario(s);
  ASSERT_TRUE(r.coincidence);
  const auto& e = r.coincidence->estimate;
  EXPECT_NEAR(e.value, 0.4, 5.0 * e.std_uncertainty);
  EXPECT_TRUE(r.all_invariants_hold());
}

TEST(Runner, DeterministicForSeed) {
  Scenario s = ts::ideal_coincidence(0.4);
  const auto a = json_of(run_scenario(s));
  EXPECT_EQ(a, json_of(run_scenario(s)));
  s.seed += 1;
  EXPECT_NE(a, json_of(run_scenario(s)));
}

TEST(Runner, GroundTruthOnlyEchoed) {
  Scenario s = ts::ideal_coincidence(0.4);
  s.ground_truth_eta = 0.1;
  auto a = report_to_json(run_scenario(s));
  s.ground_truth_eta = 0.9;
  auto b = report_to_json(run_scenario(s));
  EXPECT_NE(a["ground_truth_eta"], b["ground_truth_eta"]);
  a.erase("ground_truth_eta");
  b.erase("ground_truth_eta");
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(Scan, NineteenPointsAndZeroIntegration) {
  const Scenario s = quick_bbo(milliseconds(20));
  const auto r = run_visibility_scan(s, s.scan->angles_deg, s.scan->integration,
                                     RandomStream(31, 0));
  EXPECT_EQ(r.triggered.counts.size(), 19u);
  EXPECT_EQ(r.untriggered.counts.size(), 19u);
  EXPECT_EQ(r.triggered.background.size(), 19u);

  const auto z = run_visibility_scan(s, s.scan->angles_deg, Duration{}, RandomStream(31, 0));
  for (std::size_t i = 0; i < 19; ++i) {
    EXPECT_EQ(z.triggered.counts[i], 0);
    EXPECT_EQ(z.untriggered.counts[i], 0);
    EXPECT_EQ(z.coincidences_triggered[i], 0);
  }
}

TEST(Scan, CountsScaleWithIntegration) {
  const Scenario s = quick_bbo(milliseconds(50));
  auto total = [&](Duration d) {
    const auto r = run_visibility_scan(s, s.scan->angles_deg, d, RandomStream(32, 0));
    double n = 0;
    for (auto c : r.untriggered.counts) n += static_cast<double>(c);
    return n;
  };
  const double n1 = total(milliseconds(50)), n2 = total(milliseconds(100));
  EXPECT_NEAR(n2 / n1, 2.0, 5.0 * 2.0 * std::sqrt(1.0 / n1 + 1.0 / n2));
}

TEST(Trials, ReproducibleAndThreadIndependent) {
  const Scenario s = ts::ideal_coincidence(0.4);
  EXPECT_THROW(run_trials(s, 1), InvalidArgument);
  const auto a = run_trials(s, 2, 1);
  const auto b = run_trials(s, 2, 2);
  EXPECT_EQ(report_to_json(a).dump(), report_to_json(b).dump());
  ASSERT_EQ(a.trials.size(), 2u);
  for (const auto& t : a.trials) EXPECT_TRUE(std::isfinite(t.estimates().at(0).value));
  EXPECT_NE(a.trials[0].estimates()[0].value, a.trials[1].estimates()[0].value);
}

TEST(Trials, SpreadShrinksWithGate) {
  Scenario s = ts::ideal_coincidence(0.4, 2e4);
  s.gate = milliseconds(250);
  const double s1 = run_trials(s, 20, 1).stats_for(Method::Coincidence)->std;
  s.gate = seconds(1);
  const double s4 = run_trials(s, 20, 1).stats_for(Method::Coincidence)->std;
  EXPECT_GT(s1 / s4, 1.4);
  EXPECT_LT(s1 / s4, 2.8);
}

TEST(Csv, ClicksRoundTrip) {
  const std::vector<std::pair<std::string, TimeTags>> in{
      {"DUT", {{5}, {100}, {100}, {2000}}}, {"TRIG", {{0}, {100}, {3000}}}};
  std::stringstream ss;
  write_clicks_csv(ss, in);
  EXPECT_EQ(ss.str().rfind("# schema_version=1\n", 0), 0u);
  const auto out = read_clicks_csv(ss);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out.at("DUT"), in[0].second);
  EXPECT_EQ(out.at("TRIG"), in[1].second);
}

TEST(Csv, BadInputIsConfigError) {
  std::stringstream a("detector_id,t_ps\nDUT,12x\n");
  EXPECT_THROW(read_clicks_csv(a), ConfigError);
  std::stringstream b("DUT,50\nDUT,10\n");
  EXPECT_THROW(read_clicks_csv(b), ConfigError);
  std::stringstream c("DUT 50\n");
  EXPECT_THROW(read_clicks_csv(c), ConfigError);
}

TEST(Csv, ScanAndHistogramCarrySchema) {
  Histogram h(picoseconds(100), Duration{}, 3);
  h.counts = {1, 2, 3};
  std::stringstream ss;
  write_histogram_csv(ss, h);
  EXPECT_EQ(ss.str(), "# schema_version=1\nbin_start_ps,count\n0,1\n100,2\n200,3\n");
}
