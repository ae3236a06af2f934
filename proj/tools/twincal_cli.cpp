// twincal: command-line front end for the calibration simulator.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "twincal/twincal.hpp"

namespace fs = std::filesystem;
using namespace twincal;

namespace {

struct Globals {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

Scenario load(const Globals& g) {
  if (g.config.empty() == g.preset.empty())
    throw ConfigError("give exactly one of --config or --preset");
  std::string path = g.config;
  if (!g.preset.empty()) path = std::string(TWINCAL_PRESET_DIR) + "/" + g.preset + ".json";
  Scenario s = load_scenario(path);
  if (g.seed) s.seed = *g.seed;
  return s;
}

std::optional<fs::path> out_dir(const Globals& g) {
  if (!g.out.empty()) return fs::path(g.out);
  if (const char* env = std::getenv("TWINCAL_OUT"); env && *env) return fs::path(env);
  return std::nullopt;
}

void emit(const Globals& g, const Json& j) {
  if (!g.quiet) std::cout << j.dump(2) << '\n';
}

int finish_trial(const Globals& g, TrialReport& r) {
  if (auto dir = out_dir(g)) write_outputs(r, *dir);
  emit(g, report_to_json(r));
  return r.all_invariants_hold() ? 0 : 1;
}

int run_method(const Globals& g, RunMethod m) {
  Scenario s = load(g);
  s.method = m;
  s.validate();
  TrialReport r = run_scenario(s);
  return finish_trial(g, r);
}

int simulate(const Globals& g) {
  const Scenario s = load(g);
  std::vector<std::pair<std::string, TimeTags>> streams{{s.signal_chain.detector, {}},
                                                        {s.idler_chain.detector, {}}};
  InvariantLog log;
  Duration offset{};
  acquire_blocks(s, s.gate, {}, run_stream(s).derive("simulate"), &log,
                 [&](const Acquisition& a) {
                   for (auto* c : {&a.signal_clicks, &a.idler_clicks}) {
                     auto& dst = streams[c == &a.signal_clicks ? 0 : 1];
                     const Duration dead = s.detector(dst.first).spec.dead_time;
                     for (const auto& click : *c) {
                       const TimeStamp t = click.t + offset;
                       if (!dst.second.empty() && t - dst.second.back() < dead) continue;
                       dst.second.push_back(t);
                     }
                   }
                   offset = offset + a.gate;
                 });
  Json j{{"schema_version", kSchemaVersion},
         {"scenario", s.name},
         {"seed", s.seed},
         {"gate", format_duration(s.gate)},
         {"counts", Json{{streams[0].first, streams[0].second.size()},
                         {streams[1].first, streams[1].second.size()}}},
         {"invariants", Json{{"dead_time_spacing", log.dead_time_spacing},
                             {"pockels_dead_time", log.pockels_dead_time},
                             {"pockels_trigger_rate", log.pockels_trigger_rate}}}};
  if (auto dir = out_dir(g)) {
    fs::create_directories(*dir);
    std::ofstream f(*dir / "clicks.csv", std::ios::binary);
    write_clicks_csv(f, streams);
    j["files"] = Json::array({"clicks.csv"});
    std::ofstream rep(*dir / "report.json", std::ios::binary);
    rep << j.dump(2) << '\n';
  }
  emit(g, j);
  return log.dead_time_spacing && log.pockels_dead_time && log.pockels_trigger_rate ? 0 : 1;
}

std::map<std::string, TimeTags> read_clicks_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  return read_clicks_csv(in);
}

/// Coincidence calibration of externally recorded click streams.
int calibrate_imported(const Globals& g, const std::string& clicks, const std::string& bg) {
  Scenario s = load(g);
  s.method = RunMethod::Coincidence;
  s.validate();
  const auto& e = *s.electronics;
  auto streams = read_clicks_file(clicks);
  CoincidenceData d;
  accumulate_coincidences(d, streams[e.start], streams[e.stop], s.gate, e);
  std::uint64_t nb = 0;
  if (!bg.empty()) {
    auto b = read_clicks_file(bg);
    nb = count_scaler(b[e.start], s.gate);
  }
  TrialReport r;
  r.scenario = s.name;
  r.method = s.method;
  r.seed = s.seed;
  r.coincidence = analyze_coincidences(d, nb, s.gate, e, s.detector(e.stop).spec.dead_time,
                                       s.calibration.t_signal);
  return finish_trial(g, r);
}

int trials(const Globals& g, std::size_t n, unsigned threads) {
  const Scenario s = load(g);
  TrialsReport r = run_trials(s, n, threads);
  const Json j = report_to_json(r);
  if (auto dir = out_dir(g)) {
    fs::create_directories(*dir);
    std::ofstream f(*dir / "trials.json", std::ios::binary);
    f << j.dump(2) << '\n';
  }
  emit(g, j);
  bool ok = true;
  for (const auto& t : r.trials) ok = ok && t.all_invariants_hold();
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Twin-photon detector calibration simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "Scenario JSON file");
  app.add_option("--preset", g.preset, "Built-in scenario name");
  auto* seed_opt = app.add_option("--seed", seed, "Override the scenario seed");
  app.add_option("--out", g.out, "Output directory (default: $TWINCAL_OUT)");
  app.add_flag("--quiet", g.quiet, "Do not print the report");

  auto* sim = app.add_subcommand("simulate", "Simulate click streams and export them");
  auto* coinc = app.add_subcommand("calibrate-coincidence", "Coincidence-method calibration");
  std::string clicks, bg_clicks;
  coinc->add_option("--clicks", clicks, "Analyse an external click CSV instead of simulating");
  coinc->add_option("--background-clicks", bg_clicks, "Click CSV recorded with SPDC off");
  auto* cond = app.add_subcommand("calibrate-conditional", "Conditional polarization rotation");
  auto* analog = app.add_subcommand("calibrate-analog", "Analog correlation method");
  auto* cmp = app.add_subcommand("compare", "Coincidence and conditional on shared data");
  auto* tr = app.add_subcommand("trials", "Repeat the scenario with derived seeds");
  std::size_t n = 10;
  unsigned threads = 0;
  tr->add_option("--n", n, "Number of trials")->check(CLI::Range(2, 1000000));
  tr->add_option("--threads", threads, "Worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (*sim) return simulate(g);
    if (*coinc) {
      if (!clicks.empty()) return calibrate_imported(g, clicks, bg_clicks);
      return run_method(g, RunMethod::Coincidence);
    }
    if (*cond) return run_method(g, RunMethod::ConditionalRotation);
    if (*analog) return run_method(g, RunMethod::Analog);
    if (*cmp) return run_method(g, RunMethod::Compare);
    if (*tr) return trials(g, n, threads);
  } catch (const Error& e) {
    std::cerr << "twincal: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "twincal: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
