#pragma once

// JSON scenario files. Durations are strings with a unit ("250 ns",
// "1.5 us"); a bare integer is taken as picoseconds. Unknown keys are
// rejected with the offending path.

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"
#include "twincal/scenario.hpp"

namespace twincal {

using Json = nlohmann::ordered_json;

inline Duration parse_duration(const std::string& text, const std::string& path) {
  std::istringstream in(text);
  double value = 0.0;
  std::string unit;
  if (!(in >> value)) throw ConfigError(path + ": cannot parse duration '" + text + "'");
  in >> unit;
  std::string rest;
  if (in >> rest) throw ConfigError(path + ": trailing text in duration '" + text + "'");
  double scale = 0.0;
  if (unit == "ps" || unit.empty()) scale = 1.0;
  else if (unit == "ns") scale = 1e3;
  else if (unit == "us") scale = 1e6;
  else if (unit == "ms") scale = 1e9;
  else if (unit == "s") scale = 1e12;
  else throw ConfigError(path + ": unknown time unit '" + unit + "'");
  const double ticks = value * scale;
  if (!std::isfinite(ticks) || std::abs(ticks) > 9e18)
    throw ConfigError(path + ": duration out of range");
  return {std::llround(ticks)};
}

/// Largest unit that represents the value exactly.
inline std::string format_duration(Duration d) {
  static constexpr std::pair<std::int64_t, const char*> units[] = {
      {1'000'000'000'000, "s"}, {1'000'000'000, "ms"}, {1'000'000, "us"}, {1'000, "ns"}};
  if (d.ticks != 0)
    for (auto [k, name] : units)
      if (d.ticks % k == 0) return std::to_string(d.ticks / k) + " " + name;
  return std::to_string(d.ticks) + " ps";
}

namespace detail {

/// Reads an object and complains about keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const Json& at(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(sub(key) + ": missing");
    return j_.at(key);
  }

  std::string sub(const std::string& key) const { return path_ + "." + key; }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    const Json& v = at(key);
    try {
      if constexpr (std::is_same_v<T, Duration>) {
        if (v.is_string())
          out = parse_duration(v.get<std::string>(), sub(key));
        else if (v.is_number_integer())
          out = Duration{v.get<std::int64_t>()};
        else
          throw ConfigError(sub(key) + ": expected a duration string");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(sub(key) + ": expected a number");
        out = v.get<double>();
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(sub(key) + ": expected a boolean");
        out = v.get<bool>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(sub(key) + ": expected a string");
        out = v.get<std::string>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(sub(key) + ": expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v.is_number_integer() && !v.is_number_unsigned())
            throw ConfigError(sub(key) + ": must be >= 0");
        out = v.get<T>();
      } else {
        out = v.get<T>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(sub(key) + ": " + e.what());
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(sub(it.key()) + ": unknown key");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline TimeWindow read_window(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  TimeWindow w;
  r.at("lo");
  r.at("hi");
  r.get("lo", w.lo);
  r.get("hi", w.hi);
  r.finish();
  return w;
}

inline Json write_window(const TimeWindow& w) {
  return Json{{"lo", format_duration(w.lo)}, {"hi", format_duration(w.hi)}};
}

inline SourceSpec read_source(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  SourceSpec s;
  r.get("pair_rate", s.pair_rate);
  r.get("pump_wavelength_nm", s.pump_wavelength_nm);
  r.get("signal_wavelength_nm", s.signal_wavelength_nm);
  r.get("idler_wavelength_nm", s.idler_wavelength_nm);
  if (r.has("phase_matching")) {
    std::string pm;
    r.get("phase_matching", pm);
    if (pm == "type_i") s.phase_matching = PhaseMatching::TypeI;
    else if (pm == "type_ii") s.phase_matching = PhaseMatching::TypeII;
    else throw ConfigError(r.sub("phase_matching") + ": expected type_i or type_ii");
  }
  r.get("emission_jitter_ps", s.emission_jitter_ps);
  r.get("collection_overlap", s.collection_overlap);
  r.finish();
  return s;
}

inline Json write_source(const SourceSpec& s) {
  return Json{{"pair_rate", s.pair_rate},
              {"pump_wavelength_nm", s.pump_wavelength_nm},
              {"signal_wavelength_nm", s.signal_wavelength_nm},
              {"idler_wavelength_nm", s.idler_wavelength_nm},
              {"phase_matching", s.phase_matching == PhaseMatching::TypeI ? "type_i" : "type_ii"},
              {"emission_jitter_ps", s.emission_jitter_ps},
              {"collection_overlap", s.collection_overlap}};
}

inline ChainElement read_element(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  std::string type, name;
  r.get("type", type);
  if (type.empty()) r.at("type");
  r.get("name", name);
  ChainElement out;
  if (type == "loss") {
    LossStep s{name, {}};
    r.get("transmittance", s.loss.transmittance);
    out = s;
  } else if (type == "polarizer") {
    PolarizerStep s{name, {}};
    r.get("angle_deg", s.polarizer.angle_deg);
    r.get("extinction", s.polarizer.extinction);
    out = s;
  } else if (type == "pbs") {
    PbsStep s{name};
    std::string port = "transmit";
    r.get("port", port);
    if (port == "transmit") s.port = PbsPort::Transmit;
    else if (port == "reflect") s.port = PbsPort::Reflect;
    else throw ConfigError(r.sub("port") + ": expected transmit or reflect");
    out = s;
  } else if (type == "fiber") {
    FiberStep s{name, {}};
    r.get("delay", s.fiber.delay);
    r.get("transmittance", s.fiber.transmittance);
    out = s;
  } else if (type == "pockels") {
    PockelsStep s{name, {}, {}};
    auto& p = s.pockels;
    r.get("trigger_detector", s.trigger);
    r.get("trigger_delay", p.trigger_delay);
    r.get("rise", p.rise);
    r.get("flat_top", p.flat_top);
    r.get("fall_tail", p.fall_tail);
    r.get("flip_efficiency", p.flip_efficiency);
    r.get("driver_dead_time", p.driver_dead_time);
    r.get("max_trigger_rate", p.max_trigger_rate);
    out = s;
  } else {
    throw ConfigError(r.sub("type") + ": unknown element type '" + type + "'");
  }
  r.finish();
  return out;
}

inline Json write_element(const ChainElement& e) {
  return std::visit(
      [](const auto& s) -> Json {
        using T = std::decay_t<decltype(s)>;
        Json j;
        if constexpr (std::is_same_v<T, LossStep>) {
          j["type"] = "loss";
          j["name"] = s.name;
          j["transmittance"] = s.loss.transmittance;
        } else if constexpr (std::is_same_v<T, PolarizerStep>) {
          j["type"] = "polarizer";
          j["name"] = s.name;
          j["angle_deg"] = s.polarizer.angle_deg;
          j["extinction"] = s.polarizer.extinction;
        } else if constexpr (std::is_same_v<T, PbsStep>) {
          j["type"] = "pbs";
          j["name"] = s.name;
          j["port"] = s.port == PbsPort::Transmit ? "transmit" : "reflect";
        } else if constexpr (std::is_same_v<T, FiberStep>) {
          j["type"] = "fiber";
          j["name"] = s.name;
          j["delay"] = format_duration(s.fiber.delay);
          j["transmittance"] = s.fiber.transmittance;
        } else {
          const auto& p = s.pockels;
          j["type"] = "pockels";
          j["name"] = s.name;
          j["trigger_detector"] = s.trigger;
          j["trigger_delay"] = format_duration(p.trigger_delay);
          j["rise"] = format_duration(p.rise);
          j["flat_top"] = format_duration(p.flat_top);
          j["fall_tail"] = format_duration(p.fall_tail);
          j["flip_efficiency"] = p.flip_efficiency;
          j["driver_dead_time"] = format_duration(p.driver_dead_time);
          j["max_trigger_rate"] = p.max_trigger_rate;
        }
        return j;
      },
      e);
}

inline Chain read_chain(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  Chain c;
  r.get("detector", c.detector);
  if (c.detector.empty()) r.at("detector");
  if (r.has("elements")) {
    const Json& els = r.at("elements");
    if (!els.is_array()) throw ConfigError(r.sub("elements") + ": expected an array");
    for (std::size_t i = 0; i < els.size(); ++i)
      c.elements.push_back(
          read_element(els[i], r.sub("elements") + "[" + std::to_string(i) + "]"));
  }
  r.finish();
  return c;
}

inline Json write_chain(const Chain& c) {
  Json els = Json::array();
  for (const auto& e : c.elements) els.push_back(write_element(e));
  return Json{{"detector", c.detector}, {"elements", els}};
}

inline DetectorConfig read_detector(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  DetectorConfig d;
  r.get("eta", d.spec.eta);
  r.get("dark_rate", d.spec.dark_rate);
  r.get("dead_time", d.spec.dead_time);
  r.get("jitter_ps", d.spec.jitter_ps);
  r.get("stray_light_rate", d.stray_light_rate);
  if (r.has("analog")) {
    ObjectReader a(r.at("analog"), r.sub("analog"));
    AnalogSpec s;
    a.get("gain_mean", s.gain_mean);
    a.get("gain_rel_std", s.gain_rel_std);
    a.get("bin_width", s.bin_width);
    a.finish();
    d.analog = s;
  }
  r.finish();
  return d;
}

inline Json write_detector(const DetectorConfig& d) {
  Json j{{"eta", d.spec.eta},
         {"dark_rate", d.spec.dark_rate},
         {"dead_time", format_duration(d.spec.dead_time)},
         {"jitter_ps", d.spec.jitter_ps},
         {"stray_light_rate", d.stray_light_rate}};
  if (d.analog)
    j["analog"] = Json{{"gain_mean", d.analog->gain_mean},
                       {"gain_rel_std", d.analog->gain_rel_std},
                       {"bin_width", format_duration(d.analog->bin_width)}};
  return j;
}

inline ElectronicsConfig read_electronics(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  ElectronicsConfig e;
  std::string kind;
  r.get("kind", kind);
  if (kind == "tac") e.kind = ElectronicsKind::Tac;
  else if (kind == "tic") e.kind = ElectronicsKind::Tic;
  else if (kind == "and_gate") e.kind = ElectronicsKind::AndGate;
  else throw ConfigError(r.sub("kind") + ": expected tac, tic or and_gate");
  r.get("start", e.start);
  r.get("stop", e.stop);
  r.at("start");
  r.at("stop");
  if (e.kind == ElectronicsKind::Tac) {
    r.get("stop_delay_line", e.tac.stop_delay_line);
    r.get("conversion_dead_time", e.tac.conversion_dead_time);
    r.get("has_valid_start", e.tac.has_valid_start);
    if (r.has("sca_window")) e.tac.sca_window = read_window(r.at("sca_window"), r.sub("sca_window"));
    r.get("mca_bin", e.tac.mca_bin);
    r.get("range", e.tac.range);
  } else if (e.kind == ElectronicsKind::Tic) {
    r.get("stop_delay_line", e.tic.stop_delay_line);
    r.get("resolution", e.tic.resolution);
    r.get("histogram_bin", e.tic.histogram_bin);
    r.get("n_pairs_target", e.tic.n_pairs_target);
    r.get("n_subsamples", e.tic.n_subsamples);
    if (r.has("sca_window")) e.tic.sca_window = read_window(r.at("sca_window"), r.sub("sca_window"));
    r.get("range", e.tic.range);
  } else {
    r.get("window", e.and_window);
    r.get("stop_delay", e.and_delay);
  }
  if (r.has("off_peak")) {
    const Json& op = r.at("off_peak");
    if (!op.is_array()) throw ConfigError(r.sub("off_peak") + ": expected an array");
    OffPeakRegion reg;
    for (std::size_t i = 0; i < op.size(); ++i)
      reg.push_back(read_window(op[i], r.sub("off_peak") + "[" + std::to_string(i) + "]"));
    e.off_peak = reg;
  }
  r.finish();
  return e;
}

inline Json write_electronics(const ElectronicsConfig& e) {
  Json j;
  switch (e.kind) {
    case ElectronicsKind::Tac:
      j["kind"] = "tac";
      j["start"] = e.start;
      j["stop"] = e.stop;
      j["stop_delay_line"] = format_duration(e.tac.stop_delay_line);
      j["conversion_dead_time"] = format_duration(e.tac.conversion_dead_time);
      j["has_valid_start"] = e.tac.has_valid_start;
      j["sca_window"] = write_window(e.tac.sca_window);
      j["mca_bin"] = format_duration(e.tac.mca_bin);
      j["range"] = format_duration(e.tac.range);
      break;
    case ElectronicsKind::Tic:
      j["kind"] = "tic";
      j["start"] = e.start;
      j["stop"] = e.stop;
      j["stop_delay_line"] = format_duration(e.tic.stop_delay_line);
      j["resolution"] = format_duration(e.tic.resolution);
      j["histogram_bin"] = format_duration(e.tic.histogram_bin);
      j["n_pairs_target"] = e.tic.n_pairs_target;
      j["n_subsamples"] = e.tic.n_subsamples;
      j["sca_window"] = write_window(e.tic.sca_window);
      j["range"] = format_duration(e.tic.range);
      break;
    case ElectronicsKind::AndGate:
      j["kind"] = "and_gate";
      j["start"] = e.start;
      j["stop"] = e.stop;
      j["window"] = format_duration(e.and_window);
      j["stop_delay"] = format_duration(e.and_delay);
      break;
  }
  if (e.off_peak) {
    Json op = Json::array();
    for (const auto& w : *e.off_peak) op.push_back(write_window(w));
    j["off_peak"] = op;
  }
  return j;
}

inline std::string to_string(RunMethod m) {
  switch (m) {
    case RunMethod::Coincidence: return "coincidence";
    case RunMethod::ConditionalRotation: return "conditional_rotation";
    case RunMethod::Analog: return "analog";
    case RunMethod::Compare: return "compare";
  }
  return "?";
}

inline RunMethod parse_method(const std::string& s, const std::string& path) {
  for (auto m : {RunMethod::Coincidence, RunMethod::ConditionalRotation, RunMethod::Analog,
                 RunMethod::Compare})
    if (s == to_string(m)) return m;
  throw ConfigError(path + ": unknown method '" + s + "'");
}

}  // namespace detail

/// Parses and validates a scenario.
inline Scenario scenario_from_json(const Json& j) {
  detail::ObjectReader r(j, "$");
  Scenario s;
  r.at("schema_version");
  r.get("schema_version", s.schema_version);
  if (s.schema_version != kSchemaVersion)
    throw ConfigError("$.schema_version: unsupported version " + std::to_string(s.schema_version));
  r.get("name", s.name);
  r.get("seed", s.seed);
  r.get("gate", s.gate);
  std::string method = "coincidence";
  r.get("method", method);
  s.method = detail::parse_method(method, "$.method");
  if (r.has("source")) s.source = detail::read_source(r.at("source"), "$.source");
  s.signal_chain = detail::read_chain(r.at("signal_chain"), "$.signal_chain");
  s.idler_chain = detail::read_chain(r.at("idler_chain"), "$.idler_chain");
  {
    const Json& dets = r.at("detectors");
    if (!dets.is_object()) throw ConfigError("$.detectors: expected an object");
    for (auto it = dets.begin(); it != dets.end(); ++it)
      s.detectors[it.key()] = detail::read_detector(it.value(), "$.detectors." + it.key());
  }
  if (r.has("electronics"))
    s.electronics = detail::read_electronics(r.at("electronics"), "$.electronics");
  if (r.has("calibration")) {
    detail::ObjectReader c(r.at("calibration"), "$.calibration");
    c.get("t_signal", s.calibration.t_signal);
    c.get("t_signal_std", s.calibration.t_signal_std);
    c.get("flip_efficiency", s.calibration.flip_efficiency);
    c.get("flip_efficiency_std", s.calibration.flip_efficiency_std);
    c.finish();
  }
  if (r.has("scan")) {
    detail::ObjectReader c(r.at("scan"), "$.scan");
    ScanConfig sc;
    c.get("angles_deg", sc.angles_deg);
    c.get("integration", sc.integration);
    c.get("polarizer", sc.polarizer);
    c.get("herald_angle_deg", sc.herald_angle_deg);
    c.finish();
    s.scan = sc;
  }
  if (r.has("analog")) {
    detail::ObjectReader c(r.at("analog"), "$.analog");
    AnalogConfig a;
    c.get("reference", a.reference);
    c.get("under_test", a.under_test);
    c.get("segments", a.segments);
    if (c.has("k_factor")) {
      double k = 0.0;
      c.get("k_factor", k);
      a.k_factor = k;
    }
    c.get("gain_samples", a.gain_samples);
    c.finish();
    s.analog = a;
  }
  if (r.has("validation")) {
    detail::ObjectReader c(r.at("validation"), "$.validation");
    if (c.has("ground_truth_eta")) {
      double g = 0.0;
      c.get("ground_truth_eta", g);
      s.ground_truth_eta = g;
    }
    c.finish();
  }
  r.finish();
  s.validate();
  return s;
}

inline Json scenario_to_json(const Scenario& s) {
  Json j;
  j["schema_version"] = s.schema_version;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["gate"] = format_duration(s.gate);
  j["method"] = detail::to_string(s.method);
  j["source"] = detail::write_source(s.source);
  j["signal_chain"] = detail::write_chain(s.signal_chain);
  j["idler_chain"] = detail::write_chain(s.idler_chain);
  Json dets = Json::object();
  for (const auto& [id, d] : s.detectors) dets[id] = detail::write_detector(d);
  j["detectors"] = dets;
  if (s.electronics) j["electronics"] = detail::write_electronics(*s.electronics);
  j["calibration"] = Json{{"t_signal", s.calibration.t_signal},
                          {"t_signal_std", s.calibration.t_signal_std},
                          {"flip_efficiency", s.calibration.flip_efficiency},
                          {"flip_efficiency_std", s.calibration.flip_efficiency_std}};
  if (s.scan)
    j["scan"] = Json{{"angles_deg", s.scan->angles_deg},
                     {"integration", format_duration(s.scan->integration)},
                     {"polarizer", s.scan->polarizer},
                     {"herald_angle_deg", s.scan->herald_angle_deg}};
  if (s.analog) {
    Json a{{"reference", s.analog->reference},
           {"under_test", s.analog->under_test},
           {"segments", s.analog->segments},
           {"gain_samples", s.analog->gain_samples}};
    if (s.analog->k_factor) a["k_factor"] = *s.analog->k_factor;
    j["analog"] = a;
  }
  if (s.ground_truth_eta) j["validation"] = Json{{"ground_truth_eta", *s.ground_truth_eta}};
  return j;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace twincal
