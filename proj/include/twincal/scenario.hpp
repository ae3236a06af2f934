#pragma once

// Scenario description: source, the two optical chains, detectors,
// coincidence electronics, calibration inputs, scan and analog settings.
// Config files are JSON; see docs/config.md for the schema.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "twincal/detection.hpp"
#include "twincal/electronics.hpp"
#include "twincal/errors.hpp"
#include "twincal/optics.hpp"
#include "twincal/source.hpp"
#include "twincal/timebase.hpp"

namespace twincal {

inline constexpr int kSchemaVersion = 1;

enum class RunMethod : std::uint8_t { Coincidence, ConditionalRotation, Analog, Compare };

struct LossStep {
  std::string name;
  LossElement loss;
};
struct PolarizerStep {
  std::string name;
  PolarizerSpec polarizer;
};
struct PbsStep {
  std::string name;
  PbsPort port = PbsPort::Transmit;
};
struct FiberStep {
  std::string name;
  FiberSpec fiber;
};
struct PockelsStep {
  std::string name;
  PockelsSpec pockels;
  std::string trigger;  // detector whose clicks fire the driver
};

using ChainElement = std::variant<LossStep, PolarizerStep, PbsStep, FiberStep, PockelsStep>;

struct Chain {
  std::vector<ChainElement> elements;
  std::string detector;
};

struct DetectorConfig {
  DetectorSpec spec;
  double stray_light_rate = 0.0;  // extra background clicks/s
  std::optional<AnalogSpec> analog;
};

enum class ElectronicsKind : std::uint8_t { Tac, Tic, AndGate };

struct ElectronicsConfig {
  ElectronicsKind kind = ElectronicsKind::Tac;
  std::string start;  // trigger / herald detector
  std::string stop;   // detector under test
  TacSpec tac;
  TicSpec tic;
  Duration and_window = nanoseconds(4);
  Duration and_delay{};  // added to the stop stream before the AND gate
  std::optional<OffPeakRegion> off_peak;

  Duration stop_delay() const {
    switch (kind) {
      case ElectronicsKind::Tac: return tac.stop_delay_line;
      case ElectronicsKind::Tic: return tic.stop_delay_line;
      case ElectronicsKind::AndGate: return and_delay;
    }
    return {};
  }
};

/// Values an experimenter knows from separate measurements.
struct Calibration {
  double t_signal = 1.0;
  double t_signal_std = 0.0;
  double flip_efficiency = 1.0;
  double flip_efficiency_std = 0.0;
};

struct ScanConfig {
  std::vector<double> angles_deg;
  Duration integration = seconds(10);
  std::string polarizer;  // name of the idler-chain polarizer to rotate
  double herald_angle_deg = 0.0;
};

struct AnalogConfig {
  std::string reference;   // detector 1 (autocorrelation)
  std::string under_test;  // detector 2
  std::size_t segments = 10;
  std::optional<double> k_factor;  // unset: infer from gain calibration samples
  std::size_t gain_samples = 100000;
};

struct Scenario {
  int schema_version = kSchemaVersion;
  std::string name = "scenario";
  std::uint64_t seed = 1;
  Duration gate = seconds(1);
  RunMethod method = RunMethod::Coincidence;
  SourceSpec source;
  Chain signal_chain;
  Chain idler_chain;
  std::map<std::string, DetectorConfig> detectors;
  std::optional<ElectronicsConfig> electronics;
  Calibration calibration;
  std::optional<ScanConfig> scan;
  std::optional<AnalogConfig> analog;
  std::optional<double> ground_truth_eta;  // echoed into reports only

  const DetectorConfig& detector(const std::string& id) const {
    auto it = detectors.find(id);
    if (it == detectors.end()) throw ConfigError("detectors: unknown detector '" + id + "'");
    return it->second;
  }

  const PockelsStep* pockels() const {
    for (const auto& e : idler_chain.elements)
      if (auto* p = std::get_if<PockelsStep>(&e)) return p;
    return nullptr;
  }

  PockelsStep* pockels() {
    return const_cast<PockelsStep*>(static_cast<const Scenario&>(*this).pockels());
  }

  void validate() const;
};

namespace detail {
inline bool chain_has_polarizer(const Chain& c, const std::string& name) {
  for (const auto& e : c.elements)
    if (auto* p = std::get_if<PolarizerStep>(&e); p && p->name == name) return true;
  return false;
}

template <class F>
void wrap_config(const std::string& path, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}
}  // namespace detail

inline void Scenario::validate() const {
  if (schema_version != kSchemaVersion)
    throw ConfigError("schema_version: unsupported version " + std::to_string(schema_version));
  if (gate.ticks <= 0) throw ConfigError("gate: must be > 0");
  detail::wrap_config("source", [&] { source.validate(); });

  for (const auto& [id, d] : detectors) {
    detail::wrap_config("detectors." + id, [&] { d.spec.validate(); });
    if (!(d.stray_light_rate >= 0.0))
      throw ConfigError("detectors." + id + ".stray_light_rate: must be >= 0");
    if (d.analog) detail::wrap_config("detectors." + id + ".analog", [&] { d.analog->validate(); });
  }
  auto check_chain = [&](const Chain& c, const std::string& path, bool idler) {
    if (!detectors.count(c.detector))
      throw ConfigError(path + ".detector: unknown detector '" + c.detector + "'");
    for (std::size_t i = 0; i < c.elements.size(); ++i) {
      const std::string ep = path + ".elements[" + std::to_string(i) + "]";
      std::visit(
          [&](const auto& step) {
            using T = std::decay_t<decltype(step)>;
            detail::wrap_config(ep, [&] {
              if constexpr (std::is_same_v<T, LossStep>) step.loss.validate();
              if constexpr (std::is_same_v<T, PolarizerStep>) step.polarizer.validate();
              if constexpr (std::is_same_v<T, FiberStep>) step.fiber.validate();
              if constexpr (std::is_same_v<T, PockelsStep>) {
                step.pockels.validate();
                if (!idler) throw ConfigError(ep + ": pockels cell only allowed in idler_chain");
                if (step.trigger != signal_chain.detector)
                  throw ConfigError(ep + ".trigger: must be the signal-chain detector '" +
                                    signal_chain.detector + "'");
              }
            });
          },
          c.elements[i]);
    }
  };
  check_chain(signal_chain, "signal_chain", false);
  check_chain(idler_chain, "idler_chain", true);
  if (signal_chain.detector == idler_chain.detector)
    throw ConfigError("idler_chain.detector: must differ from the signal-chain detector");

  if (electronics) {
    const auto& e = *electronics;
    for (const auto* id : {&e.start, &e.stop})
      if (*id != signal_chain.detector && *id != idler_chain.detector)
        throw ConfigError("electronics: detector '" + *id + "' is not on a chain");
    if (e.start == e.stop) throw ConfigError("electronics: start and stop must differ");
    detail::wrap_config("electronics", [&] {
      if (e.kind == ElectronicsKind::Tac) e.tac.validate();
      if (e.kind == ElectronicsKind::Tic) e.tic.validate();
      if (e.kind == ElectronicsKind::AndGate && e.and_window.ticks <= 0)
        throw InvalidArgument("and_gate window must be > 0");
    });
  }
  for (double f : {calibration.t_signal, calibration.flip_efficiency})
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("calibration: factors must lie in (0, 1]");

  const bool needs_coinc = method == RunMethod::Coincidence || method == RunMethod::Compare;
  const bool needs_cond = method == RunMethod::ConditionalRotation || method == RunMethod::Compare;
  if (needs_coinc && !electronics)
    throw ConfigError("electronics: coincidence method needs a coincidence electronics section");
  if (needs_cond) {
    if (source.phase_matching != PhaseMatching::TypeII)
      throw ConfigError("source.phase_matching: conditional rotation needs a Type II source");
    if (!pockels()) throw ConfigError("idler_chain: conditional rotation needs a pockels element");
    if (!scan) throw ConfigError("scan: conditional rotation needs a scan section");
    if (!detail::chain_has_polarizer(idler_chain, scan->polarizer))
      throw ConfigError("scan.polarizer: no idler-chain polarizer named '" + scan->polarizer + "'");
    if (scan->angles_deg.empty()) throw ConfigError("scan.angles_deg: empty");
    if (scan->integration.ticks < 0) throw ConfigError("scan.integration: must be >= 0");
  }
  if (method == RunMethod::Compare && electronics &&
      electronics->start != idler_chain.detector)
    throw ConfigError("electronics.start: comparison heralds with the idler-chain detector");
  if (method == RunMethod::Analog) {
    if (!analog) throw ConfigError("analog: analog method needs an analog section");
    for (const auto* id : {&analog->reference, &analog->under_test}) {
      if (*id != signal_chain.detector && *id != idler_chain.detector)
        throw ConfigError("analog: detector '" + *id + "' is not on a chain");
      if (!detector(*id).analog)
        throw ConfigError("detectors." + *id + ".analog: missing for analog method");
    }
    if (analog->reference == analog->under_test)
      throw ConfigError("analog: reference and under_test must differ");
    if (analog->segments < 10) throw ConfigError("analog.segments: must be >= 10");
    if (pockels()) throw ConfigError("idler_chain: analog method does not use a pockels cell");
  }
}

}  // namespace twincal
