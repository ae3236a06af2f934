#pragma once

// One simulated acquisition of a scenario: pairs through both optical chains
// onto their detectors. The signal chain runs first because its detector
// triggers the Pockels cell on the idler side.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "twincal/detection.hpp"
#include "twincal/optics.hpp"
#include "twincal/scenario.hpp"
#include "twincal/source.hpp"

namespace twincal {

struct AcquisitionOptions {
  std::optional<double> pair_rate;  // overrides the source (0 = SPDC off)
  bool pockels_enabled = true;
  std::string polarizer;  // element whose angle is overridden
  std::optional<double> polarizer_angle_deg;
  bool keep_photons = false;  // retain detector-input photons (analog method)
};

struct Acquisition {
  Duration gate{};
  Clicks signal_clicks;  // signal-chain detector, detector index 0
  Clicks idler_clicks;   // idler-chain detector, detector index 1
  TimeTags accepted_triggers;
  Photons signal_photons;
  Photons idler_photons;
  std::uint64_t n_pairs = 0;
};

inline const Clicks& clicks_of(const Scenario& s, const Acquisition& a, const std::string& id) {
  if (id == s.signal_chain.detector) return a.signal_clicks;
  if (id == s.idler_chain.detector) return a.idler_clicks;
  throw ConfigError("detector '" + id + "' is not on a chain");
}

namespace detail {

inline Photons run_chain(const Chain& chain, Photons photons, const std::string& label,
                         const AcquisitionOptions& opt, const TimeTags* triggers,
                         TimeTags* accepted, const RandomStream& rng) {
  for (std::size_t i = 0; i < chain.elements.size(); ++i) {
    auto erng = rng.derive(label + "/" + std::to_string(i));
    std::visit(
        [&](const auto& step) {
          using T = std::decay_t<decltype(step)>;
          if constexpr (std::is_same_v<T, LossStep>) {
            photons = apply_loss(photons, step.loss, erng);
          } else if constexpr (std::is_same_v<T, PolarizerStep>) {
            PolarizerSpec p = step.polarizer;
            if (opt.polarizer_angle_deg && step.name == opt.polarizer)
              p.angle_deg = *opt.polarizer_angle_deg;
            photons = apply_polarizer(photons, p, erng);
          } else if constexpr (std::is_same_v<T, PbsStep>) {
            photons = select_pbs_port(photons, step.port);
          } else if constexpr (std::is_same_v<T, FiberStep>) {
            photons = fiber_delay(photons, step.fiber, erng);
          } else {
            if (!opt.pockels_enabled || !triggers) return;
            auto out = pockels_apply(photons, *triggers, step.pockels, erng);
            photons = std::move(out.photons);
            if (accepted) *accepted = std::move(out.accepted_triggers);
          }
        },
        chain.elements[i]);
  }
  return photons;
}

}  // namespace detail

/// Simulates [0, gate). Stream paths: "source", "signal/<i>", "idler/<i>",
/// "detector/<id>", all below `rng`.
inline Acquisition acquire(const Scenario& s, Duration gate, const AcquisitionOptions& opt,
                           const RandomStream& rng) {
  SourceSpec src = s.source;
  if (opt.pair_rate) src.pair_rate = *opt.pair_rate;
  const auto pairs = generate_pairs(src, gate, rng.derive("source"));

  Acquisition a;
  a.gate = gate;
  a.n_pairs = pairs.size();

  const auto& d1 = s.detector(s.signal_chain.detector);
  Photons sig = detail::run_chain(s.signal_chain, photons_from_pairs(pairs, Branch::Signal),
                                  "signal", opt, nullptr, nullptr, rng);
  a.signal_clicks = detect(sig, d1.spec, gate, rng.derive("detector/" + s.signal_chain.detector),
                           d1.stray_light_rate, 0);

  const TimeTags triggers = strip(a.signal_clicks);
  const auto& d2 = s.detector(s.idler_chain.detector);
  Photons idl = detail::run_chain(s.idler_chain, photons_from_pairs(pairs, Branch::Idler),
                                  "idler", opt, &triggers, &a.accepted_triggers, rng);

  a.idler_clicks = detect(idl, d2.spec, gate, rng.derive("detector/" + s.idler_chain.detector),
                          d2.stray_light_rate, 1);
  if (opt.keep_photons) {
    a.signal_photons = std::move(sig);
    a.idler_photons = std::move(idl);
  }
  return a;
}

/// Smallest spacing between successive clicks; gate length if fewer than two.
inline Duration min_spacing(std::span<const ClickRecord> clicks, Duration gate) {
  Duration m = gate;
  for (std::size_t i = 1; i < clicks.size(); ++i) m = std::min(m, clicks[i].t - clicks[i - 1].t);
  return m;
}

inline Duration min_spacing(std::span<const TimeStamp> t, Duration gate) {
  Duration m = gate;
  for (std::size_t i = 1; i < t.size(); ++i) m = std::min(m, t[i] - t[i - 1]);
  return m;
}

}  // namespace twincal
