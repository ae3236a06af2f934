#pragma once

// Passive and switched optics acting on photon streams. Photons are points
// carrying arrival time, linear polarization and their pair lineage.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "twincal/errors.hpp"
#include "twincal/random.hpp"
#include "twincal/source.hpp"
#include "twincal/timebase.hpp"

namespace twincal {

enum class Branch : std::uint8_t { Signal, Idler };

struct Photon {
  TimeStamp t;
  Polarization pol = Polarization::H;
  Branch branch = Branch::Signal;
  std::uint64_t pair_id = 0;  // diagnostic lineage only
};

using Photons = std::vector<Photon>;

inline bool is_time_sorted(std::span<const Photon> v) {
  return std::is_sorted(v.begin(), v.end(),
                        [](const Photon& a, const Photon& b) { return a.t < b.t; });
}

/// One photon per pair that entered the branch's channel, sorted by arrival.
inline Photons photons_from_pairs(std::span<const PairEvent> pairs, Branch branch) {
  Photons out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (branch == Branch::Signal) {
      if (p.signal_in_channel) out.push_back({p.signal_time, p.signal_pol, branch, p.pair_id});
    } else {
      if (p.idler_in_channel) out.push_back({p.idler_time, p.idler_pol, branch, p.pair_id});
    }
  }
  if (!is_time_sorted(out))
    std::stable_sort(out.begin(), out.end(),
                     [](const Photon& a, const Photon& b) { return a.t < b.t; });
  return out;
}

struct LossElement {
  double transmittance = 1.0;

  void validate() const {
    if (!(transmittance >= 0.0 && transmittance <= 1.0))
      throw InvalidArgument("loss: transmittance must be in [0, 1]");
  }
};

/// Bernoulli thinning; order preserved.
inline Photons apply_loss(std::span<const Photon> photons, const LossElement& elem,
                          RandomStream& rng) {
  elem.validate();
  if (elem.transmittance >= 1.0) return Photons(photons.begin(), photons.end());
  Photons out;
  if (elem.transmittance <= 0.0) return out;
  out.reserve(static_cast<std::size_t>(photons.size() * elem.transmittance * 1.05) + 16);
  for (const auto& ph : photons)
    if (rng.bernoulli(elem.transmittance)) out.push_back(ph);
  return out;
}

struct PolarizerSpec {
  double angle_deg = 0.0;  // 0° transmits H
  double extinction = 0.0;  // leak of the crossed polarization

  void validate() const {
    if (!(extinction >= 0.0 && extinction < 1.0))
      throw InvalidArgument("polarizer: extinction must be in [0, 1)");
  }
};

/// Single-photon Malus law.
inline double pass_probability(Polarization pol, const PolarizerSpec& spec) {
  const double a = spec.angle_deg * std::numbers::pi / 180.0;
  const double c2 = std::cos(a) * std::cos(a);
  const double s2 = 1.0 - c2;
  return pol == Polarization::H ? c2 + spec.extinction * s2 : s2 + spec.extinction * c2;
}

inline bool polarizer_pass(const Photon& photon, const PolarizerSpec& spec, RandomStream& rng) {
  return rng.bernoulli(pass_probability(photon.pol, spec));
}

inline Photons apply_polarizer(std::span<const Photon> photons, const PolarizerSpec& spec,
                               RandomStream& rng) {
  spec.validate();
  const double p_h = pass_probability(Polarization::H, spec);
  const double p_v = pass_probability(Polarization::V, spec);
  Photons out;
  out.reserve(photons.size());
  for (const auto& ph : photons)
    if (rng.bernoulli(ph.pol == Polarization::H ? p_h : p_v)) out.push_back(ph);
  return out;
}

enum class PbsPort : std::uint8_t { Transmit, Reflect };

/// V is transmitted, H reflected.
constexpr PbsPort pbs_route(const Photon& photon) {
  return photon.pol == Polarization::V ? PbsPort::Transmit : PbsPort::Reflect;
}

inline Photons select_pbs_port(std::span<const Photon> photons, PbsPort port) {
  Photons out;
  out.reserve(photons.size() / 2 + 16);
  for (const auto& ph : photons)
    if (pbs_route(ph) == port) out.push_back(ph);
  return out;
}

struct FiberSpec {
  Duration delay = nanoseconds(250);  // ~50 m single-mode
  double transmittance = 1.0;

  void validate() const {
    if (delay.ticks < 0) throw InvalidArgument("fiber: delay must be >= 0");
    LossElement{transmittance}.validate();
  }
};

/// Polarization-maintaining delay line with Bernoulli loss.
inline Photons fiber_delay(std::span<const Photon> photons, const FiberSpec& spec,
                           RandomStream& rng) {
  spec.validate();
  Photons out = apply_loss(photons, LossElement{spec.transmittance}, rng);
  for (auto& ph : out) ph.t = ph.t + spec.delay;
  return out;
}

struct PockelsSpec {
  Duration trigger_delay = nanoseconds(0);
  Duration rise = nanoseconds(5);
  Duration flat_top = nanoseconds(180);
  Duration fall_tail = microseconds(10);
  double flip_efficiency = 1.0;
  Duration driver_dead_time = microseconds(10);
  double max_trigger_rate = 1e4;

  void validate() const {
    if (trigger_delay.ticks < 0 || rise.ticks < 0 || flat_top.ticks < 0 ||
        fall_tail.ticks < 0 || driver_dead_time.ticks < 0)
      throw InvalidArgument("pockels: durations must be >= 0");
    if (!(flip_efficiency >= 0.0 && flip_efficiency <= 1.0))
      throw InvalidArgument("pockels: flip_efficiency must be in [0, 1]");
  }
};

/// Triggers surviving the driver's non-paralyzable dead time.
inline TimeTags accept_triggers(std::span<const TimeStamp> triggers, Duration dead_time) {
  TimeTags out;
  bool have = false;
  TimeStamp last{};
  for (auto t : triggers) {
    if (!have || t - last >= dead_time) {
      out.push_back(t);
      last = t;
      have = true;
    }
  }
  return out;
}

struct PockelsOutput {
  Photons photons;
  TimeTags accepted_triggers;
};

enum class PockelsPhase : std::uint8_t { Off, Ramp, FlatTop };

/// Phase of the high-voltage envelope opened by a trigger at `trig`, seen at `t`.
inline PockelsPhase pockels_phase(TimeStamp trig, TimeStamp t, const PockelsSpec& spec) {
  const TimeStamp start = trig + spec.trigger_delay;
  const TimeStamp flat_lo = start + spec.rise;
  const TimeStamp flat_hi = flat_lo + spec.flat_top;
  if (t < start) return PockelsPhase::Off;
  if (t < flat_lo) return PockelsPhase::Ramp;
  if (t <= flat_hi) return PockelsPhase::FlatTop;
  if (t <= flat_hi + spec.fall_tail) return PockelsPhase::Ramp;
  return PockelsPhase::Off;
}

/// Conditionally rotates idler polarization. Flat-top flips with
/// flip_efficiency; the rising edge and fall tail with flip_efficiency/2.
/// Timestamps are never changed.
inline PockelsOutput pockels_apply(std::span<const Photon> idlers,
                                   std::span<const TimeStamp> triggers,
                                   const PockelsSpec& spec, RandomStream& rng) {
  spec.validate();
  if (!is_time_sorted(idlers)) throw InvalidArgument("pockels_apply: photons not sorted");
  if (!is_sorted_weak(triggers)) throw InvalidArgument("pockels_apply: triggers not sorted");

  PockelsOutput out;
  out.accepted_triggers = accept_triggers(triggers, spec.driver_dead_time);
  out.photons.assign(idlers.begin(), idlers.end());
  const auto& acc = out.accepted_triggers;
  if (acc.empty()) return out;

  // Envelopes can overlap (fall tail vs. dead time), so each photon looks at
  // the latest envelope that has started and the one before it.
  std::size_t k = 0;  // number of envelopes whose start <= photon time
  for (auto& ph : out.photons) {
    while (k < acc.size() && acc[k] + spec.trigger_delay <= ph.t) ++k;
    if (k == 0) continue;
    PockelsPhase phase = pockels_phase(acc[k - 1], ph.t, spec);
    if (phase != PockelsPhase::FlatTop && k >= 2) {
      const PockelsPhase prev = pockels_phase(acc[k - 2], ph.t, spec);
      if (prev == PockelsPhase::FlatTop || (prev == PockelsPhase::Ramp && phase == PockelsPhase::Off))
        phase = prev;
    }
    double p = 0.0;
    if (phase == PockelsPhase::FlatTop)
      p = spec.flip_efficiency;
    else if (phase == PockelsPhase::Ramp)
      p = 0.5 * spec.flip_efficiency;
    if (p > 0.0 && rng.bernoulli(p)) ph.pol = flipped(ph.pol);
  }
  return out;
}

}  // namespace twincal
