#pragma once

// Photon-counting and analog detector models.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "twincal/errors.hpp"
#include "twincal/optics.hpp"
#include "twincal/random.hpp"
#include "twincal/timebase.hpp"

namespace twincal {

struct DetectorSpec {
  double eta = 0.5;
  double dark_rate = 200.0;  // counts/s
  Duration dead_time = nanoseconds(50);
  double jitter_ps = 300.0;  // Gaussian sigma

  void validate() const {
    if (!(eta >= 0.0 && eta <= 1.0)) throw InvalidArgument("detector: eta must be in [0, 1]");
    if (!(dark_rate >= 0.0)) throw InvalidArgument("detector: dark_rate must be >= 0");
    if (dead_time.ticks < 0) throw InvalidArgument("detector: dead_time must be >= 0");
    if (!(jitter_ps >= 0.0)) throw InvalidArgument("detector: jitter must be >= 0");
  }
};

enum class ClickOrigin : std::uint8_t { Photon, Dark, Stray };

/// A detector firing. `origin` and `pair_id` are simulation diagnostics;
/// estimators only ever receive the stripped TimeTags view.
struct ClickRecord {
  TimeStamp t;
  std::uint32_t detector = 0;
  ClickOrigin origin = ClickOrigin::Photon;
  std::uint64_t pair_id = 0;  // meaningful when origin == Photon
};

using Clicks = std::vector<ClickRecord>;

inline TimeTags strip(std::span<const ClickRecord> clicks) {
  TimeTags out;
  out.reserve(clicks.size());
  for (const auto& c : clicks) out.push_back(c.t);
  return out;
}

/// Drops every click closer than `dead_time` to the previous surviving one
/// (non-paralyzable). Same-tick duplicates always collapse.
inline Clicks dead_time_filter(std::span<const ClickRecord> sorted, Duration dead_time) {
  Clicks out;
  out.reserve(sorted.size());
  for (const auto& c : sorted) {
    if (!out.empty()) {
      const Duration gap = c.t - out.back().t;
      if (gap.ticks <= 0 || gap < dead_time) continue;
    }
    out.push_back(c);
  }
  return out;
}

/// Efficiency thinning, dark (and optional stray-light) clicks, timing jitter,
/// then the dead-time filter. Clicks outside [0, gate) are not recorded.
inline Clicks detect(std::span<const Photon> photons, const DetectorSpec& spec, Duration gate,
                     const RandomStream& rng, double stray_rate = 0.0,
                     std::uint32_t detector = 0) {
  spec.validate();
  if (!is_time_sorted(photons)) throw InvalidArgument("detect: photons not sorted");
  if (!(stray_rate >= 0.0)) throw InvalidArgument("detect: stray rate must be >= 0");

  auto eff_rng = rng.derive("efficiency");
  auto dark_rng = rng.derive("dark");
  auto stray_rng = rng.derive("stray");
  auto jitter_rng = rng.derive("jitter");

  Clicks raw;
  raw.reserve(static_cast<std::size_t>(photons.size() * spec.eta) + 64);
  for (const auto& ph : photons)
    if (spec.eta >= 1.0 || eff_rng.bernoulli(spec.eta))
      raw.push_back({ph.t, detector, ClickOrigin::Photon, ph.pair_id});
  for (auto t : poisson_stream(spec.dark_rate, gate, dark_rng))
    raw.push_back({t, detector, ClickOrigin::Dark, 0});
  for (auto t : poisson_stream(stray_rate, gate, stray_rng))
    raw.push_back({t, detector, ClickOrigin::Stray, 0});

  Clicks kept;
  kept.reserve(raw.size());
  for (auto c : raw) {
    if (spec.jitter_ps > 0.0) c.t.ticks += round_ticks(jitter_rng.normal(0.0, spec.jitter_ps));
    if (c.t.ticks < 0 || c.t.ticks >= gate.ticks) continue;
    kept.push_back(c);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const ClickRecord& a, const ClickRecord& b) { return a.t < b.t; });
  return dead_time_filter(kept, spec.dead_time);
}

struct AnalogSpec {
  double gain_mean = 1.0;
  double gain_rel_std = 0.0;
  Duration bin_width = nanoseconds(10);

  void validate() const {
    if (!(gain_mean > 0.0)) throw InvalidArgument("analog: gain_mean must be > 0");
    if (!(gain_rel_std >= 0.0)) throw InvalidArgument("analog: gain_rel_std must be >= 0");
    if (bin_width.ticks <= 0) throw InvalidArgument("analog: bin_width must be > 0");
  }
};

/// One charge sample from the gain distribution: Normal truncated at zero.
inline double sample_gain(const AnalogSpec& a, RandomStream& rng) {
  if (a.gain_rel_std == 0.0) return a.gain_mean;
  const double sigma = a.gain_rel_std * a.gain_mean;
  for (;;) {
    const double g = rng.normal(a.gain_mean, sigma);
    if (g >= 0.0) return g;
  }
}

/// Binned photocurrent: every detection (photon or dark) deposits one gain
/// sample into its time bin. The trailing partial bin is dropped.
inline std::vector<double> analog_trace(std::span<const Photon> photons, const DetectorSpec& det,
                                        const AnalogSpec& aspec, Duration gate,
                                        const RandomStream& rng) {
  aspec.validate();
  det.validate();
  const auto n_bins = static_cast<std::size_t>(gate.ticks / aspec.bin_width.ticks);
  std::vector<double> trace(n_bins, 0.0);

  auto eff_rng = rng.derive("efficiency");
  auto dark_rng = rng.derive("dark");
  auto gain_rng = rng.derive("gain");
  auto deposit = [&](TimeStamp t) {
    if (t.ticks < 0) return;
    const auto bin = static_cast<std::size_t>(t.ticks / aspec.bin_width.ticks);
    if (bin < n_bins) trace[bin] += sample_gain(aspec, gain_rng);
  };
  for (const auto& ph : photons)
    if (det.eta >= 1.0 || eff_rng.bernoulli(det.eta)) deposit(ph.t);
  for (auto t : poisson_stream(det.dark_rate, gate, dark_rng)) deposit(t);
  return trace;
}

}  // namespace twincal
