#pragma once

// Coincidence acquisition systems: TAC + MCA + SCA, time interval counter,
// AND gate, scalers, and off-peak accidental estimation.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "twincal/errors.hpp"
#include "twincal/timebase.hpp"

namespace twincal {

struct TimeWindow {
  Duration lo;
  Duration hi;

  constexpr bool contains(Duration d) const { return lo <= d && d <= hi; }
  constexpr Duration width() const { return hi - lo; }
  constexpr Duration center() const { return {(lo.ticks + hi.ticks) / 2}; }
};

struct Histogram {
  Duration bin_width = picoseconds(100);
  Duration origin{};  // start-stop difference at the first bin edge
  std::vector<std::uint64_t> counts;
  std::uint64_t n_starts_processed = 0;

  Histogram() = default;
  Histogram(Duration width, Duration first_edge, std::size_t n_bins)
      : bin_width(width), origin(first_edge), counts(n_bins, 0) {}

  std::size_t size() const { return counts.size(); }
  Duration bin_start(std::size_t i) const {
    return origin + bin_width * static_cast<std::int64_t>(i);
  }
  Duration end() const { return bin_start(counts.size()); }

  std::optional<std::size_t> index_of(Duration d) const {
    if (d < origin) return std::nullopt;
    const auto i = static_cast<std::size_t>((d - origin).ticks / bin_width.ticks);
    if (i >= counts.size()) return std::nullopt;
    return i;
  }

  bool add(Duration d) {
    if (auto i = index_of(d)) {
      ++counts[*i];
      return true;
    }
    return false;
  }

  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }

  std::size_t peak_bin() const {
    return static_cast<std::size_t>(
        std::max_element(counts.begin(), counts.end()) - counts.begin());
  }

  Histogram& operator+=(const Histogram& o) {
    if (o.bin_width != bin_width || o.origin != origin || o.size() != size())
      throw InvalidArgument("histogram: incompatible binning");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
    n_starts_processed += o.n_starts_processed;
    return *this;
  }
};

struct CountsSummary {
  std::uint64_t n_trigger = 0;
  std::uint64_t n_signal = 0;
  std::uint64_t n_coincidence = 0;
  double n_accidental = 0.0;
  std::uint64_t n_background = 0;
  Duration gate{};
  double stop_rate = 0.0;   // /s
  double start_rate = 0.0;  // /s
};

/// Scaler reading over [0, gate).
inline std::uint64_t count_scaler(std::span<const TimeStamp> clicks, Duration gate) {
  for (auto t : clicks)
    if (t.ticks < 0 || t.ticks >= gate.ticks)
      throw InvalidArgument("count_scaler: click outside the gate");
  return clicks.size();
}

struct TacSpec {
  Duration stop_delay_line = microseconds(1);
  Duration conversion_dead_time = microseconds(10);
  bool has_valid_start = false;
  TimeWindow sca_window{nanoseconds(997), nanoseconds(1003)};
  Duration mca_bin = picoseconds(100);
  Duration range{};  // zero means 2 x stop_delay_line

  Duration effective_range() const {
    return range.ticks > 0 ? range : stop_delay_line * 2;
  }

  void validate() const {
    if (stop_delay_line.ticks <= 0) throw InvalidArgument("tac: stop_delay_line must be > 0");
    if (!(sca_window.lo < sca_window.hi)) throw InvalidArgument("tac: sca window needs lo < hi");
    if (conversion_dead_time.ticks < 0)
      throw InvalidArgument("tac: conversion_dead_time must be >= 0");
    if (mca_bin.ticks <= 0) throw InvalidArgument("tac: mca_bin must be > 0");
  }
};

struct TacResult {
  Histogram histogram;
  std::uint64_t n_coincidence = 0;
  std::uint64_t valid_starts = 0;  // starts that armed the converter
  std::uint64_t raw_starts = 0;
};

/// Sequential TAC. An idle converter arms on a start, takes the first stop at
/// or after it (up to the range), and stays busy until that stop (or the
/// range timeout) plus the conversion dead time. Starts arriving while busy
/// are lost. Stops must already carry the delay line.
inline TacResult tac_process(std::span<const TimeStamp> starts, std::span<const TimeStamp> stops,
                             const TacSpec& spec) {
  spec.validate();
  if (!is_sorted_weak(starts) || !is_sorted_weak(stops))
    throw InvalidArgument("tac_process: input not sorted");

  const Duration range = spec.effective_range();
  TacResult r;
  r.histogram = Histogram(spec.mca_bin, Duration{},
                          static_cast<std::size_t>((range.ticks + spec.mca_bin.ticks - 1) /
                                                   spec.mca_bin.ticks));
  r.raw_starts = starts.size();

  std::size_t j = 0;
  bool busy = false;
  TimeStamp busy_until{};
  for (TimeStamp s : starts) {
    if (busy && s < busy_until) continue;
    ++r.valid_starts;
    while (j < stops.size() && stops[j] < s) ++j;
    TimeStamp end = s + range;
    if (j < stops.size() && stops[j] - s < range) {
      const Duration d = stops[j] - s;
      r.histogram.add(d);
      if (spec.sca_window.contains(d)) ++r.n_coincidence;
      end = stops[j];
    }
    busy = true;
    busy_until = end + spec.conversion_dead_time;
  }
  r.histogram.n_starts_processed = r.valid_starts;
  return r;
}

struct TicSpec {
  Duration resolution = picoseconds(25);
  Duration histogram_bin = picoseconds(100);
  std::uint64_t n_pairs_target = 10000;
  std::uint64_t n_subsamples = 5;
  TimeWindow sca_window{nanoseconds(997), nanoseconds(1003)};
  Duration stop_delay_line = microseconds(1);
  Duration range{};  // zero means 2 x stop_delay_line

  Duration effective_range() const {
    return range.ticks > 0 ? range : stop_delay_line * 2;
  }

  void validate() const {
    if (resolution.ticks <= 0) throw InvalidArgument("tic: resolution must be > 0");
    if (histogram_bin < resolution) throw InvalidArgument("tic: histogram_bin < resolution");
    if (n_subsamples == 0 || n_pairs_target < n_subsamples)
      throw InvalidArgument("tic: need n_pairs_target >= n_subsamples >= 1");
    if (!(sca_window.lo < sca_window.hi)) throw InvalidArgument("tic: sca window needs lo < hi");
  }
};

struct TicResult {
  std::vector<Histogram> subsamples;
  std::uint64_t measured = 0;
  std::uint64_t n_coincidence = 0;
  bool partial = false;  // stream ended before n_pairs_target

  Histogram combined() const {
    Histogram h = subsamples.front();
    for (std::size_t i = 1; i < subsamples.size(); ++i) h += subsamples[i];
    return h;
  }
};

/// Quantized start-stop intervals: for each start the first stop at or after
/// it, floored to the counter resolution, at most `max_n` of them. Returns
/// an empty list when the stops run out first for every start.
inline std::vector<Duration> tic_intervals(std::span<const TimeStamp> starts,
                                           std::span<const TimeStamp> stops,
                                           Duration resolution, std::uint64_t max_n) {
  if (resolution.ticks <= 0) throw InvalidArgument("tic: resolution must be > 0");
  if (!is_sorted_weak(starts) || !is_sorted_weak(stops))
    throw InvalidArgument("tic_process: input not sorted");
  std::vector<Duration> out;
  std::size_t j = 0;
  for (TimeStamp s : starts) {
    if (out.size() >= max_n) break;
    while (j < stops.size() && stops[j] < s) ++j;
    if (j == stops.size()) break;
    Duration d = stops[j] - s;
    d.ticks -= d.ticks % resolution.ticks;
    out.push_back(d);
  }
  return out;
}

/// Splits measured intervals into n_subsamples equal batches of histograms.
inline TicResult tic_histograms(std::span<const Duration> intervals, const TicSpec& spec) {
  spec.validate();
  const Duration range = spec.effective_range();
  const auto n_bins = static_cast<std::size_t>(
      (range.ticks + spec.histogram_bin.ticks - 1) / spec.histogram_bin.ticks);
  const std::uint64_t per_batch = spec.n_pairs_target / spec.n_subsamples;
  const std::uint64_t target = per_batch * spec.n_subsamples;

  TicResult r;
  r.subsamples.assign(spec.n_subsamples, Histogram(spec.histogram_bin, Duration{}, n_bins));
  for (Duration d : intervals) {
    if (r.measured == target) break;
    auto& h = r.subsamples[r.measured / per_batch];
    h.add(d);
    ++h.n_starts_processed;
    if (spec.sca_window.contains(d)) ++r.n_coincidence;
    ++r.measured;
  }
  r.partial = r.measured < target;
  return r;
}

/// Time interval counter: collects n_pairs_target intervals (see
/// tic_intervals) split into n_subsamples batches.
inline TicResult tic_process(std::span<const TimeStamp> starts, std::span<const TimeStamp> stops,
                             const TicSpec& spec) {
  spec.validate();
  const std::uint64_t target = (spec.n_pairs_target / spec.n_subsamples) * spec.n_subsamples;
  const auto iv = tic_intervals(starts, stops, spec.resolution, target);
  return tic_histograms(iv, spec);
}

/// Hardware AND: pairs with |tA − tB| <= window/2, each click used once,
/// greedy earliest match. Symmetric in its two inputs.
inline std::uint64_t and_gate(std::span<const TimeStamp> a, std::span<const TimeStamp> b,
                              Duration window) {
  if (!is_sorted_weak(a) || !is_sorted_weak(b))
    throw InvalidArgument("and_gate: input not sorted");
  const std::int64_t half2 = window.ticks;  // compare 2|Δ| against window
  std::uint64_t n = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const std::int64_t d = a[i].ticks - b[j].ticks;
    if (2 * d > half2)
      ++j;
    else if (-2 * d > half2)
      ++i;
    else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

using OffPeakRegion = std::vector<TimeWindow>;

/// Every part of the histogram further than 5 window widths from the SCA
/// window centre.
inline OffPeakRegion default_off_peak(const Histogram& h, const TimeWindow& sca) {
  const Duration c = sca.center();
  const Duration w = sca.width() * 5;
  OffPeakRegion out;
  if (c - w > h.origin) out.push_back({h.origin, c - w});
  if (c + w < h.end()) out.push_back({c + w, h.end()});
  return out;
}

/// Flat-background level from bins lying wholly inside the off-peak region,
/// scaled to the SCA window width.
inline double estimate_accidentals(const Histogram& h, const TimeWindow& sca,
                                   const OffPeakRegion& off_peak) {
  for (const auto& r : off_peak)
    if (r.lo <= sca.hi && sca.lo <= r.hi)
      throw InvalidArgument("estimate_accidentals: off-peak region overlaps the SCA window");
  std::uint64_t sum = 0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const Duration lo = h.bin_start(i), hi = h.bin_start(i + 1);
    for (const auto& r : off_peak) {
      if (r.lo <= lo && hi <= r.hi) {
        sum += h.counts[i];
        ++used;
        break;
      }
    }
  }
  if (used == 0) throw InvalidArgument("estimate_accidentals: empty off-peak region");
  const double per_bin = static_cast<double>(sum) / static_cast<double>(used);
  const double bins_in_window =
      static_cast<double>(sca.width().ticks) / static_cast<double>(h.bin_width.ticks);
  return per_bin * bins_in_window;
}

}  // namespace twincal
