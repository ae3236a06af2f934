#pragma once

// Integer-picosecond time axis and the Poisson event generator shared by all
// physics modules.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <span>
#include <vector>

#include "twincal/errors.hpp"
#include "twincal/random.hpp"

namespace twincal {

struct Duration {
  std::int64_t ticks = 0;  // picoseconds

  constexpr auto operator<=>(const Duration&) const = default;
  constexpr Duration operator+(Duration o) const { return {ticks + o.ticks}; }
  constexpr Duration operator-(Duration o) const { return {ticks - o.ticks}; }
  constexpr Duration operator*(std::int64_t k) const { return {ticks * k}; }
  constexpr Duration operator/(std::int64_t k) const { return {ticks / k}; }
  constexpr Duration operator-() const { return {-ticks}; }
  constexpr Duration& operator+=(Duration o) {
    ticks += o.ticks;
    return *this;
  }

  constexpr double seconds() const { return static_cast<double>(ticks) * 1e-12; }
};

struct TimeStamp {
  std::int64_t ticks = 0;  // picoseconds from run start

  constexpr auto operator<=>(const TimeStamp&) const = default;
  constexpr TimeStamp operator+(Duration d) const { return {ticks + d.ticks}; }
  constexpr TimeStamp operator-(Duration d) const { return {ticks - d.ticks}; }
  constexpr Duration operator-(TimeStamp o) const { return {ticks - o.ticks}; }
};

constexpr Duration picoseconds(std::int64_t n) { return {n}; }
constexpr Duration nanoseconds(std::int64_t n) { return {n * 1'000}; }
constexpr Duration microseconds(std::int64_t n) { return {n * 1'000'000}; }
constexpr Duration milliseconds(std::int64_t n) { return {n * 1'000'000'000}; }
constexpr Duration seconds(std::int64_t n) { return {n * 1'000'000'000'000}; }

/// Nearest whole picosecond.
inline Duration from_seconds(double s) { return {std::llround(s * 1e12)}; }

/// Rounds a real-valued picosecond offset onto the tick grid.
inline std::int64_t round_ticks(double ps) { return std::llround(ps); }

using TimeTags = std::vector<TimeStamp>;

inline bool is_sorted_strict(std::span<const TimeStamp> v) {
  return std::adjacent_find(v.begin(), v.end(), [](TimeStamp a, TimeStamp b) {
           return !(a < b);
         }) == v.end();
}

inline bool is_sorted_weak(std::span<const TimeStamp> v) {
  return std::is_sorted(v.begin(), v.end());
}

/// Homogeneous Poisson process on [0, gate) built by accumulating exponential
/// inter-arrival times. Output ticks are strictly increasing; two arrivals
/// that land on the same picosecond are pushed one tick apart.
inline TimeTags poisson_stream(double rate_per_s, Duration gate, RandomStream& rng) {
  if (!(rate_per_s >= 0.0)) throw InvalidArgument("poisson_stream: negative rate");
  if (gate.ticks < 0) throw InvalidArgument("poisson_stream: negative gate");
  TimeTags out;
  if (rate_per_s == 0.0 || gate.ticks == 0) return out;

  const double rate_per_tick = rate_per_s * 1e-12;
  const double expected = rate_per_s * gate.seconds();
  out.reserve(static_cast<std::size_t>(expected + 6.0 * std::sqrt(expected) + 16.0));

  double t = 0.0;
  std::int64_t last = -1;
  for (;;) {
    t += rng.exponential(rate_per_tick);
    if (t >= static_cast<double>(gate.ticks)) break;
    std::int64_t tick = static_cast<std::int64_t>(t);
    if (tick <= last) tick = last + 1;
    if (tick >= gate.ticks) break;
    out.push_back({tick});
    last = tick;
  }
  return out;
}

enum class StreamLabel : std::uint8_t { A, B };

struct LabeledTime {
  TimeStamp t;
  StreamLabel label;

  constexpr bool operator==(const LabeledTime&) const = default;
};

/// Sorted union of two sorted streams; at equal ticks stream `a` comes first.
inline std::vector<LabeledTime> merge_streams(std::span<const TimeStamp> a,
                                              std::span<const TimeStamp> b) {
  if (!is_sorted_weak(a) || !is_sorted_weak(b))
    throw InvalidArgument("merge_streams: input not sorted");
  std::vector<LabeledTime> out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i] <= b[j]))
      out.push_back({a[i++], StreamLabel::A});
    else
      out.push_back({b[j++], StreamLabel::B});
  }
  return out;
}

inline TimeTags shift(std::span<const TimeStamp> v, Duration d) {
  TimeTags out;
  out.reserve(v.size());
  for (auto t : v) out.push_back(t + d);
  return out;
}

}  // namespace twincal
