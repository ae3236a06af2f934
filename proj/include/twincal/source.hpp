#pragma once

// SPDC pair source: Poisson decay times, energy-conservation check on the
// three wavelengths, and the polarization correlation of Type I / Type II
// phase matching. Type II pairs are a classical 50/50 mixture of (H,V) and
// (V,H); no relative phase is carried.

#include <cmath>
#include <cstdint>
#include <vector>

#include "twincal/errors.hpp"
#include "twincal/random.hpp"
#include "twincal/timebase.hpp"

namespace twincal {

enum class PhaseMatching : std::uint8_t { TypeI, TypeII };
enum class Polarization : std::uint8_t { H, V };

constexpr Polarization flipped(Polarization p) {
  return p == Polarization::H ? Polarization::V : Polarization::H;
}

/// Residual tolerance for 1/λp = 1/λs + 1/λi, relative to 1/λp.
inline constexpr double kEnergyTolerance = 1e-3;

struct EnergyCheck {
  double residual = 0.0;
  bool pass = false;
};

/// |1/λp − 1/λs − 1/λi|·λp. Wavelengths in nm.
inline EnergyCheck validate_energy_conservation(double pump_nm, double signal_nm,
                                                double idler_nm) {
  if (!(pump_nm > 0.0) || !(signal_nm > 0.0) || !(idler_nm > 0.0))
    throw InvalidArgument("validate_energy_conservation: wavelengths must be positive");
  const double r = std::abs(1.0 / pump_nm - 1.0 / signal_nm - 1.0 / idler_nm) * pump_nm;
  return {r, r <= kEnergyTolerance};
}

/// Wavelength of the twin photon given the pump and one branch.
inline double conjugate_wavelength(double pump_nm, double known_nm) {
  if (!(pump_nm > 0.0) || !(known_nm > pump_nm))
    throw InvalidArgument("conjugate_wavelength: need 0 < pump < known");
  return 1.0 / (1.0 / pump_nm - 1.0 / known_nm);
}

struct SourceSpec {
  double pair_rate = 1e5;  // pairs/s at the crystal
  double pump_wavelength_nm = 351.1;
  double signal_wavelength_nm = 702.2;
  double idler_wavelength_nm = 702.2;
  PhaseMatching phase_matching = PhaseMatching::TypeII;
  double emission_jitter_ps = 0.1;
  double collection_overlap = 1.0;  // P(idler enters its channel | signal did)

  EnergyCheck energy() const {
    return validate_energy_conservation(pump_wavelength_nm, signal_wavelength_nm,
                                        idler_wavelength_nm);
  }

  void validate() const {
    if (!(pair_rate >= 0.0)) throw InvalidArgument("source: pair_rate must be >= 0");
    if (!(collection_overlap >= 0.0 && collection_overlap <= 1.0))
      throw InvalidArgument("source: collection_overlap must be in [0, 1]");
    if (!(emission_jitter_ps >= 0.0))
      throw InvalidArgument("source: emission_jitter_ps must be >= 0");
    const auto e = energy();
    if (!e.pass)
      throw InvalidArgument("source: energy conservation violated (residual " +
                            std::to_string(e.residual) + ")");
  }
};

struct PairEvent {
  std::uint64_t pair_id = 0;
  TimeStamp t_emit;
  TimeStamp signal_time;  // t_emit plus branch jitter
  TimeStamp idler_time;
  Polarization signal_pol = Polarization::H;
  Polarization idler_pol = Polarization::H;
  bool signal_in_channel = true;
  bool idler_in_channel = true;
};

inline std::vector<PairEvent> generate_pairs(const SourceSpec& spec, Duration gate,
                                             const RandomStream& rng) {
  spec.validate();
  auto decay_rng = rng.derive("decay");
  auto pol_rng = rng.derive("polarization");
  auto overlap_rng = rng.derive("overlap");
  auto jitter_rng = rng.derive("jitter");

  const TimeTags decays = poisson_stream(spec.pair_rate, gate, decay_rng);
  std::vector<PairEvent> pairs;
  pairs.reserve(decays.size());

  auto jittered = [&](TimeStamp t) {
    if (spec.emission_jitter_ps == 0.0) return t;
    std::int64_t k = t.ticks + round_ticks(jitter_rng.normal(0.0, spec.emission_jitter_ps));
    return TimeStamp{k < 0 ? 0 : k};
  };

  std::uint64_t id = 0;
  for (TimeStamp t : decays) {
    PairEvent p;
    p.pair_id = id++;
    p.t_emit = t;
    if (spec.phase_matching == PhaseMatching::TypeI) {
      // parallel ordinary polarizations
      p.signal_pol = Polarization::H;
      p.idler_pol = Polarization::H;
    } else {
      p.signal_pol = pol_rng.bernoulli(0.5) ? Polarization::H : Polarization::V;
      p.idler_pol = flipped(p.signal_pol);
    }
    p.signal_in_channel = true;
    p.idler_in_channel = spec.collection_overlap >= 1.0 ||
                         overlap_rng.bernoulli(spec.collection_overlap);
    p.signal_time = jittered(t);
    p.idler_time = jittered(t);
    pairs.push_back(p);
  }
  return pairs;
}

}  // namespace twincal
