#pragma once

// Calibration estimators. Inputs are scaler counts, blind time tags,
// histograms, scans and binned currents; nothing here can see simulation
// ground truth or click origins.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

#include "twincal/electronics.hpp"
#include "twincal/errors.hpp"
#include "twincal/lsa.hpp"
#include "twincal/optics.hpp"
#include "twincal/timebase.hpp"

namespace twincal {

enum class Method : std::uint8_t { Coincidence, ConditionalRotation, Analog };

constexpr std::string_view to_string(Method m) {
  switch (m) {
    case Method::Coincidence: return "coincidence";
    case Method::ConditionalRotation: return "conditional_rotation";
    case Method::Analog: return "analog";
  }
  return "?";
}

struct EfficiencyEstimate {
  double value = 0.0;
  double std_uncertainty = 0.0;
  Method method = Method::Coincidence;
};

/// Uncorrected ratio N_coincidence / N_other_arm.
inline double eta_raw(double n_coincidence, double n_other_arm) {
  if (!(n_other_arm > 0.0)) throw InvalidArgument("eta_raw: other-arm count must be > 0");
  return n_coincidence / n_other_arm;
}

/// Probability that no uncorrelated stop pre-empts the correlated one,
/// first order: 1 − R_stop·t_delay.
inline double correction_alpha(double stop_rate, Duration t_delay) {
  if (!(stop_rate >= 0.0) || t_delay.ticks < 0)
    throw InvalidArgument("correction_alpha: negative rate or delay");
  const double x = stop_rate * t_delay.seconds();
  if (x >= 1.0) throw OutOfRegime("correction_alpha: stop_rate * t_delay >= 1");
  return 1.0 - x;
}

/// First-order live-time fraction 1 − R·τ of a non-paralyzable counter
/// whose measured output rate is R.
inline double correction_gamma(double count_rate, Duration dead_time) {
  if (!(count_rate >= 0.0) || dead_time.ticks < 0)
    throw InvalidArgument("correction_gamma: negative rate or dead time");
  const double x = count_rate * dead_time.seconds();
  if (x >= 1.0) throw OutOfRegime("correction_gamma: rate * dead_time >= 1");
  return 1.0 - x;
}

/// Fraction of raw trigger counts that actually armed the converter.
inline double correction_beta(double raw_start_count, double valid_start_count) {
  if (!(raw_start_count > 0.0)) throw InvalidArgument("correction_beta: zero raw count");
  if (!(valid_start_count > 0.0) || valid_start_count > raw_start_count)
    throw InvalidArgument("correction_beta: need raw >= valid > 0");
  return valid_start_count / raw_start_count;
}

/// Valid-start count for a TAC without a valid-start output, from the MCA.
/// Each accepted start is busy for its measured interval (or the full range
/// on timeout) plus the conversion dead time, then idle for an exponential
/// wait at the raw start rate:  V = (T − S + C·range) / (conv + range + 1/n).
inline double reconstruct_valid_starts(const Histogram& mca, std::uint64_t raw_starts,
                                       Duration gate, Duration conversion_dead_time,
                                       Duration range) {
  if (raw_starts == 0 || gate.ticks <= 0)
    throw InvalidArgument("reconstruct_valid_starts: need raw starts and a gate");
  double conversions = 0.0, interval_sum = 0.0;
  for (std::size_t i = 0; i < mca.size(); ++i) {
    const double c = static_cast<double>(mca.counts[i]);
    const double centre = (mca.bin_start(i).seconds() + mca.bin_start(i + 1).seconds()) * 0.5;
    conversions += c;
    interval_sum += c * centre;
  }
  const double T = gate.seconds();
  const double n = static_cast<double>(raw_starts) / T;
  const double v = (T - interval_sum + conversions * range.seconds()) /
                   (conversion_dead_time.seconds() + range.seconds() + 1.0 / n);
  return std::clamp(v, conversions > 0 ? conversions : 1.0, static_cast<double>(raw_starts));
}

struct CorrectionFactors {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double t_signal = 1.0;

  void validate() const {
    for (double f : {alpha, beta, gamma, t_signal})
      if (!(f > 0.0 && f <= 1.0))
        throw InvalidArgument("correction factors must lie in (0, 1]");
  }
};

/// Corrected coincidence-method efficiency:
///   η = (N_c − N_acc) / (β·(N_trig − N_bg)) / (T_signal·α·γ)
/// β is the valid-start fraction, so β·(N_trig − N_bg) is the number of
/// heralds the converter actually processed.
///
/// Uncertainty: coincidences are a binomial thinning of processed heralds;
/// accidentals and both background legs add Poisson variance.
inline EfficiencyEstimate eta_corrected(const CountsSummary& cs, const CorrectionFactors& cf) {
  cf.validate();
  const double S = static_cast<double>(cs.n_trigger) - static_cast<double>(cs.n_background);
  if (!(S > 0.0)) throw InvalidArgument("eta_corrected: N_trigger - N_background <= 0");
  const double heralds = cf.beta * S;
  const double num = static_cast<double>(cs.n_coincidence) - cs.n_accidental;
  const double scale = cf.t_signal * cf.alpha * cf.gamma;

  const double q = std::clamp(num / heralds, 0.0, 1.0);
  double var = q * (1.0 - q) * heralds + 2.0 * std::max(cs.n_accidental, 0.0) +
               q * q * cf.beta * cf.beta * 2.0 * static_cast<double>(cs.n_background);
  var = std::max(var, 1.0);

  return {num / heralds / scale, std::sqrt(var) / heralds / scale, Method::Coincidence};
}

/// Closed-form D2 count rate behind a polarizer at θ for the conditional
/// rotation scheme (flip_efficiency = 1 gives the ideal law).
inline double predicted_w2(double theta_deg, double tau_idler, double eta2, double pair_rate,
                           double eta1, double flip_efficiency) {
  const double th = theta_deg * std::numbers::pi / 180.0;
  return 0.5 * tau_idler * eta2 * pair_rate * (1.0 - eta1 * flip_efficiency * std::cos(2.0 * th));
}

namespace detail {
inline bool has_angle_near(std::span<const double> angles, double target) {
  for (double a : angles) {
    double d = std::fmod(std::abs(a - target), 180.0);
    if (std::min(d, 180.0 - d) <= 5.0) return true;
  }
  return false;
}
}  // namespace detail

/// (max − min)/(max + min) of background-subtracted counts.
inline double visibility_minmax(const VisibilityScan& scan) {
  scan.validate();
  if (!detail::has_angle_near(scan.angles_deg, 0.0) ||
      !detail::has_angle_near(scan.angles_deg, 90.0))
    throw InvalidArgument("visibility_minmax: scan must include angles near 0 and 90 degrees");
  double mx = -1e300, mn = 1e300;
  for (std::size_t i = 0; i < scan.counts.size(); ++i) {
    double c = static_cast<double>(scan.counts[i]);
    if (!scan.background.empty()) c -= static_cast<double>(scan.background[i]);
    mx = std::max(mx, c);
    mn = std::min(mn, c);
  }
  if (!(mx + mn > 0.0)) throw InvalidArgument("visibility_minmax: max + min <= 0");
  return (mx - mn) / (mx + mn);
}

struct ConditionalCorrections {
  double pockels_live_fraction = 1.0;
  double flip_efficiency = 1.0;
  double t_signal_polarizer = 1.0;
  double pockels_live_fraction_std = 0.0;
  double flip_efficiency_std = 0.0;
  double t_signal_polarizer_std = 0.0;
};

/// Visibility retained by the driver at a measured D1 click rate R, relative
/// to an always-ready, instantaneous cell. Two first-order terms:
///  - heralded idlers: a fraction 1/(1 + R·τ) of triggers is accepted; a
///    rejected trigger lands uniformly inside the previous dead period and
///    its idler (mid flat top) sees whatever is left of the previous envelope;
///  - unheralded idlers: they cross some other trigger's envelope with
///    probability R_acc·(rise/2 + flat + tail/2), flipping both polarizations
///    alike, which takes the same amount off the visibility.
inline double pockels_live_fraction(double trigger_rate, const PockelsSpec& spec) {
  if (!(trigger_rate >= 0.0)) throw InvalidArgument("pockels_live_fraction: negative rate");
  spec.validate();
  const double tau = spec.driver_dead_time.seconds();
  const double accepted = 1.0 / (1.0 + trigger_rate * tau);
  const double duty = trigger_rate * accepted *
                      (0.5 * spec.rise.seconds() + spec.flat_top.seconds() +
                       0.5 * spec.fall_tail.seconds());
  if (tau <= 0.0) return 1.0 - duty;
  const double t0 = spec.trigger_delay.seconds();
  const double t1 = t0 + spec.rise.seconds();
  const double t2 = t1 + spec.flat_top.seconds();
  const double t3 = t2 + spec.fall_tail.seconds();
  const double lo = t1 + 0.5 * spec.flat_top.seconds();
  const double hi = lo + tau;
  auto overlap = [&](double a, double b) { return std::max(0.0, std::min(b, hi) - std::max(a, lo)); };
  const double w = (0.5 * overlap(t0, t1) + overlap(t1, t2) + 0.5 * overlap(t2, t3)) / tau;
  const double live = accepted + (1.0 - accepted) * w - duty;
  if (!(live > 0.0)) throw OutOfRegime("pockels_live_fraction: envelopes cover the whole time line");
  return live;
}

/// η₁ = V̂ / (live · flip · T_signal).
inline EfficiencyEstimate eta_conditional(const LsaFit& fit, const ConditionalCorrections& c) {
  if (!(c.pockels_live_fraction > 0.0 && c.pockels_live_fraction <= 1.0) ||
      !(c.flip_efficiency > 0.0 && c.flip_efficiency <= 1.0) ||
      !(c.t_signal_polarizer > 0.0 && c.t_signal_polarizer <= 1.0))
    throw InvalidArgument("eta_conditional: corrections must lie in (0, 1]");
  const double d = c.pockels_live_fraction * c.flip_efficiency * c.t_signal_polarizer;
  const double rel2 = std::pow(c.pockels_live_fraction_std / c.pockels_live_fraction, 2) +
                      std::pow(c.flip_efficiency_std / c.flip_efficiency, 2) +
                      std::pow(c.t_signal_polarizer_std / c.t_signal_polarizer, 2);
  const double sv = fit.sigma_V();
  return {fit.V / d, std::sqrt(sv * sv + fit.V * fit.V * rel2) / d, Method::ConditionalRotation};
}

inline EfficiencyEstimate eta_conditional(const VisibilityScan& scan,
                                          const ConditionalCorrections& c) {
  return eta_conditional(lsa_fit_visibility(scan), c);
}

/// η₂ = K·⟨i₁i₂⟩/⟨i₁²⟩ from zero-lag, non-mean-subtracted correlations.
/// The uncertainty is the spread of per-segment ratios (batched means).
inline EfficiencyEstimate eta_analog(std::span<const double> i1, std::span<const double> i2,
                                     double K, std::size_t segments = 10) {
  if (i1.size() != i2.size()) throw InvalidArgument("eta_analog: traces differ in length");
  if (segments < 10) throw InvalidArgument("eta_analog: need at least 10 segments");
  if (i1.size() < segments) throw InvalidArgument("eta_analog: trace shorter than segment count");

  const std::size_t per = i1.size() / segments;
  double s12 = 0.0, s11 = 0.0;
  std::vector<double> ratios;
  ratios.reserve(segments);
  for (std::size_t k = 0; k < segments; ++k) {
    double a = 0.0, b = 0.0;
    const std::size_t lo = k * per, hi = (k + 1 == segments) ? i1.size() : lo + per;
    for (std::size_t n = lo; n < hi; ++n) {
      a += i1[n] * i2[n];
      b += i1[n] * i1[n];
    }
    s12 += a;
    s11 += b;
    if (b > 0.0) ratios.push_back(K * a / b);
  }
  if (!(s11 > 0.0)) throw InvalidArgument("eta_analog: zero autocorrelation");

  const double value = K * s12 / s11;
  double spread = 0.0;
  if (ratios.size() >= 2) {
    double m = 0.0;
    for (double r : ratios) m += r;
    m /= static_cast<double>(ratios.size());
    double ss = 0.0;
    for (double r : ratios) ss += (r - m) * (r - m);
    spread = std::sqrt(ss / static_cast<double>(ratios.size() - 1) /
                       static_cast<double>(ratios.size()));
  }
  return {value, spread, Method::Analog};
}

/// Gain-fluctuation factor ⟨g₁²⟩ / (⟨g₁⟩⟨g₂⟩) from calibration pulse heights.
inline double infer_K(std::span<const double> gain1, std::span<const double> gain2) {
  if (gain1.empty() || gain2.empty()) throw InvalidArgument("infer_K: empty gain samples");
  double m1 = 0.0, m11 = 0.0, m2 = 0.0;
  for (double g : gain1) {
    m1 += g;
    m11 += g * g;
  }
  for (double g : gain2) m2 += g;
  m1 /= static_cast<double>(gain1.size());
  m11 /= static_cast<double>(gain1.size());
  m2 /= static_cast<double>(gain2.size());
  if (m1 == 0.0 || m2 == 0.0) throw InvalidArgument("infer_K: zero mean gain");
  return m11 / (m1 * m2);
}

}  // namespace twincal
