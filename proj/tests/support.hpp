#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "twincal/twincal.hpp"

namespace testing_support {

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

/// Kolmogorov statistic of a sample against the exponential CDF.
inline double ks_exponential(std::vector<double> x, double rate) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = 1.0 - std::exp(-rate * x[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

/// Upper critical value of chi-square with k dof at tail probability p,
/// Wilson-Hilferty approximation (z given by the caller).
inline double chi2_critical(double k, double z) {
  const double a = 2.0 / (9.0 * k);
  return k * std::pow(1.0 - a + z * std::sqrt(a), 3);
}

inline twincal::Scenario preset(const std::string& name) {
  return twincal::load_scenario(std::string(TWINCAL_PRESET_DIR) + "/" + name + ".json");
}

/// Minimal two-detector scenario: lossless chains, ideal detectors, TAC.
inline twincal::Scenario ideal_coincidence(double eta_dut, double pair_rate = 1e4) {
  using namespace twincal;
  Scenario s;
  s.name = "ideal";
  s.gate = seconds(2);
  s.source.pair_rate = pair_rate;
  s.source.phase_matching = PhaseMatching::TypeI;
  s.signal_chain.detector = "DUT";
  s.idler_chain.detector = "TRIG";
  DetectorConfig dut, trig;
  dut.spec = {eta_dut, 0.0, Duration{}, 300.0};
  trig.spec = {1.0, 0.0, Duration{}, 300.0};
  s.detectors = {{"DUT", dut}, {"TRIG", trig}};
  ElectronicsConfig e;
  e.kind = ElectronicsKind::Tac;
  e.start = "TRIG";
  e.stop = "DUT";
  e.tac.conversion_dead_time = Duration{};
  s.electronics = e;
  s.method = RunMethod::Coincidence;
  return s;
}

}  // namespace testing_support
