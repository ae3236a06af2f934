#pragma once

// End-to-end orchestration: acquisitions, electronics, estimators, trials.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "twincal/acquisition.hpp"
#include "twincal/electronics.hpp"
#include "twincal/estimators.hpp"
#include "twincal/lsa.hpp"
#include "twincal/scenario.hpp"

namespace twincal {

/// Longest single simulated block; longer gates are split and summed.
inline constexpr Duration kMaxChunk = seconds(10);

// ---------------------------------------------------------------- electronics

/// Raw material of a coincidence measurement, summed over blocks.
struct CoincidenceData {
  ElectronicsKind kind = ElectronicsKind::Tac;
  Duration gate{};
  std::uint64_t n_start = 0;  // raw start scaler
  std::uint64_t n_stop = 0;   // raw stop scaler
  std::uint64_t n_coincidence = 0;
  std::uint64_t valid_starts = 0;  // TAC only
  std::optional<Histogram> histogram;
  std::vector<Duration> tic_intervals;
};

inline void accumulate_coincidences(CoincidenceData& acc, std::span<const TimeStamp> starts,
                                    std::span<const TimeStamp> stops, Duration gate,
                                    const ElectronicsConfig& e) {
  acc.kind = e.kind;
  acc.gate = acc.gate + gate;
  acc.n_start += count_scaler(starts, gate);
  acc.n_stop += count_scaler(stops, gate);
  const TimeTags delayed = shift(stops, e.stop_delay());
  switch (e.kind) {
    case ElectronicsKind::Tac: {
      auto r = tac_process(starts, delayed, e.tac);
      acc.n_coincidence += r.n_coincidence;
      acc.valid_starts += r.valid_starts;
      if (acc.histogram)
        *acc.histogram += r.histogram;
      else
        acc.histogram = std::move(r.histogram);
      break;
    }
    case ElectronicsKind::Tic: {
      const std::uint64_t target =
          (e.tic.n_pairs_target / e.tic.n_subsamples) * e.tic.n_subsamples;
      if (acc.tic_intervals.size() >= target) break;
      auto iv = tic_intervals(starts, delayed, e.tic.resolution, target - acc.tic_intervals.size());
      acc.tic_intervals.insert(acc.tic_intervals.end(), iv.begin(), iv.end());
      break;
    }
    case ElectronicsKind::AndGate:
      acc.n_coincidence += and_gate(starts, delayed, e.and_window);
      break;
  }
}

struct CoincidenceAnalysis {
  EfficiencyEstimate estimate;
  double eta_raw = 0.0;
  CountsSummary counts;
  CorrectionFactors factors;
  std::optional<Histogram> histogram;
  bool partial = false;  // TIC ran out of events
};

/// Corrected efficiency from blind counts. `n_background` is the trigger
/// scaler of an SPDC-off run lasting `background_gate`.
inline CoincidenceAnalysis analyze_coincidences(const CoincidenceData& d,
                                                std::uint64_t n_background,
                                                Duration background_gate,
                                                const ElectronicsConfig& e,
                                                Duration dut_dead_time, double t_signal) {
  if (d.gate.ticks <= 0) throw InvalidArgument("analyze_coincidences: empty acquisition");
  CoincidenceAnalysis out;
  auto& cs = out.counts;
  cs.gate = d.gate;
  cs.n_signal = d.n_stop;
  cs.stop_rate = static_cast<double>(d.n_stop) / d.gate.seconds();
  cs.start_rate = static_cast<double>(d.n_start) / d.gate.seconds();
  const double bg_rate =
      background_gate.ticks > 0 ? static_cast<double>(n_background) / background_gate.seconds()
                                : 0.0;

  auto& cf = out.factors;
  cf.t_signal = t_signal;
  cf.gamma = correction_gamma(cs.stop_rate, dut_dead_time);

  switch (d.kind) {
    case ElectronicsKind::Tac: {
      const Histogram& h = *d.histogram;
      cs.n_trigger = d.n_start;
      cs.n_background = static_cast<std::uint64_t>(std::llround(bg_rate * d.gate.seconds()));
      cs.n_coincidence = d.n_coincidence;
      cs.n_accidental = estimate_accidentals(
          h, e.tac.sca_window, e.off_peak ? *e.off_peak : default_off_peak(h, e.tac.sca_window));
      cf.alpha = correction_alpha(cs.stop_rate, e.tac.sca_window.center());
      const double valid =
          e.tac.has_valid_start
              ? static_cast<double>(d.valid_starts)
              : reconstruct_valid_starts(h, d.n_start, d.gate, e.tac.conversion_dead_time,
                                         e.tac.effective_range());
      cf.beta = correction_beta(static_cast<double>(d.n_start), valid);
      out.histogram = h;
      break;
    }
    case ElectronicsKind::Tic: {
      const TicResult r = tic_histograms(d.tic_intervals, e.tic);
      out.partial = r.partial;
      if (r.measured == 0) throw InvalidArgument("analyze_coincidences: no TIC measurements");
      const Histogram h = r.combined();
      cs.n_trigger = r.measured;
      const double frac = cs.start_rate > 0 ? bg_rate / cs.start_rate : 0.0;
      cs.n_background =
          static_cast<std::uint64_t>(std::llround(frac * static_cast<double>(r.measured)));
      cs.n_coincidence = r.n_coincidence;
      cs.n_accidental = estimate_accidentals(
          h, e.tic.sca_window, e.off_peak ? *e.off_peak : default_off_peak(h, e.tic.sca_window));
      cf.alpha = correction_alpha(cs.stop_rate, e.tic.sca_window.center());
      cf.beta = 1.0;
      out.histogram = h;
      break;
    }
    case ElectronicsKind::AndGate: {
      cs.n_trigger = d.n_start;
      cs.n_background = static_cast<std::uint64_t>(std::llround(bg_rate * d.gate.seconds()));
      cs.n_coincidence = d.n_coincidence;
      cs.n_accidental = static_cast<double>(d.n_start) * static_cast<double>(d.n_stop) *
                        e.and_window.seconds() / d.gate.seconds();
      cf.alpha = 1.0;
      cf.beta = 1.0;
      break;
    }
  }
  out.eta_raw = eta_raw(static_cast<double>(cs.n_coincidence), static_cast<double>(cs.n_trigger));
  out.estimate = eta_corrected(cs, cf);
  return out;
}

// ---------------------------------------------------------------- runs

/// Validation flags gathered while simulating.
struct InvariantLog {
  bool dead_time_spacing = true;
  bool pockels_dead_time = true;
  bool pockels_trigger_rate = true;

  void check(const Scenario& s, const Acquisition& a) {
    const auto& d1 = s.detector(s.signal_chain.detector).spec;
    const auto& d2 = s.detector(s.idler_chain.detector).spec;
    if (min_spacing(a.signal_clicks, a.gate) < d1.dead_time) dead_time_spacing = false;
    if (min_spacing(a.idler_clicks, a.gate) < d2.dead_time) dead_time_spacing = false;
    if (const auto* p = s.pockels(); p && !a.accepted_triggers.empty()) {
      if (min_spacing(a.accepted_triggers, a.gate) < p->pockels.driver_dead_time)
        pockels_dead_time = false;
      const double rate = static_cast<double>(a.accepted_triggers.size()) / a.gate.seconds();
      if (rate > p->pockels.max_trigger_rate) pockels_trigger_rate = false;
    }
  }
};

/// Runs `gate` in blocks of at most kMaxChunk, handing each to `f`.
template <class F>
void acquire_blocks(const Scenario& s, Duration gate, const AcquisitionOptions& opt,
                    const RandomStream& rng, InvariantLog* log, F&& f) {
  std::uint64_t k = 0;
  for (Duration done{}; done < gate; ++k) {
    const Duration len = std::min(kMaxChunk, gate - done);
    const Acquisition a = acquire(s, len, opt, rng.derive(k));
    if (log) log->check(s, a);
    f(a);
    done = done + len;
  }
}

/// Trigger-arm counts with the down-conversion switched off.
inline std::uint64_t measure_background(const Scenario& s, const std::string& detector,
                                        Duration gate, const RandomStream& rng,
                                        InvariantLog* log = nullptr) {
  AcquisitionOptions opt;
  opt.pair_rate = 0.0;
  std::uint64_t n = 0;
  acquire_blocks(s, gate, opt, rng, log,
                 [&](const Acquisition& a) { n += clicks_of(s, a, detector).size(); });
  return n;
}

inline CoincidenceData collect_coincidences(const Scenario& s, Duration gate,
                                            const AcquisitionOptions& opt, const RandomStream& rng,
                                            InvariantLog* log = nullptr) {
  const auto& e = *s.electronics;
  CoincidenceData d;
  acquire_blocks(s, gate, opt, rng, log, [&](const Acquisition& a) {
    accumulate_coincidences(d, strip(clicks_of(s, a, e.start)), strip(clicks_of(s, a, e.stop)),
                            a.gate, e);
  });
  return d;
}

struct ScanResult {
  VisibilityScan triggered;    // D2 counts with the Pockels cell driven
  VisibilityScan untriggered;  // D2 counts with the driver off
  std::vector<std::int64_t> coincidences_triggered;
  std::vector<std::int64_t> coincidences_untriggered;
  std::uint64_t trigger_clicks = 0;  // D1 clicks during triggered acquisitions
  Duration trigger_time{};
  std::uint64_t accepted_triggers = 0;
};

/// One acquisition per angle and mode, each with its own derived stream, plus
/// a matched SPDC-off background acquisition per angle.
inline ScanResult run_visibility_scan(const Scenario& s, std::span<const double> angles,
                                      Duration integration, const RandomStream& rng,
                                      InvariantLog* log = nullptr) {
  if (!s.scan) throw ConfigError("scan: missing scan section");
  if (integration.ticks < 0) throw InvalidArgument("run_visibility_scan: negative integration");
  const std::string& d2 = s.idler_chain.detector;
  const std::string& d1 = s.signal_chain.detector;
  ScanResult r;
  for (auto* v : {&r.triggered, &r.untriggered}) {
    v->angles_deg.assign(angles.begin(), angles.end());
    v->integration = integration;
  }
  for (std::size_t i = 0; i < angles.size(); ++i) {
    AcquisitionOptions opt;
    opt.polarizer = s.scan->polarizer;
    opt.polarizer_angle_deg = angles[i];

    std::int64_t n_bg = 0;
    for (int mode = 0; mode < 3; ++mode) {
      AcquisitionOptions o = opt;
      const char* tag = mode == 0 ? "triggered" : mode == 1 ? "untriggered" : "background";
      if (mode == 1) o.pockels_enabled = false;
      if (mode == 2) o.pair_rate = 0.0;
      std::int64_t n2 = 0;
      CoincidenceData cd;
      if (integration.ticks > 0) {
        acquire_blocks(s, integration, o, rng.derive(tag).derive(i), log,
                       [&](const Acquisition& a) {
                         n2 += static_cast<std::int64_t>(clicks_of(s, a, d2).size());
                         if (mode == 0) {
                           r.trigger_clicks += clicks_of(s, a, d1).size();
                           r.accepted_triggers += a.accepted_triggers.size();
                         }
                         if (mode < 2 && s.electronics)
                           accumulate_coincidences(cd, strip(clicks_of(s, a, s.electronics->start)),
                                                   strip(clicks_of(s, a, s.electronics->stop)),
                                                   a.gate, *s.electronics);
                       });
      }
      const auto nc = static_cast<std::int64_t>(cd.n_coincidence);
      if (mode == 0) {
        r.triggered.counts.push_back(n2);
        r.coincidences_triggered.push_back(nc);
        r.trigger_time = r.trigger_time + integration;
      } else if (mode == 1) {
        r.untriggered.counts.push_back(n2);
        r.coincidences_untriggered.push_back(nc);
      } else {
        n_bg = n2;
      }
    }
    r.triggered.background.push_back(n_bg);
    r.untriggered.background.push_back(n_bg);
  }
  return r;
}

struct ConditionalAnalysis {
  EfficiencyEstimate estimate;
  LsaFit fit;
  std::optional<LsaFit> untriggered_fit;
  std::optional<double> visibility_minmax;
  ConditionalCorrections corrections;
  double trigger_rate = 0.0;
  ScanResult scan;
};

inline ConditionalAnalysis analyze_conditional(const Scenario& s, ScanResult scan) {
  const auto* p = s.pockels();
  ConditionalAnalysis out;
  out.trigger_rate = scan.trigger_time.ticks > 0
                         ? static_cast<double>(scan.trigger_clicks) / scan.trigger_time.seconds()
                         : 0.0;
  auto& c = out.corrections;
  c.pockels_live_fraction =
      pockels_live_fraction(out.trigger_rate, p->pockels) *
      correction_gamma(out.trigger_rate, s.detector(s.signal_chain.detector).spec.dead_time);
  c.flip_efficiency = s.calibration.flip_efficiency;
  c.flip_efficiency_std = s.calibration.flip_efficiency_std;
  c.t_signal_polarizer = s.calibration.t_signal;
  c.t_signal_polarizer_std = s.calibration.t_signal_std;
  out.fit = lsa_fit_visibility(scan.triggered);
  out.estimate = eta_conditional(out.fit, c);
  try {
    out.untriggered_fit = lsa_fit_visibility(scan.untriggered);
  } catch (const DegenerateFit&) {
  }
  try {
    out.visibility_minmax = visibility_minmax(scan.triggered);
  } catch (const InvalidArgument&) {
  }
  out.scan = std::move(scan);
  return out;
}

struct ComparisonSummary {
  double difference = 0.0;  // coincidence − conditional
  double combined_sigma = 0.0;
  std::optional<LsaFit> coincidences_rotation;
  std::optional<LsaFit> coincidences_no_rotation;
  std::optional<double> phase_shift_deg;  // |θ₀ difference| folded into [0, 90]
  std::optional<double> heralded_flip_fraction;
};

struct AnalogAnalysis {
  EfficiencyEstimate estimate;
  double k_factor = 1.0;
  bool k_inferred = false;
  std::size_t n_bins = 0;
  double pairs_per_bin = 0.0;  // configured pair_rate × bin width
};

struct TrialReport {
  std::string scenario;
  RunMethod method = RunMethod::Coincidence;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> trial;
  std::optional<CoincidenceAnalysis> coincidence;
  std::optional<ConditionalAnalysis> conditional;
  std::optional<AnalogAnalysis> analog;
  std::optional<ComparisonSummary> comparison;
  std::optional<double> ground_truth_eta;  // echo only
  InvariantLog invariants;
  std::vector<std::string> files;

  std::vector<EfficiencyEstimate> estimates() const {
    std::vector<EfficiencyEstimate> v;
    if (coincidence) v.push_back(coincidence->estimate);
    if (conditional) v.push_back(conditional->estimate);
    if (analog) v.push_back(analog->estimate);
    return v;
  }

  bool estimates_in_range() const {
    for (const auto& e : estimates())
      if (!(e.value >= 0.0 && e.value <= 1.05) || !(e.std_uncertainty > 0.0)) return false;
    return true;
  }

  bool all_invariants_hold() const {
    return invariants.dead_time_spacing && invariants.pockels_dead_time &&
           invariants.pockels_trigger_rate && estimates_in_range();
  }
};

namespace detail {

inline CoincidenceAnalysis coincidence_from(const Scenario& s, const CoincidenceData& d,
                                            std::uint64_t n_bg, Duration bg_gate) {
  const auto& e = *s.electronics;
  return analyze_coincidences(d, n_bg, bg_gate, e, s.detector(e.stop).spec.dead_time,
                              s.calibration.t_signal);
}

inline AnalogAnalysis run_analog(const Scenario& s, const RandomStream& rng) {
  const auto& cfg = *s.analog;
  const auto& ref = s.detector(cfg.reference);
  const auto& dut = s.detector(cfg.under_test);
  if (ref.analog->bin_width != dut.analog->bin_width)
    throw ConfigError("detectors: analog bin widths must match");
  const Duration bin = ref.analog->bin_width;
  const auto n_bins = static_cast<std::uint64_t>(s.gate.ticks / bin.ticks);
  if (n_bins > 20'000'000) throw ConfigError("gate: analog trace longer than 2e7 bins");

  AcquisitionOptions opt;
  opt.keep_photons = true;
  const Acquisition a = acquire(s, s.gate, opt, rng.derive("acquisition"));
  auto photons_at = [&](const std::string& id) -> const Photons& {
    return id == s.signal_chain.detector ? a.signal_photons : a.idler_photons;
  };
  const auto i1 = analog_trace(photons_at(cfg.reference), ref.spec, *ref.analog, s.gate,
                               rng.derive("analog/" + cfg.reference));
  const auto i2 = analog_trace(photons_at(cfg.under_test), dut.spec, *dut.analog, s.gate,
                               rng.derive("analog/" + cfg.under_test));

  AnalogAnalysis out;
  out.n_bins = i1.size();
  out.pairs_per_bin = s.source.pair_rate * bin.seconds();
  if (cfg.k_factor) {
    out.k_factor = *cfg.k_factor;
  } else {
    auto draw = [&](const DetectorConfig& d, const std::string& id) {
      auto g = rng.derive("gain_calibration/" + id);
      std::vector<double> v(cfg.gain_samples);
      for (auto& x : v) x = sample_gain(*d.analog, g);
      return v;
    };
    out.k_factor = infer_K(draw(ref, cfg.reference), draw(dut, cfg.under_test));
    out.k_inferred = true;
  }
  out.estimate = eta_analog(i1, i2, out.k_factor, cfg.segments);
  return out;
}

inline ComparisonSummary summarize_comparison(const CoincidenceAnalysis& co,
                                              const ConditionalAnalysis& cond,
                                              double herald_angle_deg) {
  ComparisonSummary c;
  c.difference = co.estimate.value - cond.estimate.value;
  c.combined_sigma = std::hypot(co.estimate.std_uncertainty, cond.estimate.std_uncertainty);
  auto curve = [&](const std::vector<std::int64_t>& counts) -> std::optional<LsaFit> {
    VisibilityScan v;
    v.angles_deg = cond.scan.triggered.angles_deg;
    v.counts = counts;
    v.integration = cond.scan.triggered.integration;
    try {
      return lsa_fit_visibility(v);
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  c.coincidences_rotation = curve(cond.scan.coincidences_triggered);
  c.coincidences_no_rotation = curve(cond.scan.coincidences_untriggered);
  if (c.coincidences_rotation && c.coincidences_no_rotation) {
    c.phase_shift_deg = std::abs(detail::wrap_half_turn(c.coincidences_rotation->theta0_deg -
                                                        c.coincidences_no_rotation->theta0_deg));
    const double on = c.coincidences_rotation->model(herald_angle_deg);
    const double off = c.coincidences_no_rotation->model(herald_angle_deg);
    if (off > 0.0) c.heralded_flip_fraction = 1.0 - on / off;
  }
  return c;
}

}  // namespace detail

/// Single trial with an explicit root stream.
inline TrialReport run_trial(const Scenario& s, const RandomStream& root) {
  s.validate();
  TrialReport rep;
  rep.scenario = s.name;
  rep.method = s.method;
  rep.seed = s.seed;
  rep.ground_truth_eta = s.ground_truth_eta;
  InvariantLog& log = rep.invariants;

  switch (s.method) {
    case RunMethod::Coincidence: {
      const auto d = collect_coincidences(s, s.gate, {}, root.derive("main"), &log);
      const auto nb =
          measure_background(s, s.electronics->start, s.gate, root.derive("background"), &log);
      rep.coincidence = detail::coincidence_from(s, d, nb, s.gate);
      break;
    }
    case RunMethod::ConditionalRotation: {
      auto scan = run_visibility_scan(s, s.scan->angles_deg, s.scan->integration,
                                      root.derive("scan"), &log);
      rep.conditional = analyze_conditional(s, std::move(scan));
      break;
    }
    case RunMethod::Compare: {
      auto scan = run_visibility_scan(s, s.scan->angles_deg, s.scan->integration,
                                      root.derive("scan"), &log);
      std::int64_t bg = 0;
      for (auto b : scan.triggered.background) bg += b;
      const Duration herald_gate = s.scan->integration * static_cast<std::int64_t>(scan.triggered.counts.size());
      AcquisitionOptions opt;
      opt.pockels_enabled = false;
      opt.polarizer = s.scan->polarizer;
      opt.polarizer_angle_deg = s.scan->herald_angle_deg;
      CoincidenceData d;
      const auto hr = root.derive("herald");
      for (std::size_t i = 0; i < s.scan->angles_deg.size(); ++i) {
        acquire_blocks(s, s.scan->integration, opt, hr.derive(i), &log,
                       [&](const Acquisition& a) {
                         accumulate_coincidences(d, strip(clicks_of(s, a, s.electronics->start)),
                                                 strip(clicks_of(s, a, s.electronics->stop)),
                                                 a.gate, *s.electronics);
                       });
      }
      rep.coincidence =
          detail::coincidence_from(s, d, static_cast<std::uint64_t>(bg), herald_gate);
      rep.conditional = analyze_conditional(s, std::move(scan));
      rep.comparison = detail::summarize_comparison(*rep.coincidence, *rep.conditional,
                                                    s.scan->herald_angle_deg);
      break;
    }
    case RunMethod::Analog:
      rep.analog = detail::run_analog(s, root.derive("analog"));
      break;
  }
  return rep;
}

inline RandomStream run_stream(const Scenario& s) { return RandomStream(s.seed, hash_label("run")); }

inline RandomStream trial_stream(const Scenario& s, std::uint64_t k) {
  return RandomStream(s.seed, hash_label("trial")).derive(k);
}

/// Deterministic single-trial execution.
inline TrialReport run_scenario(const Scenario& s) { return run_trial(s, run_stream(s)); }

struct EstimateStats {
  Method method = Method::Coincidence;
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;
  double standard_error = 0.0;
  double mean_reported_sigma = 0.0;
};

struct TrialsReport {
  std::vector<TrialReport> trials;  // sorted by trial index
  std::vector<EstimateStats> stats;

  const EstimateStats* stats_for(Method m) const {
    for (const auto& s : stats)
      if (s.method == m) return &s;
    return nullptr;
  }
};

inline std::vector<EstimateStats> aggregate(std::span<const TrialReport> trials) {
  std::map<Method, std::vector<EfficiencyEstimate>> by;
  for (const auto& t : trials)
    for (const auto& e : t.estimates()) by[e.method].push_back(e);
  std::vector<EstimateStats> out;
  for (const auto& [m, v] : by) {
    EstimateStats st;
    st.method = m;
    st.n = v.size();
    for (const auto& e : v) {
      st.mean += e.value;
      st.mean_reported_sigma += e.std_uncertainty;
    }
    st.mean /= static_cast<double>(st.n);
    st.mean_reported_sigma /= static_cast<double>(st.n);
    double ss = 0.0;
    for (const auto& e : v) ss += (e.value - st.mean) * (e.value - st.mean);
    st.std = st.n > 1 ? std::sqrt(ss / static_cast<double>(st.n - 1)) : 0.0;
    st.standard_error = st.std / std::sqrt(static_cast<double>(st.n));
    out.push_back(st);
  }
  return out;
}

/// Trial k runs on the stream derived from (seed, k). Threads only change
/// wall time, never results.
inline TrialsReport run_trials(const Scenario& s, std::size_t n, unsigned threads = 0) {
  if (n < 2) throw InvalidArgument("run_trials: need n >= 2");
  s.validate();
  TrialsReport out;
  out.trials.resize(n);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (std::size_t k; !failed && (k = next++) < n;) {
      try {
        out.trials[k] = run_trial(s, trial_stream(s, k));
        out.trials[k].trial = k;
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  out.stats = aggregate(out.trials);
  return out;
}

}  // namespace twincal
