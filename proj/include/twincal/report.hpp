#pragma once

// Report documents (JSON) and CSV sidecars. Every file carries the schema
// version: JSON as a field, CSV as a leading "# schema_version=N" line.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "twincal/config.hpp"
#include "twincal/runner.hpp"

namespace twincal {

namespace detail {

inline Json to_json(const EfficiencyEstimate& e) {
  return Json{{"method", std::string(to_string(e.method))},
              {"value", e.value},
              {"std_uncertainty", e.std_uncertainty}};
}

inline Json to_json(const CountsSummary& c) {
  return Json{{"n_trigger", c.n_trigger},       {"n_signal", c.n_signal},
              {"n_coincidence", c.n_coincidence}, {"n_accidental", c.n_accidental},
              {"n_background", c.n_background},   {"gate", format_duration(c.gate)},
              {"stop_rate", c.stop_rate},         {"start_rate", c.start_rate}};
}

inline Json to_json(const LsaFit& f) {
  Json cov = Json::array();
  for (const auto& row : f.covariance) cov.push_back(row);
  return Json{{"A", f.A},
              {"V", f.V},
              {"theta0_deg", f.theta0_deg},
              {"B", f.B},
              {"sigma_V", f.sigma_V()},
              {"sigma_theta0_deg", f.sigma_theta0()},
              {"theta0_consistent_with_zero", f.theta0_consistent_with_zero()},
              {"background_fitted", f.background_fitted},
              {"chi_square", f.chi_square},
              {"dof", f.dof},
              {"covariance", cov}};
}

}  // namespace detail

inline Json report_to_json(const TrialReport& r) {
  using detail::to_json;
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["scenario"] = r.scenario;
  j["method"] = detail::to_string(r.method);
  j["seed"] = r.seed;
  if (r.trial) j["trial"] = *r.trial;
  Json est = Json::array();
  for (const auto& e : r.estimates()) est.push_back(to_json(e));
  j["estimates"] = est;

  if (r.coincidence) {
    const auto& c = *r.coincidence;
    j["coincidence"] = Json{{"estimate", to_json(c.estimate)},
                            {"eta_raw", c.eta_raw},
                            {"counts", to_json(c.counts)},
                            {"correction_factors",
                             Json{{"alpha", c.factors.alpha},
                                  {"beta", c.factors.beta},
                                  {"gamma", c.factors.gamma},
                                  {"t_signal", c.factors.t_signal}}},
                            {"tic_partial", c.partial}};
  }
  if (r.conditional) {
    const auto& c = *r.conditional;
    Json cj{{"estimate", to_json(c.estimate)},
            {"fit", to_json(c.fit)},
            {"trigger_rate", c.trigger_rate},
            {"correction_factors",
             Json{{"pockels_live_fraction", c.corrections.pockels_live_fraction},
                  {"flip_efficiency", c.corrections.flip_efficiency},
                  {"t_signal_polarizer", c.corrections.t_signal_polarizer}}},
            {"accepted_triggers", c.scan.accepted_triggers}};
    if (c.untriggered_fit) cj["untriggered_fit"] = to_json(*c.untriggered_fit);
    if (c.visibility_minmax) cj["visibility_minmax"] = *c.visibility_minmax;
    j["conditional_rotation"] = cj;
  }
  if (r.analog) {
    const auto& a = *r.analog;
    j["analog"] = Json{{"estimate", to_json(a.estimate)},
                       {"k_factor", a.k_factor},
                       {"k_inferred", a.k_inferred},
                       {"n_bins", a.n_bins},
                       {"pairs_per_bin", a.pairs_per_bin}};
  }
  if (r.comparison) {
    const auto& c = *r.comparison;
    Json cj{{"difference", c.difference}, {"combined_sigma", c.combined_sigma}};
    if (c.coincidences_rotation) cj["coincidences_rotation_fit"] = to_json(*c.coincidences_rotation);
    if (c.coincidences_no_rotation)
      cj["coincidences_no_rotation_fit"] = to_json(*c.coincidences_no_rotation);
    if (c.phase_shift_deg) cj["phase_shift_deg"] = *c.phase_shift_deg;
    if (c.heralded_flip_fraction) cj["heralded_flip_fraction"] = *c.heralded_flip_fraction;
    j["comparison"] = cj;
  }
  if (r.ground_truth_eta) j["ground_truth_eta"] = *r.ground_truth_eta;
  j["invariants"] = Json{{"dead_time_spacing", r.invariants.dead_time_spacing},
                         {"pockels_dead_time", r.invariants.pockels_dead_time},
                         {"pockels_trigger_rate", r.invariants.pockels_trigger_rate},
                         {"estimates_in_range", r.estimates_in_range()}};
  j["files"] = r.files;
  return j;
}

inline Json report_to_json(const TrialsReport& r) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  Json stats = Json::array();
  for (const auto& s : r.stats)
    stats.push_back(Json{{"method", std::string(to_string(s.method))},
                         {"n", s.n},
                         {"mean", s.mean},
                         {"std", s.std},
                         {"standard_error", s.standard_error},
                         {"mean_reported_sigma", s.mean_reported_sigma}});
  j["statistics"] = stats;
  Json trials = Json::array();
  for (const auto& t : r.trials) trials.push_back(report_to_json(t));
  j["trials"] = trials;
  return j;
}

// ---------------------------------------------------------------- CSV

inline constexpr const char* kCsvHeader = "# schema_version=1\n";

inline void write_histogram_csv(std::ostream& out, const Histogram& h) {
  out << kCsvHeader << "bin_start_ps,count\n";
  for (std::size_t i = 0; i < h.size(); ++i) out << h.bin_start(i).ticks << ',' << h.counts[i] << '\n';
}

inline void write_scan_csv(std::ostream& out, const ScanResult& s) {
  out << kCsvHeader
      << "angle_deg,counts_triggered,counts_untriggered,background,"
         "coincidences_triggered,coincidences_untriggered\n";
  std::ostringstream num;
  for (std::size_t i = 0; i < s.triggered.angles_deg.size(); ++i) {
    num.str("");
    num << s.triggered.angles_deg[i];
    out << num.str() << ',' << s.triggered.counts[i] << ',' << s.untriggered.counts[i] << ','
        << s.triggered.background[i] << ',' << s.coincidences_triggered[i] << ','
        << s.coincidences_untriggered[i] << '\n';
  }
}

/// Click streams, merged in time order (ties: listing order).
inline void write_clicks_csv(std::ostream& out,
                             const std::vector<std::pair<std::string, TimeTags>>& streams) {
  out << kCsvHeader << "detector_id,t_ps\n";
  std::vector<std::size_t> pos(streams.size(), 0);
  for (;;) {
    std::size_t best = streams.size();
    for (std::size_t k = 0; k < streams.size(); ++k)
      if (pos[k] < streams[k].second.size() &&
          (best == streams.size() ||
           streams[k].second[pos[k]] < streams[best].second[pos[best]]))
        best = k;
    if (best == streams.size()) break;
    out << streams[best].first << ',' << streams[best].second[pos[best]].ticks << '\n';
    ++pos[best];
  }
}

/// Reads detector_id,t_ps rows; '#' lines and the header are skipped.
inline std::map<std::string, TimeTags> read_clicks_csv(std::istream& in) {
  std::map<std::string, TimeTags> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line.rfind("detector_id", 0) == 0) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ConfigError("clicks csv line " + std::to_string(lineno) + ": expected two columns");
    const std::string id = line.substr(0, comma);
    try {
      std::size_t used = 0;
      const std::string num = line.substr(comma + 1);
      const long long t = std::stoll(num, &used);
      if (used != num.size() && num.find_first_not_of(" \r", used) != std::string::npos)
        throw std::invalid_argument("trailing");
      out[id].push_back(TimeStamp{t});
    } catch (const std::exception&) {
      throw ConfigError("clicks csv line " + std::to_string(lineno) + ": bad t_ps");
    }
  }
  for (auto& [id, v] : out)
    if (!is_sorted_weak(v))
      throw ConfigError("clicks csv: stream '" + id + "' is not time ordered");
  return out;
}

/// Writes report.json plus sidecars into `dir`; file names are recorded
/// relative to `dir` so that output is location independent.
inline void write_outputs(TrialReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error("cannot write " + (dir / name).string());
    r.files.push_back(name);
    return f;
  };
  r.files.clear();
  if (r.coincidence && r.coincidence->histogram) {
    auto f = open("histogram.csv");
    write_histogram_csv(f, *r.coincidence->histogram);
  }
  if (r.conditional) {
    auto f = open("scan.csv");
    write_scan_csv(f, r.conditional->scan);
  }
  std::ofstream rep(dir / "report.json", std::ios::binary);
  if (!rep) throw Error("cannot write " + (dir / "report.json").string());
  rep << report_to_json(r).dump(2) << '\n';
}

}  // namespace twincal
