// Coincidence calibration of the LiIO3 preset, printed as a short table.

#include <cstdio>

#include "twincal/twincal.hpp"

int main() {
  using namespace twincal;
  const Scenario s = load_scenario(std::string(TWINCAL_PRESET_DIR) + "/lilo3_coincidence.json");
  const TrialReport r = run_scenario(s);
  const auto& c = *r.coincidence;
  std::printf("N_trigger     %llu\n", static_cast<unsigned long long>(c.counts.n_trigger));
  std::printf("N_coincidence %llu\n", static_cast<unsigned long long>(c.counts.n_coincidence));
  std::printf("N_accidental  %.1f\n", c.counts.n_accidental);
  std::printf("N_background  %llu\n", static_cast<unsigned long long>(c.counts.n_background));
  std::printf("alpha %.5f  beta %.5f  gamma %.5f\n", c.factors.alpha, c.factors.beta,
              c.factors.gamma);
  std::printf("eta raw       %.4f\n", c.eta_raw);
  std::printf("eta corrected %.4f +- %.4f\n", c.estimate.value, c.estimate.std_uncertainty);
}
