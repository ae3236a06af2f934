// Fit a hand-made polarizer scan and turn its visibility into an efficiency.

#include <cmath>
#include <cstdio>
#include <numbers>

#include "twincal/twincal.hpp"

int main() {
  using namespace twincal;
  VisibilityScan scan;
  scan.integration = seconds(10);
  for (int a = 0; a <= 180; a += 10) {
    const double w = predicted_w2(a, 0.03, 1.0, 2e4, 0.46, 1.0) * 10.0;
    scan.angles_deg.push_back(a);
    scan.counts.push_back(std::llround(w + 3000.0));
    scan.background.push_back(3000);
  }
  const LsaFit fit = lsa_fit_visibility(scan);
  std::printf("V = %.4f +- %.4f, theta0 = %.2f deg, B = %.1f\n", fit.V, fit.sigma_V(),
              fit.theta0_deg, fit.B);

  ConditionalCorrections corr;
  corr.t_signal_polarizer = 0.95;
  const auto eta = eta_conditional(fit, corr);
  std::printf("eta = %.4f +- %.4f\n", eta.value, eta.std_uncertainty);
}
