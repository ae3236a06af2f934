#pragma once

// Weighted least-squares adjustment of polarizer-angle scans to
//   W(θ) = A·(1 − V·cos 2(θ − θ₀)) + B
//
// A, V and θ₀ are only jointly identifiable with B when the scan carries a
// matched background acquisition (whose points measure B alone). Without one,
// B is held at zero. The fit is linear in (A, A·V·cos2θ₀, A·V·sin2θ₀, B), so
// it is solved exactly and mapped back with the delta method.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "twincal/errors.hpp"
#include "twincal/timebase.hpp"

namespace twincal {

struct VisibilityScan {
  std::vector<double> angles_deg;
  std::vector<std::int64_t> counts;
  Duration integration{};
  std::vector<std::int64_t> background;  // empty, or one matched count per angle

  void validate() const {
    if (angles_deg.size() != counts.size())
      throw InvalidArgument("visibility scan: angles and counts differ in length");
    if (!background.empty() && background.size() != counts.size())
      throw InvalidArgument("visibility scan: background differs in length");
    for (auto c : counts)
      if (c < 0) throw InvalidArgument("visibility scan: negative count");
    for (auto c : background)
      if (c < 0) throw InvalidArgument("visibility scan: negative background count");
  }
};

struct LsaFit {
  enum Param { kA = 0, kV = 1, kTheta0 = 2, kB = 3 };

  double A = 0.0;
  double V = 0.0;
  double theta0_deg = 0.0;
  double B = 0.0;
  std::array<std::array<double, 4>, 4> covariance{};  // order A, V, θ₀, B
  double chi_square = 0.0;
  int dof = 0;
  bool background_fitted = false;

  double sigma(Param p) const { return std::sqrt(std::max(covariance[p][p], 0.0)); }
  double sigma_V() const { return sigma(kV); }
  double sigma_theta0() const { return sigma(kTheta0); }

  bool theta0_consistent_with_zero(double k = 3.0) const {
    return std::abs(theta0_deg) <= k * sigma_theta0();
  }

  double model(double theta_deg) const {
    const double x = 2.0 * (theta_deg - theta0_deg) * std::numbers::pi / 180.0;
    return A * (1.0 - V * std::cos(x)) + B;
  }
};

namespace detail {
inline double wrap_half_turn(double deg) {
  // into (−90, 90]
  double d = std::fmod(deg, 180.0);
  if (d <= -90.0) d += 180.0;
  if (d > 90.0) d -= 180.0;
  return d;
}
}  // namespace detail

inline LsaFit lsa_fit_visibility(const VisibilityScan& scan) {
  scan.validate();
  std::set<long long> distinct;
  for (double a : scan.angles_deg) {
    double r = std::fmod(a, 180.0);
    if (r < 0) r += 180.0;
    distinct.insert(std::llround(r * 1e6));
  }
  if (distinct.size() < 5) throw DegenerateFit("lsa fit: need at least 5 distinct angles");

  const bool with_bg = !scan.background.empty();
  const int P = with_bg ? 4 : 3;
  const std::size_t n = scan.counts.size();
  const std::size_t rows = with_bg ? 2 * n : n;

  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), P);
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
  Eigen::VectorXd w(static_cast<Eigen::Index>(rows));
  for (std::size_t i = 0; i < n; ++i) {
    const double th = 2.0 * scan.angles_deg[i] * std::numbers::pi / 180.0;
    const auto r = static_cast<Eigen::Index>(i);
    X(r, 0) = 1.0;
    X(r, 1) = std::cos(th);
    X(r, 2) = std::sin(th);
    if (with_bg) X(r, 3) = 1.0;
    y(r) = static_cast<double>(scan.counts[i]);
    w(r) = 1.0 / std::max(y(r), 1.0);
  }
  if (with_bg) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(n + i);
      X(r, 3) = 1.0;
      y(r) = static_cast<double>(scan.background[i]);
      w(r) = 1.0 / std::max(y(r), 1.0);
    }
  }

  const Eigen::MatrixXd N = X.transpose() * w.asDiagonal() * X;
  const Eigen::VectorXd rhs = X.transpose() * w.asDiagonal() * y;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(N);
  lu.setThreshold(1e-12);
  if (lu.rank() < P) throw DegenerateFit("lsa fit: singular normal equations");
  const Eigen::VectorXd p = lu.solve(rhs);
  const Eigen::MatrixXd cov_p = lu.inverse();

  const Eigen::VectorXd resid = y - X * p;
  LsaFit fit;
  fit.chi_square = resid.cwiseProduct(resid).cwiseProduct(w).sum();
  fit.dof = static_cast<int>(rows) - P;
  fit.background_fitted = with_bg;

  const double a0 = p(0), c1 = p(1), c2 = p(2);
  if (!(a0 > 0.0)) throw DegenerateFit("lsa fit: non-positive mean level");
  const double r2 = c1 * c1 + c2 * c2;
  const double amp = std::sqrt(r2);
  fit.A = a0;
  fit.V = amp / a0;
  fit.B = with_bg ? p(3) : 0.0;
  const double k_deg = 90.0 / std::numbers::pi;  // ½ · 180/π
  fit.theta0_deg = detail::wrap_half_turn(k_deg * std::atan2(-c2, -c1));

  // Jacobian of (A, V, θ₀, B) with respect to the linear parameters.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(4, P);
  J(0, 0) = 1.0;
  const double ux = amp > 0.0 ? c1 / amp : 1.0;
  const double uy = amp > 0.0 ? c2 / amp : 0.0;
  J(1, 0) = -amp / (a0 * a0);
  J(1, 1) = ux / a0;
  J(1, 2) = uy / a0;
  if (r2 > 0.0) {
    J(2, 1) = -k_deg * c2 / r2;
    J(2, 2) = k_deg * c1 / r2;
  }
  if (with_bg) J(3, 3) = 1.0;
  const Eigen::MatrixXd cov = J * cov_p * J.transpose();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) fit.covariance[i][j] = cov(i, j);
  if (r2 == 0.0) fit.covariance[2][2] = 1e300;  // phase undefined at zero amplitude
  return fit;
}

}  // namespace twincal
