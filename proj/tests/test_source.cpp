#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace twincal;

TEST(Energy, DegenerateIsExact) {
  const auto e = validate_energy_conservation(351.1, 702.2, 702.2);
  EXPECT_NEAR(e.residual, 0.0, 1e-12);
  EXPECT_TRUE(e.pass);
  EXPECT_NEAR(conjugate_wavelength(351.1, 702.2), 702.2, 1e-9);
}

TEST(Energy, LiIO3WavelengthsPass) {
  const auto e = validate_energy_conservation(351.0, 633.0, 789.0);
  EXPECT_TRUE(e.pass);
  EXPECT_LT(e.residual, 1e-3);
  EXPECT_NEAR(conjugate_wavelength(351.0, 633.0), 788.0, 1.0);
}

TEST(Energy, MismatchedIdlerFails) {
  // 1 − 351/633 − 351/700 computed by hand
  const double oracle = std::abs(1.0 - 351.0 / 633.0 - 351.0 / 700.0);
  const auto e = validate_energy_conservation(351.0, 633.0, 700.0);
  EXPECT_FALSE(e.pass);
  EXPECT_NEAR(e.residual, oracle, 1e-12);
  EXPECT_NEAR(e.residual, 0.0559, 5e-4);
}

TEST(Energy, NonPositiveRejected) {
  EXPECT_THROW(validate_energy_conservation(0.0, 600, 600), InvalidArgument);
  EXPECT_THROW(validate_energy_conservation(300, -1, 600), InvalidArgument);
}

TEST(SourceSpec, ValidateRejectsBadValues) {
  SourceSpec s;
  s.collection_overlap = 1.5;
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = {};
  s.pair_rate = -1;
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = {};
  s.idler_wavelength_nm = 650;
  EXPECT_THROW(s.validate(), InvalidArgument);
}

TEST(GeneratePairs, ZeroRateIsEmpty) {
  SourceSpec s;
  s.pair_rate = 0;
  EXPECT_TRUE(generate_pairs(s, seconds(1), RandomStream(1, 1)).empty());
}

TEST(GeneratePairs, TypeIIsParallel) {
  SourceSpec s;
  s.phase_matching = PhaseMatching::TypeI;
  s.pump_wavelength_nm = 351.0;
  s.signal_wavelength_nm = 633.0;
  s.idler_wavelength_nm = 789.0;
  const auto pairs = generate_pairs(s, milliseconds(500), RandomStream(2, 2));
  ASSERT_GT(pairs.size(), 10000u);
  for (const auto& p : pairs) ASSERT_EQ(p.signal_pol, p.idler_pol);
}

TEST(GeneratePairs, TypeIIIsOrthogonalFiftyFifty) {
  SourceSpec s;
  const auto pairs = generate_pairs(s, seconds(2), RandomStream(3, 3));
  ASSERT_GE(pairs.size(), 100000u);
  std::size_t h = 0;
  for (const auto& p : pairs) {
    ASSERT_NE(p.signal_pol, p.idler_pol);
    h += p.signal_pol == Polarization::H;
  }
  const double n = static_cast<double>(pairs.size());
  EXPECT_LT(std::abs(static_cast<double>(h) - 0.5 * n), 5.0 * std::sqrt(0.25 * n));
}

TEST(GeneratePairs, CollectionOverlapThinsIdlers) {
  SourceSpec s;
  s.collection_overlap = 0.3;
  const auto pairs = generate_pairs(s, seconds(1), RandomStream(4, 4));
  const double n = static_cast<double>(pairs.size());
  double in = 0;
  for (const auto& p : pairs) {
    ASSERT_TRUE(p.signal_in_channel);
    in += p.idler_in_channel;
  }
  EXPECT_LT(std::abs(in - 0.3 * n), 5.0 * std::sqrt(0.21 * n));
}

TEST(GeneratePairs, EmissionJitterIsTiny) {
  SourceSpec s;
  const auto pairs = generate_pairs(s, milliseconds(100), RandomStream(5, 5));
  for (const auto& p : pairs) {
    ASSERT_LE(std::abs((p.signal_time - p.t_emit).ticks), 1);
    ASSERT_LE(std::abs((p.idler_time - p.t_emit).ticks), 1);
  }
}

TEST(GeneratePairs, LargeJitterHasRequestedSpread) {
  SourceSpec s;
  s.emission_jitter_ps = 50.0;
  const auto pairs = generate_pairs(s, milliseconds(200), RandomStream(6, 6));
  double s2 = 0.0;
  for (const auto& p : pairs) {
    const double d = static_cast<double>((p.signal_time - p.t_emit).ticks);
    s2 += d * d;
  }
  const double sd = std::sqrt(s2 / static_cast<double>(pairs.size()));
  EXPECT_NEAR(sd, 50.0, 1.5);
}

TEST(GeneratePairs, Deterministic) {
  SourceSpec s;
  const auto a = generate_pairs(s, milliseconds(10), RandomStream(8, 1));
  const auto b = generate_pairs(s, milliseconds(10), RandomStream(8, 1));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].t_emit, b[i].t_emit);
    EXPECT_EQ(a[i].signal_pol, b[i].signal_pol);
  }
}
