#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace twincal;

namespace {

Photons make_photons(std::size_t n, Polarization pol, Duration spacing = nanoseconds(100)) {
  Photons v;
  for (std::size_t i = 0; i < n; ++i)
    v.push_back({TimeStamp{} + spacing * static_cast<std::int64_t>(i), pol, Branch::Idler, i});
  return v;
}

}  // namespace

TEST(Loss, UnitAndZeroTransmittance) {
  RandomStream r(1, 1);
  const auto p = make_photons(1000, Polarization::H);
  EXPECT_EQ(apply_loss(p, {1.0}, r).size(), 1000u);
  EXPECT_TRUE(apply_loss(p, {0.0}, r).empty());
  EXPECT_THROW(apply_loss(p, {1.2}, r), InvalidArgument);
}

TEST(Loss, BinomialSurvivors) {
  RandomStream r(2, 2);
  const auto p = make_photons(100000, Polarization::H);
  const auto out = apply_loss(p, {0.7}, r);
  EXPECT_LT(std::abs(static_cast<double>(out.size()) - 7e4), 5.0 * std::sqrt(1e5 * 0.21));
  EXPECT_TRUE(is_time_sorted(out));
}

TEST(Loss, CompositionOrderIrrelevant) {
  RandomStream root(3, 0);
  const auto p = make_photons(10000, Polarization::H);
  double a = 0, b = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    auto r1 = root.derive(2 * k);
    auto r2 = root.derive(2 * k + 1);
    a += static_cast<double>(apply_loss(apply_loss(p, {0.8}, r1), {0.5}, r1).size());
    b += static_cast<double>(apply_loss(p, {0.4}, r2).size());
  }
  // each mean has sd sqrt(1e4·0.4·0.6/100)
  EXPECT_LT(std::abs(a - b) / 100.0, 5.0 * std::sqrt(2.0 * 1e4 * 0.24 / 100.0));
}

TEST(Polarizer, PassProbabilities) {
  PolarizerSpec s{0.0, 0.0};
  EXPECT_DOUBLE_EQ(pass_probability(Polarization::H, s), 1.0);
  EXPECT_NEAR(pass_probability(Polarization::V, s), 0.0, 1e-15);
  s.angle_deg = 45.0;
  EXPECT_NEAR(pass_probability(Polarization::H, s), 0.5, 1e-12);
  s = {30.0, 0.01};
  const double c2 = std::pow(std::cos(M_PI / 6), 2);
  EXPECT_NEAR(pass_probability(Polarization::H, s), c2 + 0.01 * (1 - c2), 1e-12);
  EXPECT_NEAR(pass_probability(Polarization::V, s), (1 - c2) + 0.01 * c2, 1e-12);
}

TEST(Polarizer, SinglePhotonDecisions) {
  RandomStream r(4, 4);
  const Photon h{{0}, Polarization::H, Branch::Idler, 0};
  const Photon v{{0}, Polarization::V, Branch::Idler, 0};
  for (int i = 0; i < 100; ++i) {
    EXPECT_TRUE(polarizer_pass(h, {0.0, 0.0}, r));
    EXPECT_FALSE(polarizer_pass(v, {0.0, 0.0}, r));
  }
  EXPECT_THROW(PolarizerSpec({0.0, 1.0}).validate(), InvalidArgument);
}

TEST(Pbs, RoutesByPolarization) {
  EXPECT_EQ(pbs_route({{0}, Polarization::V, Branch::Signal, 0}), PbsPort::Transmit);
  EXPECT_EQ(pbs_route({{0}, Polarization::H, Branch::Signal, 0}), PbsPort::Reflect);
}

TEST(Pbs, TypeIISignalsSplitEvenly) {
  SourceSpec s;
  const auto pairs = generate_pairs(s, seconds(1), RandomStream(5, 5));
  const auto sig = photons_from_pairs(pairs, Branch::Signal);
  const auto t = select_pbs_port(sig, PbsPort::Transmit);
  const auto r = select_pbs_port(sig, PbsPort::Reflect);
  EXPECT_EQ(t.size() + r.size(), sig.size());
  const double n = static_cast<double>(sig.size());
  EXPECT_LT(std::abs(static_cast<double>(t.size()) - n / 2), 5.0 * std::sqrt(n / 4));
}

TEST(Fiber, IdentityAndShift) {
  RandomStream r(6, 6);
  const auto p = make_photons(100, Polarization::V);
  const auto same = fiber_delay(p, {Duration{}, 1.0}, r);
  ASSERT_EQ(same.size(), p.size());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(same[i].t, p[i].t);
  const auto d = fiber_delay(p, {nanoseconds(250), 1.0}, r);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_EQ((d[i].t - p[i].t).ticks, 250000);
    EXPECT_EQ(d[i].pol, p[i].pol);
  }
}

TEST(Fiber, HalfTransmittance) {
  RandomStream r(7, 7);
  const auto p = make_photons(10000, Polarization::V);
  const auto d = fiber_delay(p, {nanoseconds(250), 0.5}, r);
  EXPECT_LT(std::abs(static_cast<double>(d.size()) - 5000.0), 5.0 * 50.0);
}

TEST(Pockels, FlatTopFlips) {
  RandomStream r(8, 8);
  PockelsSpec s;
  const TimeTags trig{{0}};
  const Photons ph{{TimeStamp{} + nanoseconds(100), Polarization::H, Branch::Idler, 0}};
  const auto out = pockels_apply(ph, trig, s, r);
  EXPECT_EQ(out.photons[0].pol, Polarization::V);
}

TEST(Pockels, NoTriggerNoFlip) {
  RandomStream r(9, 9);
  const Photons ph = make_photons(50, Polarization::H);
  const auto out = pockels_apply(ph, TimeTags{}, PockelsSpec{}, r);
  for (const auto& p : out.photons) EXPECT_EQ(p.pol, Polarization::H);
}

TEST(Pockels, PhotonBeforeTriggerUnchanged) {
  RandomStream r(9, 1);
  const TimeTags trig{{TimeStamp{} + microseconds(1)}};
  const Photons ph{{{0}, Polarization::H, Branch::Idler, 0}};
  EXPECT_EQ(pockels_apply(ph, trig, PockelsSpec{}, r).photons[0].pol, Polarization::H);
}

TEST(Pockels, SecondTriggerInsideDeadTimeIgnored) {
  const TimeTags trig{{0}, {TimeStamp{} + microseconds(5)}, {TimeStamp{} + microseconds(12)}};
  const auto acc = accept_triggers(trig, microseconds(10));
  ASSERT_EQ(acc.size(), 2u);
  EXPECT_EQ(acc[1], trig[2]);
}

TEST(Pockels, EnvelopePhases) {
  PockelsSpec s;
  s.trigger_delay = nanoseconds(10);
  const TimeStamp t0{};
  EXPECT_EQ(pockels_phase(t0, t0 + nanoseconds(5), s), PockelsPhase::Off);
  EXPECT_EQ(pockels_phase(t0, t0 + nanoseconds(12), s), PockelsPhase::Ramp);
  EXPECT_EQ(pockels_phase(t0, t0 + nanoseconds(15), s), PockelsPhase::FlatTop);
  EXPECT_EQ(pockels_phase(t0, t0 + nanoseconds(195), s), PockelsPhase::FlatTop);
  EXPECT_EQ(pockels_phase(t0, t0 + nanoseconds(196), s), PockelsPhase::Ramp);
  EXPECT_EQ(pockels_phase(t0, t0 + microseconds(11), s), PockelsPhase::Off);
}

TEST(Pockels, TailFlipsHalfTheTime) {
  RandomStream r(10, 10);
  PockelsSpec s;
  const TimeTags trig{{0}};
  Photons ph;
  for (std::uint64_t i = 0; i < 20000; ++i)
    ph.push_back({TimeStamp{} + microseconds(2) + picoseconds(static_cast<std::int64_t>(i)),
                  Polarization::H, Branch::Idler, i});
  const auto out = pockels_apply(ph, trig, s, r);
  double flipped_n = 0;
  for (const auto& p : out.photons) flipped_n += p.pol == Polarization::V;
  EXPECT_LT(std::abs(flipped_n - 10000.0), 5.0 * std::sqrt(5000.0));
}

TEST(Pockels, TimestampsNeverChange) {
  RandomStream r(11, 11);
  const auto ph = make_photons(5000, Polarization::H, nanoseconds(37));
  TimeTags trig;
  for (int k = 0; k < 20; ++k) trig.push_back(TimeStamp{} + microseconds(7 * k));
  const auto out = pockels_apply(ph, trig, PockelsSpec{}, r);
  ASSERT_EQ(out.photons.size(), ph.size());
  for (std::size_t i = 0; i < ph.size(); ++i) EXPECT_EQ(out.photons[i].t, ph[i].t);
}

TEST(Pockels, AcceptedRateBoundedByDeadTime) {
  RandomStream r(12, 12);
  const auto trig = poisson_stream(1e6, milliseconds(10), r);
  const auto acc = accept_triggers(trig, microseconds(10));
  EXPECT_LE(static_cast<double>(acc.size()), 0.01 / 10e-6 + 1);
  for (std::size_t i = 1; i < acc.size(); ++i) ASSERT_GE(acc[i] - acc[i - 1], microseconds(10));
}

TEST(Pockels, EveryHeraldedIdlerFlippedAtZeroDarks) {
  // D1 triggers, fiber delay lands each idler mid flat-top.
  Scenario s = testing_support::preset("bbo_conditional");
  s.detectors["D1"].spec.dark_rate = 0;
  s.detectors["D1"].spec.jitter_ps = 0;
  s.source.pair_rate = 2000;  // keep triggers well apart from each other
  s.pockels()->pockels.flip_efficiency = 1.0;
  s.pockels()->pockels.driver_dead_time = Duration{};
  s.pockels()->pockels.fall_tail = Duration{};
  s.idler_chain.elements.resize(2);  // fiber + pockels only

  const auto pairs = generate_pairs(s.source, seconds(1), RandomStream(13, 0));
  RandomStream r(13, 1);
  auto sig = select_pbs_port(photons_from_pairs(pairs, Branch::Signal), PbsPort::Transmit);
  const auto clicks = detect(sig, s.detectors["D1"].spec, seconds(1), RandomStream(13, 2));
  const auto idl = fiber_delay(photons_from_pairs(pairs, Branch::Idler), {nanoseconds(250), 1.0}, r);
  const auto out = pockels_apply(idl, strip(clicks), s.pockels()->pockels, r);

  std::vector<bool> heralded(pairs.size(), false);
  for (const auto& c : clicks) heralded[c.pair_id] = true;
  std::size_t n_heralded = 0;
  for (const auto& p : out.photons) {
    const auto& pair = pairs[p.pair_id];
    if (heralded[p.pair_id]) {
      ++n_heralded;
      ASSERT_EQ(p.pol, flipped(pair.idler_pol));
    }
  }
  EXPECT_GT(n_heralded, 100u);
}
