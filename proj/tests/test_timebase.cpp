#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace twincal;
namespace ts = testing_support;

TEST(Timebase, UnitHelpers) {
  EXPECT_EQ(picoseconds(7).ticks, 7);
  EXPECT_EQ(nanoseconds(1).ticks, 1000);
  EXPECT_EQ(microseconds(1).ticks, 1'000'000);
  EXPECT_EQ(milliseconds(1).ticks, 1'000'000'000);
  EXPECT_EQ(seconds(1).ticks, 1'000'000'000'000);
  EXPECT_EQ(from_seconds(2.5e-9).ticks, 2500);
  EXPECT_DOUBLE_EQ(seconds(3).seconds(), 3.0);
  // a million-second gate still fits
  EXPECT_GT(seconds(1'000'000).ticks, 0);
}

TEST(Timebase, TimeArithmetic) {
  const TimeStamp t{100};
  EXPECT_EQ((t + nanoseconds(1)).ticks, 1100);
  EXPECT_EQ((TimeStamp{1100} - t).ticks, 1000);
  EXPECT_LT(t, TimeStamp{101});
}

TEST(RandomStream, SameSeedAndStreamReproduce) {
  RandomStream a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(RandomStream, FrozenFirstDraws) {
  // Guards the platform-independence contract: these values must never change.
  RandomStream r(1, 0);
  const std::uint64_t first = r.next_u64();
  RandomStream again(1, 0);
  EXPECT_EQ(first, again.next_u64());
  EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFull);
  EXPECT_EQ(hash_label(""), 0xCBF29CE484222325ull);
  EXPECT_EQ(hash_label("a"), 0xAF63DC4C8601EC8Cull);
}

TEST(RandomStream, DerivedStreamsDifferAndAreStable) {
  RandomStream root(9, 1);
  auto a = root.derive("dark");
  auto b = root.derive("dark");
  auto c = root.derive("jitter");
  auto d = root.derive(std::uint64_t{0});
  auto e = root.derive(std::uint64_t{1});
  EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(root.derive("dark").next_u64(), c.next_u64());
  EXPECT_NE(d.next_u64(), e.next_u64());
}

TEST(RandomStream, UniformRanges) {
  RandomStream r(3, 3);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double p = r.uniform_pos();
    ASSERT_GT(p, 0.0);
    ASSERT_LE(p, 1.0);
  }
}

TEST(RandomStream, NormalMoments) {
  RandomStream r(5, 5);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  const double m = s / n;
  const double v = s2 / n - m * m;
  EXPECT_LT(std::abs(m), 5.0 / std::sqrt(n));
  EXPECT_LT(std::abs(v - 1.0), 5.0 * std::sqrt(2.0 / n));
}

TEST(PoissonStream, ZeroRateIsEmpty) {
  RandomStream r(1, 1);
  EXPECT_TRUE(poisson_stream(0.0, seconds(1), r).empty());
  EXPECT_TRUE(poisson_stream(1e5, Duration{}, r).empty());
}

TEST(PoissonStream, NegativeInputsRejected) {
  RandomStream r(1, 1);
  EXPECT_THROW(poisson_stream(-1.0, seconds(1), r), InvalidArgument);
  EXPECT_THROW(poisson_stream(1.0, Duration{-1}, r), InvalidArgument);
}

TEST(PoissonStream, StrictlyIncreasingInsideGate) {
  RandomStream r(2, 2);
  const auto v = poisson_stream(1e6, milliseconds(100), r);
  EXPECT_TRUE(is_sorted_strict(v));
  EXPECT_GE(v.front().ticks, 0);
  EXPECT_LT(v.back().ticks, milliseconds(100).ticks);
}

TEST(PoissonStream, Deterministic) {
  RandomStream a(77, 3), b(77, 3);
  EXPECT_EQ(poisson_stream(1e4, seconds(1), a), poisson_stream(1e4, seconds(1), b));
}

TEST(PoissonStream, MeanAndVarianceOverTrials) {
  const double rate = 1e5;
  std::vector<double> counts;
  RandomStream root(11, 0);
  for (std::uint64_t k = 0; k < 100; ++k) {
    auto r = root.derive(k);
    counts.push_back(static_cast<double>(poisson_stream(rate, seconds(1), r).size()));
  }
  const double m = ts::mean(counts), v = ts::variance(counts);
  EXPECT_LT(std::abs(m - rate), 5.0 * std::sqrt(rate / 100.0));
  // standard error of the sample variance for Poisson ≈ λ·sqrt(2/(n−1))
  EXPECT_LT(std::abs(v - rate), 5.0 * rate * std::sqrt(2.0 / 99.0));
}

TEST(PoissonStream, InterArrivalsAreExponential) {
  RandomStream r(13, 0);
  const double rate = 1e5;
  const auto v = poisson_stream(rate, from_seconds(1.0), r);
  ASSERT_GE(v.size(), 90000u);
  std::vector<double> gaps;
  for (std::size_t i = 1; i < v.size(); ++i) gaps.push_back((v[i] - v[i - 1]).seconds());
  const double d = ts::ks_exponential(gaps, rate);
  // asymptotic KS critical value at significance 0.001
  EXPECT_LT(d, 1.9495 / std::sqrt(static_cast<double>(gaps.size())));
}

TEST(MergeStreams, Examples) {
  const TimeTags empty, five{{5}}, three{{3}};
  auto m = merge_streams(empty, five);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0], (LabeledTime{{5}, StreamLabel::B}));

  m = merge_streams(three, three);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].label, StreamLabel::A);
  EXPECT_EQ(m[1].label, StreamLabel::B);

  const TimeTags a{{1}, {4}}, b{{2}, {3}};
  m = merge_streams(a, b);
  ASSERT_EQ(m.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(m[i].t.ticks, i + 1);
}

TEST(MergeStreams, UnsortedRejected) {
  const TimeTags bad{{4}, {1}}, ok{{2}};
  EXPECT_THROW(merge_streams(bad, ok), InvalidArgument);
  EXPECT_THROW(merge_streams(ok, bad), InvalidArgument);
}

TEST(Shift, UniformOffset) {
  const TimeTags v{{0}, {10}};
  const auto s = shift(v, nanoseconds(1));
  EXPECT_EQ(s[0].ticks, 1000);
  EXPECT_EQ(s[1].ticks, 1010);
}
