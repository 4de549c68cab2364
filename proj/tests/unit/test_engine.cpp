#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mrr/config.hpp"
#include "mrr/emitter.hpp"
#include "mrr/engine.hpp"
#include "mrr/error.hpp"
#include "mrr/pipeline.hpp"

using namespace mrr;
using namespace mrr::engine;

namespace {

TagStream random_stream(std::mt19937_64& rng, std::size_t n, std::int64_t span_ticks,
                        std::uint32_t res) {
  std::uniform_int_distribution<std::int64_t> t(0, span_ticks);
  std::bernoulli_distribution coin(0.5);
  std::vector<std::pair<std::int64_t, std::uint8_t>> rec(n);
  for (auto& r : rec) r = {t(rng), static_cast<std::uint8_t>(coin(rng))};
  std::sort(rec.begin(), rec.end());
  TagStream s;
  s.resolution_ps = res;
  for (auto& [tick, ch] : rec) {
    s.ticks.push_back(tick);
    s.channels.push_back(ch);
  }
  return s;
}

std::vector<std::uint64_t> brute_force(const TagStream& s, std::int64_t bin, DelayRange r) {
  std::vector<std::uint64_t> c(static_cast<std::size_t>((r.max_ps - r.min_ps) / bin), 0);
  const auto a = s.channel_ps(0), b = s.channel_ps(1);
  for (auto ta : a)
    for (auto tb : b) {
      const auto d = tb - ta;
      if (d >= r.min_ps && d < r.max_ps) ++c[static_cast<std::size_t>((d - r.min_ps) / bin)];
    }
  return c;
}

Histogram flat(std::size_t bins, std::uint64_t level, std::int64_t bin = 100) {
  const auto half = static_cast<std::int64_t>(bins / 2) * bin;
  auto h = make_histogram(bin, {-half, half});
  std::fill(h.counts.begin(), h.counts.end(), level);
  h.acquisition_time_s = 1;
  return h;
}

}  // namespace

TEST(CrossCorrelate, OnlyStartChannelGivesZeros) {
  TagStream s;
  s.ticks = {0, 10, 20};
  s.channels = {0, 0, 0};
  s.resolution_ps = 1;
  const auto h = cross_correlate(s, 0, 1, 100, {-1000, 1000});
  EXPECT_EQ(h.total(), 0u);
  EXPECT_EQ(h.bins(), 20u);
}

TEST(CrossCorrelate, HandEnumeration) {
  TagStream s;
  s.ticks = {0, 100, 5000};
  s.channels = {0, 1, 1};
  s.resolution_ps = 1;
  for (auto be : {Backend::Serial, Backend::Parallel}) {
    const auto h = cross_correlate(s, 0, 1, 100, {-1000, 1000}, be);
    EXPECT_EQ(h.total(), 1u);
    EXPECT_EQ(h.counts[11], 1u);
    EXPECT_EQ(h.bin_lo(11), 100);
  }
}

TEST(CrossCorrelate, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> size(0, 10'000);
  std::uniform_int_distribution<int> pick(0, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = trial < 5 ? static_cast<std::size_t>(trial) : size(rng);
    const std::uint32_t res = trial % 2 ? 81 : 1;
    // dense streams exercise many pairs per window, sparse ones the edges
    const std::int64_t span = (pick(rng) + 1) * static_cast<std::int64_t>(n + 1) * 200 / res;
    const auto s = random_stream(rng, n, span, res);
    const std::int64_t bin = std::array<std::int64_t, 4>{1, 7, 81, 1000}[pick(rng)];
    const std::int64_t half = bin * (1 + pick(rng) * 40);
    const DelayRange r{-half, half + bin * pick(rng)};
    const auto oracle = brute_force(s, bin, r);
    ASSERT_EQ(cross_correlate(s, 0, 1, bin, r, Backend::Serial).counts, oracle) << trial;
    ASSERT_EQ(cross_correlate(s, 0, 1, bin, r, Backend::Parallel).counts, oracle) << trial;
  }
}

TEST(CrossCorrelate, RejectsBadInput) {
  TagStream s;
  s.ticks = {5, 1};
  s.channels = {0, 1};
  EXPECT_THROW(cross_correlate(s, 0, 1, 81, {-810, 810}), Error);
  s.ticks = {1, 5};
  EXPECT_THROW(cross_correlate(s, 0, 3, 81, {-810, 810}), Error);
  EXPECT_THROW(make_histogram(0, {-10, 10}), Error);
  EXPECT_THROW(make_histogram(3, {-10, 10}), Error);
  EXPECT_THROW(make_histogram(5, {10, -10}), Error);
}

TEST(CrossCorrelate, RebinningConservesTotal) {
  std::mt19937_64 rng(8);
  const auto s = random_stream(rng, 20'000, 20'000 * 150, 1);
  const auto coarse = cross_correlate(s, 0, 1, 960, {-96'000, 96'000});
  for (std::int64_t k : {2, 3, 8, 960}) {
    const auto fine = cross_correlate(s, 0, 1, 960 / k, {-96'000, 96'000});
    EXPECT_EQ(fine.total(), coarse.total()) << k;
    for (std::size_t j = 0; j < coarse.bins(); ++j) {
      std::uint64_t sum = 0;
      for (std::int64_t i = 0; i < k; ++i) sum += fine.counts[j * k + i];
      ASSERT_EQ(sum, coarse.counts[j]);
    }
  }
}

TEST(Summary, SyntheticPeak) {
  auto h = flat(200, 10);
  h.counts[100] = 1000;
  SummaryOptions o;
  o.sideband_min_ps = 1000;
  const auto s = coincidence_summary(h, 100, o);
  EXPECT_EQ(s.peak_counts, 1000u);
  EXPECT_DOUBLE_EQ(s.accidental_counts_per_bin, 10.0);
  EXPECT_DOUBLE_EQ(s.car, 100.0);
  EXPECT_DOUBLE_EQ(s.coincidence_rate, 1000.0);
  EXPECT_DOUBLE_EQ(s.net_rate, 990.0);
}

TEST(Summary, FlatGivesUnitCar) {
  std::mt19937_64 rng(4);
  std::poisson_distribution<std::uint64_t> p(400.0);
  auto h = flat(2000, 0);
  for (auto& c : h.counts) c = p(rng);
  SummaryOptions o;
  o.sideband_min_ps = 20'000;
  const auto s = coincidence_summary(h, 1000, o);
  // the window sits on the largest bin, so allow for the max-selection bias
  EXPECT_NEAR(s.car, 1.0, 3 * s.car_error + 0.05);
  EXPECT_GT(s.car_error, 0.0);
}

TEST(Summary, EmptySidebandsIsAnError) {
  auto h = flat(100, 5);
  SummaryOptions o;
  o.sideband_min_ps = 1e7;
  EXPECT_THROW(coincidence_summary(h, 100, o), Error);
  EXPECT_THROW(coincidence_summary(h, 150, {}), Error);
}

TEST(Summary, TranslationInvariant) {
  auto cfg = io::load_config(MRR_SOURCE_DIR "/configs/paper-baseline.yaml");
  cfg.source.duration_s = 0.5;
  const auto s = emitter::simulate_cw(cfg.source, cfg.detector_signal, cfg.detector_idler, cfg.pair);
  auto shifted = s;
  for (auto& t : shifted.ticks) t += 123'456'789;
  const auto& a = cfg.analysis;
  SummaryOptions o;
  o.sideband_min_ps = a.sideband_min_ps;
  o.sideband_max_ps = a.sideband_max_ps;
  const auto h1 = cross_correlate(s, 0, 1, a.bin_ps, {-a.range_ps, a.range_ps});
  const auto h2 = cross_correlate(shifted, 0, 1, a.bin_ps, {-a.range_ps, a.range_ps});
  EXPECT_EQ(h1.counts, h2.counts);
  EXPECT_EQ(coincidence_summary(h1, a.window_ps, o).car, coincidence_summary(h2, a.window_ps, o).car);
}

TEST(Autocorrelation, PoissonStreamIsFlat) {
  std::mt19937_64 rng(77);
  const auto s = random_stream(rng, 400'000, 400'000 * 1000, 1);
  const auto h = autocorrelate_split(s, 0, 9, 1000, {-200'000, 200'000});
  SummaryOptions o;
  o.sideband_min_ps = 50'000;
  const auto sum = coincidence_summary(h, 5000, o);
  const double zero = static_cast<double>(h.integrate(0.0, 5000.0));
  const double ratio = zero / (5 * sum.accidental_counts_per_bin);
  EXPECT_NEAR(ratio, 1.0, 3 * std::sqrt(1.0 / zero));
}

TEST(Autocorrelation, SplitterIsSeeded) {
  std::mt19937_64 rng(1);
  const auto s = random_stream(rng, 5000, 5000 * 100, 1);
  EXPECT_EQ(autocorrelate_split(s, 0, 3, 100, {-5000, 5000}).counts,
            autocorrelate_split(s, 0, 3, 100, {-5000, 5000}).counts);
}

TEST(TimeBinPeaks, FlatHistogram) {
  auto h = flat(1000, 7, 10);  // +-5 ns
  const auto p = timebin_peaks(h, 1.3333);
  EXPECT_EQ(p.left, p.center);
  EXPECT_EQ(p.right, p.center);
  auto narrow = flat(200, 7, 10);
  EXPECT_THROW(timebin_peaks(narrow, 1.3333), Error);
}

TEST(CrossCorrelate, CwPeakWidth) {
  auto cfg = io::load_config(MRR_SOURCE_DIR "/configs/paper-baseline.yaml");
  cfg.source.duration_s = 10.0;
  // coarse ticks and bins flatten the cusp and widen the FWHM by ~10 %
  cfg.source.resolution_ps = 1;
  const auto s = emitter::simulate_cw(cfg.source, cfg.detector_signal, cfg.detector_idler, cfg.pair);
  const auto h = cross_correlate(s, 0, 1, 40, {-20'000, 20'000});
  // background from the outer quarter, then half-maximum crossings by linear
  // interpolation on each flank
  double bg = 0;
  std::size_t nb = 0;
  for (std::size_t j = 0; j < h.bins(); ++j)
    if (std::abs(h.bin_center(j)) > 10'000) bg += h.counts[j], ++nb;
  bg /= static_cast<double>(nb);
  const auto top = static_cast<std::size_t>(
      std::max_element(h.counts.begin(), h.counts.end()) - h.counts.begin());
  const double half = 0.5 * (static_cast<double>(h.counts[top]) - bg) + bg;
  auto crossing = [&](int dir) {
    std::size_t j = top;
    while (static_cast<double>(h.counts[j + dir]) > half) j += dir;
    const double y0 = static_cast<double>(h.counts[j]), y1 = static_cast<double>(h.counts[j + dir]);
    return h.bin_center(j) + dir * 40.0 * (y0 - half) / (y0 - y1);
  };
  const double fwhm = crossing(1) - crossing(-1);
  const double expected = 2 * cfg.source.coherence_time_ps * std::log(2.0);
  EXPECT_NEAR(fwhm, expected, 0.1 * expected);
}
