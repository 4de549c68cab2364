#include <cmath>

#include <gtest/gtest.h>
#include <omp.h>

#include "mrr/config.hpp"
#include "mrr/emitter.hpp"
#include "mrr/engine.hpp"
#include "mrr/error.hpp"
#include "mrr/pipeline.hpp"
#include "mrr/thermal.hpp"

using namespace mrr;
using namespace mrr::emitter;

namespace {

DetectorConfig ideal_detector() {
  DetectorConfig d;
  d.efficiency = 1.0;
  d.dark_rate = 0;
  d.dead_time_ns = 0;
  d.jitter_sigma_ps = 0;
  return d;
}

io::ExperimentConfig baseline() {
  return io::load_config(MRR_SOURCE_DIR "/configs/paper-baseline.yaml");
}

}  // namespace

TEST(SimulateCw, ZeroPowerNoDarkIsEmpty) {
  SourceConfig s;
  s.pump_power_mw = 0;
  const auto ts = simulate_cw(s, ideal_detector(), ideal_detector(), device::ChannelPair{});
  EXPECT_TRUE(ts.empty());
}

TEST(SimulateCw, ThinningExpectation) {
  SourceConfig s;
  s.pump_power_mw = 1.0;
  s.pair_rate_coefficient = 1e6;
  s.schmidt_modes = 1e4;  // Poisson emission
  s.duration_s = 1.0;
  s.rng_seed = 11;
  device::ChannelPair p;
  p.transmission_signal = p.transmission_idler = 0.05;
  const auto ts = simulate_cw(s, ideal_detector(), ideal_detector(), p);
  for (std::uint8_t ch : {kSignal, kIdler}) {
    const double n = static_cast<double>(ts.count(ch));
    EXPECT_NEAR(n, 5e4, 3 * std::sqrt(5e4)) << int(ch);
  }
}

TEST(SimulateCw, ExpectedSinglesMatch) {
  SourceConfig s;
  s.pump_power_mw = 2.0;
  s.pair_rate_coefficient = 1e5;
  s.linear_noise_signal = 3e3;
  s.linear_noise_idler = 1e3;
  s.duration_s = 2.0;
  DetectorConfig d = ideal_detector();
  d.efficiency = 0.8;
  d.dark_rate = 40;
  device::ChannelPair p;
  p.transmission_signal = 0.2;
  p.transmission_idler = 0.1;
  const auto e = expected_singles(s, d, d, p);
  const auto ts = simulate_cw(s, d, d, p);
  // bunching widens the count distribution only slightly at this rate
  EXPECT_NEAR(ts.count(kSignal) / s.duration_s, e.signal, 5 * std::sqrt(e.signal / s.duration_s));
  EXPECT_NEAR(ts.count(kIdler) / s.duration_s, e.idler, 5 * std::sqrt(e.idler / s.duration_s));
}

TEST(SimulateCw, SortedAndDeterministic) {
  auto cfg = baseline();
  cfg.source.duration_s = 0.2;
  const auto a = simulate_cw(cfg.source, cfg.detector_signal, cfg.detector_idler, cfg.pair);
  const auto b = simulate_cw(cfg.source, cfg.detector_signal, cfg.detector_idler, cfg.pair);
  EXPECT_TRUE(a.is_sorted());
  EXPECT_EQ(a, b);
  cfg.source.rng_seed += 1;
  const auto c = simulate_cw(cfg.source, cfg.detector_signal, cfg.detector_idler, cfg.pair);
  EXPECT_FALSE(a == c);
}

TEST(SimulateCw, IndependentOfThreadCount) {
  auto cfg = baseline();
  cfg.source.duration_s = 0.3;
  cfg.source.pump_power_mw = 5;
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto one = simulate_cw(cfg.source, cfg.detector_signal, cfg.detector_idler, cfg.pair);
  omp_set_num_threads(4);
  const auto four = simulate_cw(cfg.source, cfg.detector_signal, cfg.detector_idler, cfg.pair);
  omp_set_num_threads(saved);
  EXPECT_EQ(one, four);
}

TEST(SimulateCw, RefusesOversizedRuns) {
  SourceConfig s;
  s.pump_power_mw = 10;
  s.duration_s = 100;
  Limits lim;
  lim.max_records = 1000;
  EXPECT_THROW(simulate_cw(s, ideal_detector(), ideal_detector(), device::ChannelPair{}, lim),
               Error);
}

TEST(SimulateCw, DeadTimeRespected) {
  auto cfg = baseline();
  cfg.source.duration_s = 0.1;
  cfg.source.pump_power_mw = 13.5;
  const auto ts = simulate_cw(cfg.source, cfg.detector_signal, cfg.detector_idler, cfg.pair);
  const auto dead = static_cast<std::int64_t>(cfg.detector_signal.dead_time_ns * 1e3);
  for (std::uint8_t ch : {kSignal, kIdler}) {
    const auto t = ts.channel_ps(ch);
    // quantisation can shorten a gap by at most one tick
    for (std::size_t i = 1; i < t.size(); ++i)
      ASSERT_GT(t[i] - t[i - 1], dead - static_cast<std::int64_t>(ts.resolution_ps));
  }
}

TEST(SimulateCw, PureNoiseAccidentalsAreIndependent) {
  SourceConfig s;
  s.pump_power_mw = 1.0;
  s.pair_rate_coefficient = 0;
  s.linear_noise_signal = 1e5;
  s.linear_noise_idler = 1e5;
  s.duration_s = 1.0;
  s.rng_seed = 5;
  const auto ts = simulate_cw(s, ideal_detector(), ideal_detector(), device::ChannelPair{});
  const std::int64_t R = 1'000'000;
  const auto h = engine::cross_correlate(ts, kSignal, kIdler, 1000, {-R, R});
  const double expected = static_cast<double>(ts.count(kSignal)) *
                          static_cast<double>(ts.count(kIdler)) * (2.0 * R * 1e-12) /
                          s.duration_s;
  EXPECT_NEAR(static_cast<double>(h.total()), expected, 3 * std::sqrt(expected));
}

TEST(SaturatedRate, Examples) {
  EXPECT_EQ(saturated_rate(12345.0, 0.0), 12345.0);
  const double tau = 100.0;  // ns
  EXPECT_DOUBLE_EQ(saturated_rate(1e9 / tau, tau), 0.5e9 / tau);
  EXPECT_NEAR(desaturated_rate(saturated_rate(3e6, tau), tau), 3e6, 1e-3);
  EXPECT_THROW(desaturated_rate(1e7, tau), Error);
  double prev = 0;
  for (double r = 1e3; r < 1e9; r *= 3) {
    const double s = saturated_rate(r, tau);
    EXPECT_GT(s, prev);
    EXPECT_LT(s, 1e9 / tau);
    prev = s;
  }
}

TEST(SaturatedRate, MonteCarloDeadTime) {
  thermal::Rng rng(3);
  boost::random::exponential_distribution<double> e(1.0);
  std::vector<std::int64_t> t;
  double now = 0;
  const double rate = 1e6, T = 2.0;
  while ((now += e(rng) / rate * 1e12) < T * 1e12) t.push_back(static_cast<std::int64_t>(now));
  const auto kept = apply_dead_time(t, 100'000);
  const double measured = static_cast<double>(kept.size()) / T;
  EXPECT_NEAR(measured, saturated_rate(rate, 100.0), 0.01 * saturated_rate(rate, 100.0));
}

TEST(Thermal, ModeWeights) {
  for (double n : {1.0, 1.16, 2.0, 3.5, 5.0}) {
    const auto w = thermal::schmidt_mode_weights(n);
    double s = 0, s2 = 0;
    for (double x : w) {
      s += x;
      s2 += x * x;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_NEAR(s2, 1.0 / n, 1e-12) << n;
    EXPECT_EQ(w.size(), static_cast<std::size_t>(std::ceil(n)));
  }
}

class G2Modes : public ::testing::TestWithParam<double> {};

TEST_P(G2Modes, AutocorrelationMatchesOnePlusInverseN) {
  const double n = GetParam();
  auto cfg = baseline();
  cfg.purity.duration_s = 1.0;
  const auto r = pipeline::run_purity(cfg, n);
  const double g2 = r.fit.value("g2_zero"), err = r.fit.error("g2_zero");
  EXPECT_NEAR(g2, 1 + 1 / n, 3 * err) << "g2 " << g2 << " +- " << err;
}

INSTANTIATE_TEST_SUITE_P(Schmidt, G2Modes, ::testing::Values(1.0, 2.0, 5.0));

TEST(CentralAcceptance, Values) {
  for (double phi : {0.0, 0.7, 2.0, 3.1}) EXPECT_DOUBLE_EQ(central_acceptance(phi, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(central_acceptance(0.0, 1.0), 1.0);
  EXPECT_NEAR(central_acceptance(M_PI, 1.0), 0.0, 1e-15);
  EXPECT_NEAR(central_acceptance(M_PI / 2, 0.5), 1.0 / 1.5, 1e-15);
}

namespace {

engine::TimeBinPeaks timebin_run(double phase, double visibility, std::uint64_t seed) {
  SourceConfig s;
  s.pump_power_mw = 10;
  s.pair_rate_coefficient = 1.2e4;
  s.coherence_time_ps = 182;
  s.duration_s = 0.3;
  s.resolution_ps = 1;
  s.rng_seed = seed;
  s.schmidt_modes = 1.16;
  TimeBinConfig tb;
  tb.phase_rad = phase;
  tb.intrinsic_visibility = visibility;
  const auto ts = simulate_timebin(s, tb, ideal_detector(), ideal_detector(), device::ChannelPair{});
  const auto h = engine::cross_correlate(ts, kSignal, kIdler, 10, {-5000, 5000});
  return engine::timebin_peaks(h, tb.bin_separation_ns());
}

}  // namespace

TEST(SimulateTimebin, DestructivePhaseEmptiesCentre) {
  const auto on = timebin_run(0.0, 1.0, 1);
  const auto off = timebin_run(M_PI / 2, 1.0, 2);
  EXPECT_LT(static_cast<double>(off.center), 0.01 * static_cast<double>(off.left));
  const double l0 = on.left + on.right, l1 = off.left + off.right;
  EXPECT_NEAR(l0, l1, 3 * std::sqrt(l0 + l1));
  // constructive: centre carries twice each side
  EXPECT_NEAR(on.center / (0.5 * l0), 2.0, 3 * 2.0 * std::sqrt(1.0 / on.center + 1.0 / l0));
}

TEST(SimulateTimebin, NoVisibilityMeansFlatCentre) {
  const auto a = timebin_run(0.0, 0.0, 3);
  const auto b = timebin_run(M_PI / 2, 0.0, 4);
  EXPECT_NEAR(double(a.center), double(b.center), 3 * std::sqrt(double(a.center + b.center)));
  const double side = 0.5 * double(a.left + a.right);
  EXPECT_NEAR(a.center / side, 2.0, 3 * 2.0 * std::sqrt(1.0 / a.center + 0.5 / side));
}

TEST(TimeBinConfig, RejectsLongCoherence) {
  TimeBinConfig tb;
  EXPECT_THROW(tb.validate(600.0, false), Error);
  EXPECT_NO_THROW(tb.validate(182.0, false));
}
