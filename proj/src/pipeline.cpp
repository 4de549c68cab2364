#include "mrr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mrr/error.hpp"
#include "mrr/thermal.hpp"

namespace mrr::pipeline {

namespace {

constexpr std::uint64_t kSweepStream = 100;
constexpr std::uint64_t kTimeBinStream = 200;
constexpr std::uint64_t kPurityStream = 300;
constexpr std::uint64_t kCrossStream = 400;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

engine::SummaryOptions summary_options(const io::AnalysisDefaults& a) {
  engine::SummaryOptions o;
  o.sideband_min_ps = a.sideband_min_ps;
  o.sideband_max_ps = a.sideband_max_ps;
  return o;
}

double combined_jitter(const io::ExperimentConfig& cfg) {
  return std::hypot(cfg.detector_signal.jitter_sigma_ps, cfg.detector_idler.jitter_sigma_ps);
}

est::PeakShape shape_of(const io::AnalysisDefaults& a) {
  return a.peak_shape == "lorentzian" ? est::PeakShape::Lorentzian
                                      : est::PeakShape::DoubleExponential;
}

}  // namespace

double window_capture(double tau, double sigma, double tick, double window) {
  if (!(tau > 0) || !(window > 0)) fail(ErrorKind::Numeric, "window capture needs tau, window > 0");
  const double h = window / 2;
  double s2 = sigma * sigma;
  if (tick > 1) s2 += tick * tick / 6;
  if (s2 <= 0) return 1 - std::exp(-h / tau);
  const double s = std::sqrt(s2);
  // Simpson over the Laplace delay.
  const int n = 4000;
  const double lo = -40 * tau, step = 80 * tau / n;
  double acc = 0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * step;
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    const double inside = normal_cdf((h - x) / s) - normal_cdf((-h - x) / s);
    acc += w * std::exp(-std::abs(x) / tau) / (2 * tau) * inside;
  }
  return acc * step / 3;
}

double expected_coincidence_coefficient(const io::ExperimentConfig& cfg) {
  const double eta_s = cfg.pair.transmission_signal * cfg.detector_signal.efficiency;
  const double eta_i = cfg.pair.transmission_idler * cfg.detector_idler.efficiency;
  return cfg.source.pair_rate_coefficient * eta_s * eta_i *
         window_capture(cfg.source.coherence_time_ps, combined_jitter(cfg),
                        cfg.source.resolution_ps, cfg.analysis.window_ps);
}

est::CarModel config_car_model(const io::ExperimentConfig& cfg) {
  est::CarModel m;
  m.a_signal = cfg.source.linear_noise_signal;
  m.a_idler = cfg.source.linear_noise_idler;
  m.b_signal = cfg.source.pair_rate_coefficient * cfg.pair.transmission_signal *
               cfg.detector_signal.efficiency;
  m.b_idler = cfg.source.pair_rate_coefficient * cfg.pair.transmission_idler *
              cfg.detector_idler.efficiency;
  m.dark_signal = cfg.detector_signal.dark_rate;
  m.dark_idler = cfg.detector_idler.dark_rate;
  m.coincidence_coefficient = expected_coincidence_coefficient(cfg);
  m.pair_coincidence_coefficient = cfg.source.pair_rate_coefficient * cfg.pair.transmission_signal *
                                   cfg.detector_signal.efficiency * cfg.pair.transmission_idler *
                                   cfg.detector_idler.efficiency;
  m.window_ps = cfg.analysis.window_ps;
  m.dead_time_ns = std::max(cfg.detector_signal.dead_time_ns, cfg.detector_idler.dead_time_ns);
  m.thermal_excess = est::thermal_window_overlap(cfg.source.coherence_time_ps,
                                                 cfg.analysis.window_ps) /
                     cfg.source.schmidt_modes;
  return m;
}

engine::Histogram cw_histogram(const TagStream& s, const io::AnalysisDefaults& a) {
  return engine::cross_correlate(s, emitter::kSignal, emitter::kIdler, a.bin_ps,
                                 {-a.range_ps, a.range_ps});
}

CwPoint analyze_cw(const TagStream& s, const io::AnalysisDefaults& a, double power_mw,
                   double duration_s) {
  auto h = cw_histogram(s, a);
  h.acquisition_time_s = duration_s;
  const auto sum = engine::coincidence_summary(h, a.window_ps, summary_options(a));
  CwPoint p;
  p.power_mw = power_mw;
  p.duration_s = duration_s;
  p.singles_signal = static_cast<double>(s.count(emitter::kSignal)) / duration_s;
  p.singles_idler = static_cast<double>(s.count(emitter::kIdler)) / duration_s;
  p.coincidence_rate = sum.coincidence_rate;
  p.accidental_rate = sum.accidental_counts_per_bin *
                      std::round(a.window_ps / static_cast<double>(a.bin_ps)) / duration_s;
  p.car = sum.car;
  p.car_error = sum.car_error;
  p.peak_center_ps = sum.peak_center_ps;
  return p;
}

emitter::SourceConfig cw_source(const io::ExperimentConfig& cfg, double power_mw,
                                double duration_s, std::uint64_t index) {
  emitter::SourceConfig s = cfg.source;
  s.pump_power_mw = power_mw;
  s.duration_s = duration_s;
  s.rng_seed = thermal::derive_seed(cfg.source.rng_seed, kSweepStream, index);
  return s;
}

PowerSweepResult run_power_sweep(const io::ExperimentConfig& cfg, std::span<const double> powers,
                                 double min_peak_counts, double max_duration_s) {
  if (powers.size() < 3) fail(ErrorKind::Config, "power sweep needs at least 3 powers");
  PowerSweepResult r;
  r.config_model = config_car_model(cfg);
  for (std::size_t i = 0; i < powers.size(); ++i) {
    const double p = powers[i];
    const double rc = est::predict_car(r.config_model, p).coincidence_rate;
    double duration = cfg.power_sweep.duration_s;
    if (rc > 0) duration = std::max(duration, std::min(max_duration_s, min_peak_counts / rc));
    const auto src = cw_source(cfg, p, duration, i);
    const auto ts = emitter::simulate_cw(src, cfg.detector_signal, cfg.detector_idler, cfg.pair);
    r.points.push_back(analyze_cw(ts, cfg.analysis, p, duration));
  }

  // Singles: undo dead time, remove dark counts, fit a P + b P^2.
  std::vector<est::RatePoint> sig, idl, coinc;
  for (const auto& pt : r.points) {
    const double s = emitter::desaturated_rate(pt.singles_signal, cfg.detector_signal.dead_time_ns);
    const double i = emitter::desaturated_rate(pt.singles_idler, cfg.detector_idler.dead_time_ns);
    sig.push_back({pt.power_mw, s - cfg.detector_signal.dark_rate, pt.duration_s});
    idl.push_back({pt.power_mw, i - cfg.detector_idler.dark_rate, pt.duration_s});
    const double load = std::max(s * cfg.detector_signal.dead_time_ns,
                                 i * cfg.detector_idler.dead_time_ns) * 1e-9;
    if (load < 0.01) coinc.push_back({pt.power_mw, pt.coincidence_rate, pt.duration_s});
  }
  if (coinc.size() < 2) {
    coinc.clear();
    for (std::size_t k = 0; k < std::min<std::size_t>(3, r.points.size()); ++k)
      coinc.push_back({r.points[k].power_mw, r.points[k].coincidence_rate, r.points[k].duration_s});
  }
  r.fit_signal = est::fit_power_law(sig, est::Weighting::Poisson);
  r.fit_idler = est::fit_power_law(idl, est::Weighting::Poisson);
  r.fit_coincidence = est::fit_quadratic(coinc, est::Weighting::Poisson);
  r.coincidence_fit_points = coinc.size();

  const double bs = r.fit_signal.value("b"), bi = r.fit_idler.value("b");
  const double c = r.fit_coincidence.value("c");
  r.pgr = est::pair_generation_rate(bs, bi, c);
  r.pgr_error = r.pgr * std::sqrt(std::pow(r.fit_signal.error("b") / bs, 2) +
                                  std::pow(r.fit_idler.error("b") / bi, 2) +
                                  std::pow(r.fit_coincidence.error("c") / c, 2));
  r.transmission = est::arm_transmission(bs, bi, c);

  r.fitted_model = r.config_model;
  r.fitted_model.a_signal = r.fit_signal.value("a");
  r.fitted_model.a_idler = r.fit_idler.value("a");
  r.fitted_model.b_signal = bs;
  r.fitted_model.b_idler = bi;
  r.fitted_model.coincidence_coefficient = c;
  r.fitted_model.pair_coincidence_coefficient =
      c / window_capture(cfg.source.coherence_time_ps, combined_jitter(cfg),
                         cfg.source.resolution_ps, cfg.analysis.window_ps);
  return r;
}

PeakRun run_purity(const io::ExperimentConfig& cfg, double schmidt_modes) {
  auto src = cfg.source;
  src.schmidt_modes = schmidt_modes;
  src.pump_power_mw = 1.0;
  src.pair_rate_coefficient = cfg.purity.pair_rate;
  src.linear_noise_signal = src.linear_noise_idler = 0;
  src.duration_s = cfg.purity.duration_s;
  src.rng_seed = thermal::derive_seed(cfg.source.rng_seed, kPurityStream,
                                      static_cast<std::uint64_t>(schmidt_modes * 1000));
  emitter::DetectorConfig det;
  det.efficiency = 1.0;
  det.dark_rate = 0;
  det.dead_time_ns = 0;
  det.jitter_sigma_ps = cfg.purity.jitter_sigma_ps;
  emitter::DetectorConfig off = det;
  off.efficiency = 1e-9;
  device::ChannelPair pair = cfg.pair;
  pair.transmission_signal = 1.0;
  pair.transmission_idler = 1.0;
  const auto ts = emitter::simulate_cw(src, det, off, pair);

  const auto& a = cfg.analysis;
  PeakRun r{engine::autocorrelate_split(ts, emitter::kSignal, cfg.purity.splitter_seed, a.bin_ps,
                                        {-a.g2_range_ps, a.g2_range_ps}),
            {}};
  r.histogram.acquisition_time_s = src.duration_s;
  est::PeakFitOptions o;
  o.shape = est::PeakShape::DoubleExponential;
  // Both split photons carry independent jitter.
  o.jitter_sigma_ps = std::numbers::sqrt2 * det.jitter_sigma_ps;
  o.fit_half_range_ps = a.fit_half_range_ps;
  o.width_guess_ps = src.coherence_time_ps / 2;
  r.fit = est::fit_g2(r.histogram, o);
  return r;
}

PeakRun run_cross_correlation(const io::ExperimentConfig& cfg, double duration_s) {
  auto src = cfg.source;
  src.duration_s = duration_s;
  src.rng_seed = thermal::derive_seed(cfg.source.rng_seed, kCrossStream, 0);
  const auto ts = emitter::simulate_cw(src, cfg.detector_signal, cfg.detector_idler, cfg.pair);
  const auto& a = cfg.analysis;
  PeakRun r{engine::cross_correlate(ts, emitter::kSignal, emitter::kIdler, a.bin_ps,
                                    {-a.g2_range_ps, a.g2_range_ps}),
            {}};
  r.histogram.acquisition_time_s = duration_s;
  est::PeakFitOptions o;
  o.shape = shape_of(a);
  o.jitter_sigma_ps = combined_jitter(cfg);
  o.fit_half_range_ps = a.fit_half_range_ps;
  o.width_guess_ps = src.coherence_time_ps;
  r.fit = est::fit_peak(r.histogram, o);
  return r;
}

engine::Histogram timebin_histogram(const TagStream& s, const io::TimeBinSection& t) {
  return engine::cross_correlate(s, emitter::kSignal, emitter::kIdler, t.bin_ps,
                                 {-t.range_ps, t.range_ps});
}

TimeBinResult run_timebin_sweep(const io::ExperimentConfig& cfg,
                                std::span<const double> phases_rad) {
  const auto& t = cfg.timebin;
  const double dt_ns = t.interferometer.bin_separation_ns();
  TimeBinResult r;
  for (std::size_t i = 0; i < phases_rad.size(); ++i) {
    auto src = t.source;
    src.rng_seed = thermal::derive_seed(t.source.rng_seed, kTimeBinStream, i);
    auto tb = t.interferometer;
    tb.phase_rad = phases_rad[i];
    const auto ts =
        emitter::simulate_timebin(src, tb, t.detector_signal, t.detector_idler, cfg.pair);
    const auto h = timebin_histogram(ts, t);
    r.points.push_back(
        {phases_rad[i], engine::timebin_peaks(h, dt_ns), engine::timebin_central_background(h, dt_ns)});
  }

  double mean = 0;
  for (const auto& p : r.points) mean += p.background;
  mean /= static_cast<double>(r.points.size());
  double var = 0;
  for (const auto& p : r.points) var += (p.background - mean) * (p.background - mean);
  const double n = static_cast<double>(r.points.size());
  r.accidental_level = mean;
  r.accidental_error = n > 1 ? std::sqrt(var / (n - 1) / n) : std::sqrt(std::max(mean, 1.0));

  std::vector<est::PhasePoint> fringe;
  std::vector<double> x, y, sy;
  for (const auto& p : r.points) {
    fringe.push_back({p.phase_rad, static_cast<double>(p.peaks.center)});
    const double side = static_cast<double>(p.peaks.left + p.peaks.right);
    x.push_back(p.phase_rad);
    y.push_back(side);
    sy.push_back(std::sqrt(std::max(side, 1.0)));
  }
  est::VisibilityOptions vo;
  vo.period = std::numbers::pi;  // two-photon phase advances twice as fast
  r.visibility = est::fit_visibility(fringe, r.accidental_level, vo, r.accidental_error);
  r.side_slope = est::fit_line(x, y, sy);
  return r;
}

std::vector<device::CombMatch> channel_map(const io::ExperimentConfig& cfg, int k_min,
                                           int k_max) {
  return device::match_comb_to_grid(cfg.device, cfg.grid, k_min, k_max, cfg.temperature_k);
}

}  // namespace mrr::pipeline
