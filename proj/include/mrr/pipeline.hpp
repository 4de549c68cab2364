#pragma once

#include <span>
#include <vector>

#include "mrr/config.hpp"
#include "mrr/engine.hpp"
#include "mrr/estimators.hpp"

namespace mrr::pipeline {

/// Fraction of true coincidences inside a window of `window_ps` centred on
/// zero: Laplace(tau) delay, Gaussian jitter, and (for tick > 1) the
/// triangular spread of two floor-quantised timestamps.
double window_capture(double tau_ps, double jitter_sigma_ps, double tick_ps, double window_ps);

/// CAR model built from the configured source and detectors (no fitting).
est::CarModel config_car_model(const io::ExperimentConfig& cfg);

/// Predicted detected pair coincidences per mW^2 inside the analysis window.
double expected_coincidence_coefficient(const io::ExperimentConfig& cfg);

struct CwPoint {
  double power_mw = 0;
  double duration_s = 0;
  double singles_signal = 0;  // counts/s as measured
  double singles_idler = 0;
  double coincidence_rate = 0;  // windowed, raw
  double accidental_rate = 0;   // expected in the window, from sidebands
  double car = 0;
  double car_error = 0;
  double peak_center_ps = 0;
};

engine::Histogram cw_histogram(const TagStream& s, const io::AnalysisDefaults& a);
CwPoint analyze_cw(const TagStream& s, const io::AnalysisDefaults& a, double power_mw,
                   double duration_s);

/// Source config for one CW run at `power_mw`; the seed is derived from the
/// base seed and the point index so every point is independent.
emitter::SourceConfig cw_source(const io::ExperimentConfig& cfg, double power_mw,
                                double duration_s, std::uint64_t index);

struct PowerSweepResult {
  std::vector<CwPoint> points;
  est::FitResult fit_signal;  // dark-subtracted, dead-time corrected singles
  est::FitResult fit_idler;
  est::FitResult fit_coincidence;  // quadratic over the unsaturated points
  std::size_t coincidence_fit_points = 0;
  double pgr = 0, pgr_error = 0;  // per mW^2
  est::ArmTransmission transmission{};
  est::CarModel fitted_model;
  est::CarModel config_model;
};

/// Runs one simulation per power. The duration of each point is
/// max(power_sweep.duration_s, min_peak_counts / predicted R_c), capped at
/// max_duration_s.
PowerSweepResult run_power_sweep(const io::ExperimentConfig& cfg, std::span<const double> powers,
                                 double min_peak_counts = 1000, double max_duration_s = 60);

struct PeakRun {
  engine::Histogram histogram;
  est::FitResult fit;
};

/// Unheralded signal-arm g2 through a virtual 50:50 splitter; noise, dark
/// counts and dead time are switched off.
PeakRun run_purity(const io::ExperimentConfig& cfg, double schmidt_modes);

/// Signal-idler cross-correlation at the configured source power, fitted
/// with a double exponential. width_ps is the coherence time.
PeakRun run_cross_correlation(const io::ExperimentConfig& cfg, double duration_s);

struct TimeBinPoint {
  double phase_rad = 0;
  engine::TimeBinPeaks peaks;
  double background = 0;  // non-interfering counts under the central window
};

struct TimeBinResult {
  std::vector<TimeBinPoint> points;
  est::FitResult visibility;  // period pi in the interferometer phase
  est::LineFit side_slope;    // left + right counts versus phase
  double accidental_level = 0;
  double accidental_error = 0;
};

engine::Histogram timebin_histogram(const TagStream& s, const io::TimeBinSection& t);

TimeBinResult run_timebin_sweep(const io::ExperimentConfig& cfg,
                                std::span<const double> phases_rad);

std::vector<device::CombMatch> channel_map(const io::ExperimentConfig& cfg, int k_min,
                                           int k_max);

}  // namespace mrr::pipeline
