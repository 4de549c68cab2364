#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mrr/engine.hpp"

namespace mrr::est {

struct Parameter {
  std::string name;
  double value = 0.0;
  double error = 0.0;
};

struct FitResult {
  std::vector<Parameter> parameters;
  double reduced_chi_square = 0.0;
  Eigen::MatrixXd covariance;  // over the fitted (not derived) parameters
  std::vector<std::string> flags;
  bool converged = true;

  const Parameter& at(const std::string& name) const;
  double value(const std::string& name) const { return at(name).value; }
  double error(const std::string& name) const { return at(name).error; }
  bool has_flag(const std::string& f) const;
};

enum class Weighting { Poisson, Uniform };

// ---------------------------------------------------------------- power law

struct RatePoint {
  double power_mw;
  double rate;            // counts/s
  double exposure_s = 1;  // turns rates back into counts for Poisson weights
};

/// rate = a P + b P^2 through the origin, a and b >= 0. A coefficient that
/// comes out negative is clipped to zero and the other refitted; the result
/// then carries the flag "a_clipped" or "b_clipped".
FitResult fit_power_law(std::span<const RatePoint> points, Weighting weighting);

/// rate = c P^2 (coincidences at low power).
FitResult fit_quadratic(std::span<const RatePoint> points, Weighting weighting);

// ---------------------------------------------------------------- CAR

struct CarModel {
  double a_signal = 0, a_idler = 0;  // counts/s/mW
  double b_signal = 0, b_idler = 0;  // counts/s/mW^2
  double dark_signal = 0, dark_idler = 0;
  double coincidence_coefficient = 0;  // windowed R_c per mW^2
  double window_ps = 0;
  double dead_time_ns = 0;
  /// Relative excess of accidentals inside the window from bunched pair
  /// emission, (g2 - 1) * overlap. Zero reproduces the plain 1 + true/acc.
  double thermal_excess = 0;
  /// Pairs detected on both arms at any delay, per mW^2. Both detectors are
  /// more often live together than independence suggests; the joint live
  /// fraction gains a factor exp(rate * dead time). Zero disables it.
  double pair_coincidence_coefficient = 0;
};

struct CarPrediction {
  double car;
  double singles_signal;  // after saturation
  double singles_idler;
  double coincidence_rate;  // true pairs inside the window
  double accidental_rate;  // flat level integrated over the window
  double raw_coincidence_rate;  // everything in the window, as counted
};

CarPrediction predict_car(const CarModel& m, double power_mw);

/// Mean over the coincidence window of the intensity-correlation excess seen
/// between photons of different pairs, exp(-2|t|/tau) smeared by the pair
/// delay law exp(-|t|/tau)/(2 tau). Multiply by 1/n for the bunching term.
double thermal_window_overlap(double coherence_time_ps, double window_ps);

// ---------------------------------------------------------------- rates

double pair_generation_rate(double singles_signal, double singles_idler, double coincidences);

struct ArmTransmission {
  double signal;
  double idler;
  double signal_db;
  double idler_db;
};

/// eta_signal = R_c / S_idler, eta_idler = R_c / S_signal.
ArmTransmission arm_transmission(double singles_signal, double singles_idler,
                                 double coincidences);

double brightness(double pgr_coefficient, double bandwidth_mhz);

// ---------------------------------------------------------------- peaks

enum class PeakShape { Lorentzian, DoubleExponential };

struct PeakFitOptions {
  PeakShape shape = PeakShape::DoubleExponential;
  /// Gaussian timing jitter between the two channels, sigma in ps.
  double jitter_sigma_ps = 0.0;
  /// Only bins with |delay - 0| <= fit_half_range_ps enter the fit.
  double fit_half_range_ps = 1e300;
  /// Initial width guess; <= 0 picks one from the data.
  double width_guess_ps = 0.0;
  Weighting weighting = Weighting::Poisson;
};

/// baseline + amplitude * shape(delay - center; width), smeared by jitter and
/// by the stream's timestamp quantum, averaged over each bin. Width is the
/// decay constant (double exponential) or half width at half maximum
/// (Lorentzian). Parameters: baseline, amplitude, width_ps, center_ps.
FitResult fit_peak(const engine::Histogram& hist, const PeakFitOptions& opts);

/// Expected bin contents of the fit_peak model; exposed for synthetic data.
std::vector<double> peak_model(const engine::Histogram& shape_of, const PeakFitOptions& opts,
                               double baseline, double amplitude, double width_ps,
                               double center_ps);

/// g2(0) as the ratio of zero-delay coincidences to the background, plus the
/// Schmidt number n = 1 / (g2 - 1). Flags "schmidt_unbounded" when g2 <= 1.
FitResult fit_g2(const engine::Histogram& hist, const PeakFitOptions& opts);

// ---------------------------------------------------------------- visibility

struct PhasePoint {
  double control;  // phase in rad, or piezo voltage
  double counts;
};

struct VisibilityOptions {
  /// Fixed period of the fringe in control units; nullopt fits it.
  std::optional<double> period;
  Weighting weighting = Weighting::Poisson;
};

/// C(x) = C0 (1 + V cos(2 pi x / period + x0)). Net visibility subtracts the
/// supplied accidental level (counts per point) from both fringe extrema.
FitResult fit_visibility(std::span<const PhasePoint> points, double accidental_level,
                         const VisibilityOptions& opts = {},
                         double accidental_error = 0.0);

struct LineFit {
  double intercept, slope;
  double intercept_error, slope_error;
};

/// Weighted straight line, weights 1/sigma^2.
LineFit fit_line(std::span<const double> x, std::span<const double> y,
                 std::span<const double> sigma);

}  // namespace mrr::est
