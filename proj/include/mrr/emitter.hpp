#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mrr/device.hpp"
#include "mrr/tagstream.hpp"

namespace mrr::emitter {

inline constexpr std::uint8_t kSignal = 0;
inline constexpr std::uint8_t kIdler = 1;

struct SourceConfig {
  double pump_power_mw = 1.0;
  /// Generated pairs per second per mW^2, before any loss.
  double pair_rate_coefficient = 5.2e5;
  /// Linear (pump-proportional) noise at the detector, counts/s/mW.
  double linear_noise_signal = 0.0;
  double linear_noise_idler = 0.0;
  /// Effective Schmidt number, >= 1. Need not be an integer.
  double schmidt_modes = 1.0;
  double coherence_time_ps = 760.0;
  double duration_s = 1.0;
  std::uint64_t rng_seed = 1;
  std::uint32_t resolution_ps = 81;

  void validate() const;
};

struct DetectorConfig {
  double efficiency = 0.8;
  double dark_rate = 40.0;  // counts/s
  double dead_time_ns = 0.0;
  double jitter_sigma_ps = 0.0;

  void validate(const char* which = "detector") const;
};

struct TimeBinConfig {
  double clock_rate_mhz = 750.0;
  double pulse_width_ps = 100.0;  // FWHM of the carved pump pulse
  double phase_rad = 0.0;
  double pump_phase_rad = 0.0;
  double excess_loss_db = 3.0;
  double splitter_loss_db = 3.0;
  double intrinsic_visibility = 1.0;

  double bin_separation_ns() const { return 1e3 / clock_rate_mhz; }
  /// Rejects tau_c >= dt/3; prints a warning when tau_c > dt/10 and `warn`.
  void validate(double coherence_time_ps, bool warn = true) const;
};

struct Limits {
  std::size_t max_records = 200'000'000;
  double segment_s = 0.02;
};

/// Nonparalyzable detector: r / (1 + r tau).
double saturated_rate(double true_rate, double dead_time_ns);

/// Inverse of saturated_rate. Throws Error(Numeric) when the measured rate is
/// at or above the 1/tau ceiling.
double desaturated_rate(double measured_rate, double dead_time_ns);

/// Drops every timestamp that falls within `dead_ps` after the last kept one.
std::vector<std::int64_t> apply_dead_time(std::span<const std::int64_t> sorted_ps,
                                          std::int64_t dead_ps);

/// Expected detected singles per second on each arm, ignoring dead time.
struct ArmRates {
  double signal;
  double idler;
};
ArmRates expected_singles(const SourceConfig& s, const DetectorConfig& ds,
                          const DetectorConfig& di, const device::ChannelPair& pair);

/// Continuous-wave pair source plus linear noise and dark counts on a
/// two-channel (signal = 0, idler = 1) stream. Deterministic in rng_seed and
/// independent of the number of OpenMP threads.
TagStream simulate_cw(const SourceConfig& source, const DetectorConfig& det_signal,
                      const DetectorConfig& det_idler, const device::ChannelPair& pair,
                      const Limits& limits = {});

/// Pulsed sequential time-bin source analysed by one unbalanced interferometer
/// shared by both photons.
TagStream simulate_timebin(const SourceConfig& source, const TimeBinConfig& tb,
                           const DetectorConfig& det_signal, const DetectorConfig& det_idler,
                           const device::ChannelPair& pair, const Limits& limits = {});

/// Probability that a pair in the zero relative-delay class survives the
/// two-photon interference. Equals 1 at the fringe maximum and for V = 0.
double central_acceptance(double two_photon_phase, double visibility);

}  // namespace mrr::emitter
