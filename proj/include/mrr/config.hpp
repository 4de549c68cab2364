#pragma once

#include <string>
#include <vector>

#include "mrr/device.hpp"
#include "mrr/emitter.hpp"

namespace mrr::io {

/// Histogram and fit settings shared by the analysis commands.
struct AnalysisDefaults {
  double window_ps = 972;  // coincidence (CAR) window
  std::int64_t bin_ps = 81;
  std::int64_t range_ps = 1'000'000;  // histograms span [-range, +range]
  double sideband_min_ps = 200'000;   // accidentals from sideband_min <= |delay|
  double sideband_max_ps = 1'000'000;
  std::int64_t g2_range_ps = 12'150;
  double fit_half_range_ps = 8'000;
  std::string peak_shape = "double_exponential";  // or "lorentzian"
};

/// Overrides used by the time-bin experiment. Any key of the top-level
/// device/source/detector sections may be repeated under `timebin:`; the
/// merged result lands here.
struct TimeBinSection {
  emitter::TimeBinConfig interferometer;
  device::RingDevice device;
  emitter::SourceConfig source;
  emitter::DetectorConfig detector_signal;
  emitter::DetectorConfig detector_idler;
  std::vector<double> phases_rad;  // sweep of the interferometer phase
  std::int64_t bin_ps = 10;
  std::int64_t range_ps = 5'000;
};

struct PowerSweepSection {
  std::vector<double> powers_mw;
  double duration_s = 2.0;
};

/// Settings for the unheralded g2 (purity) run: one arm, no noise.
struct PuritySection {
  double pair_rate = 1e7;  // detected signal photons per second
  double duration_s = 3.0;
  double jitter_sigma_ps = 25.0;
  std::uint64_t splitter_seed = 7;
};

struct ExperimentConfig {
  device::RingDevice device;
  device::DwdmGrid grid;
  double temperature_k = 298.15;
  device::ChannelPair pair;
  emitter::SourceConfig source;
  emitter::DetectorConfig detector_signal;
  emitter::DetectorConfig detector_idler;
  TimeBinSection timebin;
  PowerSweepSection power_sweep;
  PuritySection purity;
  AnalysisDefaults analysis;
  std::string output_dir = "out";

  /// Cross-section checks: channels exist on the grid, etc.
  void validate() const;
};

/// Parses YAML (JSON is accepted as a YAML subset). Unknown keys, type errors
/// and range violations throw Error(Config) with the line number.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<string>");

/// Canonical JSON (sorted keys, every field present). parse_config accepts it.
std::string serialize_config(const ExperimentConfig& cfg);

/// Hex SHA-256 of serialize_config.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace mrr::io
