#pragma once

#include <vector>

namespace mrr::device {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

double thz_to_nm(double thz);
double nm_to_thz(double nm);

/// Microring resonator. Frequencies carry their unit in the field name.
struct RingDevice {
  double q_factor = 4.6e5;
  double fsr_ghz = 192.37;
  double pump_frequency_thz = 192.5;
  double thermal_tuning_ghz_per_k = -2.75;
  double reference_temperature_k = 298.15;

  /// Throws Error(Config) naming the offending field.
  void validate() const;
};

/// Photon bandwidth (FWHM) in MHz: f / (2 Q).
double linewidth_mhz(const RingDevice& d);

/// Biphoton coherence time in ps: 1 / (2 pi FWHM).
double coherence_time_ps(const RingDevice& d);

/// Resonance k lines away from the pumped one, shifted thermally.
double comb_line_frequency_thz(const RingDevice& d, int k, double temperature_k);

/// Temperature change that moves every resonance by `target_detuning_ghz`.
double required_temperature_shift(const RingDevice& d, double target_detuning_ghz);

/// DWDM grid. Channel n is centred at anchor + n * index_step; only every
/// `stride`-th index (starting at `first_channel`) carries a filter, which is
/// how a 200 GHz plan sits on the 100 GHz ITU numbering.
struct DwdmGrid {
  double anchor_frequency_thz = 190.0;
  double index_step_ghz = 100.0;
  double channel_spacing_ghz = 200.0;
  double passband_width_ghz = 200.0;
  int first_channel = 1;

  void validate() const;
  int stride() const;
  double channel_center_thz(int n) const;
  bool is_occupied(int n) const;
  /// Nearest occupied channel to `f_thz`.
  int nearest_channel(double f_thz) const;
};

struct CombMatch {
  int k;
  int channel;
  double detuning_ghz;  // line frequency minus channel centre
};

std::vector<CombMatch> match_comb_to_grid(const RingDevice& d, const DwdmGrid& g,
                                          int k_min, int k_max, double temperature_k);

/// Signal/idler channel pair with per-arm noise coefficients. Counts are per
/// second; a is per mW, b per mW^2.
struct ChannelPair {
  int signal_channel = 23;
  int idler_channel = 27;
  int comb_order = 1;
  double a_signal = 0.0;
  double a_idler = 0.0;
  double b_signal = 0.0;
  double b_idler = 0.0;
  double transmission_signal = 1.0;
  double transmission_idler = 1.0;

  void validate() const;
};

/// Pairs comb lines -k (signal, red side) and +k (idler) and assigns the
/// nearest grid channels. Checks energy conservation against the linewidth.
ChannelPair make_channel_pair(const RingDevice& d, const DwdmGrid& g, int k,
                              double temperature_k);

}  // namespace mrr::device
