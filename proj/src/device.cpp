#include "mrr/device.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mrr/error.hpp"

namespace mrr::device {

namespace {

void require(bool ok, const char* field, const char* what) {
  if (!ok) fail(ErrorKind::Config, std::string(field) + ": " + what);
}

}  // namespace

double thz_to_nm(double thz) { return kSpeedOfLight / (thz * 1e12) * 1e9; }
double nm_to_thz(double nm) { return kSpeedOfLight / (nm * 1e-9) / 1e12; }

void RingDevice::validate() const {
  require(q_factor > 0 && std::isfinite(q_factor), "device.q_factor", "must be > 0");
  require(fsr_ghz > 0 && std::isfinite(fsr_ghz), "device.fsr_ghz", "must be > 0");
  require(pump_frequency_thz > 0 && std::isfinite(pump_frequency_thz),
          "device.pump_frequency_thz", "must be > 0");
  require(std::isfinite(thermal_tuning_ghz_per_k), "device.thermal_tuning_ghz_per_k",
          "must be finite");
  require(reference_temperature_k > 0, "device.reference_temperature_k", "must be > 0");
}

double linewidth_mhz(const RingDevice& d) {
  return d.pump_frequency_thz * 1e6 / (2.0 * d.q_factor);
}

double coherence_time_ps(const RingDevice& d) {
  return 1e6 / (2.0 * std::numbers::pi * linewidth_mhz(d));
}

double comb_line_frequency_thz(const RingDevice& d, int k, double temperature_k) {
  const double shift_ghz =
      k * d.fsr_ghz + d.thermal_tuning_ghz_per_k * (temperature_k - d.reference_temperature_k);
  return d.pump_frequency_thz + shift_ghz * 1e-3;
}

double required_temperature_shift(const RingDevice& d, double target_detuning_ghz) {
  if (d.thermal_tuning_ghz_per_k == 0.0)
    fail(ErrorKind::Config, "device.thermal_tuning_ghz_per_k: zero coefficient cannot tune");
  return target_detuning_ghz / d.thermal_tuning_ghz_per_k;
}

void DwdmGrid::validate() const {
  require(anchor_frequency_thz > 0, "grid.anchor_frequency_thz", "must be > 0");
  require(index_step_ghz > 0, "grid.index_step_ghz", "must be > 0");
  require(channel_spacing_ghz > 0, "grid.channel_spacing_ghz", "must be > 0");
  const double r = channel_spacing_ghz / index_step_ghz;
  require(std::abs(r - std::round(r)) < 1e-9 && r >= 1, "grid.channel_spacing_ghz",
          "must be a positive multiple of index_step_ghz");
  require(passband_width_ghz > 0, "grid.passband_width_ghz", "must be > 0");
}

int DwdmGrid::stride() const {
  return static_cast<int>(std::lround(channel_spacing_ghz / index_step_ghz));
}

double DwdmGrid::channel_center_thz(int n) const {
  return anchor_frequency_thz + n * index_step_ghz * 1e-3;
}

bool DwdmGrid::is_occupied(int n) const {
  const int s = stride();
  return ((n - first_channel) % s + s) % s == 0;
}

int DwdmGrid::nearest_channel(double f_thz) const {
  const double index = (f_thz - anchor_frequency_thz) * 1e3 / index_step_ghz;
  const double slot = (index - first_channel) / stride();
  return first_channel + static_cast<int>(std::lround(slot)) * stride();
}

std::vector<CombMatch> match_comb_to_grid(const RingDevice& d, const DwdmGrid& g,
                                          int k_min, int k_max, double temperature_k) {
  if (k_min > k_max) fail(ErrorKind::Config, "k range is empty");
  std::vector<CombMatch> out;
  out.reserve(static_cast<std::size_t>(k_max - k_min + 1));
  for (int k = k_min; k <= k_max; ++k) {
    const double f = comb_line_frequency_thz(d, k, temperature_k);
    const int n = g.nearest_channel(f);
    out.push_back({k, n, (f - g.channel_center_thz(n)) * 1e3});
  }
  return out;
}

void ChannelPair::validate() const {
  require(a_signal >= 0, "pair.a_signal", "must be >= 0");
  require(a_idler >= 0, "pair.a_idler", "must be >= 0");
  require(b_signal >= 0, "pair.b_signal", "must be >= 0");
  require(b_idler >= 0, "pair.b_idler", "must be >= 0");
  require(transmission_signal > 0 && transmission_signal <= 1, "pair.transmission_signal",
          "must be in (0, 1]");
  require(transmission_idler > 0 && transmission_idler <= 1, "pair.transmission_idler",
          "must be in (0, 1]");
}

ChannelPair make_channel_pair(const RingDevice& d, const DwdmGrid& g, int k,
                              double temperature_k) {
  if (k <= 0) fail(ErrorKind::Config, "comb order must be positive");
  const double fs = comb_line_frequency_thz(d, -k, temperature_k);
  const double fi = comb_line_frequency_thz(d, k, temperature_k);
  const double fp = comb_line_frequency_thz(d, 0, temperature_k);
  // Thermal shift moves all three lines together, so this holds to rounding.
  if (std::abs(fs + fi - 2 * fp) * 1e6 > linewidth_mhz(d))
    fail(ErrorKind::Numeric, "signal/idler lines violate energy conservation");
  ChannelPair p;
  p.signal_channel = g.nearest_channel(fs);
  p.idler_channel = g.nearest_channel(fi);
  p.comb_order = k;
  return p;
}

}  // namespace mrr::device
