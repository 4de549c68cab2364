#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mrr/tagstream.hpp"

namespace mrr::engine {

struct DelayRange {
  std::int64_t min_ps;
  std::int64_t max_ps;
};

/// Coincidence counts versus delay t_b - t_a. Bin j covers
/// [min + j*bin, min + (j+1)*bin).
struct Histogram {
  std::int64_t bin_width_ps = 0;
  DelayRange range{0, 0};
  std::vector<std::uint64_t> counts;
  std::uint64_t total_starts = 0;
  std::uint64_t total_stops = 0;
  double acquisition_time_s = 0.0;
  /// Timestamp quantum of the source stream; delays are multiples of it.
  std::uint32_t tick_ps = 1;

  std::size_t bins() const { return counts.size(); }
  std::int64_t bin_lo(std::size_t j) const {
    return range.min_ps + static_cast<std::int64_t>(j) * bin_width_ps;
  }
  double bin_center(std::size_t j) const {
    return static_cast<double>(bin_lo(j)) + 0.5 * static_cast<double>(bin_width_ps);
  }
  std::uint64_t total() const;
  /// Sum over round(width/bin) consecutive bins centred as closely as the
  /// binning allows on `center_ps`.
  std::uint64_t integrate(double center_ps, double width_ps) const;
  /// Mean counts per bin over bins whose centre satisfies lo <= |delay| < hi.
  double mean_in_abs_band(double lo_ps, double hi_ps) const;
};

/// Empty histogram. Throws Error(Config) unless bin > 0 and the range is a
/// positive exact multiple of the bin width.
Histogram make_histogram(std::int64_t bin_width_ps, DelayRange range);

enum class Backend { Serial, Parallel };

/// Accumulates all (a, b) pairs with delay in range. Both inputs sorted, in ps.
/// The serial kernel is the reference; the parallel kernel splits the start
/// channel into fixed chunks and merges partial histograms by addition.
void accumulate_serial(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                       Histogram& h);
void accumulate_parallel(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                         Histogram& h);

Histogram cross_correlate(const TagStream& stream, std::uint8_t ch_a, std::uint8_t ch_b,
                          std::int64_t bin_width_ps, DelayRange range,
                          Backend backend = Backend::Parallel);

/// Virtual 50:50 splitter on one channel followed by a cross-correlation of
/// the two outputs.
Histogram autocorrelate_split(const TagStream& stream, std::uint8_t ch,
                              std::uint64_t splitter_seed, std::int64_t bin_width_ps,
                              DelayRange range, Backend backend = Backend::Parallel);

struct SummaryOptions {
  /// Sideband bins must satisfy sideband_min <= |delay| < sideband_max.
  double sideband_min_ps = 0.0;
  double sideband_max_ps = 1e300;
  /// Peak is the maximum bin within this distance of zero delay.
  double peak_search_ps = 5000.0;
  /// Delays of further peaks that sidebands must avoid (e.g. time-bin
  /// satellites), in addition to the main one.
  std::vector<double> extra_peaks_ps;
};

struct CoincidenceSummary {
  std::uint64_t peak_counts = 0;
  double peak_center_ps = 0.0;
  double accidental_counts_per_bin = 0.0;
  std::size_t sideband_bins = 0;
  double window_ps = 0.0;
  double coincidence_rate = 0.0;  // peak_counts / acquisition time
  double car = 0.0;               // peak / expected accidentals in window
  double car_error = 0.0;
  double net_rate = 0.0;          // (peak - accidentals) / acquisition time
};

CoincidenceSummary coincidence_summary(const Histogram& hist, double window_ps,
                                       const SummaryOptions& opts = {});

struct TimeBinPeaks {
  std::uint64_t left = 0;
  std::uint64_t center = 0;
  std::uint64_t right = 0;
};

TimeBinPeaks timebin_peaks(const Histogram& hist, double dt_ns,
                           double window_fraction = 1.0 / 3.0);

/// Non-interfering background under the central time-bin window. Satellite
/// windows at +-2 dt hold one side peak's tail plus the accidental floor;
/// windows at +-3 dt hold only the floor; the centre collects both tails.
/// Needs the range to cover +-3.5 dt.
double timebin_central_background(const Histogram& hist, double dt_ns,
                                  double window_fraction = 1.0 / 3.0);

}  // namespace mrr::engine
