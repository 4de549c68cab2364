#include "mrr/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/random/uniform_01.hpp>

#include "mrr/error.hpp"
#include "mrr/thermal.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mrr::engine {

std::uint64_t Histogram::total() const {
  std::uint64_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

std::uint64_t Histogram::integrate(double center_ps, double width_ps) const {
  // Fixed bin count so every window of the same width sees the same exposure.
  const double bin = static_cast<double>(bin_width_ps);
  const auto nw = std::max<std::ptrdiff_t>(1, std::lround(width_ps / bin));
  const auto start = static_cast<std::ptrdiff_t>(
      std::lround((center_ps - static_cast<double>(range.min_ps)) / bin -
                  static_cast<double>(nw) / 2));
  std::uint64_t s = 0;
  for (auto j = std::max<std::ptrdiff_t>(0, start);
       j < std::min<std::ptrdiff_t>(start + nw, static_cast<std::ptrdiff_t>(counts.size())); ++j)
    s += counts[static_cast<std::size_t>(j)];
  return s;
}

double Histogram::mean_in_abs_band(double lo_ps, double hi_ps) const {
  std::uint64_t s = 0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    const double d = std::abs(bin_center(j));
    if (d >= lo_ps && d < hi_ps) {
      s += counts[j];
      ++n;
    }
  }
  if (n == 0) fail(ErrorKind::Statistics, "no histogram bins in the requested delay band");
  return static_cast<double>(s) / static_cast<double>(n);
}

Histogram make_histogram(std::int64_t bin_width_ps, DelayRange range) {
  if (bin_width_ps <= 0) fail(ErrorKind::Config, "bin width must be > 0");
  const std::int64_t span = range.max_ps - range.min_ps;
  if (span <= 0) fail(ErrorKind::Config, "delay range must have max > min");
  if (span % bin_width_ps != 0)
    fail(ErrorKind::Config, "delay range " + std::to_string(span) +
                                " ps is not divisible by bin width " +
                                std::to_string(bin_width_ps) + " ps");
  Histogram h;
  h.bin_width_ps = bin_width_ps;
  h.range = range;
  h.counts.assign(static_cast<std::size_t>(span / bin_width_ps), 0);
  return h;
}

namespace {

// Counts delays for starts a[first, last) into `counts`, starting the stop
// cursor at the first b not below a[first] + min.
void accumulate_block(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                      std::size_t first, std::size_t last, std::int64_t min_ps,
                      std::int64_t max_ps, std::int64_t bin, std::uint64_t* counts) {
  if (first >= last) return;
  std::size_t lo = static_cast<std::size_t>(
      std::lower_bound(b.begin(), b.end(), a[first] + min_ps) - b.begin());
  for (std::size_t i = first; i < last; ++i) {
    const std::int64_t ta = a[i];
    while (lo < b.size() && b[lo] - ta < min_ps) ++lo;
    for (std::size_t j = lo; j < b.size(); ++j) {
      const std::int64_t d = b[j] - ta;
      if (d >= max_ps) break;
      ++counts[(d - min_ps) / bin];
    }
  }
}

}  // namespace

void accumulate_serial(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                       Histogram& h) {
  accumulate_block(a, b, 0, a.size(), h.range.min_ps, h.range.max_ps, h.bin_width_ps,
                   h.counts.data());
  h.total_starts += a.size();
  h.total_stops += b.size();
}

void accumulate_parallel(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                         Histogram& h) {
  constexpr std::size_t kChunk = 1 << 16;
  const std::size_t nchunks = (a.size() + kChunk - 1) / kChunk;
  const std::size_t nb = h.counts.size();
  int nthreads = 1;
#ifdef _OPENMP
  nthreads = omp_get_max_threads();
#endif
  std::vector<std::vector<std::uint64_t>> partial(static_cast<std::size_t>(nthreads));

#pragma omp parallel
  {
    int tid = 0;
#ifdef _OPENMP
    tid = omp_get_thread_num();
#endif
    auto& local = partial[static_cast<std::size_t>(tid)];
    local.assign(nb, 0);
#pragma omp for schedule(dynamic)
    for (std::size_t c = 0; c < nchunks; ++c)
      accumulate_block(a, b, c * kChunk, std::min(a.size(), (c + 1) * kChunk), h.range.min_ps,
                       h.range.max_ps, h.bin_width_ps, local.data());
  }
  for (const auto& local : partial)
    for (std::size_t j = 0; j < local.size(); ++j) h.counts[j] += local[j];
  h.total_starts += a.size();
  h.total_stops += b.size();
}

namespace {

void check_channel(const TagStream& s, std::uint8_t ch) {
  if (ch >= s.channel_count)
    fail(ErrorKind::Config, "unknown channel id " + std::to_string(ch) + " (stream has " +
                                std::to_string(s.channel_count) + " channels)");
}

Histogram correlate_vectors(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                            const TagStream& s, std::int64_t bin, DelayRange range,
                            Backend backend) {
  Histogram h = make_histogram(bin, range);
  if (backend == Backend::Serial)
    accumulate_serial(a, b, h);
  else
    accumulate_parallel(a, b, h);
  h.acquisition_time_s = s.span_s();
  h.tick_ps = s.resolution_ps;
  return h;
}

}  // namespace

Histogram cross_correlate(const TagStream& stream, std::uint8_t ch_a, std::uint8_t ch_b,
                          std::int64_t bin_width_ps, DelayRange range, Backend backend) {
  check_channel(stream, ch_a);
  check_channel(stream, ch_b);
  if (!stream.is_sorted()) fail(ErrorKind::Statistics, "tag stream is not sorted");
  const auto a = stream.channel_ps(ch_a);
  const auto b = stream.channel_ps(ch_b);
  return correlate_vectors(a, b, stream, bin_width_ps, range, backend);
}

Histogram autocorrelate_split(const TagStream& stream, std::uint8_t ch,
                              std::uint64_t splitter_seed, std::int64_t bin_width_ps,
                              DelayRange range, Backend backend) {
  check_channel(stream, ch);
  if (!stream.is_sorted()) fail(ErrorKind::Statistics, "tag stream is not sorted");
  thermal::Rng rng(thermal::derive_seed(splitter_seed, 0x5b117, ch));
  boost::random::uniform_01<double> uni;
  std::vector<std::int64_t> a, b;
  const auto res = static_cast<std::int64_t>(stream.resolution_ps);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (stream.channels[i] != ch) continue;
    (uni(rng) < 0.5 ? a : b).push_back(stream.ticks[i] * res);
  }
  return correlate_vectors(a, b, stream, bin_width_ps, range, backend);
}

CoincidenceSummary coincidence_summary(const Histogram& hist, double window_ps,
                                       const SummaryOptions& opts) {
  const double bin = static_cast<double>(hist.bin_width_ps);
  const double nbw = window_ps / bin;
  if (!(window_ps > 0) || std::abs(nbw - std::round(nbw)) > 1e-9)
    fail(ErrorKind::Config, "coincidence window must be a positive multiple of the bin width");
  if (window_ps > static_cast<double>(hist.range.max_ps - hist.range.min_ps))
    fail(ErrorKind::Config, "coincidence window exceeds the histogram range");
  const auto nw = static_cast<std::size_t>(std::lround(nbw));

  std::size_t best = hist.bins();
  for (std::size_t j = 0; j < hist.bins(); ++j) {
    if (std::abs(hist.bin_center(j)) > opts.peak_search_ps) continue;
    if (best == hist.bins() || hist.counts[j] > hist.counts[best]) best = j;
  }
  if (best == hist.bins())
    fail(ErrorKind::Statistics, "no histogram bins within the peak search range");

  // Centroid over +-window around the maximum, in bin-index units.
  double num = 0, den = 0;
  const auto lo = static_cast<std::ptrdiff_t>(best) - static_cast<std::ptrdiff_t>(nw);
  const auto hi = static_cast<std::ptrdiff_t>(best) + static_cast<std::ptrdiff_t>(nw);
  for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, lo);
       j <= std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(hist.bins()) - 1, hi); ++j) {
    num += (static_cast<double>(j) + 0.5) * static_cast<double>(hist.counts[j]);
    den += static_cast<double>(hist.counts[j]);
  }
  const double centroid = den > 0 ? num / den : static_cast<double>(best) + 0.5;
  auto start = static_cast<std::ptrdiff_t>(std::lround(centroid - static_cast<double>(nw) / 2));
  start = std::clamp<std::ptrdiff_t>(start, 0,
                                     static_cast<std::ptrdiff_t>(hist.bins() - nw));

  CoincidenceSummary s;
  s.window_ps = window_ps;
  for (std::size_t j = 0; j < nw; ++j) s.peak_counts += hist.counts[static_cast<std::size_t>(start) + j];
  s.peak_center_ps = static_cast<double>(hist.range.min_ps) + centroid * bin;

  std::vector<double> peaks{s.peak_center_ps};
  for (double p : opts.extra_peaks_ps) peaks.push_back(p);
  std::uint64_t side = 0;
  for (std::size_t j = 0; j < hist.bins(); ++j) {
    const double c = hist.bin_center(j);
    if (std::abs(c) < opts.sideband_min_ps || std::abs(c) >= opts.sideband_max_ps) continue;
    bool near = false;
    for (double p : peaks) near = near || std::abs(c - p) < 3 * window_ps;
    if (near) continue;
    side += hist.counts[j];
    ++s.sideband_bins;
  }
  if (s.sideband_bins == 0)
    fail(ErrorKind::Statistics, "no sideband bins left to estimate accidentals");
  s.accidental_counts_per_bin = static_cast<double>(side) / static_cast<double>(s.sideband_bins);

  const double expected = s.accidental_counts_per_bin * static_cast<double>(nw);
  const auto peak = static_cast<double>(s.peak_counts);
  if (expected > 0) {
    s.car = peak / expected;
    const double rel2 = (peak > 0 ? 1.0 / peak : 0.0) + (side > 0 ? 1.0 / static_cast<double>(side) : 0.0);
    s.car_error = s.car * std::sqrt(rel2);
  } else {
    s.car = std::numeric_limits<double>::infinity();
  }
  if (hist.acquisition_time_s > 0) {
    s.coincidence_rate = peak / hist.acquisition_time_s;
    s.net_rate = (peak - expected) / hist.acquisition_time_s;
  }
  return s;
}

namespace {

void require_cover(const Histogram& h, double reach_ps) {
  if (static_cast<double>(h.range.min_ps) > -reach_ps ||
      static_cast<double>(h.range.max_ps) < reach_ps)
    fail(ErrorKind::Config, "histogram range too narrow for the time-bin peaks (needs +-" +
                                std::to_string(reach_ps) + " ps)");
}

}  // namespace

TimeBinPeaks timebin_peaks(const Histogram& hist, double dt_ns, double window_fraction) {
  const double dt = dt_ns * 1e3;
  require_cover(hist, 1.5 * dt);
  const double w = window_fraction * dt;
  return {hist.integrate(-dt, w), hist.integrate(0.0, w), hist.integrate(dt, w)};
}

double timebin_central_background(const Histogram& hist, double dt_ns, double window_fraction) {
  const double dt = dt_ns * 1e3;
  require_cover(hist, 3.5 * dt);
  const double w = window_fraction * dt;
  auto at = [&](double c) { return static_cast<double>(hist.integrate(c, w)); };
  const double floor = 0.5 * (at(-3 * dt) + at(3 * dt));
  return at(-2 * dt) + at(2 * dt) - floor;
}

}  // namespace mrr::engine
