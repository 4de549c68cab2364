#include "mrr/emitter.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>
#include <numbers>
#include <string>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "mrr/error.hpp"
#include "mrr/thermal.hpp"

namespace mrr::emitter {

using thermal::Rng;

namespace {

enum Stream : std::uint64_t { kPairs = 1, kNoiseSignal = 2, kNoiseIdler = 3 };

void require(bool ok, const std::string& field, const char* what) {
  if (!ok) fail(ErrorKind::Config, field + ": " + what);
}

double db_to_transmission(double loss_db) { return std::pow(10.0, -loss_db / 10.0); }

struct Segment {
  std::vector<std::int64_t> signal;
  std::vector<std::int64_t> idler;
};

struct Sampler {
  explicit Sampler(std::uint64_t seed) : rng(seed) {}
  Rng rng;
  boost::random::uniform_01<double> uni;
  boost::random::exponential_distribution<double> exp{1.0};
  boost::random::normal_distribution<double> normal{0.0, 1.0};

  double laplace(double scale) {
    const double x = exp(rng) * scale;
    return uni(rng) < 0.5 ? -x : x;
  }
  double gauss(double sigma) { return sigma > 0 ? sigma * normal(rng) : 0.0; }
};

std::int64_t to_ps(double t) { return static_cast<std::int64_t>(std::llround(t)); }

std::size_t segment_count(double duration_s, const Limits& limits) {
  return static_cast<std::size_t>(std::max(1.0, std::ceil(duration_s / limits.segment_s)));
}

void check_budget(double expected_records, const Limits& limits) {
  if (expected_records > static_cast<double>(limits.max_records))
    fail(ErrorKind::Config, "simulation would produce ~" +
                                std::to_string(static_cast<long long>(expected_records)) +
                                " records, above the budget of " +
                                std::to_string(limits.max_records));
}

// Concatenates segments for one arm, removes out-of-run tags, sorts and
// applies dead time.
std::vector<std::int64_t> finish_arm(std::vector<Segment>& segs, bool signal,
                                     std::int64_t end_ps, const DetectorConfig& det) {
  std::size_t n = 0;
  for (const auto& s : segs) n += (signal ? s.signal : s.idler).size();
  std::vector<std::int64_t> all;
  all.reserve(n);
  for (auto& s : segs) {
    auto& v = signal ? s.signal : s.idler;
    for (auto t : v)
      if (t >= 0 && t < end_ps) all.push_back(t);
    std::vector<std::int64_t>().swap(v);
  }
  std::sort(all.begin(), all.end());
  const auto dead = static_cast<std::int64_t>(std::llround(det.dead_time_ns * 1e3));
  if (dead > 0) return apply_dead_time(all, dead);
  return all;
}

void add_poisson(Sampler& smp, double rate_per_ps, double t0, double t1, double jitter,
                 std::vector<std::int64_t>& out) {
  if (rate_per_ps <= 0) return;
  for (double t = t0 + smp.exp(smp.rng) / rate_per_ps; t < t1;
       t += smp.exp(smp.rng) / rate_per_ps)
    out.push_back(to_ps(t + smp.gauss(jitter)));
}

}  // namespace

void SourceConfig::validate() const {
  require(pump_power_mw >= 0 && std::isfinite(pump_power_mw), "source.pump_power_mw",
          "must be >= 0");
  require(pair_rate_coefficient >= 0, "source.pair_rate_coefficient", "must be >= 0");
  require(linear_noise_signal >= 0, "source.linear_noise_signal", "must be >= 0");
  require(linear_noise_idler >= 0, "source.linear_noise_idler", "must be >= 0");
  require(schmidt_modes >= 1, "source.schmidt_modes", "must be >= 1");
  require(coherence_time_ps > 0, "source.coherence_time_ps", "must be > 0");
  require(duration_s > 0 && std::isfinite(duration_s), "source.duration_s", "must be > 0");
  require(resolution_ps > 0, "source.resolution_ps", "must be > 0");
}

void DetectorConfig::validate(const char* which) const {
  const std::string w(which);
  require(efficiency > 0 && efficiency <= 1, w + ".efficiency", "must be in (0, 1]");
  require(dark_rate >= 0, w + ".dark_rate", "must be >= 0");
  require(dead_time_ns >= 0, w + ".dead_time_ns", "must be >= 0");
  require(jitter_sigma_ps >= 0, w + ".jitter_sigma_ps", "must be >= 0");
}

void TimeBinConfig::validate(double coherence_time_ps, bool warn) const {
  require(clock_rate_mhz > 0, "timebin.clock_rate_mhz", "must be > 0");
  require(pulse_width_ps >= 0, "timebin.pulse_width_ps", "must be >= 0");
  require(excess_loss_db >= 0, "timebin.excess_loss_db", "must be >= 0");
  require(splitter_loss_db >= 0, "timebin.splitter_loss_db", "must be >= 0");
  require(intrinsic_visibility >= 0 && intrinsic_visibility <= 1,
          "timebin.intrinsic_visibility", "must be in [0, 1]");
  const double dt_ps = bin_separation_ns() * 1e3;
  if (!(coherence_time_ps < dt_ps / 3))
    fail(ErrorKind::Config, "timebin: coherence time " + std::to_string(coherence_time_ps) +
                                " ps is not below a third of the bin separation " +
                                std::to_string(dt_ps) + " ps");
  static std::once_flag warned;
  if (warn && coherence_time_ps > dt_ps / 10)
    std::call_once(warned, [] {
      std::cerr << "warning: coherence time is more than a tenth of the time-bin separation\n";
    });
}

double saturated_rate(double true_rate, double dead_time_ns) {
  return true_rate / (1.0 + true_rate * dead_time_ns * 1e-9);
}

double desaturated_rate(double measured_rate, double dead_time_ns) {
  const double x = measured_rate * dead_time_ns * 1e-9;
  if (x >= 1.0) fail(ErrorKind::Numeric, "measured rate at or above the dead-time ceiling");
  return measured_rate / (1.0 - x);
}

std::vector<std::int64_t> apply_dead_time(std::span<const std::int64_t> sorted_ps,
                                          std::int64_t dead_ps) {
  std::vector<std::int64_t> out;
  out.reserve(sorted_ps.size());
  for (auto t : sorted_ps)
    if (out.empty() || t - out.back() >= dead_ps) out.push_back(t);
  return out;
}

double central_acceptance(double two_photon_phase, double visibility) {
  return (1.0 + visibility * std::cos(two_photon_phase)) / (1.0 + visibility);
}

ArmRates expected_singles(const SourceConfig& s, const DetectorConfig& ds,
                          const DetectorConfig& di, const device::ChannelPair& pair) {
  const double mu = s.pair_rate_coefficient * s.pump_power_mw * s.pump_power_mw;
  return {mu * pair.transmission_signal * ds.efficiency +
              s.linear_noise_signal * s.pump_power_mw + ds.dark_rate,
          mu * pair.transmission_idler * di.efficiency + s.linear_noise_idler * s.pump_power_mw +
              di.dark_rate};
}

TagStream simulate_cw(const SourceConfig& source, const DetectorConfig& det_signal,
                      const DetectorConfig& det_idler, const device::ChannelPair& pair,
                      const Limits& limits) {
  source.validate();
  det_signal.validate("detector_signal");
  det_idler.validate("detector_idler");
  pair.validate();

  const auto rates = expected_singles(source, det_signal, det_idler, pair);
  check_budget((rates.signal + rates.idler) * source.duration_s, limits);

  const double p = source.pump_power_mw;
  const double eta_s = pair.transmission_signal * det_signal.efficiency;
  const double eta_i = pair.transmission_idler * det_idler.efficiency;
  const double p_both = eta_s * eta_i;
  const double p_signal_only = eta_s * (1 - eta_i);
  const double p_visible = 1 - (1 - eta_s) * (1 - eta_i);
  const double visible_rate = source.pair_rate_coefficient * p * p * p_visible * 1e-12;
  const double noise_s = (source.linear_noise_signal * p + det_signal.dark_rate) * 1e-12;
  const double noise_i = (source.linear_noise_idler * p + det_idler.dark_rate) * 1e-12;
  const double tau = source.coherence_time_ps;
  const double total_ps = source.duration_s * 1e12;
  const double seg_ps = limits.segment_s * 1e12;

  const std::size_t nseg = segment_count(source.duration_s, limits);
  std::vector<Segment> segs(nseg);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < nseg; ++k) {
    const double t0 = static_cast<double>(k) * seg_ps;
    const double t1 = std::min(total_ps, t0 + seg_ps);
    Segment& out = segs[k];

    Sampler smp(thermal::derive_seed(source.rng_seed, kPairs, k));
    thermal::PairClock clock(visible_rate, source.schmidt_modes, tau, t0);
    for (double t = clock.next(smp.rng); t < t1; t = clock.next(smp.rng)) {
      const double u = smp.uni(smp.rng) * p_visible;
      const bool det_s = u < p_both + p_signal_only;
      const bool det_i = u < p_both || u >= p_both + p_signal_only;
      const double delay = smp.laplace(tau);
      if (det_s) out.signal.push_back(to_ps(t + smp.gauss(det_signal.jitter_sigma_ps)));
      if (det_i) out.idler.push_back(to_ps(t + delay + smp.gauss(det_idler.jitter_sigma_ps)));
    }

    Sampler ns(thermal::derive_seed(source.rng_seed, kNoiseSignal, k));
    add_poisson(ns, noise_s, t0, t1, det_signal.jitter_sigma_ps, out.signal);
    Sampler ni(thermal::derive_seed(source.rng_seed, kNoiseIdler, k));
    add_poisson(ni, noise_i, t0, t1, det_idler.jitter_sigma_ps, out.idler);
  }

  const auto end_ps = static_cast<std::int64_t>(std::llround(total_ps));
  std::vector<std::vector<std::int64_t>> arms(2);
  arms[kSignal] = finish_arm(segs, true, end_ps, det_signal);
  arms[kIdler] = finish_arm(segs, false, end_ps, det_idler);
  TagStream ts = merge_channels(arms, source.resolution_ps);
  ts.origin.mode = "cw";
  ts.origin.seed = source.rng_seed;
  return ts;
}

TagStream simulate_timebin(const SourceConfig& source, const TimeBinConfig& tb,
                           const DetectorConfig& det_signal, const DetectorConfig& det_idler,
                           const device::ChannelPair& pair, const Limits& limits) {
  source.validate();
  tb.validate(source.coherence_time_ps);
  det_signal.validate("detector_signal");
  det_idler.validate("detector_idler");
  pair.validate();

  const double interferometer = db_to_transmission(tb.excess_loss_db + tb.splitter_loss_db);
  const double p = source.pump_power_mw;
  const double eta_s = pair.transmission_signal * det_signal.efficiency * interferometer;
  const double eta_i = pair.transmission_idler * det_idler.efficiency * interferometer;
  const double p_both = eta_s * eta_i;
  const double p_signal_only = eta_s * (1 - eta_i);
  const double p_visible = 1 - (1 - eta_s) * (1 - eta_i);
  const double mu = source.pair_rate_coefficient * p * p;
  const double visible_rate = mu * p_visible * 1e-12;
  const double pump_noise_s = source.linear_noise_signal * p * 1e-12;
  const double pump_noise_i = source.linear_noise_idler * p * 1e-12;
  const double dark_s = det_signal.dark_rate * 1e-12;
  const double dark_i = det_idler.dark_rate * 1e-12;
  check_budget((mu * (eta_s + eta_i) + (source.linear_noise_signal + source.linear_noise_idler) *
                                           p + det_signal.dark_rate + det_idler.dark_rate) *
                   source.duration_s,
               limits);

  const double tau = source.coherence_time_ps;
  const double dt = tb.bin_separation_ns() * 1e3;
  const double pulse_sigma = tb.pulse_width_ps / (2 * std::sqrt(2 * std::numbers::ln2));
  const double accept_center =
      central_acceptance(2 * tb.phase_rad + tb.pump_phase_rad, tb.intrinsic_visibility);
  const double total_ps = source.duration_s * 1e12;
  const double seg_ps = limits.segment_s * 1e12;
  const std::size_t nseg = segment_count(source.duration_s, limits);
  std::vector<Segment> segs(nseg);

  // Emission instant inside the pump pulse that carries time t.
  auto pulse_time = [&](Sampler& smp, double t) {
    return (std::floor(t / dt) + 0.5) * dt + smp.gauss(pulse_sigma);
  };
  auto arm = [&](Sampler& smp) { return smp.uni(smp.rng) < 0.5 ? 0.0 : dt; };

#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < nseg; ++k) {
    const double t0 = static_cast<double>(k) * seg_ps;
    const double t1 = std::min(total_ps, t0 + seg_ps);
    Segment& out = segs[k];

    Sampler smp(thermal::derive_seed(source.rng_seed, kPairs, k));
    thermal::PairClock clock(visible_rate, source.schmidt_modes, tau, t0);
    for (double t = clock.next(smp.rng); t < t1; t = clock.next(smp.rng)) {
      const double u = smp.uni(smp.rng) * p_visible;
      const bool det_s = u < p_both + p_signal_only;
      const bool det_i = u < p_both || u >= p_both + p_signal_only;
      const double created = pulse_time(smp, t);
      const double delay = smp.laplace(tau);
      const double path_s = arm(smp);
      const double path_i = arm(smp);
      if (det_s && det_i && path_s == path_i && smp.uni(smp.rng) >= accept_center) continue;
      if (det_s)
        out.signal.push_back(to_ps(created + path_s + smp.gauss(det_signal.jitter_sigma_ps)));
      if (det_i)
        out.idler.push_back(
            to_ps(created + delay + path_i + smp.gauss(det_idler.jitter_sigma_ps)));
    }

    // Pump-induced noise is carried by the pulses and also crosses the
    // interferometer; dark counts are uniform in time.
    auto noise = [&](std::uint64_t stream, double pump_rate, double dark_rate, double jitter,
                     std::vector<std::int64_t>& dst) {
      Sampler ns(thermal::derive_seed(source.rng_seed, stream, k));
      if (pump_rate > 0)
        for (double t = t0 + ns.exp(ns.rng) / pump_rate; t < t1;
             t += ns.exp(ns.rng) / pump_rate)
          dst.push_back(to_ps(pulse_time(ns, t) + arm(ns) + ns.gauss(jitter)));
      add_poisson(ns, dark_rate, t0, t1, jitter, dst);
    };
    noise(kNoiseSignal, pump_noise_s, dark_s, det_signal.jitter_sigma_ps, out.signal);
    noise(kNoiseIdler, pump_noise_i, dark_i, det_idler.jitter_sigma_ps, out.idler);
  }

  const auto end_ps = static_cast<std::int64_t>(std::llround(total_ps));
  std::vector<std::vector<std::int64_t>> arms(2);
  arms[kSignal] = finish_arm(segs, true, end_ps, det_signal);
  arms[kIdler] = finish_arm(segs, false, end_ps, det_idler);
  TagStream ts = merge_channels(arms, source.resolution_ps);
  ts.origin.mode = "timebin";
  ts.origin.seed = source.rng_seed;
  return ts;
}

}  // namespace mrr::emitter
