// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mrr/config.hpp"
#include "mrr/device.hpp"
#include "mrr/emitter.hpp"
#include "mrr/engine.hpp"
#include "mrr/estimators.hpp"
#include "mrr/pipeline.hpp"
#include "mrr/tagio.hpp"
#include "mrr/thermal.hpp"

using namespace mrr;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool within(double x, double target, double rel) { return std::abs(x - target) <= rel * std::abs(target); }

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

io::ExperimentConfig baseline() {
  return io::load_config(MRR_SOURCE_DIR "/configs/paper-baseline.yaml");
}

// The calibrated sweep feeds criteria 2, 5 and 6.
const pipeline::PowerSweepResult& baseline_sweep() {
  static std::optional<pipeline::PowerSweepResult> r;
  if (!r) {
    const auto cfg = baseline();
    r = pipeline::run_power_sweep(cfg, cfg.power_sweep.powers_mw);
  }
  return *r;
}

const pipeline::CwPoint& point_at(const pipeline::PowerSweepResult& r, double p) {
  for (const auto& pt : r.points)
    if (std::abs(pt.power_mw - p) < 1e-9) return pt;
  throw std::runtime_error("power not in sweep");
}

Outcome noise_decomposition() {
  auto cfg = baseline();
  const double a = 26e3, b = 59e3;
  cfg.pair.transmission_signal = cfg.pair.transmission_idler = 1.0;
  cfg.source.pair_rate_coefficient = b / cfg.detector_signal.efficiency;
  cfg.source.linear_noise_signal = cfg.source.linear_noise_idler = a;
  cfg.power_sweep.duration_s = 10;
  std::vector<double> powers;
  for (int i = 1; i <= 10; ++i) powers.push_back(0.5 * i);
  const auto t0 = Clock::now();
  const auto r = pipeline::run_power_sweep(cfg, powers);
  const double dt = seconds_since(t0);
  const double as = r.fit_signal.value("a"), bs = r.fit_signal.value("b");
  const double ai = r.fit_idler.value("a"), bi = r.fit_idler.value("b");
  const bool ok = within(as, a, 0.05) && within(bs, b, 0.05) && within(ai, a, 0.05) &&
                  within(bi, b, 0.05) && dt <= 60;
  return {ok, fmt("signal a=%.4g b=%.4g, idler a=%.4g b=%.4g (truth %.3g, %.3g), %.1f s", as, bs,
                  ai, bi, a, b, dt)};
}

Outcome car_curve() {
  const auto& r = baseline_sweep();
  const auto& lo = point_at(r, 0.16);
  const auto& hi = point_at(r, 13.5);
  const auto plo = est::predict_car(r.config_model, 0.16);
  const auto phi = est::predict_car(r.config_model, 13.5);
  bool ok = within(lo.car, 495, 0.25) && within(plo.car, 495, 0.25) &&
            within(lo.coincidence_rate, 29.5, 0.25) && within(plo.raw_coincidence_rate, 29.5, 0.25) &&
            within(hi.car, 12.3, 0.30) && within(phi.car, 12.3, 0.30) &&
            within(hi.coincidence_rate, 80e3, 0.15) && within(phi.raw_coincidence_rate, 80e3, 0.15);
  std::string agree;
  for (double p : {0.16, 0.3, 0.5, 1.0, 2.0}) {
    const auto& pt = point_at(r, p);
    const double pred = est::predict_car(r.config_model, p).car;
    const double z = (pt.car - pred) / pt.car_error;
    ok = ok && std::abs(z) <= 3;
    agree += fmt(" %.2g:%+.1f", p, z);
  }
  return {ok, fmt("0.16 mW CAR %.0f+-%.0f (model %.0f) Rc %.1f/s (model %.1f); 13.5 mW CAR %.2f "
                  "(model %.2f) Rc %.3g/s (model %.3g); pulls", lo.car, lo.car_error, plo.car,
                  lo.coincidence_rate, plo.raw_coincidence_rate, hi.car, phi.car,
                  hi.coincidence_rate, phi.raw_coincidence_rate) + agree};
}

Outcome purity() {
  const auto cfg = baseline();
  const auto t0 = Clock::now();
  const auto one = pipeline::run_purity(cfg, 1.0).fit;
  const auto mixed = pipeline::run_purity(cfg, cfg.source.schmidt_modes).fit;
  const double dt = seconds_since(t0);
  const double g1 = one.value("g2_zero"), g = mixed.value("g2_zero");
  const double n = mixed.value("schmidt_number");
  const bool ok = std::abs(g1 - 2.0) <= 0.05 && std::abs(g - 1.86) <= 0.07 &&
                  std::abs(n - 1.16) <= 0.11 && dt <= 120;
  return {ok, fmt("n=1: g2 %.3f+-%.3f; n=%.2f: g2 %.3f+-%.3f, Schmidt %.3f+-%.3f; %.1f s", g1,
                  one.error("g2_zero"), cfg.source.schmidt_modes, g, mixed.error("g2_zero"), n,
                  mixed.error("schmidt_number"), dt)};
}

Outcome coherence() {
  const auto cfg = baseline();
  const auto r = pipeline::run_cross_correlation(cfg, 10.0);
  const double tau = r.fit.value("width_ps");
  const double bw = 1e6 / (2 * M_PI * tau);
  const bool ok = within(tau, 760, 0.05) && within(bw, 210, 0.05) &&
                  within(device::linewidth_mhz(cfg.device), 210, 0.05);
  return {ok, fmt("fitted decay %.1f+-%.1f ps, bandwidth %.1f MHz (device %.1f MHz, %.1f ps)", tau,
                  r.fit.error("width_ps"), bw, device::linewidth_mhz(cfg.device),
                  device::coherence_time_ps(cfg.device))};
}

// Symmetric-loss run with pure pair emission; eta from net coincidences.
std::pair<double, double> recovered_eta(double eta, std::uint64_t seed) {
  emitter::SourceConfig s;
  s.pump_power_mw = 1;
  s.pair_rate_coefficient = 2e5 / eta;
  s.schmidt_modes = 1e4;
  s.coherence_time_ps = 760;
  s.duration_s = 1;
  s.rng_seed = seed;
  emitter::DetectorConfig d;
  d.efficiency = 1;
  d.dark_rate = 0;
  d.dead_time_ns = 0;
  d.jitter_sigma_ps = 0;
  device::ChannelPair p;
  p.transmission_signal = p.transmission_idler = eta;
  const auto ts = emitter::simulate_cw(s, d, d, p);
  auto h = engine::cross_correlate(ts, 0, 1, 81, {-100035, 100035});
  h.acquisition_time_s = s.duration_s;
  engine::SummaryOptions o;
  o.sideband_min_ps = 40000;
  const auto sum = engine::coincidence_summary(h, 81 * 247, o);
  const double acc = sum.accidental_counts_per_bin * 247;
  const double net = static_cast<double>(sum.peak_counts) - acc;
  const double idler = static_cast<double>(ts.count(1));
  const double est = net / idler;
  // binomial thinning plus the accidental subtraction
  const double side = sum.accidental_counts_per_bin * static_cast<double>(sum.sideband_bins);
  const double acc_var = acc + (side > 0 ? acc * acc / side : 0.0);
  const double sigma = std::sqrt(eta * (1 - eta) / idler + acc_var / (idler * idler));
  return {est, sigma};
}

Outcome loss_extraction() {
  const auto& r = baseline_sweep();
  bool ok = std::abs(r.transmission.signal_db + 13.05) <= 0.5 &&
            std::abs(r.transmission.idler_db + 13.84) <= 0.5;
  std::string prop;
  std::uint64_t seed = 500;
  for (double eta : {0.05, 0.3, 1.0}) {
    const auto [e, s] = recovered_eta(eta, seed++);
    const bool good = std::abs(e - eta) <= 3 * s + 1e-12;
    ok = ok && good;
    prop += fmt(" %.2f->%.4f+-%.4f", eta, e, s);
  }
  return {ok, fmt("signal %.2f dB, idler %.2f dB; configured eta recovered:", r.transmission.signal_db,
                  r.transmission.idler_db) + prop};
}

Outcome pgr() {
  const auto cfg = baseline();
  const auto& r = baseline_sweep();
  const double b = est::brightness(r.pgr, device::linewidth_mhz(cfg.device));
  const bool ok = within(r.pgr, 5.2e5, 0.10) && within(b, 2.5e3, 0.10);
  return {ok, fmt("PGR %.3g+-%.2g /s/mW^2, brightness %.4g /s/MHz/mW^2", r.pgr, r.pgr_error, b)};
}

Outcome timebin() {
  auto cfg = baseline();
  const auto& tb = cfg.timebin;
  const double dt = tb.interferometer.bin_separation_ns();
  const auto r = pipeline::run_timebin_sweep(cfg, tb.phases_rad);
  const double raw = r.visibility.value("raw_visibility");
  const double net = r.visibility.value("net_visibility");
  const double slope_z = r.side_slope.slope / r.side_slope.slope_error;

  // pre-interference weights with the interference switched off
  auto src = tb.source;
  src.rng_seed = thermal::derive_seed(src.rng_seed, 900, 0);
  auto ifm = tb.interferometer;
  ifm.intrinsic_visibility = 0;
  const auto ts = emitter::simulate_timebin(src, ifm, tb.detector_signal, tb.detector_idler, cfg.pair);
  const auto h = pipeline::timebin_histogram(ts, tb);
  const auto pk = engine::timebin_peaks(h, dt);
  const double w = dt * 1e3 / 3;
  const double floor = 0.5 * static_cast<double>(h.integrate(-3e3 * dt, w) + h.integrate(3e3 * dt, w));
  const double L = pk.left - floor, C = pk.center - floor, R = pk.right - floor;
  const double ratio = C / (L + R);
  const double ratio_err = ratio * std::sqrt((pk.center + floor) / (C * C) +
                                             (pk.left + pk.right + 2 * floor) / ((L + R) * (L + R)));
  const double lr_z = (L - R) / std::sqrt(pk.left + pk.right + 0.0);

  const bool ok = std::abs(dt - 1.33) < 0.01 && tb.phases_rad.size() >= 12 && raw >= 0.98 &&
                  net >= 0.999 && std::abs(slope_z) <= 3 && std::abs(ratio - 1) <= 3 * ratio_err &&
                  std::abs(lr_z) <= 3;
  return {ok, fmt("dt %.3f ns, %zu phases, raw V %.4f+-%.4f, net V %.5f+-%.5f, side slope %.3g+-%.2g; "
                  "V=0 peaks %.0f:%.0f:%.0f (floor %.0f), C/(L+R) %.3f+-%.3f",
                  dt, tb.phases_rad.size(), raw, r.visibility.error("raw_visibility"), net,
                  r.visibility.error("net_visibility"), r.side_slope.slope,
                  r.side_slope.slope_error, L, C, R, floor, ratio, ratio_err)};
}

Outcome oracle() {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> size(1, 10'000);
  std::uniform_int_distribution<int> pick(0, 3);
  int matched = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = size(rng);
    std::uniform_int_distribution<std::int64_t> t(0, static_cast<std::int64_t>(n) * (50 + 400 * pick(rng)));
    std::bernoulli_distribution coin(0.5);
    std::vector<std::pair<std::int64_t, std::uint8_t>> rec(n);
    for (auto& x : rec) x = {t(rng), static_cast<std::uint8_t>(coin(rng))};
    std::sort(rec.begin(), rec.end());
    TagStream s;
    s.resolution_ps = 1;
    for (auto& [tick, ch] : rec) {
      s.ticks.push_back(tick);
      s.channels.push_back(ch);
    }
    const std::int64_t bin = std::array<std::int64_t, 4>{1, 10, 81, 500}[pick(rng)];
    const engine::DelayRange range{-bin * 60, bin * 61};
    std::vector<std::uint64_t> brute(121, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (s.channels[i] != 0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (s.channels[j] != 1) continue;
        const auto d = s.ticks[j] - s.ticks[i];
        if (d >= range.min_ps && d < range.max_ps) ++brute[static_cast<std::size_t>((d - range.min_ps) / bin)];
      }
    }
    matched += engine::cross_correlate(s, 0, 1, bin, range, engine::Backend::Parallel).counts == brute &&
               engine::cross_correlate(s, 0, 1, bin, range, engine::Backend::Serial).counts == brute;
  }
  return {matched == 100, fmt("%d/100 random streams identical to the all-pairs count", matched)};
}

Outcome performance() {
  std::mt19937_64 rng(9);
  std::exponential_distribution<double> gap(1e6 * 81e-12);  // 1e6 tags/s in 81 ps ticks
  std::bernoulli_distribution coin(0.5);
  TagStream s;
  s.resolution_ps = 81;
  const std::size_t n = 10'000'000;
  s.ticks.reserve(n);
  s.channels.reserve(n);
  double t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    t += gap(rng);
    s.ticks.push_back(static_cast<std::int64_t>(t));
    s.channels.push_back(static_cast<std::uint8_t>(coin(rng)));
  }
  const auto t0 = Clock::now();
  const auto h = engine::cross_correlate(s, 0, 1, 81, {-1000026, 1000026});
  const double dt = seconds_since(t0);

  const auto cfg = baseline();
  auto src = cfg.source;
  src.duration_s = 1;
  const auto dir = std::filesystem::temp_directory_path() / "mrr_acceptance";
  std::filesystem::create_directories(dir);
  std::string bytes[2];
  for (int k = 0; k < 2; ++k) {
    const auto path = (dir / ("det" + std::to_string(k) + ".mrrtags")).string();
    io::write_tags(path, emitter::simulate_cw(src, cfg.detector_signal, cfg.detector_idler, cfg.pair));
    std::ifstream in(path, std::ios::binary);
    bytes[k].assign(std::istreambuf_iterator<char>(in), {});
  }
  const bool same = !bytes[0].empty() && bytes[0] == bytes[1];
  return {dt <= 5 && same, fmt("%zu tags correlated in %.2f s (%.3g pairs binned); two seeded runs "
                               "%s (%zu bytes)", n, dt, static_cast<double>(h.total()),
                               same ? "byte-identical" : "DIFFER", bytes[0].size())};
}

Outcome channel_map() {
  const auto cfg = baseline();
  const auto m = pipeline::channel_map(cfg, -2, 2);
  const int want_ch[] = {21, 23, 25, 27, 29};
  const double want_det[] = {15.26, 7.63, 0, -7.63, -15.26};
  bool ok = m.size() == 5;
  std::string row;
  for (std::size_t i = 0; ok && i < 5; ++i) {
    ok = m[i].channel == want_ch[i] && std::abs(m[i].detuning_ghz - want_det[i]) < 0.005;
    row += fmt(" k=%+d->ch%d %+.2f GHz", m[i].k, m[i].channel, m[i].detuning_ghz);
  }
  const double dT = device::required_temperature_shift(cfg.device, -2.75);
  ok = ok && dT == 1.0;
  return {ok, row.substr(1) + fmt("; shift for -2.75 GHz = %.17g K", dT)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"noise decomposition", noise_decomposition},
      {"CAR curve", car_curve},
      {"purity", purity},
      {"bandwidth/coherence", coherence},
      {"loss extraction", loss_extraction},
      {"PGR and brightness", pgr},
      {"time-bin", timebin},
      {"oracle equivalence", oracle},
      {"performance and determinism", performance},
      {"channel map", channel_map},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
