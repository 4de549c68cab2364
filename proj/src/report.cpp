#include "mrr/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>

#include "mrr/error.hpp"
#include "mrr/pipeline.hpp"
#include "mrr/tagio.hpp"

namespace mrr::io {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string provenance_line(const Provenance& p) {
  return "# config_hash=" + (p.config_hash.empty() ? std::string("none") : p.config_hash) +
         ",seed=" + std::to_string(p.seed) + "\n";
}

// Finite values only; JSON has no inf/nan.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

std::vector<double> linear_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5;
  const double mag = std::pow(10, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  std::vector<double> t;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) t.push_back(v);
  return t;
}

}  // namespace

Json to_json(const Provenance& p) {
  return {{"config_hash", p.config_hash.empty() ? Json(nullptr) : Json(p.config_hash)},
          {"seed", p.seed}};
}

Json to_json(const est::FitResult& f) {
  Json params = Json::object();
  for (const auto& p : f.parameters)
    params[p.name] = {{"value", number(p.value)}, {"error", number(p.error)}};
  return {{"parameters", params},
          {"reduced_chi_square", number(f.reduced_chi_square)},
          {"flags", f.flags},
          {"converged", f.converged}};
}

Json to_json(const engine::CoincidenceSummary& s) {
  return {{"peak_counts", s.peak_counts},
          {"peak_center_ps", number(s.peak_center_ps)},
          {"accidental_counts_per_bin", number(s.accidental_counts_per_bin)},
          {"sideband_bins", s.sideband_bins},
          {"window_ps", number(s.window_ps)},
          {"coincidence_rate", number(s.coincidence_rate)},
          {"car", number(s.car)},
          {"car_error", number(s.car_error)},
          {"net_rate", number(s.net_rate)}};
}

std::string histogram_csv(const engine::Histogram& h, const Provenance& p) {
  std::string out = provenance_line(p) + "delay_ps,counts\n";
  for (std::size_t j = 0; j < h.bins(); ++j)
    out += num(h.bin_center(j)) + "," + std::to_string(h.counts[j]) + "\n";
  return out;
}

std::string table_csv(const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows, const Provenance& p) {
  std::string out = provenance_line(p);
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + num(r[i]);
    out += "\n";
  }
  return out;
}

std::string svg_plot(const PlotSpec& spec, const std::vector<Series>& series) {
  const double W = 640, H = 420, L = 80, R = 20, T = 40, B = 60;
  auto tx = [&](double v) { return spec.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return spec.log_y ? std::log10(v) : v; };
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if ((spec.log_x && s.x[i] <= 0) || (spec.log_y && s.y[i] <= 0)) continue;
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };

  static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" +
                  num(H) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(W / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
       escape(spec.title) + "</text>\n";
  s += "<rect x=\"" + num(L) + "\" y=\"" + num(T) + "\" width=\"" + num(W - L - R) +
       "\" height=\"" + num(H - T - B) + "\" fill=\"none\" stroke=\"black\"/>\n";

  auto axis_ticks = [&](double lo, double hi, bool log) {
    std::vector<double> t;
    if (log) {
      for (double d = std::ceil(lo); d <= hi; d += 1) t.push_back(std::pow(10, d));
      if (t.size() < 2) {
        t.clear();
        for (double v : linear_ticks(lo, hi)) t.push_back(std::pow(10, v));
      }
    } else {
      t = linear_ticks(lo, hi);
    }
    return t;
  };
  for (double v : axis_ticks(x0, x1, spec.log_x)) {
    const double x = px(v);
    s += "<line x1=\"" + num(x) + "\" y1=\"" + num(H - B) + "\" x2=\"" + num(x) + "\" y2=\"" +
         num(H - B + 5) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(x) + "\" y=\"" + num(H - B + 18) + "\" text-anchor=\"middle\">" +
         num(v) + "</text>\n";
  }
  for (double v : axis_ticks(y0, y1, spec.log_y)) {
    const double y = py(v);
    s += "<line x1=\"" + num(L - 5) + "\" y1=\"" + num(y) + "\" x2=\"" + num(L) + "\" y2=\"" +
         num(y) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(L - 8) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" + num(v) +
         "</text>\n";
  }
  s += "<text x=\"" + num((L + W - R) / 2) + "\" y=\"" + num(H - 15) +
       "\" text-anchor=\"middle\">" + escape(spec.x_label) + "</text>\n";
  s += "<text x=\"18\" y=\"" + num((T + H - B) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
       num((T + H - B) / 2) + ")\">" + escape(spec.y_label) + "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& se = series[k];
    const char* c = colours[k % 5];
    std::string pts;
    for (std::size_t i = 0; i < se.x.size(); ++i) {
      if ((spec.log_x && se.x[i] <= 0) || (spec.log_y && se.y[i] <= 0)) continue;
      if (!std::isfinite(se.x[i]) || !std::isfinite(se.y[i])) continue;
      if (se.markers)
        s += "<circle cx=\"" + num(px(se.x[i])) + "\" cy=\"" + num(py(se.y[i])) +
             "\" r=\"3\" fill=\"" + c + "\"/>\n";
      else
        pts += num(px(se.x[i])) + "," + num(py(se.y[i])) + " ";
    }
    if (!se.markers)
      s += "<polyline fill=\"none\" stroke=\"" + std::string(c) + "\" stroke-width=\"1.5\" points=\"" +
           pts + "\"/>\n";
    s += "<text x=\"" + num(L + 10) + "\" y=\"" + num(T + 16 + 15 * k) + "\" fill=\"" + c + "\">" +
         escape(se.label) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

void write_json(const std::string& path, const Json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

Json run_report(const ExperimentConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const fs::path dir(out_dir);
  auto at = [&](const std::string& f) { return (dir / f).string(); };
  const Provenance prov{config_hash(cfg), cfg.source.rng_seed};

  Json rep;
  rep["provenance"] = to_json(prov);

  // Channel plan.
  {
    const auto map = pipeline::channel_map(cfg, -2, 2);
    std::vector<std::vector<double>> rows;
    Json arr = Json::array();
    for (const auto& m : map) {
      rows.push_back({static_cast<double>(m.k), static_cast<double>(m.channel), m.detuning_ghz,
                      device::thz_to_nm(device::comb_line_frequency_thz(cfg.device, m.k,
                                                                        cfg.temperature_k))});
      arr.push_back({{"k", m.k}, {"channel", m.channel}, {"detuning_ghz", m.detuning_ghz}});
    }
    write_file_atomic(at("channel_map.csv"),
                      table_csv({"k", "channel", "detuning_ghz", "line_nm"}, rows, prov));
    rep["channel_map"] = arr;
  }

  // Power sweep (singles decomposition and CAR).
  {
    std::cerr << "report: power sweep\n";
    const auto sw = pipeline::run_power_sweep(cfg, cfg.power_sweep.powers_mw);
    std::vector<std::vector<double>> rows;
    Series s_sig{"signal singles", {}, {}, true}, s_idl{"idler singles", {}, {}, true};
    Series car_mc{"CAR (simulated)", {}, {}, true}, car_cfg{"CAR (model)", {}, {}, false};
    Series rc_mc{"R_c (simulated)", {}, {}, true};
    double car_max = 0;
    for (const auto& p : sw.points) {
      const auto pc = est::predict_car(sw.config_model, p.power_mw);
      const auto pf = est::predict_car(sw.fitted_model, p.power_mw);
      rows.push_back({p.power_mw, p.duration_s, p.singles_signal, p.singles_idler,
                      p.coincidence_rate, p.accidental_rate, p.car, p.car_error, pc.car, pf.car,
                      pc.raw_coincidence_rate});
      s_sig.x.push_back(p.power_mw);
      s_sig.y.push_back(p.singles_signal);
      s_idl.x.push_back(p.power_mw);
      s_idl.y.push_back(p.singles_idler);
      car_mc.x.push_back(p.power_mw);
      car_mc.y.push_back(p.car);
      rc_mc.x.push_back(p.power_mw);
      rc_mc.y.push_back(p.coincidence_rate);
      if (std::isfinite(p.car)) car_max = std::max(car_max, p.car);
    }
    Series fit_sig{"fit a P + b P^2 (signal)", {}, {}, false};
    const double p_lo = cfg.power_sweep.powers_mw.front(), p_hi = cfg.power_sweep.powers_mw.back();
    for (int i = 0; i <= 100; ++i) {
      const double p = p_lo * std::pow(p_hi / p_lo, i / 100.0);
      fit_sig.x.push_back(p);
      fit_sig.y.push_back(emitter::saturated_rate(
          sw.fit_signal.value("a") * p + sw.fit_signal.value("b") * p * p +
              cfg.detector_signal.dark_rate,
          cfg.detector_signal.dead_time_ns));
      car_cfg.x.push_back(p);
      car_cfg.y.push_back(est::predict_car(sw.config_model, p).car);
    }
    write_file_atomic(at("power_sweep.csv"),
                      table_csv({"power_mw", "duration_s", "singles_signal", "singles_idler",
                                 "coincidence_rate", "accidental_rate", "car", "car_error",
                                 "car_model", "car_fitted_model", "coincidence_rate_model"},
                                rows, prov));
    write_file_atomic(at("singles_vs_power.svg"),
                      svg_plot({"Singles versus pump power", "pump power (mW)", "counts/s", true,
                                true},
                               {s_sig, s_idl, fit_sig}));
    write_file_atomic(at("car_vs_power.svg"),
                      svg_plot({"CAR and coincidences versus pump power", "pump power (mW)",
                                "CAR, R_c (1/s)", true, true},
                               {car_mc, car_cfg, rc_mc}));
    const auto& last = sw.points.back();
    const double bw = device::linewidth_mhz(cfg.device);
    rep["power_sweep"] = {
        {"fit_signal", to_json(sw.fit_signal)},
        {"fit_idler", to_json(sw.fit_idler)},
        {"fit_coincidence", to_json(sw.fit_coincidence)},
        {"pgr", number(sw.pgr)},
        {"pgr_error", number(sw.pgr_error)},
        {"brightness", number(est::brightness(sw.pgr, bw))},
        {"bandwidth_mhz", bw},
        {"transmission_signal_db", number(sw.transmission.signal_db)},
        {"transmission_idler_db", number(sw.transmission.idler_db)},
        {"car_max", number(car_max)},
        {"car_at_max_power", number(last.car)},
        {"coincidence_rate_at_max_power", number(last.coincidence_rate)},
        {"max_power_mw", last.power_mw}};
    rep["car_max"] = number(car_max);
  }

  // Coherence time from the signal-idler cross-correlation.
  {
    std::cerr << "report: cross-correlation\n";
    const auto cc = pipeline::run_cross_correlation(cfg, cfg.source.duration_s);
    write_file_atomic(at("cross_correlation.csv"), histogram_csv(cc.histogram, prov));
    Series h{"coincidences", {}, {}, true}, m{"fit", {}, {}, false};
    est::PeakFitOptions o;
    if (cfg.analysis.peak_shape == "lorentzian") o.shape = est::PeakShape::Lorentzian;
    o.jitter_sigma_ps = std::hypot(cfg.detector_signal.jitter_sigma_ps,
                                   cfg.detector_idler.jitter_sigma_ps);
    const auto model = est::peak_model(cc.histogram, o, cc.fit.value("baseline"),
                                       cc.fit.value("amplitude"), cc.fit.value("width_ps"),
                                       cc.fit.value("center_ps"));
    for (std::size_t j = 0; j < cc.histogram.bins(); ++j) {
      h.x.push_back(cc.histogram.bin_center(j));
      h.y.push_back(static_cast<double>(cc.histogram.counts[j]));
      m.x.push_back(cc.histogram.bin_center(j));
      m.y.push_back(model[j]);
    }
    write_file_atomic(at("cross_correlation.svg"),
                      svg_plot({"Signal-idler cross-correlation", "delay (ps)", "counts"}, {h, m}));
    const double tau = cc.fit.value("width_ps");
    rep["coherence"] = {{"fit", to_json(cc.fit)},
                        {"coherence_time_ps", tau},
                        {"bandwidth_mhz", 1e6 / (2 * std::numbers::pi * tau)},
                        {"device_coherence_time_ps", device::coherence_time_ps(cfg.device)}};
  }

  // Purity.
  {
    std::cerr << "report: purity\n";
    const auto pu = pipeline::run_purity(cfg, cfg.source.schmidt_modes);
    write_file_atomic(at("g2.csv"), histogram_csv(pu.histogram, prov));
    Series h{"coincidences", {}, {}, true};
    for (std::size_t j = 0; j < pu.histogram.bins(); ++j) {
      h.x.push_back(pu.histogram.bin_center(j));
      h.y.push_back(static_cast<double>(pu.histogram.counts[j]));
    }
    write_file_atomic(at("g2.svg"),
                      svg_plot({"Unheralded signal g2", "delay (ps)", "counts"}, {h}));
    rep["purity"] = {{"fit", to_json(pu.fit)},
                     {"configured_schmidt_modes", cfg.source.schmidt_modes}};
    rep["g2_zero"] = number(pu.fit.value("g2_zero"));
  }

  // Time-bin fringe.
  {
    std::cerr << "report: time-bin sweep\n";
    const auto tb = pipeline::run_timebin_sweep(cfg, cfg.timebin.phases_rad);
    std::vector<std::vector<double>> rows;
    Series c{"central peak", {}, {}, true}, sd{"side peaks (sum)", {}, {}, true};
    Series fit{"fit", {}, {}, false};
    for (const auto& p : tb.points) {
      rows.push_back({p.phase_rad, static_cast<double>(p.peaks.left),
                      static_cast<double>(p.peaks.center), static_cast<double>(p.peaks.right),
                      p.background});
      c.x.push_back(p.phase_rad);
      c.y.push_back(static_cast<double>(p.peaks.center));
      sd.x.push_back(p.phase_rad);
      sd.y.push_back(static_cast<double>(p.peaks.left + p.peaks.right));
    }
    const double c0 = tb.visibility.value("mean_counts"), v = tb.visibility.value("raw_visibility");
    const double x0 = tb.visibility.value("phase_offset");
    const double period = tb.visibility.value("period");
    for (int i = 0; i <= 200; ++i) {
      const double x = tb.points.front().phase_rad +
                       (tb.points.back().phase_rad - tb.points.front().phase_rad) * i / 200.0;
      fit.x.push_back(x);
      fit.y.push_back(c0 * (1 + v * std::cos(2 * std::numbers::pi * x / period + x0)));
    }
    write_file_atomic(at("timebin_sweep.csv"),
                      table_csv({"phase_rad", "left", "center", "right", "background"}, rows, prov));
    write_file_atomic(at("timebin_fringe.svg"),
                      svg_plot({"Time-bin two-photon interference", "interferometer phase (rad)",
                                "coincidences"},
                               {c, sd, fit}));
    rep["timebin"] = {{"fit", to_json(tb.visibility)},
                      {"accidental_level", tb.accidental_level},
                      {"side_slope", tb.side_slope.slope},
                      {"side_slope_error", tb.side_slope.slope_error}};
    rep["raw_visibility"] = number(v);
    rep["net_visibility"] = number(tb.visibility.value("net_visibility"));
  }

  write_json(at("report.json"), rep);
  return rep;
}

}  // namespace mrr::io
