// mrrpair: simulate and analyse a microring photon-pair source.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mrr/config.hpp"
#include "mrr/emitter.hpp"
#include "mrr/engine.hpp"
#include "mrr/error.hpp"
#include "mrr/estimators.hpp"
#include "mrr/pipeline.hpp"
#include "mrr/report.hpp"
#include "mrr/tagio.hpp"

namespace fs = std::filesystem;
using namespace mrr;
using io::Json;

namespace {

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("");
    } catch (const std::exception&) {
      fail(ErrorKind::Config, "cannot parse '" + item + "' in list '" + text + "'");
    }
  }
  if (out.empty()) fail(ErrorKind::Config, "empty list");
  return out;
}

std::pair<int, int> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) fail(ErrorKind::Config, "expected A..B, got '" + text + "'");
  try {
    return {std::stoi(text.substr(0, dots)), std::stoi(text.substr(dots + 2))};
  } catch (const std::exception&) {
    fail(ErrorKind::Config, "expected A..B, got '" + text + "'");
  }
}

/// Provenance of a tag file: the sidecar JSON written by `simulate`, if any.
io::Provenance stream_provenance(const std::string& tags_path) {
  io::Provenance p;
  const std::string side = tags_path + ".json";
  if (!fs::exists(side)) return p;
  std::ifstream in(side);
  try {
    const auto j = Json::parse(in);
    if (j.contains("provenance")) {
      const auto& pr = j["provenance"];
      if (pr["config_hash"].is_string()) p.config_hash = pr["config_hash"].get<std::string>();
      p.seed = pr["seed"].get<std::uint64_t>();
    }
  } catch (const std::exception&) {
    std::cerr << "warning: ignoring unreadable sidecar " << side << "\n";
  }
  return p;
}

struct InputOptions {
  std::string path;
  std::string format = "auto";
  std::uint32_t resolution_ps = 1;
  bool sort = false;
};

void add_input(CLI::App* cmd, InputOptions& in) {
  cmd->add_option("--in", in.path, "tag file (MRRTAGS1 or CSV)")->required();
  cmd->add_option("--format", in.format, "mrrtags | csv | auto (by extension)");
  cmd->add_option("--resolution", in.resolution_ps, "tick for CSV import, ps");
  cmd->add_flag("--sort", in.sort, "sort out-of-order timestamps instead of failing");
}

TagStream load_input(const InputOptions& in) {
  std::string fmt = in.format;
  if (fmt == "auto") fmt = fs::path(in.path).extension() == ".csv" ? "csv" : "mrrtags";
  return io::import_tags(in.path, fmt, in.resolution_ps, in.sort);
}

std::string prefix_path(const std::string& prefix, const std::string& suffix) {
  return prefix + suffix;
}

int run(int argc, char** argv) {
  CLI::App app{"Microring photon-pair source simulator and analysis toolkit"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "simulate a tag stream");
  std::string sim_mode, sim_config, sim_out;
  std::optional<std::uint64_t> sim_seed;
  std::optional<double> sim_power, sim_duration, sim_phase;
  bool sim_csv = false;
  sim->add_option("mode", sim_mode, "cw | timebin")->required()->check(CLI::IsMember({"cw", "timebin"}));
  sim->add_option("--config", sim_config)->required();
  sim->add_option("--out", sim_out)->required();
  sim->add_option("--seed", sim_seed, "override source.rng_seed");
  sim->add_option("--power", sim_power, "override pump power, mW");
  sim->add_option("--duration", sim_duration, "override duration, s");
  sim->add_option("--phase", sim_phase, "interferometer phase (timebin), rad");
  sim->add_flag("--csv", sim_csv, "write CSV instead of MRRTAGS1");

  // correlate
  auto* cor = app.add_subcommand("correlate", "cross-correlation histogram and summary");
  InputOptions cor_in;
  add_input(cor, cor_in);
  int cor_a = 0, cor_b = 1;
  std::int64_t cor_bin = 81, cor_range = 1'000'026;
  double cor_window = 972, cor_side_min = 200'000, cor_side_max = 1e300;
  std::string cor_out;
  bool cor_serial = false;
  cor->add_option("--a", cor_a, "start channel");
  cor->add_option("--b", cor_b, "stop channel");
  cor->add_option("--bin", cor_bin, "bin width, ps");
  cor->add_option("--range", cor_range, "histogram covers [-range, range), ps");
  cor->add_option("--window", cor_window, "coincidence window, ps");
  cor->add_option("--sideband-min", cor_side_min, "accidental sidebands start at |delay|, ps");
  cor->add_option("--sideband-max", cor_side_max, "accidental sidebands end at |delay|, ps");
  cor->add_option("--out", cor_out, "output prefix (default: input path)");
  cor->add_flag("--serial", cor_serial, "use the serial reference kernel");

  // g2
  auto* g2 = app.add_subcommand("g2", "unheralded autocorrelation of one channel");
  InputOptions g2_in;
  add_input(g2, g2_in);
  int g2_ch = 0;
  std::int64_t g2_bin = 81, g2_range = 12'150;
  double g2_jitter = 0, g2_half = 8000;
  std::uint64_t g2_seed = 7;
  std::string g2_shape = "double_exponential", g2_out;
  g2->add_option("--ch", g2_ch)->required();
  g2->add_option("--bin", g2_bin, "bin width, ps");
  g2->add_option("--range", g2_range, "histogram half range, ps");
  g2->add_option("--jitter", g2_jitter, "single-detector timing jitter sigma, ps");
  g2->add_option("--fit-range", g2_half, "fit bins with |delay| <= this, ps");
  g2->add_option("--splitter-seed", g2_seed);
  g2->add_option("--shape", g2_shape)->check(CLI::IsMember({"double_exponential", "lorentzian"}));
  g2->add_option("--out", g2_out, "output prefix (default: input path)");

  // power-sweep
  auto* ps = app.add_subcommand("power-sweep", "singles/coincidence sweep with fits and CAR model");
  std::string ps_config, ps_powers, ps_out;
  ps->add_option("--config", ps_config)->required();
  ps->add_option("--powers", ps_powers, "comma-separated pump powers, mW");
  ps->add_option("--out-dir", ps_out);

  // timebin-sweep
  auto* tbs = app.add_subcommand("timebin-sweep", "phase sweep of the time-bin interferometer");
  std::string tb_config, tb_phases, tb_out;
  tbs->add_option("--config", tb_config)->required();
  tbs->add_option("--phases", tb_phases, "comma-separated phases, rad");
  tbs->add_option("--out-dir", tb_out);

  // channel-map
  auto* cm = app.add_subcommand("channel-map", "comb line to DWDM channel table");
  std::string cm_config, cm_range = "-2..2";
  cm->add_option("--config", cm_config)->required();
  cm->add_option("--k-range", cm_range, "A..B");

  // report
  auto* rep = app.add_subcommand("report", "full reproduction suite");
  std::string rep_config, rep_out;
  rep->add_option("--config", rep_config)->required();
  rep->add_option("--out-dir", rep_out);

  // convert
  auto* conv = app.add_subcommand("convert", "convert between MRRTAGS1 and CSV");
  InputOptions conv_in;
  add_input(conv, conv_in);
  std::string conv_out;
  conv->add_option("--out", conv_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (*sim) {
    auto cfg = io::load_config(sim_config);
    const io::Provenance prov{io::config_hash(cfg), sim_seed.value_or(
        sim_mode == "cw" ? cfg.source.rng_seed : cfg.timebin.source.rng_seed)};
    TagStream ts;
    Json meta;
    if (sim_mode == "cw") {
      auto src = cfg.source;
      src.rng_seed = prov.seed;
      if (sim_power) src.pump_power_mw = *sim_power;
      if (sim_duration) src.duration_s = *sim_duration;
      ts = emitter::simulate_cw(src, cfg.detector_signal, cfg.detector_idler, cfg.pair);
      meta = {{"mode", "cw"}, {"pump_power_mw", src.pump_power_mw}, {"duration_s", src.duration_s}};
    } else {
      auto src = cfg.timebin.source;
      src.rng_seed = prov.seed;
      auto tb = cfg.timebin.interferometer;
      if (sim_power) src.pump_power_mw = *sim_power;
      if (sim_duration) src.duration_s = *sim_duration;
      if (sim_phase) tb.phase_rad = *sim_phase;
      ts = emitter::simulate_timebin(src, tb, cfg.timebin.detector_signal,
                                     cfg.timebin.detector_idler, cfg.pair);
      meta = {{"mode", "timebin"}, {"pump_power_mw", src.pump_power_mw},
              {"duration_s", src.duration_s}, {"phase_rad", tb.phase_rad}};
    }
    if (sim_csv)
      io::write_tags_csv(sim_out, ts);
    else
      io::write_tags(sim_out, ts);
    meta["provenance"] = io::to_json(prov);
    meta["records"] = ts.size();
    meta["resolution_ps"] = ts.resolution_ps;
    io::write_json(sim_out + ".json", meta);
    std::cout << "wrote " << ts.size() << " records to " << sim_out << "\n";
    return 0;
  }

  if (*cor) {
    const auto ts = load_input(cor_in);
    const auto prov = stream_provenance(cor_in.path);
    auto h = engine::cross_correlate(ts, static_cast<std::uint8_t>(cor_a),
                                     static_cast<std::uint8_t>(cor_b), cor_bin,
                                     {-cor_range, cor_range},
                                     cor_serial ? engine::Backend::Serial : engine::Backend::Parallel);
    h.acquisition_time_s = ts.span_s();
    const std::string out = cor_out.empty() ? cor_in.path : cor_out;
    io::write_file_atomic(prefix_path(out, ".hist.csv"), io::histogram_csv(h, prov));
    Json j{{"provenance", io::to_json(prov)},
           {"input", cor_in.path},
           {"channels", {cor_a, cor_b}},
           {"bin_ps", cor_bin},
           {"range_ps", cor_range},
           {"acquisition_time_s", h.acquisition_time_s},
           {"total", h.total()}};
    engine::SummaryOptions so;
    so.sideband_min_ps = cor_side_min;
    so.sideband_max_ps = cor_side_max;
    try {
      j["summary"] = io::to_json(engine::coincidence_summary(h, cor_window, so));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Statistics) throw;
      std::cerr << "warning: no summary: " << e.what() << "\n";
      j["summary"] = nullptr;
    }
    io::write_json(prefix_path(out, ".summary.json"), j);
    std::cout << j["summary"].dump(2) << "\n";
    return 0;
  }

  if (*g2) {
    const auto ts = load_input(g2_in);
    const auto prov = stream_provenance(g2_in.path);
    auto h = engine::autocorrelate_split(ts, static_cast<std::uint8_t>(g2_ch), g2_seed, g2_bin,
                                         {-g2_range, g2_range});
    h.acquisition_time_s = ts.span_s();
    est::PeakFitOptions o;
    o.shape = g2_shape == "lorentzian" ? est::PeakShape::Lorentzian
                                       : est::PeakShape::DoubleExponential;
    o.jitter_sigma_ps = std::sqrt(2.0) * g2_jitter;
    o.fit_half_range_ps = g2_half;
    const auto fit = est::fit_g2(h, o);
    const std::string out = g2_out.empty() ? g2_in.path : g2_out;
    io::write_file_atomic(prefix_path(out, ".g2.csv"), io::histogram_csv(h, prov));
    Json j{{"provenance", io::to_json(prov)}, {"channel", g2_ch}, {"fit", io::to_json(fit)}};
    io::write_json(prefix_path(out, ".g2.json"), j);
    std::cout << j["fit"].dump(2) << "\n";
    return 0;
  }

  if (*ps) {
    auto cfg = io::load_config(ps_config);
    if (!ps_powers.empty()) cfg.power_sweep.powers_mw = parse_list(ps_powers);
    const io::Provenance prov{io::config_hash(cfg), cfg.source.rng_seed};
    const auto r = pipeline::run_power_sweep(cfg, cfg.power_sweep.powers_mw);
    const fs::path dir(ps_out.empty() ? cfg.output_dir : ps_out);
    std::vector<std::vector<double>> rows;
    for (const auto& p : r.points) {
      const auto pc = est::predict_car(r.config_model, p.power_mw);
      const auto pf = est::predict_car(r.fitted_model, p.power_mw);
      rows.push_back({p.power_mw, p.duration_s, p.singles_signal, p.singles_idler,
                      p.coincidence_rate, p.accidental_rate, p.car, p.car_error, pc.car, pf.car});
    }
    io::write_file_atomic((dir / "power_sweep.csv").string(),
                          io::table_csv({"power_mw", "duration_s", "singles_signal",
                                         "singles_idler", "coincidence_rate", "accidental_rate",
                                         "car", "car_error", "car_model", "car_fitted_model"},
                                        rows, prov));
    Json j{{"provenance", io::to_json(prov)},
           {"fit_signal", io::to_json(r.fit_signal)},
           {"fit_idler", io::to_json(r.fit_idler)},
           {"fit_coincidence", io::to_json(r.fit_coincidence)},
           {"pgr", r.pgr},
           {"pgr_error", r.pgr_error},
           {"transmission_signal_db", r.transmission.signal_db},
           {"transmission_idler_db", r.transmission.idler_db}};
    io::write_json((dir / "power_sweep.json").string(), j);
    std::cout << j.dump(2) << "\n";
    return 0;
  }

  if (*tbs) {
    auto cfg = io::load_config(tb_config);
    if (!tb_phases.empty()) cfg.timebin.phases_rad = parse_list(tb_phases);
    const io::Provenance prov{io::config_hash(cfg), cfg.timebin.source.rng_seed};
    const auto r = pipeline::run_timebin_sweep(cfg, cfg.timebin.phases_rad);
    const fs::path dir(tb_out.empty() ? cfg.output_dir : tb_out);
    std::vector<std::vector<double>> rows;
    for (const auto& p : r.points)
      rows.push_back({p.phase_rad, static_cast<double>(p.peaks.left),
                      static_cast<double>(p.peaks.center), static_cast<double>(p.peaks.right),
                      p.background});
    io::write_file_atomic((dir / "timebin_sweep.csv").string(),
                          io::table_csv({"phase_rad", "left", "center", "right", "background"},
                                        rows, prov));
    Json j{{"provenance", io::to_json(prov)},
           {"fit", io::to_json(r.visibility)},
           {"accidental_level", r.accidental_level},
           {"side_slope", r.side_slope.slope},
           {"side_slope_error", r.side_slope.slope_error}};
    io::write_json((dir / "timebin_sweep.json").string(), j);
    std::cout << j.dump(2) << "\n";
    return 0;
  }

  if (*cm) {
    const auto cfg = io::load_config(cm_config);
    const auto [a, b] = parse_range(cm_range);
    std::cout << "k,channel,channel_center_thz,line_thz,line_nm,detuning_ghz\n";
    for (const auto& m : pipeline::channel_map(cfg, a, b)) {
      const double f = device::comb_line_frequency_thz(cfg.device, m.k, cfg.temperature_k);
      std::printf("%d,%d,%.4f,%.6f,%.3f,%.3f\n", m.k, m.channel,
                  cfg.grid.channel_center_thz(m.channel), f, device::thz_to_nm(f),
                  m.detuning_ghz);
    }
    return 0;
  }

  if (*rep) {
    const auto cfg = io::load_config(rep_config);
    const auto j = io::run_report(cfg, rep_out.empty() ? cfg.output_dir : rep_out);
    std::cout << Json{{"car_max", j["car_max"]},
                      {"g2_zero", j["g2_zero"]},
                      {"raw_visibility", j["raw_visibility"]},
                      {"net_visibility", j["net_visibility"]}}
                     .dump(2)
              << "\n";
    return 0;
  }

  if (*conv) {
    const auto ts = load_input(conv_in);
    if (fs::path(conv_out).extension() == ".csv")
      io::write_tags_csv(conv_out, ts);
    else
      io::write_tags(conv_out, ts);
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return e.kind() == ErrorKind::Numeric ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
