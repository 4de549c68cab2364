#include "mrr/config.hpp"

#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <json.hpp>

#include "mrr/error.hpp"

namespace mrr::io {

namespace {

using Json = nlohmann::json;

class Reader {
 public:
  explicit Reader(std::string origin) : origin_(std::move(origin)) {}

  std::string where(const YAML::Node& n) const {
    return origin_ + ":" + std::to_string(n.Mark().line + 1);
  }

  void expect_map(const YAML::Node& n, const std::string& path) {
    if (!n.IsMap()) fail(ErrorKind::Config, where(n) + ": " + path + ": expected a mapping");
    lines_[path] = n.Mark().line + 1;
  }

  void allow(const YAML::Node& n, const std::string& path, std::set<std::string> keys) {
    expect_map(n, path);
    for (const auto& kv : n) {
      const auto key = kv.first.as<std::string>();
      if (!keys.contains(key))
        fail(ErrorKind::Config, where(kv.first) + ": unknown key '" +
                                    (path.empty() ? key : path + "." + key) + "'");
    }
  }

  template <class T>
  void get(const YAML::Node& n, const std::string& path, const char* key, T& out) {
    const YAML::Node v = n[key];
    if (!v) return;
    const std::string full = path.empty() ? key : path + "." + key;
    lines_[full] = v.Mark().line + 1;
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      fail(ErrorKind::Config, where(v) + ": " + full + ": wrong type");
    }
  }

  template <class T>
  void get_list(const YAML::Node& n, const std::string& path, const char* key,
                std::vector<T>& out) {
    const YAML::Node v = n[key];
    if (!v) return;
    const std::string full = path + "." + key;
    if (!v.IsSequence()) fail(ErrorKind::Config, where(v) + ": " + full + ": expected a list");
    lines_[full] = v.Mark().line + 1;
    out.clear();
    for (const auto& e : v) {
      try {
        out.push_back(e.as<T>());
      } catch (const YAML::Exception&) {
        fail(ErrorKind::Config, where(e) + ": " + full + ": wrong element type");
      }
    }
  }

  bool has(const YAML::Node& n, const char* key) const { return static_cast<bool>(n[key]); }

  /// Runs a module validator and rewrites its "field: message" error with
  /// the location of that field (or of its nearest enclosing section).
  template <class F>
  void checked(const std::string& prefix, F&& f) const {
    try {
      f();
    } catch (const Error& e) {
      std::string msg = e.what();
      if (!prefix.empty()) msg = prefix + "." + msg;
      std::string field = msg.substr(0, msg.find(':'));
      std::string loc = origin_;
      for (;;) {
        auto it = lines_.find(field);
        if (it != lines_.end()) {
          loc += ":" + std::to_string(it->second);
          break;
        }
        const auto dot = field.rfind('.');
        if (dot == std::string::npos) break;
        field.resize(dot);
      }
      fail(ErrorKind::Config, loc + ": " + msg);
    }
  }

 private:
  std::string origin_;
  std::map<std::string, int> lines_;
};

void read_device(Reader& r, const YAML::Node& n, const std::string& p, device::RingDevice& d) {
  if (!n) return;
  r.allow(n, p, {"q_factor", "fsr_ghz", "pump_frequency_thz", "thermal_tuning_ghz_per_k",
                 "reference_temperature_k"});
  r.get(n, p, "q_factor", d.q_factor);
  r.get(n, p, "fsr_ghz", d.fsr_ghz);
  r.get(n, p, "pump_frequency_thz", d.pump_frequency_thz);
  r.get(n, p, "thermal_tuning_ghz_per_k", d.thermal_tuning_ghz_per_k);
  r.get(n, p, "reference_temperature_k", d.reference_temperature_k);
}

void read_grid(Reader& r, const YAML::Node& n, device::DwdmGrid& g) {
  if (!n) return;
  r.allow(n, "grid", {"anchor_frequency_thz", "index_step_ghz", "channel_spacing_ghz",
                      "passband_width_ghz", "first_channel"});
  r.get(n, "grid", "anchor_frequency_thz", g.anchor_frequency_thz);
  r.get(n, "grid", "index_step_ghz", g.index_step_ghz);
  r.get(n, "grid", "channel_spacing_ghz", g.channel_spacing_ghz);
  r.get(n, "grid", "passband_width_ghz", g.passband_width_ghz);
  r.get(n, "grid", "first_channel", g.first_channel);
}

void read_pair(Reader& r, const YAML::Node& n, device::ChannelPair& c) {
  if (!n) return;
  const std::string p = "pair";
  r.allow(n, p, {"signal_channel", "idler_channel", "comb_order", "a_signal", "a_idler",
                 "b_signal", "b_idler", "transmission_signal", "transmission_idler"});
  r.get(n, p, "signal_channel", c.signal_channel);
  r.get(n, p, "idler_channel", c.idler_channel);
  r.get(n, p, "comb_order", c.comb_order);
  r.get(n, p, "a_signal", c.a_signal);
  r.get(n, p, "a_idler", c.a_idler);
  r.get(n, p, "b_signal", c.b_signal);
  r.get(n, p, "b_idler", c.b_idler);
  r.get(n, p, "transmission_signal", c.transmission_signal);
  r.get(n, p, "transmission_idler", c.transmission_idler);
}

// Returns whether coherence_time_ps was given explicitly.
bool read_source(Reader& r, const YAML::Node& n, const std::string& p,
                 emitter::SourceConfig& s) {
  if (!n) return false;
  r.allow(n, p, {"pump_power_mw", "pair_rate_coefficient", "linear_noise_signal",
                 "linear_noise_idler", "schmidt_modes", "coherence_time_ps", "duration_s",
                 "rng_seed", "resolution_ps"});
  r.get(n, p, "pump_power_mw", s.pump_power_mw);
  r.get(n, p, "pair_rate_coefficient", s.pair_rate_coefficient);
  r.get(n, p, "linear_noise_signal", s.linear_noise_signal);
  r.get(n, p, "linear_noise_idler", s.linear_noise_idler);
  r.get(n, p, "schmidt_modes", s.schmidt_modes);
  r.get(n, p, "coherence_time_ps", s.coherence_time_ps);
  r.get(n, p, "duration_s", s.duration_s);
  r.get(n, p, "rng_seed", s.rng_seed);
  r.get(n, p, "resolution_ps", s.resolution_ps);
  return r.has(n, "coherence_time_ps");
}

void read_detector(Reader& r, const YAML::Node& n, const std::string& p,
                   emitter::DetectorConfig& d) {
  if (!n) return;
  r.allow(n, p, {"efficiency", "dark_rate", "dead_time_ns", "jitter_sigma_ps"});
  r.get(n, p, "efficiency", d.efficiency);
  r.get(n, p, "dark_rate", d.dark_rate);
  r.get(n, p, "dead_time_ns", d.dead_time_ns);
  r.get(n, p, "jitter_sigma_ps", d.jitter_sigma_ps);
}

Json to_json(const device::RingDevice& d) {
  return {{"q_factor", d.q_factor},
          {"fsr_ghz", d.fsr_ghz},
          {"pump_frequency_thz", d.pump_frequency_thz},
          {"thermal_tuning_ghz_per_k", d.thermal_tuning_ghz_per_k},
          {"reference_temperature_k", d.reference_temperature_k}};
}

Json to_json(const emitter::SourceConfig& s) {
  return {{"pump_power_mw", s.pump_power_mw},
          {"pair_rate_coefficient", s.pair_rate_coefficient},
          {"linear_noise_signal", s.linear_noise_signal},
          {"linear_noise_idler", s.linear_noise_idler},
          {"schmidt_modes", s.schmidt_modes},
          {"coherence_time_ps", s.coherence_time_ps},
          {"duration_s", s.duration_s},
          {"rng_seed", s.rng_seed},
          {"resolution_ps", s.resolution_ps}};
}

Json to_json(const emitter::DetectorConfig& d) {
  return {{"efficiency", d.efficiency},
          {"dark_rate", d.dark_rate},
          {"dead_time_ns", d.dead_time_ns},
          {"jitter_sigma_ps", d.jitter_sigma_ps}};
}

}  // namespace

void ExperimentConfig::validate() const {
  device.validate();
  grid.validate();
  pair.validate();
  if (!grid.is_occupied(pair.signal_channel))
    fail(ErrorKind::Config, "pair.signal_channel: channel " +
                                std::to_string(pair.signal_channel) + " is not on the grid");
  if (!grid.is_occupied(pair.idler_channel))
    fail(ErrorKind::Config, "pair.idler_channel: channel " + std::to_string(pair.idler_channel) +
                                " is not on the grid");
  if (pair.signal_channel == pair.idler_channel)
    fail(ErrorKind::Config, "pair.idler_channel: must differ from signal_channel");
  source.validate();
  detector_signal.validate("detector_signal");
  detector_idler.validate("detector_idler");
  for (double p : power_sweep.powers_mw)
    if (!(p > 0)) fail(ErrorKind::Config, "power_sweep.powers_mw: powers must be > 0");
  if (!(power_sweep.duration_s > 0))
    fail(ErrorKind::Config, "power_sweep.duration_s: must be > 0");
  if (!(purity.pair_rate > 0)) fail(ErrorKind::Config, "purity.pair_rate: must be > 0");
  if (!(purity.duration_s > 0)) fail(ErrorKind::Config, "purity.duration_s: must be > 0");
  if (!(purity.jitter_sigma_ps >= 0))
    fail(ErrorKind::Config, "purity.jitter_sigma_ps: must be >= 0");
  const auto& a = analysis;
  if (!(a.window_ps > 0)) fail(ErrorKind::Config, "analysis.window_ps: must be > 0");
  if (a.bin_ps <= 0) fail(ErrorKind::Config, "analysis.bin_ps: must be > 0");
  if (a.range_ps <= 0 || a.range_ps % a.bin_ps != 0)
    fail(ErrorKind::Config, "analysis.range_ps: must be a positive multiple of bin_ps");
  if (a.g2_range_ps <= 0 || a.g2_range_ps % a.bin_ps != 0)
    fail(ErrorKind::Config, "analysis.g2_range_ps: must be a positive multiple of bin_ps");
  if (!(a.sideband_min_ps >= 0 && a.sideband_max_ps > a.sideband_min_ps))
    fail(ErrorKind::Config, "analysis.sideband_max_ps: must exceed sideband_min_ps");
  if (a.peak_shape != "double_exponential" && a.peak_shape != "lorentzian")
    fail(ErrorKind::Config,
         "analysis.peak_shape: must be 'double_exponential' or 'lorentzian'");
  const auto& t = timebin;
  t.interferometer.validate(t.source.coherence_time_ps, false);
  if (t.bin_ps <= 0 || t.range_ps <= 0 || t.range_ps % t.bin_ps != 0)
    fail(ErrorKind::Config, "timebin.range_ps: must be a positive multiple of timebin.bin_ps");
  if (static_cast<double>(t.range_ps) < 3.5e3 * t.interferometer.bin_separation_ns())
    fail(ErrorKind::Config, "timebin.range_ps: must cover 3.5 bin separations");
  if (output_dir.empty()) fail(ErrorKind::Config, "output_dir: must not be empty");
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    fail(ErrorKind::Config, origin + ":" + std::to_string(e.mark.line + 1) + ": parse error: " +
                                e.msg);
  }
  if (!root || root.IsNull()) fail(ErrorKind::Config, origin + ": parse error: empty config");

  Reader r(origin);
  r.allow(root, "", {"device", "grid", "temperature_k", "pair", "source", "detector_signal",
                     "detector_idler", "timebin", "power_sweep", "purity", "analysis",
                     "output_dir"});
  ExperimentConfig c;
  c.power_sweep.powers_mw = {0.16, 0.3, 0.5, 1.0, 2.0, 3.5, 5.0, 7.5, 10.0, 13.5};
  read_device(r, root["device"], "device", c.device);
  read_grid(r, root["grid"], c.grid);
  r.get(root, "", "temperature_k", c.temperature_k);
  read_pair(r, root["pair"], c.pair);
  const bool tau_given = read_source(r, root["source"], "source", c.source);
  read_detector(r, root["detector_signal"], "detector_signal", c.detector_signal);
  read_detector(r, root["detector_idler"], "detector_idler", c.detector_idler);
  r.checked("", [&] { c.device.validate(); });
  if (!tau_given) c.source.coherence_time_ps = device::coherence_time_ps(c.device);

  auto& t = c.timebin;
  t.device = c.device;
  t.source = c.source;
  t.detector_signal = c.detector_signal;
  t.detector_idler = c.detector_idler;
  t.phases_rad.clear();
  for (int i = 0; i < 16; ++i) t.phases_rad.push_back(i * std::numbers::pi / 16);
  bool tb_tau_given = false;
  if (const auto n = root["timebin"]) {
    const std::string p = "timebin";
    r.allow(n, p, {"clock_rate_mhz", "pulse_width_ps", "phase_rad", "pump_phase_rad",
                   "excess_loss_db", "splitter_loss_db", "intrinsic_visibility", "device",
                   "source", "detector_signal", "detector_idler", "phases_rad", "bin_ps",
                   "range_ps"});
    auto& i = t.interferometer;
    r.get(n, p, "clock_rate_mhz", i.clock_rate_mhz);
    r.get(n, p, "pulse_width_ps", i.pulse_width_ps);
    r.get(n, p, "phase_rad", i.phase_rad);
    r.get(n, p, "pump_phase_rad", i.pump_phase_rad);
    r.get(n, p, "excess_loss_db", i.excess_loss_db);
    r.get(n, p, "splitter_loss_db", i.splitter_loss_db);
    r.get(n, p, "intrinsic_visibility", i.intrinsic_visibility);
    read_device(r, n["device"], "timebin.device", t.device);
    tb_tau_given = read_source(r, n["source"], "timebin.source", t.source);
    read_detector(r, n["detector_signal"], "timebin.detector_signal", t.detector_signal);
    read_detector(r, n["detector_idler"], "timebin.detector_idler", t.detector_idler);
    r.get_list(n, p, "phases_rad", t.phases_rad);
    r.get(n, p, "bin_ps", t.bin_ps);
    r.get(n, p, "range_ps", t.range_ps);
    r.checked("timebin", [&] { t.device.validate(); });
  }
  if (!tb_tau_given) t.source.coherence_time_ps = device::coherence_time_ps(t.device);

  if (const auto n = root["power_sweep"]) {
    r.allow(n, "power_sweep", {"powers_mw", "duration_s"});
    r.get_list(n, "power_sweep", "powers_mw", c.power_sweep.powers_mw);
    r.get(n, "power_sweep", "duration_s", c.power_sweep.duration_s);
  }
  if (const auto n = root["purity"]) {
    r.allow(n, "purity", {"pair_rate", "duration_s", "jitter_sigma_ps", "splitter_seed"});
    r.get(n, "purity", "pair_rate", c.purity.pair_rate);
    r.get(n, "purity", "duration_s", c.purity.duration_s);
    r.get(n, "purity", "jitter_sigma_ps", c.purity.jitter_sigma_ps);
    r.get(n, "purity", "splitter_seed", c.purity.splitter_seed);
  }
  if (const auto n = root["analysis"]) {
    const std::string p = "analysis";
    r.allow(n, p, {"window_ps", "bin_ps", "range_ps", "sideband_min_ps", "sideband_max_ps",
                   "g2_range_ps", "fit_half_range_ps", "peak_shape"});
    auto& a = c.analysis;
    r.get(n, p, "window_ps", a.window_ps);
    r.get(n, p, "bin_ps", a.bin_ps);
    r.get(n, p, "range_ps", a.range_ps);
    r.get(n, p, "sideband_min_ps", a.sideband_min_ps);
    r.get(n, p, "sideband_max_ps", a.sideband_max_ps);
    r.get(n, p, "g2_range_ps", a.g2_range_ps);
    r.get(n, p, "fit_half_range_ps", a.fit_half_range_ps);
    r.get(n, p, "peak_shape", a.peak_shape);
  }
  r.get(root, "", "output_dir", c.output_dir);

  r.checked("", [&] { c.validate(); });
  r.checked("timebin", [&] {
    t.source.validate();
    t.detector_signal.validate("detector_signal");
    t.detector_idler.validate("detector_idler");
  });
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string serialize_config(const ExperimentConfig& c) {
  Json j;
  j["device"] = to_json(c.device);
  j["grid"] = {{"anchor_frequency_thz", c.grid.anchor_frequency_thz},
               {"index_step_ghz", c.grid.index_step_ghz},
               {"channel_spacing_ghz", c.grid.channel_spacing_ghz},
               {"passband_width_ghz", c.grid.passband_width_ghz},
               {"first_channel", c.grid.first_channel}};
  j["temperature_k"] = c.temperature_k;
  j["pair"] = {{"signal_channel", c.pair.signal_channel},
               {"idler_channel", c.pair.idler_channel},
               {"comb_order", c.pair.comb_order},
               {"a_signal", c.pair.a_signal},
               {"a_idler", c.pair.a_idler},
               {"b_signal", c.pair.b_signal},
               {"b_idler", c.pair.b_idler},
               {"transmission_signal", c.pair.transmission_signal},
               {"transmission_idler", c.pair.transmission_idler}};
  j["source"] = to_json(c.source);
  j["detector_signal"] = to_json(c.detector_signal);
  j["detector_idler"] = to_json(c.detector_idler);
  const auto& t = c.timebin;
  j["timebin"] = {{"clock_rate_mhz", t.interferometer.clock_rate_mhz},
                  {"pulse_width_ps", t.interferometer.pulse_width_ps},
                  {"phase_rad", t.interferometer.phase_rad},
                  {"pump_phase_rad", t.interferometer.pump_phase_rad},
                  {"excess_loss_db", t.interferometer.excess_loss_db},
                  {"splitter_loss_db", t.interferometer.splitter_loss_db},
                  {"intrinsic_visibility", t.interferometer.intrinsic_visibility},
                  {"device", to_json(t.device)},
                  {"source", to_json(t.source)},
                  {"detector_signal", to_json(t.detector_signal)},
                  {"detector_idler", to_json(t.detector_idler)},
                  {"phases_rad", t.phases_rad},
                  {"bin_ps", t.bin_ps},
                  {"range_ps", t.range_ps}};
  j["power_sweep"] = {{"powers_mw", c.power_sweep.powers_mw},
                      {"duration_s", c.power_sweep.duration_s}};
  j["purity"] = {{"pair_rate", c.purity.pair_rate},
                 {"duration_s", c.purity.duration_s},
                 {"jitter_sigma_ps", c.purity.jitter_sigma_ps},
                 {"splitter_seed", c.purity.splitter_seed}};
  const auto& a = c.analysis;
  j["analysis"] = {{"window_ps", a.window_ps},
                   {"bin_ps", a.bin_ps},
                   {"range_ps", a.range_ps},
                   {"sideband_min_ps", a.sideband_min_ps},
                   {"sideband_max_ps", a.sideband_max_ps},
                   {"g2_range_ps", a.g2_range_ps},
                   {"fit_half_range_ps", a.fit_half_range_ps},
                   {"peak_shape", a.peak_shape}};
  j["output_dir"] = c.output_dir;
  return j.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = serialize_config(cfg);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorKind::Numeric, "SHA-256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

}  // namespace mrr::io
