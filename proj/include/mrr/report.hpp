#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mrr/config.hpp"
#include "mrr/engine.hpp"
#include "mrr/estimators.hpp"

namespace mrr::io {

using Json = nlohmann::json;

struct Provenance {
  std::string config_hash;  // empty when the input did not come from a config
  std::uint64_t seed = 0;
};

Json to_json(const Provenance& p);
Json to_json(const est::FitResult& f);
Json to_json(const engine::CoincidenceSummary& s);

/// "# config_hash=...,seed=..." then "delay_ps,counts" rows (bin centres).
std::string histogram_csv(const engine::Histogram& h, const Provenance& p);

/// Headered CSV with a provenance comment line.
std::string table_csv(const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows, const Provenance& p);

struct Series {
  std::string label;
  std::vector<double> x, y;
  bool markers = false;  // points instead of a line
};

struct PlotSpec {
  std::string title, x_label, y_label;
  bool log_x = false, log_y = false;
};

/// Minimal standalone SVG line plot.
std::string svg_plot(const PlotSpec& spec, const std::vector<Series>& series);

void write_json(const std::string& path, const Json& j);

/// Runs the full reproduction suite (channel map, power sweep, coherence,
/// purity, time-bin) and writes CSV, SVG and JSON per figure into
/// `out_dir`. Returns the combined summary, also written as report.json.
Json run_report(const ExperimentConfig& cfg, const std::string& out_dir);

}  // namespace mrr::io
