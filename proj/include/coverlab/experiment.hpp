#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "coverlab/cover_time.hpp"
#include "coverlab/dimension.hpp"
#include "coverlab/interval_map.hpp"
#include "coverlab/rotation.hpp"
#include "coverlab/suspension.hpp"

namespace coverlab {

using Json = nlohmann::json;

// Invalid configuration; the message starts with the offending field path.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const char* tool_version();
constexpr int kConfigSchema = 1;

// ---------------------------------------------------------------------------
// System specs

std::shared_ptr<const SymbolicMeasure> parse_measure(const Json& j, Sidedness side,
                                                     const std::string& field);

struct MapSystem {
  std::string name;
  std::shared_ptr<const MarkovIntervalMap> map;
  std::shared_ptr<const SymbolicMeasure> measure;
  std::optional<ZetaFamilyMap> zeta;  // zeta family parameters when applicable
  double omega = 0.0;
};

MapSystem parse_map_system(const Json& j);
ContinuedFraction parse_theta(const Json& j);
std::shared_ptr<const SuspensionSpace> parse_flow_system(const Json& j);

// ---------------------------------------------------------------------------
// Experiments

enum class SystemKind { map, rotation, flow };
enum class MapMethod { bracket, direct };

struct ExperimentConfig {
  std::string experiment_id;
  SystemKind kind = SystemKind::map;
  Json system;
  std::vector<double> scales;  // strictly decreasing
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::uint64_t budget = 1000000;  // steps (map), time units (flow); unused for rotation
  SlopeMode mode = SlopeMode::single_log;
  MapMethod method = MapMethod::bracket;
  std::string output;
  Json echo;  // the configuration as read
};

ExperimentConfig parse_config(const Json& j);
ExperimentConfig load_config(const std::string& path);
// Scale grid spec: {"dyadic":[k0,k1]}, {"harmonic":[n0,n1]}, {"zeta_index":[n0,n1]} or
// {"values":[...]}; zeta_index needs the zeta family parameters.
std::vector<double> parse_scales(const Json& j, const Json& system);

struct ReportRow {
  std::string experiment_id;
  std::string system;
  std::uint64_t seed = 0;
  double r = 0.0;
  bool completed = false;
  double value = 0.0;  // steps or flow time; the budget when exhausted
  std::optional<double> slope_single, slope_double, bracket_low, bracket_high;
  bool operator==(const ReportRow& o) const;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<ReportRow> rows;  // ordered by (scale index, trial index)
  std::optional<SlopeSeries> aggregate;  // medians over completed trials per scale
  std::string version;
  bool partial() const;
};

struct RunOptions {
  unsigned threads = 1;
  // Called in row order as soon as a contiguous prefix of rows is finished.
  std::function<void(const ReportRow&)> on_row;
};

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& opt = {});

std::string report_csv_header();
std::string report_csv_row(const ReportRow& row);
std::string report_csv(const ExperimentReport& report);
std::vector<ReportRow> parse_report_csv(const std::string& text);
Json report_json(const ExperimentReport& report);

// ---------------------------------------------------------------------------
// Other subcommands

struct DimsResult {
  std::string experiment_id;
  MeasureCurve curve;
  DimensionReport report;
};
// {"system":{...map or flow...}, "scales":{...}, "curve":"min-ball"|"closed-form"}
DimsResult run_dims(const Json& j);

struct CfResult {
  std::string experiment_id;
  ContinuedFraction cf;
  std::size_t count = 0;
  TypeEstimate type;
};
// {"theta":{...}, "count":n, "tail_window":w}
CfResult run_cf(const Json& j);
std::string cf_csv(CfResult& result);
Json cf_json(CfResult& result);

struct MixingResult {
  std::string experiment_id;
  MixingReport report;
};
// {"measure":{...}, "max_depth":d, "gaps":[...] or {"range":[g0,g1]}}
MixingResult run_mixing(const Json& j);
std::string mixing_csv(const MixingResult& result);
Json mixing_json(const MixingResult& result);
Json dims_json(const DimsResult& result);

}  // namespace coverlab
