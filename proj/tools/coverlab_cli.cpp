#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "coverlab/experiment.hpp"

using namespace coverlab;

namespace {

enum Exit { ok = 0, config_error = 1, partial = 2, internal_error = 3 };

struct Common {
  std::string config;
  std::string out;
  std::string format = "csv";
  unsigned threads = 1;
  std::optional<std::int64_t> budget;
};

void add_common(CLI::App* cmd, Common& c, bool runs) {
  cmd->add_option("--config", c.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output directory (default: config 'output' or '.')");
  cmd->add_option("--format", c.format, "output format")->check(CLI::IsMember({"csv", "json"}));
  if (runs) {
    cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::Range(1u, 1024u));
    cmd->add_option("--budget", c.budget, "per-run step or time budget (overrides the config)");
  }
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
}

std::filesystem::path out_file(const std::string& dir, const std::string& name) {
  std::filesystem::path p = dir.empty() ? std::filesystem::path(".") : std::filesystem::path(dir);
  std::filesystem::create_directories(p);
  return p / name;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + p.string() + "'");
}

int run_cover(const Common& c, SystemKind kind) {
  ExperimentConfig cfg = parse_config(read_json(c.config));
  if (cfg.kind != kind) {
    const char* want = kind == SystemKind::map ? "map" : kind == SystemKind::rotation ? "rotation" : "flow";
    throw ConfigError(std::string("system.kind: this subcommand expects '") + want + "'");
  }
  if (c.budget) {
    if (*c.budget < 1) throw ConfigError("budget: must be >= 1");
    cfg.budget = static_cast<std::uint64_t>(*c.budget);
  }
  const std::string dir = c.out.empty() ? cfg.output : c.out;
  RunOptions opt;
  opt.threads = c.threads;
  ExperimentReport report;
  if (c.format == "csv") {
    // rows are flushed as soon as every earlier row is done
    const auto path = out_file(dir, cfg.experiment_id + ".csv");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << report_csv_header() << "\n" << std::flush;
    opt.on_row = [&](const ReportRow& row) { out << report_csv_row(row) << "\n" << std::flush; };
    report = run_experiment(cfg, opt);
    std::cout << path.string() << "\n";
  } else {
    report = run_experiment(cfg, opt);
    const auto path = out_file(dir, cfg.experiment_id + ".json");
    write_text(path, report_json(report).dump(2) + "\n");
    std::cout << path.string() << "\n";
  }
  std::size_t exhausted = 0;
  for (const auto& row : report.rows) exhausted += row.completed ? 0 : 1;
  std::cout << report.rows.size() << " runs, " << exhausted << " exhausted\n";
  if (report.aggregate) {
    const auto& a = *report.aggregate;
    std::printf("tail single-log [%.6g, %.6g], tail double-log [%.6g, %.6g]\n", a.single_inf,
                a.single_sup, a.double_inf, a.double_sup);
  }
  return report.partial() ? partial : ok;
}

int run_dims_cmd(const Common& c) {
  const Json j = read_json(c.config);
  const auto res = run_dims(j);
  const std::string dir = c.out.empty() ? j.value("output", std::string()) : c.out;
  if (c.format == "csv") {
    write_text(out_file(dir, res.experiment_id + ".csv"), curve_to_csv(res.curve));
    write_text(out_file(dir, res.experiment_id + "_report.json"), report_to_json(res.report) + "\n");
  } else {
    write_text(out_file(dir, res.experiment_id + ".json"), dims_json(res).dump(2) + "\n");
  }
  const auto& r = res.report;
  std::printf("minkowski upper [%.6g, %.6g], lower [%.6g, %.6g]\n", r.minkowski_upper.lo,
              r.minkowski_upper.hi, r.minkowski_lower.lo, r.minkowski_lower.hi);
  std::printf("stretched upper [%.6g, %.6g], lower [%.6g, %.6g]\n", r.stretched_upper.lo,
              r.stretched_upper.hi, r.stretched_lower.lo, r.stretched_lower.hi);
  return ok;
}

int run_cf_cmd(const Common& c) {
  const Json j = read_json(c.config);
  auto res = run_cf(j);
  const std::string dir = c.out.empty() ? j.value("output", std::string()) : c.out;
  if (c.format == "csv")
    write_text(out_file(dir, res.experiment_id + ".csv"), cf_csv(res));
  else
    write_text(out_file(dir, res.experiment_id + ".json"), cf_json(res).dump(2) + "\n");
  std::printf("type tail sup %.6g, tail inf %.6g\n", res.type.tail_sup, res.type.tail_inf);
  return ok;
}

int run_mixing_cmd(const Common& c) {
  const Json j = read_json(c.config);
  const auto res = run_mixing(j);
  const std::string dir = c.out.empty() ? j.value("output", std::string()) : c.out;
  if (c.format == "csv")
    write_text(out_file(dir, res.experiment_id + ".csv"), mixing_csv(res));
  else
    write_text(out_file(dir, res.experiment_id + ".json"), mixing_json(res).dump(2) + "\n");
  if (res.report.rate) std::printf("fitted rate %.6g\n", *res.report.rate);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cover-time experiments for expanding maps, rotations and suspension flows"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);

  Common common;
  auto* cover_map = app.add_subcommand("cover-map", "cover times of an interval map");
  auto* cover_rot = app.add_subcommand("cover-rotation", "exact cover times of a circle rotation");
  auto* cover_flow = app.add_subcommand("cover-flow", "cover times of a suspension flow");
  auto* dims = app.add_subcommand("dims", "measure curve and dimension estimates");
  auto* cf = app.add_subcommand("cf", "continued fraction and type estimate");
  auto* mixing = app.add_subcommand("mixing", "psi-mixing report of a symbolic measure");
  for (auto* cmd : {cover_map, cover_rot, cover_flow}) add_common(cmd, common, true);
  for (auto* cmd : {dims, cf, mixing}) add_common(cmd, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    if (*cover_map) return run_cover(common, SystemKind::map);
    if (*cover_rot) return run_cover(common, SystemKind::rotation);
    if (*cover_flow) return run_cover(common, SystemKind::flow);
    if (*dims) return run_dims_cmd(common);
    if (*cf) return run_cf_cmd(common);
    if (*mixing) return run_mixing_cmd(common);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return internal_error;
  }
  return internal_error;
}
