#include "uwauth/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "json.hpp"
#include "uwauth/error.hpp"

#ifndef UWAUTH_VERSION
#define UWAUTH_VERSION "unknown"
#endif

namespace uwauth::experiment {
namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

bool is_montecarlo(const sim::ErrorRateCurve& c) { return c.source == "montecarlo"; }

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << body;
  f.close();
  if (!f) throw IoError("failed writing " + path.string());
}

// Groups curves by family, keeping first-seen order.
std::vector<std::pair<std::string, std::vector<sim::ErrorRateCurve>>> by_family(
    const std::vector<sim::ErrorRateCurve>& curves) {
  std::vector<std::pair<std::string, std::vector<sim::ErrorRateCurve>>> out;
  for (const auto& c : curves) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == c.family; });
    if (it == out.end()) {
      out.emplace_back(c.family, std::vector<sim::ErrorRateCurve>{});
      it = std::prev(out.end());
    }
    it->second.push_back(c);
  }
  return out;
}

std::vector<fs::path> write_families(const std::vector<sim::ErrorRateCurve>& curves, const fs::path& dir,
                                     const std::string& prefix, const std::string& config_json,
                                     const std::string& format) {
  std::vector<fs::path> files;
  for (const auto& [family, group] : by_family(curves)) {
    const bool json = format == "json";
    const fs::path path = dir / (prefix + family + (json ? ".json" : ".csv"));
    write_file(path, json ? format_json(group, config_json) : format_csv(group, config_json));
    files.push_back(path);
  }
  return files;
}

fs::path write_manifest(const fs::path& dir, const char* command, const config::ExperimentConfig& cfg,
                        const RunOptions& opts, double wall, const std::vector<fs::path>& files) {
  Json m;
  m["command"] = command;
  m["version"] = version();
  m["seed"] = cfg.experiment.plan.seed;
  m["workers"] = opts.workers;
  m["wall_time_s"] = wall;
  m["config"] = Json::parse(config::to_json(cfg));
  m["conversions"] = cfg.conversions;
  Json list = Json::array();
  for (const auto& f : files) list.push_back(f.filename().string());
  m["files"] = list;
  const fs::path path = dir / (std::string(command) == "simulate" ? "manifest.json"
                                                                  : std::string(command) + "_manifest.json");
  write_file(path, m.dump(2) + "\n");
  return path;
}

void log_conversions(const config::ExperimentConfig& cfg, const RunOptions& opts) {
  if (!opts.log) return;
  for (const auto& line : cfg.conversions) *opts.log << "resolved " << line << "\n";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

sim::Simulator::Progress progress_to(std::ostream* log, const sim::Experiment& exp) {
  if (!log) return {};
  return [log, &exp](std::size_t i, const sim::SweepPoint& p) {
    *log << "snr " << num(exp.plan.snr_grid_db[i]) << " dB: " << p.n_trials << " trials, " << p.flags
         << " flagged\n";
  };
}

}  // namespace

std::string version() { return UWAUTH_VERSION; }

std::string format_csv(const std::vector<sim::ErrorRateCurve>& curves, const std::string& config_json) {
  std::string out = "# config=" + config_json + "\n" + kCsvHeader + "\n";
  for (const auto& c : curves) {
    const bool mc = is_montecarlo(c);
    for (const auto& p : c.points) {
      out += c.scenario_id + "," + c.source + "," + c.test + "," + c.fusion + "," + num(p.snr_db) + ",";
      out += opt(p.p_fa) + "," + opt(p.p_fa_ci) + "," + opt(p.p_md) + "," + opt(p.p_md_ci) + ",";
      out += opt(p.p_mc) + "," + opt(p.p_mc_ci) + ",";
      out += mc ? std::to_string(p.n_trials) + "," + std::to_string(p.flags) : std::string(",");
      out += "\n";
    }
  }
  return out;
}

std::string format_json(const std::vector<sim::ErrorRateCurve>& curves, const std::string& config_json) {
  Json doc;
  doc["config"] = Json::parse(config_json);
  Json rows = Json::array();
  for (const auto& c : curves) {
    const bool mc = is_montecarlo(c);
    for (const auto& p : c.points) {
      Json r;
      r["scenario_id"] = c.scenario_id;
      r["source"] = c.source;
      r["test"] = c.test;
      r["fusion"] = c.fusion;
      r["snr_db"] = p.snr_db;
      r["p_fa"] = opt_json(p.p_fa);
      r["p_fa_ci"] = opt_json(p.p_fa_ci);
      r["p_md"] = opt_json(p.p_md);
      r["p_md_ci"] = opt_json(p.p_md_ci);
      r["p_mc"] = opt_json(p.p_mc);
      r["p_mc_ci"] = opt_json(p.p_mc_ci);
      r["n_trials"] = mc ? Json(p.n_trials) : Json(nullptr);
      r["flags"] = mc ? Json(p.flags) : Json(nullptr);
      if (p.log_p_fa) r["log_p_fa"] = *p.log_p_fa;
      if (p.log_p_md) r["log_p_md"] = *p.log_p_md;
      rows.push_back(r);
    }
  }
  doc["rows"] = rows;
  return doc.dump(2) + "\n";
}

void ensure_writable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("output directory " + dir.string() + " cannot be created");
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw IoError("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

config::ExperimentConfig effective(config::ExperimentConfig cfg, const RunOptions& opts) {
  if (opts.seed) cfg.experiment.plan.seed = *opts.seed;
  if (opts.format != "csv" && opts.format != "json") {
    throw ValidationError("--format: unknown value '" + opts.format + "' (expected csv|json)");
  }
  return cfg;
}

RunResult cmd_simulate(const config::ExperimentConfig& in, const RunOptions& opts) {
  const auto cfg = effective(in, opts);
  ensure_writable(opts.out);
  log_conversions(cfg, opts);
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  const sim::Simulator simulator(cfg.experiment);
  res.sweep = simulator.run_sweep(opts.workers, progress_to(opts.log, cfg.experiment));
  res.curves = simulator.curves(res.sweep);
  res.wall_seconds = seconds_since(t0);
  const auto config_json = config::to_json(cfg);
  res.files = write_families(res.curves, opts.out, "", config_json, opts.format);
  res.files.push_back(write_manifest(opts.out, "simulate", cfg, opts, res.wall_seconds, res.files));
  return res;
}

RunResult cmd_analytic(const config::ExperimentConfig& in, const RunOptions& opts) {
  const auto cfg = effective(in, opts);
  ensure_writable(opts.out);
  log_conversions(cfg, opts);
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  res.curves = sim::analytic_curves(cfg.experiment, opts.inject_sigma_scale);
  res.wall_seconds = seconds_since(t0);
  const auto config_json = config::to_json(cfg);
  res.files = write_families(res.curves, opts.out, "analytic_", config_json, opts.format);
  res.files.push_back(write_manifest(opts.out, "analytic", cfg, opts, res.wall_seconds, res.files));
  return res;
}

ValidationReport cmd_validate(const config::ExperimentConfig& in, const RunOptions& opts) {
  const auto cfg = effective(in, opts);
  ensure_writable(opts.out);
  log_conversions(cfg, opts);
  const auto& exp = cfg.experiment;
  const sim::Simulator simulator(exp);
  const auto sweep = simulator.run_sweep(opts.workers, progress_to(opts.log, exp));
  const auto mc = simulator.curves(sweep);
  const auto an = sim::analytic_curves(exp, opts.inject_sigma_scale);

  ValidationReport rep;
  rep.records = sweep.total_records;
  rep.inclusion_violations = sweep.total_inclusion_violations;

  // Waveform ranging reads distance on a sample grid; once the grid step
  // is a sizeable fraction of the predicted spread the Gaussian model
  // no longer describes the measurement.
  std::vector<std::string> gate(exp.plan.snr_grid_db.size());
  if (exp.plan.channel_mode == sim::ChannelMode::kColoredWaveform) {
    const double step = 0.5 * kSoundSpeed * exp.colored.t_s_sample / std::sqrt(12.0);
    for (std::size_t i = 0; i < gate.size(); ++i) {
      const auto ctx = sim::analytic_context(exp, exp.plan.snr_grid_db[i], simulator.fisher_quad(),
                                             opts.inject_sigma_scale);
      double smin = ctx.sigma_d.alice.front();
      for (double s : ctx.sigma_d.alice) smin = std::min(smin, s);
      if (step >= 0.1 * smin) gate[i] = "range quantization " + num(step) + " m >= 0.1 sigma_d " + num(smin) + " m";
    }
  }

  for (const auto& a : an) {
    if (a.source != "analytic") continue;
    for (const auto& m : mc) {
      if (m.test != a.test || m.fusion != a.fusion) continue;
      auto part = sim::compare_mc_analytic(m, a);
      for (auto& row : part.rows) {
        for (std::size_t i = 0; i < gate.size(); ++i) {
          if (exp.plan.snr_grid_db[i] == row.snr_db && !gate[i].empty()) {
            row.gated = true;
            row.reason = gate[i];
            if (row.flagged) --part.flags;
            row.flagged = false;
          }
        }
        rep.comparison.rows.push_back(row);
      }
      rep.comparison.flags += part.flags;
    }
  }

  std::string body = "# config=" + config::to_json(cfg) + "\n";
  body += "test,fusion,rate,snr_db,n,k,p_montecarlo,p_analytic,allowed_dev,verdict,note\n";
  for (const auto& r : rep.comparison.rows) {
    body += r.test + "," + r.fusion + "," + r.rate + "," + num(r.snr_db) + "," + std::to_string(r.n) + "," +
            std::to_string(r.k) + "," + num(r.p_montecarlo) + "," + num(r.p_analytic) + "," + num(r.threshold) +
            "," + (r.gated ? "gated" : r.flagged ? "FAIL" : "pass") + "," + r.reason + "\n";
  }
  const fs::path path = opts.out / "validation.csv";
  write_file(path, body);
  rep.files.push_back(path);
  return rep;
}

std::vector<fs::path> emit_scenarios(const fs::path& dir) {
  ensure_writable(dir);
  std::vector<fs::path> files;
  for (const auto& [name, cfg] : config::scenario_presets()) {
    const fs::path path = dir / (name + ".json");
    write_file(path, config::to_json(cfg, 2) + "\n");
    files.push_back(path);
  }
  return files;
}

void print_report(std::ostream& os, const ValidationReport& rep) {
  char line[256];
  std::snprintf(line, sizeof line, "%-15s %-5s %-6s %8s %10s %14s %14s %8s\n", "test", "rule", "rate", "snr_db", "n",
                "montecarlo", "analytic", "verdict");
  os << line;
  for (const auto& r : rep.comparison.rows) {
    std::snprintf(line, sizeof line, "%-15s %-5s %-6s %8.3g %10llu %14.6g %14.6g %8s\n", r.test.c_str(),
                  r.fusion.c_str(), r.rate.c_str(), r.snr_db, static_cast<unsigned long long>(r.n), r.p_montecarlo,
                  r.p_analytic, r.gated ? "gated" : r.flagged ? "FAIL" : "pass");
    os << line;
  }
  os << "records " << rep.records << ", fusion inclusion violations " << rep.inclusion_violations << ", flags "
     << rep.comparison.flags << " -> " << (rep.pass() ? "PASS" : "FAIL") << "\n";
}

}  // namespace uwauth::experiment
