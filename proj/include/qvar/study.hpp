#pragma once

// Config-driven studies: per-level condition reports, exact moments and
// Monte Carlo checks written as CSV/JSON, plus estimation on external paths.
//
// Config file (version 1): one `key = value` per line, `#` starts a comment.
//
//   version    = 1
//   kernel     = fbm:0.6            # bm | fbm:H | subfbm:H | bifbm:H:K | table:<csv>
//   horizon    = 1                  # T
//   scheme     = first:phi=pow:0.2  # see parse_scheme
//   levels     = 64,128,256         # strictly increasing n schedule
//   grid       = uniform            # or perturbed:<cap>:<seed>, used with levels
//   partition  = uniform:64         # single level instead of levels
//   replicates = 2000               # 0 disables Monte Carlo
//   seed       = 1
//   out        = results
//   format     = csv,json
//
// Precedence: command-line flags > config file > built-in defaults.
// Every output file is computed in memory first and written only once all
// levels succeeded, so failures leave no partial output.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qvar/detail/csv.hpp"
#include "qvar/error.hpp"
#include "qvar/estimators.hpp"
#include "qvar/kernels.hpp"
#include "qvar/limits.hpp"
#include "qvar/montecarlo.hpp"
#include "qvar/partitions.hpp"
#include "qvar/schemes.hpp"
#include "qvar/spectral.hpp"

namespace qvar {

inline constexpr std::string_view kToolVersion = "1.0.0";
inline constexpr int kConfigVersion = 1;

struct StudyConfig {
  std::string kernel = "bm";
  double horizon = 1.0;
  std::string scheme = "first:phi=one";
  std::vector<std::size_t> levels;
  std::string grid = "uniform";
  std::string partition;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string out = ".";
  bool write_csv = true;
  bool write_json = true;
};

/// Failure at a particular schedule level; the CLI reports it verbatim.
class level_error : public error {
 public:
  level_error(std::size_t level, const std::string& what, bool numerical)
      : error("level n=" + std::to_string(level) + ": " + what), level_(level), numerical_(numerical) {}
  std::size_t level() const noexcept { return level_; }
  bool numerical() const noexcept { return numerical_; }

 private:
  std::size_t level_;
  bool numerical_;
};

namespace detail {

inline std::uint64_t parse_uint(std::string_view text, std::string_view key) {
  const auto f = trim(text);
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (f.empty() || ec != std::errc() || end != f.data() + f.size()) {
    throw config_error(std::string(key) + ": expected a non-negative integer");
  }
  return v;
}

inline std::vector<std::size_t> parse_levels(std::string_view text) {
  std::vector<std::size_t> out;
  for (auto f : split(text, ',')) {
    const auto v = parse_uint(f, "levels");
    if (v < 1) throw config_error("levels: '" + std::string(f) + "' is not a positive integer");
    out.push_back(static_cast<std::size_t>(v));
  }
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (!(out[i] > out[i - 1])) throw config_error("levels must be strictly increasing");
  }
  return out;
}

// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Applies one `key = value` setting. Unknown keys are configuration errors.
inline void apply_setting(StudyConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "version") {
    if (detail::parse_uint(value, key) != static_cast<std::uint64_t>(kConfigVersion)) throw config_error("unsupported config version");
  } else if (key == "kernel") {
    cfg.kernel = value;
  } else if (key == "horizon") {
    cfg.horizon = detail::parse_double(value, "horizon");
  } else if (key == "scheme") {
    cfg.scheme = value;
  } else if (key == "levels") {
    cfg.levels = detail::parse_levels(value);
  } else if (key == "grid") {
    cfg.grid = value;
  } else if (key == "partition") {
    cfg.partition = value;
  } else if (key == "replicates") {
    cfg.replicates = detail::parse_uint(value, key);
  } else if (key == "seed") {
    cfg.seed = detail::parse_uint(value, key);
  } else if (key == "workers") {
    cfg.workers = static_cast<unsigned>(std::max<std::uint64_t>(1, detail::parse_uint(value, key)));
  } else if (key == "out") {
    cfg.out = value;
  } else if (key == "format") {
    cfg.write_csv = cfg.write_json = false;
    for (auto f : detail::split(value, ',')) {
      if (f == "csv") cfg.write_csv = true;
      else if (f == "json") cfg.write_json = true;
      else throw config_error("format: unknown output format '" + std::string(f) + "'");
    }
  } else {
    throw config_error("unknown config key '" + std::string(key) + "'");
  }
}

inline StudyConfig parse_study_config(const std::vector<std::string>& lines, StudyConfig cfg = {}) {
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    line = detail::trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw config_error("config line " + std::to_string(i + 1) + ": expected key = value");
    apply_setting(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return cfg;
}

inline StudyConfig load_study_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return parse_study_config(lines);
}

/// Canonical text form; its hash identifies a configuration in the manifest.
inline std::string canonical(const StudyConfig& c) {
  std::vector<double> lv(c.levels.begin(), c.levels.end());
  std::string s;
  s += "format=" + std::string(c.write_csv ? "csv" : "") + (c.write_csv && c.write_json ? "," : "") + (c.write_json ? "json" : "") + "\n";
  s += "grid=" + c.grid + "\n";
  s += "horizon=" + detail::format_double(c.horizon) + "\n";
  s += "kernel=" + c.kernel + "\n";
  s += "levels=" + detail::join(lv) + "\n";
  s += "partition=" + c.partition + "\n";
  s += "replicates=" + std::to_string(c.replicates) + "\n";
  s += "scheme=" + c.scheme + "\n";
  s += "seed=" + std::to_string(c.seed) + "\n";
  s += "version=" + std::to_string(kConfigVersion) + "\n";
  return s;
}

struct StudyLevel {
  std::size_t n = 0;
  Partition partition;
};

/// Resolves the schedule into concrete partitions; throws config errors.
inline std::vector<StudyLevel> resolve_levels(const StudyConfig& c) {
  std::vector<StudyLevel> out;
  if (!c.levels.empty()) {
    if (!c.partition.empty()) throw config_error("give either levels or partition, not both");
    for (std::size_t n : c.levels) {
      std::string spec;
      if (c.grid == "uniform") {
        spec = "uniform:" + std::to_string(n);
      } else if (c.grid.starts_with("perturbed:")) {
        spec = "perturbed:" + std::to_string(n) + c.grid.substr(9);
      } else {
        throw config_error("grid must be 'uniform' or 'perturbed:<cap>:<seed>'");
      }
      out.push_back({n, parse_partition(spec, c.horizon)});
    }
  } else if (!c.partition.empty()) {
    auto p = parse_partition(c.partition, c.horizon);
    out.push_back({p.steps(), std::move(p)});
  } else {
    throw config_error("config needs either levels or partition");
  }
  return out;
}

struct StudyOutput {
  std::vector<ConditionReport> conditions;
  nlohmann::ordered_json moments = nlohmann::ordered_json::array();
  nlohmann::ordered_json mc = nlohmann::ordered_json::array();
  std::optional<AsClassification> classification;
};

/// Pure computation of a study, no file output.
inline StudyOutput compute_study(const StudyConfig& c) {
  KernelSpec kernel = [&] {
    try {
      return parse_kernel(c.kernel, c.horizon);
    } catch (const data_error& e) {
      throw config_error(e.what());
    }
  }();
  const auto scheme = parse_scheme(c.scheme);
  const auto levels = resolve_levels(c);

  StudyOutput out;
  std::vector<std::size_t> ns;
  std::vector<double> spectral;
  for (const auto& lvl : levels) {
    try {
      const auto g = build_gamma(scheme, lvl.partition, kernel);
      const auto eigs = eigenvalues(g);
      const auto nr = norms(g, eigs);
      const auto mr = qv_moments(g, eigs);
      out.conditions.push_back(condition_report(lvl.n, g));
      auto mj = to_json(nr, mr);
      mj["n"] = lvl.n;
      out.moments.push_back(std::move(mj));
      ns.push_back(lvl.n);
      spectral.push_back(nr.spectral);
      if (c.replicates > 0) {
        McConfig mc;
        mc.replicates = c.replicates;
        mc.seed = c.seed;
        mc.workers = c.workers;
        const auto vs = sample_v_replicates(g, mc);
        auto rj = to_json(empirical_stats(vs, mr.mean_vn, std::sqrt(mr.var_vn)));
        rj["n"] = lvl.n;
        rj["raw_mean"] = [&] {
          double s = 0.0;
          for (double v : vs) s += v;
          return s / static_cast<double>(vs.size());
        }();
        out.mc.push_back(std::move(rj));
      }
    } catch (const not_psd_error& e) {
      throw level_error(lvl.n, e.what(), true);
    } catch (const degenerate_error& e) {
      throw level_error(lvl.n, e.what(), true);
    } catch (const data_error& e) {
      throw level_error(lvl.n, e.what(), true);
    } catch (const usage_error& e) {
      throw level_error(lvl.n, e.what(), false);
    } catch (const domain_error& e) {
      throw level_error(lvl.n, e.what(), false);
    }
  }
  if (ns.size() >= 2 && ns.front() >= 2) out.classification = as_classify_spectral(ns, spectral);
  return out;
}

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw usage_error("cannot write '" + p.string() + "'");
  f << content;
}

}  // namespace detail

/// Runs the study and writes its files into c.out. Returns the written paths.
inline std::vector<std::filesystem::path> run_study(const StudyConfig& c) {
  const auto result = compute_study(c);

  std::vector<std::pair<std::string, std::string>> files;
  if (c.write_csv) {
    std::string csv(kConditionCsvHeader);
    csv += '\n';
    for (const auto& r : result.conditions) csv += to_csv_row(r) + '\n';
    files.emplace_back("conditions.csv", csv);
  }
  if (c.write_json) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : result.conditions) arr.push_back(to_json(r));
    files.emplace_back("conditions.json", arr.dump(2) + "\n");
  }
  files.emplace_back("moments.json", result.moments.dump(2) + "\n");
  if (c.replicates > 0) files.emplace_back("mc.json", result.mc.dump(2) + "\n");
  if (result.classification) {
    nlohmann::ordered_json cj;
    cj["verdict"] = std::string(to_string(result.classification->verdict));
    auto lv = nlohmann::ordered_json::array();
    for (const auto& l : result.classification->levels) {
      lv.push_back({{"n", l.n}, {"spectral", l.spectral}, {"spectral_logn", l.spectral_logn}});
    }
    cj["levels"] = lv;
    files.emplace_back("classification.json", cj.dump(2) + "\n");
  }

  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(detail::fnv1a(canonical(c))));
  nlohmann::ordered_json manifest;
  manifest["tool"] = "qvar";
  manifest["version"] = std::string(kToolVersion);
  manifest["config_version"] = kConfigVersion;
  manifest["config_hash"] = std::string(hash);
  manifest["seed"] = c.seed;
  manifest["config"] = canonical(c);
  auto names = nlohmann::ordered_json::array();
  for (const auto& f : files) names.push_back(f.first);
  manifest["files"] = names;
  files.emplace_back("manifest.json", manifest.dump(2) + "\n");

  std::filesystem::create_directories(c.out);
  std::vector<std::filesystem::path> written;
  for (const auto& [name, content] : files) {
    const auto p = std::filesystem::path(c.out) / name;
    detail::write_file(p, content);
    written.push_back(p);
  }
  return written;
}

// ---------------------------------------------------------------------------
// Estimation on external data
// ---------------------------------------------------------------------------

struct EstimateOptions {
  std::string path_csv;
  std::string scheme = "first:phi=one";
  std::string partition;                // realized statistic on this partition
  double alpha = 2.0;
  std::vector<std::size_t> levels;      // Hurst regression levels
  std::string kernel;                   // optional normalization kernel
  double horizon = 1.0;
};

inline nlohmann::ordered_json run_estimate(const EstimateOptions& o) {
  const auto path = load_path_csv(o.path_csv);
  const auto scheme = parse_scheme(o.scheme);
  std::optional<KernelSpec> kernel;
  if (!o.kernel.empty()) kernel = parse_kernel(o.kernel, o.horizon);

  nlohmann::ordered_json out;
  out["scheme"] = describe(scheme);
  if (!o.partition.empty()) {
    const auto p = parse_partition(o.partition, path.times.back());
    out["alpha"] = o.alpha;
    out["realized_stat"] = realized_stat(path, scheme, p, o.alpha, kernel ? &*kernel : nullptr);
  }
  if (!o.levels.empty()) out["hurst"] = to_json(hurst_estimate(path, o.levels, scheme));
  if (out.size() == 1) throw usage_error("estimate needs --partition and/or --levels");
  return out;
}

}  // namespace qvar
