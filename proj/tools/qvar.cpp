// qvar: command-line front end.
//
//   qvar gamma    --kernel fbm:0.6 --scheme first:phi=pow:0.2 --partition uniform:64
//   qvar moments  --kernel ... --scheme ... --partition ...
//   qvar check    --kernel ... --scheme ... --levels 64,128,256 [--format csv|json]
//   qvar mc       --kernel ... --scheme ... --partition ... --replicates 10000 --seed 1
//   qvar study    --config study.cfg [overrides]
//   qvar estimate --path path.csv [--partition ...] [--alpha 2] [--levels ...]
//
// Exit codes: 0 success, 2 configuration/usage/data errors, 3 numerical
// failures (not PSD, degenerate variance). QVAR_OUT_DIR sets the default
// output directory for `study`.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "qvar/study.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string kernel = "bm";
  double horizon = 1.0;
  std::string scheme = "first:phi=one";
  std::string partition;
  std::string levels;
  std::string grid = "uniform";
  std::size_t replicates = 10000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string out;
  std::string format = "csv";
};

void add_model_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--kernel", c.kernel, "bm | fbm:H | subfbm:H | bifbm:H:K | table:<csv>");
  cmd->add_option("--horizon", c.horizon, "time horizon T");
  cmd->add_option("--scheme", c.scheme, "first:phi=one | first:phi=pow:<g> | first:phi=table:<csv> | begyn2 | gen-a:<a0,..,ap>[:<step>]");
}

// Writes to --out if given, else stdout.
void emit(const Common& c, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(c.out, std::ios::binary);
  if (!f) throw qvar::usage_error("cannot write '" + c.out + "'");
  f << text;
}

qvar::Partition single_partition(const Common& c) {
  if (c.partition.empty()) throw qvar::usage_error("--partition is required");
  return qvar::parse_partition(c.partition, c.horizon);
}

int run_gamma(const Common& c) {
  const auto k = qvar::parse_kernel(c.kernel, c.horizon);
  emit(c, qvar::to_csv(qvar::build_gamma(qvar::parse_scheme(c.scheme), single_partition(c), k)));
  return 0;
}

int run_moments(const Common& c) {
  const auto k = qvar::parse_kernel(c.kernel, c.horizon);
  const auto g = qvar::build_gamma(qvar::parse_scheme(c.scheme), single_partition(c), k);
  const auto eigs = qvar::eigenvalues(g);
  emit(c, qvar::to_json(qvar::norms(g, eigs), qvar::qv_moments(g, eigs)).dump(2) + "\n");
  return 0;
}

int run_check(const Common& c) {
  qvar::StudyConfig cfg;
  cfg.kernel = c.kernel;
  cfg.horizon = c.horizon;
  cfg.scheme = c.scheme;
  cfg.grid = c.grid;
  if (!c.levels.empty()) cfg.levels = qvar::detail::parse_levels(c.levels);
  cfg.partition = c.partition;
  const auto result = qvar::compute_study(cfg);
  if (c.format == "json") {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : result.conditions) arr.push_back(qvar::to_json(r));
    nlohmann::ordered_json doc;
    doc["conditions"] = arr;
    if (result.classification) doc["as_verdict"] = std::string(qvar::to_string(result.classification->verdict));
    emit(c, doc.dump(2) + "\n");
  } else {
    std::string csv(qvar::kConditionCsvHeader);
    csv += '\n';
    for (const auto& r : result.conditions) csv += qvar::to_csv_row(r) + '\n';
    emit(c, csv);
  }
  return 0;
}

int run_mc(const Common& c, const std::string& dump) {
  const auto k = qvar::parse_kernel(c.kernel, c.horizon);
  const auto g = qvar::build_gamma(qvar::parse_scheme(c.scheme), single_partition(c), k);
  const auto m = qvar::qv_moments(g);
  qvar::McConfig mc;
  mc.replicates = c.replicates;
  mc.seed = c.seed;
  mc.workers = c.workers;
  const auto vs = qvar::sample_v_replicates(g, mc);
  if (!dump.empty()) {
    std::ofstream f(dump, std::ios::binary);
    f << qvar::replicates_csv(vs);
  }
  auto doc = qvar::to_json(qvar::empirical_stats(vs, m.mean_vn, std::sqrt(m.var_vn)));
  doc["var_vn"] = m.var_vn;
  doc["mean_vn"] = m.mean_vn;
  emit(c, doc.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quadratic variations of Gaussian sequences: exact conditions and Monte Carlo checks"};
  app.require_subcommand(1);
  app.footer("Environment: QVAR_OUT_DIR is the default output directory for `study`.\n"
             "Exit codes: 0 ok, 2 configuration/usage/data error, 3 numerical failure.");
  Common c;

  auto* gamma = app.add_subcommand("gamma", "print the covariance matrix of Y^n as CSV");
  add_model_flags(gamma, c);
  gamma->add_option("--partition", c.partition, "uniform:n | perturbed:n:cap:seed | file:<path>")->required();
  gamma->add_option("--out", c.out, "output file (default stdout)");

  auto* moments = app.add_subcommand("moments", "norms and exact moments of V_n as JSON");
  add_model_flags(moments, c);
  moments->add_option("--partition", c.partition, "partition spec")->required();
  moments->add_option("--out", c.out, "output file (default stdout)");

  auto* check = app.add_subcommand("check", "condition report per level");
  add_model_flags(check, c);
  check->add_option("--levels", c.levels, "comma separated, strictly increasing n");
  check->add_option("--grid", c.grid, "uniform | perturbed:<cap>:<seed>");
  check->add_option("--partition", c.partition, "single partition instead of levels");
  check->add_option("--format", c.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  check->add_option("--out", c.out, "output file (default stdout)");

  std::string dump;
  auto* mc = app.add_subcommand("mc", "Monte Carlo replicates of V_n");
  add_model_flags(mc, c);
  mc->add_option("--partition", c.partition, "partition spec")->required();
  mc->add_option("--replicates", c.replicates, "number of replicates");
  mc->add_option("--seed", c.seed, "64-bit seed");
  mc->add_option("--workers", c.workers, "worker threads (results do not depend on it)");
  mc->add_option("--dump-replicates", dump, "write raw V_n replicates to this CSV");
  mc->add_option("--out", c.out, "output file (default stdout)");

  std::string config_path;
  auto* study = app.add_subcommand("study", "run a configured study and write CSV/JSON files");
  study->add_option("--config", config_path, "key = value config file")->required();
  std::optional<std::string> o_kernel, o_scheme, o_levels, o_partition, o_out, o_format, o_grid;
  std::optional<double> o_horizon;
  std::optional<std::size_t> o_replicates;
  std::optional<std::uint64_t> o_seed;
  std::optional<unsigned> o_workers;
  study->add_option("--kernel", o_kernel, "override kernel");
  study->add_option("--horizon", o_horizon, "override horizon");
  study->add_option("--scheme", o_scheme, "override scheme");
  study->add_option("--levels", o_levels, "override levels");
  study->add_option("--grid", o_grid, "override grid");
  study->add_option("--partition", o_partition, "override partition");
  study->add_option("--replicates", o_replicates, "override replicates");
  study->add_option("--seed", o_seed, "override seed");
  study->add_option("--workers", o_workers, "override worker count");
  study->add_option("--out", o_out, "override output directory");
  study->add_option("--format", o_format, "override formats (csv,json)");

  qvar::EstimateOptions est;
  std::string est_levels;
  auto* estimate = app.add_subcommand("estimate", "realized statistics and Hurst estimate of an observed path");
  estimate->add_option("--path", est.path_csv, "CSV with header time,value")->required();
  estimate->add_option("--scheme", est.scheme, "difference scheme");
  estimate->add_option("--partition", est.partition, "partition for the realized statistic");
  estimate->add_option("--alpha", est.alpha, "exponent alpha >= 1");
  estimate->add_option("--levels", est_levels, "levels for the Hurst regression");
  estimate->add_option("--kernel", est.kernel, "kernel for E(ΔX)² normalization");
  estimate->add_option("--horizon", est.horizon, "kernel horizon");
  estimate->add_option("--out", c.out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gamma) return run_gamma(c);
    if (*moments) return run_moments(c);
    if (*check) return run_check(c);
    if (*mc) return run_mc(c, dump);
    if (*study) {
      auto cfg = qvar::load_study_config(config_path);
      if (const char* env = std::getenv("QVAR_OUT_DIR"); env && cfg.out == ".") cfg.out = env;
      if (o_kernel) cfg.kernel = *o_kernel;
      if (o_horizon) cfg.horizon = *o_horizon;
      if (o_scheme) cfg.scheme = *o_scheme;
      if (o_levels) qvar::apply_setting(cfg, "levels", *o_levels);
      if (o_grid) cfg.grid = *o_grid;
      if (o_partition) cfg.partition = *o_partition;
      if (o_replicates) cfg.replicates = *o_replicates;
      if (o_seed) cfg.seed = *o_seed;
      if (o_workers) cfg.workers = *o_workers;
      if (o_out) cfg.out = *o_out;
      if (o_format) qvar::apply_setting(cfg, "format", *o_format);
      for (const auto& p : qvar::run_study(cfg)) std::cout << p.string() << "\n";
      return 0;
    }
    if (*estimate) {
      if (!est_levels.empty()) est.levels = qvar::detail::parse_levels(est_levels);
      emit(c, qvar::run_estimate(est).dump(2) + "\n");
      return 0;
    }
  } catch (const qvar::level_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.numerical() ? kExitNumerical : kExitConfig;
  } catch (const qvar::not_psd_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const qvar::degenerate_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const qvar::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
