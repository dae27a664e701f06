// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Tolerances, schedules and seeds are pinned below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "oracles.hpp"
#include "schema.hpp"
#include "qvar/estimators.hpp"
#include "qvar/limits.hpp"
#include "qvar/montecarlo.hpp"
#include "qvar/study.hpp"

using namespace qvar;

namespace {

// Criterion 1
constexpr int kOracleMatrices = 50;
constexpr double kOracleVarRel = 1e-12;
constexpr double kOracleFourthRel = 1e-10;
constexpr std::uint64_t kOracleSeed = 20240101;
// Criterion 2
constexpr double kBrownianExact = 1e-14;
// Criterion 3
constexpr double kEnergyExact = 1e-12;
constexpr std::uint64_t kEnergySeed = 31415;
// Criteria 4, 5, 7
constexpr unsigned kSlopeJmin = 6, kSlopeJmax = 12;
constexpr unsigned kBeJmin = 7, kBeJmax = 12;
constexpr double kCltSlopeMax = -0.5;
constexpr double kLongMemorySlopeMin = -0.1;
constexpr double kBeSlopeTol = 0.05;
constexpr std::size_t kMcLevel = 1024;
constexpr std::size_t kMcReplicates = 10000;
constexpr std::uint64_t kMcSeed = 424242;
constexpr double kKsCltMax = 0.03;
constexpr double kKsNonGaussianMin = 0.1;
constexpr double kKsSecondOrderMax = 0.05;
// Criterion 6
constexpr std::size_t kBifbmLevel = 4096;
constexpr double kBifbmEnergyRel = 0.02;
constexpr std::size_t kBifbmReplicates = 1000;
constexpr std::uint64_t kBifbmSeed = 606;
constexpr double kSeBand = 3.0;
constexpr double kUnitKExact = 1e-12;
// Criterion 8
constexpr std::size_t kPlanarMcLevel = 256;
constexpr std::uint64_t kPlanarSeed = 808;
// Criterion 9
constexpr double kHurstExact = 1e-12;
constexpr double kHurstTol = 0.05;
constexpr std::size_t kPathLevel = 4096;
constexpr std::uint64_t kHurstSeeds[] = {9001, 9002, 9003};
constexpr std::size_t kAlphaPaths = 100;
constexpr std::uint64_t kAlphaSeed = 9100;
constexpr double kAlphaRel = 0.02;
// Runtime budgets, seconds
constexpr double kBudget[] = {0, 10, 5, 5, 300, 60, 120, 300, 60, 300, 120};

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void add(Outcome& o, bool ok, const std::string& text) {
  o.pass = o.pass && ok;
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += text;
  if (!ok) o.detail += " [X]";
}

// Condition reports keyed by (scheme, H, n), shared across criteria.
std::map<std::tuple<std::string, double, std::size_t>, ConditionReport> g_reports;

DifferenceScheme scheme_for(const std::string& name, double h) {
  if (name == "begyn2") return SecondOrderBegyn{};
  return first_order_power(2.0 * h - 1.0);
}

const ConditionReport& report(const std::string& scheme, double h, std::size_t n) {
  const auto key = std::make_tuple(scheme, h, n);
  auto it = g_reports.find(key);
  if (it == g_reports.end()) {
    const auto g = build_gamma(scheme_for(scheme, h), make_uniform(n), KernelSpec::fbm(h));
    it = g_reports.emplace(key, condition_report(n, g)).first;
  }
  return it->second;
}

double slope_of(const std::string& scheme, double h, unsigned jmin, unsigned jmax,
                double ConditionReport::*field) {
  std::vector<double> x, y;
  for (std::size_t n : dyadic_levels(jmin, jmax)) {
    x.push_back(double(n));
    y.push_back(report(scheme, h, n).*field);
  }
  return ref::loglog_slope(x, y);
}

McResult mc_normalized(const CovMatrix& g, std::size_t reps, std::uint64_t seed, FactorMethod method = FactorMethod::Eigen) {
  const auto m = qv_moments(g);
  McConfig cfg;
  cfg.replicates = reps;
  cfg.seed = seed;
  cfg.method = method;
  return empirical_stats(sample_v_replicates(g, cfg), m.mean_vn, std::sqrt(m.var_vn));
}

McResult mc_raw(const CovMatrix& g, std::size_t reps, std::uint64_t seed, FactorMethod method = FactorMethod::Eigen) {
  McConfig cfg;
  cfg.replicates = reps;
  cfg.seed = seed;
  cfg.method = method;
  return empirical_stats(sample_v_replicates(g, cfg), 0.0, 1.0);
}

PathSample fbm_path(double h, std::size_t n, std::uint64_t seed) {
  const auto p = make_uniform(n);
  const auto x = sample_paths(h == 0.5 ? KernelSpec::brownian() : KernelSpec::fbm(h), p, 1, seed);
  return PathSample(p.points(), std::vector<double>(x.data(), x.data() + x.rows()));
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  Outcome o;
  std::mt19937_64 rng(kOracleSeed);
  std::uniform_int_distribution<int> dim(1, 6);
  double worst_var = 0.0, worst_fourth = 0.0;
  for (int i = 0; i < kOracleMatrices; ++i) {
    const CovMatrix g(ref::random_psd(rng, dim(rng)));
    const auto m = qv_moments(g);
    const double v = isserlis_oracle(g, 2), f = isserlis_oracle(g, 4);
    worst_var = std::max(worst_var, std::abs(m.var_vn - v) / std::abs(v));
    worst_fourth = std::max(worst_fourth, std::abs(m.fourth_central - f) / std::abs(f));
  }
  add(o, worst_var <= kOracleVarRel, fmt("max rel err var_vn %.2e (tol %.0e)", worst_var, kOracleVarRel));
  add(o, worst_fourth <= kOracleFourthRel, fmt("fourth_central %.2e (tol %.0e)", worst_fourth, kOracleFourthRel));
  const double chi1 = isserlis_oracle(CovMatrix::identity(1), 4);
  add(o, chi1 == 60.0 && qv_moments(CovMatrix::identity(1)).fourth_central == 60.0,
      fmt("chi2_1 fourth central %.17g, trace(G^4) coefficient %.0f", chi1, kFourthTraceCoefficient));
  return o;
}

Outcome criterion2() {
  Outcome o;
  double worst = 0.0;
  std::vector<std::pair<std::size_t, CovMatrix>> sched;
  for (std::size_t n : dyadic_levels(2, 12)) {
    const auto g = build_gamma(FirstOrder{}, make_uniform(n), KernelSpec::brownian());
    const auto r = norms(g);
    const double dn = double(n);
    worst = std::max({worst, std::abs(r.spectral - 1.0 / dn), std::abs(r.one_norm - 1.0 / dn),
                      std::abs(r.frobenius - 1.0 / std::sqrt(dn))});
    sched.emplace_back(n, g);
  }
  add(o, worst <= kBrownianExact, fmt("max |norm - exact| %.2e over n=2^2..2^12 (tol %.0e)", worst, kBrownianExact));
  const auto verdict = as_classify(sched).verdict;
  add(o, verdict == AsVerdict::AsSufficient, "verdict " + std::string(to_string(verdict)));
  return o;
}

Outcome criterion3() {
  Outcome o;
  std::mt19937_64 rng(kEnergySeed);
  std::uniform_real_distribution<double> hu(0.02, 0.98), tu(0.5, 3.0), cu(1.0, 4.0);
  std::uniform_int_distribution<std::size_t> nu(8, 256);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double h = hu(rng);
    for (int j = 0; j < 10; ++j) {
      const double T = tu(rng);
      const std::size_t n = nu(rng);
      const auto p = j % 2 == 0 ? make_uniform(n, T) : make_perturbed(n, T, cu(rng), rng());
      const double e = energy_trace(build_gamma(first_order_power(2 * h - 1), p, KernelSpec::fbm(h, T)));
      worst = std::max(worst, std::abs(e - T) / T);
    }
  }
  add(o, worst <= kEnergyExact, fmt("max |trace - T|/T %.2e over 100 (H, partition) pairs (tol %.0e)", worst, kEnergyExact));
  return o;
}

Outcome criterion4() {
  Outcome o;
  for (double h : {0.3, 0.5, 0.6, 0.7}) {
    const double s = slope_of("first", h, kSlopeJmin, kSlopeJmax, &ConditionReport::clt_ratio);
    add(o, s <= kCltSlopeMax, fmt("H=%.1f slope %.3f (<= %.1f)", h, s, kCltSlopeMax));
  }
  const double s9 = slope_of("first", 0.9, kSlopeJmin, kSlopeJmax, &ConditionReport::clt_ratio);
  add(o, s9 >= kLongMemorySlopeMin, fmt("H=0.9 slope %.3f (>= %.1f)", s9, kLongMemorySlopeMin));
  for (double h : {0.6, 0.9}) {
    const auto g = build_gamma(first_order_power(2 * h - 1), make_uniform(kMcLevel), KernelSpec::fbm(h));
    const double ks = mc_normalized(g, kMcReplicates, kMcSeed).ks_distance;
    const bool ok = h < 0.75 ? ks < kKsCltMax : ks > kKsNonGaussianMin;
    add(o, ok, fmt("KS H=%.1f n=%zu: %.4f (%s %.2f)", h, kMcLevel, ks, h < 0.75 ? "<" : ">", h < 0.75 ? kKsCltMax : kKsNonGaussianMin));
  }
  return o;
}

Outcome criterion5() {
  Outcome o;
  std::string extra;
  for (double h : {0.55, 0.65, 0.7}) {
    const double target = -std::min(0.5, 1.5 - 2.0 * h);
    const double s = slope_of("first", h, kBeJmin, kBeJmax, &ConditionReport::be_quantity);
    add(o, std::abs(s - target) <= kBeSlopeTol, fmt("H=%.2f be_quantity slope %.3f vs %.2f", h, s, target));
    const double sl = slope_of("first", h, kBeJmin, kBeJmax, &ConditionReport::be_lambda_bound);
    extra += fmt(" H=%.2f:%.3f", h, sl);
  }
  o.detail += "; info: sqrt(n)*lambda* slopes" + extra;
  return o;
}

Outcome criterion6() {
  Outcome o;
  const auto p = make_uniform(kBifbmLevel);
  for (auto [h, k] : {std::pair{0.8, 0.5}, std::pair{0.4, 1.5}}) {
    const auto g = build_gamma(first_order_power(2 * h * k - 1), p, KernelSpec::bifbm(h, k));
    const double energy = energy_trace(g);
    const double target = std::pow(2.0, 1.0 - k);
    add(o, std::abs(energy - target) <= kBifbmEnergyRel * target,
        fmt("K=%.1f H=%.1f energy %.5f vs 2^(1-K)=%.5f", k, h, energy, target));
    const auto mc = mc_raw(g, kBifbmReplicates, kBifbmSeed, FactorMethod::Cholesky);
    add(o, std::abs(mc.empirical_mean - energy) <= kSeBand * mc.se_mean,
        fmt("MC mean %.5f (%.1f SE)", mc.empirical_mean, std::abs(mc.empirical_mean - energy) / mc.se_mean));
  }
  double worst = 0.0;
  for (double h : {0.3, 0.6, 0.8}) {
    const auto pu = make_uniform(256);
    const auto gb = build_gamma(first_order_power(2 * h - 1), pu, KernelSpec::bifbm(h, 1.0));
    const auto gf = build_gamma(first_order_power(2 * h - 1), pu, KernelSpec::fbm(h));
    worst = std::max(worst, (gb.matrix() - gf.matrix()).cwiseAbs().maxCoeff());
    const auto rb = condition_report(256, gb), rf = condition_report(256, gf);
    for (auto f : {&ConditionReport::energy, &ConditionReport::planar_nn, &ConditionReport::clt_ratio, &ConditionReport::be_quantity}) {
      worst = std::max(worst, std::abs(rb.*f - rf.*f) / std::max(1.0, std::abs(rf.*f)));
    }
  }
  add(o, worst <= kUnitKExact, fmt("K=1 vs fBm max diff %.2e", worst));
  return o;
}

Outcome criterion7() {
  Outcome o;
  const double s_first = slope_of("first", 0.9, kSlopeJmin, kSlopeJmax, &ConditionReport::clt_ratio);
  add(o, s_first >= kLongMemorySlopeMin, fmt("first-order slope %.3f", s_first));
  const double s_second = slope_of("begyn2", 0.9, kSlopeJmin, kSlopeJmax, &ConditionReport::clt_ratio);
  add(o, s_second <= kCltSlopeMax, fmt("second-order slope %.3f", s_second));
  const auto g = build_gamma(SecondOrderBegyn{}, make_uniform(kMcLevel), KernelSpec::fbm(0.9));
  const double ks = mc_normalized(g, kMcReplicates, kMcSeed).ks_distance;
  add(o, ks < kKsSecondOrderMax, fmt("KS second-order n=%zu: %.4f", kMcLevel, ks));
  return o;
}

Outcome criterion8() {
  Outcome o;
  double worst = 0.0;
  for (std::size_t n : dyadic_levels(1, 10)) {
    const auto p = make_uniform(n);
    worst = std::max(worst, std::abs(planar_variation(FirstOrder{}, KernelSpec::brownian(), p, p) - 1.0 / double(n)));
  }
  add(o, worst <= kBrownianExact, fmt("max |planar - 1/n| %.2e", worst));
  const auto g = build_gamma(FirstOrder{}, make_uniform(kPlanarMcLevel), KernelSpec::brownian());
  const auto mc = mc_raw(g, kMcReplicates, kPlanarSeed);
  const double target = 2.0 / double(kPlanarMcLevel);
  add(o, std::abs(mc.empirical_var - target) <= kSeBand * mc.se_var,
      fmt("MC var %.6f vs 2/n %.6f (%.1f SE)", mc.empirical_var, target, std::abs(mc.empirical_var - target) / mc.se_var));
  return o;
}

Outcome criterion9() {
  Outcome o;
  double worst = 0.0;
  for (double h0 : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    std::vector<std::size_t> levels = dyadic_levels(4, 12);
    std::vector<double> stats;
    for (auto n : levels) stats.push_back(std::pow(double(n), 1.0 - 2.0 * h0));
    worst = std::max(worst, std::abs(fit_hurst(levels, stats).hurst - h0));
  }
  add(o, worst <= kHurstExact, fmt("synthetic max err %.1e", worst));
  const auto levels = dyadic_levels(8, 12);
  const double hs[] = {0.3, 0.5, 0.7};
  for (int i = 0; i < 3; ++i) {
    const double est = hurst_estimate(fbm_path(hs[i], kPathLevel, kHurstSeeds[i]), levels, FirstOrder{}).hurst;
    add(o, std::abs(est - hs[i]) <= kHurstTol, fmt("H=%.1f seed %llu: %.4f", hs[i], (unsigned long long)kHurstSeeds[i], est));
  }
  const auto p = make_uniform(kPathLevel);
  for (double h : {0.4, 0.6}) {
    const auto x = sample_paths(KernelSpec::fbm(h), p, kAlphaPaths, kAlphaSeed);
    double mean = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const PathSample path(p.points(), std::vector<double>(x.col(c).data(), x.col(c).data() + x.rows()));
      mean += realized_stat(path, FirstOrder{}, p, 1.0 / h);
    }
    mean /= double(kAlphaPaths);
    const double target = alpha_limit_constant(h);
    add(o, std::abs(mean - target) <= kAlphaRel * target, fmt("alpha=1/%.1f mean %.4f vs C_H*T %.4f", h, mean, target));
  }
  return o;
}

Outcome criterion10() {
  Outcome o;
  namespace fs = std::filesystem;
  const auto root = fs::temp_directory_path() / "qvar_acceptance";
  fs::remove_all(root);
  StudyConfig c;
  c.kernel = "fbm:0.65";
  c.scheme = "first:phi=pow:0.3";
  c.levels = {16, 32, 64};
  c.grid = "perturbed:1.5:3";
  c.replicates = 2000;
  c.seed = 1010;
  c.out = (root / "a").string();
  const auto a = run_study(c);
  c.out = (root / "b").string();
  c.workers = 4;
  const auto b = run_study(c);
  bool same = a.size() == b.size();
  for (std::size_t i = 0; same && i < a.size(); ++i) same = ref::read_file(a[i]) == ref::read_file(b[i]);
  add(o, same, fmt("run_study reruns byte-identical across %zu files", a.size()));

  const auto g = build_gamma(SecondOrderBegyn{}, make_uniform(128), KernelSpec::fbm(0.8));
  McConfig cfg;
  cfg.replicates = 5000;
  cfg.seed = 1011;
  const auto one = sample_v_replicates(g, cfg);
  bool workers_same = true;
  for (unsigned w : {2u, 4u, 7u}) {
    cfg.workers = w;
    workers_same = workers_same && sample_v_replicates(g, cfg) == one;
  }
  add(o, workers_same, "MC replicates identical for 1, 2, 4, 7 workers");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"oracle moment equivalence", criterion1},
      {"Brownian identities", criterion2},
      {"fBm energy identity", criterion3},
      {"CLT threshold", criterion4},
      {"Berry-Esseen rate", criterion5},
      {"bifBm limit", criterion6},
      {"second-order rescue", criterion7},
      {"deterministic-limit criterion", criterion8},
      {"estimators", criterion9},
      {"determinism", criterion10},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    add(o, secs <= kBudget[i + 1], fmt("%.1f s (budget %.0f s)", secs, kBudget[i + 1]));
    if (!o.pass) ++failed;
    std::printf("%s  criterion %zu  %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
