#pragma once

// End-to-end validation suite. Each criterion reproduces one of the limit
// laws or algebraic identities the library claims, at desk scale, with the
// tolerance pinned in code, and prints a single PASS/FAIL line. The CLI
// `validate` subcommand and the acceptance test binary both run exactly this.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "panelsphere/mc.hpp"
#include "panelsphere/panel_csv.hpp"
#include "panelsphere/power.hpp"
#include "panelsphere/spectra.hpp"
#include "panelsphere/sphericity.hpp"
#include "panelsphere/stats.hpp"

namespace panelsphere::validate {

struct Options {
  std::uint64_t seed = 42;
  int threads = 1;
  std::vector<int> only;   // empty = run all
  std::string cli_path;    // for the thread-determinism criterion; empty = in-process
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Check {
  bool ok = true;
  std::string text;
  void expect(bool cond, const std::string& what) {
    if (!text.empty()) text += "; ";
    text += what;
    if (!cond) {
      ok = false;
      text += " [FAIL]";
    }
  }
};

// Test-side oracle: trace functionals of an explicitly materialized dense
// symmetric matrix, by plain loops. Independent of the library's closed-form
// paths on purpose.
inline SigmaTraces dense_traces_oracle(const Matrix& s) {
  const std::size_t n = s.rows();
  Matrix s2(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const double v = s(i, k);
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) s2(i, j) += v * s(k, j);
    }
  SigmaTraces t;
  t.n = n;
  NeumaierSum a1, a2, a3, a4, h11, h12, h22;
  for (std::size_t i = 0; i < n; ++i) {
    a1.add(s(i, i));
    h11.add(s(i, i) * s(i, i));
    h12.add(s(i, i) * s2(i, i));
    h22.add(s2(i, i) * s2(i, i));
    for (std::size_t j = 0; j < n; ++j) {
      a2.add(s(i, j) * s(i, j));
      a3.add(s(i, j) * s2(i, j));
      a4.add(s2(i, j) * s2(i, j));
    }
  }
  t.tr1 = a1.value();
  t.tr2 = a2.value();
  t.tr3 = a3.value();
  t.tr4 = a4.value();
  t.had11 = h11.value();
  t.had12 = h12.value();
  t.had22 = h22.value();
  return t;
}

inline Matrix materialize_spiked(const SpikedFactorCov& sp, std::size_t n) {
  const Matrix e = make_loadings(n, sp.spikes.size(), sp.loadings, sp.loadings_seed);
  Matrix s(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) s(i, i) = sp.sigma_eps2;
  for (std::size_t j = 0; j < sp.spikes.size(); ++j) {
    const double* ej = e.row(j);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) s(a, b) += sp.sigma_eps2 * sp.spikes[j] * ej[a] * ej[b];
  }
  return s;
}

inline double rel_diff(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

inline bool read_file_bytes(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

}  // namespace detail

using Criterion = std::function<CriterionResult(const Options&)>;

// --- criterion 0: deterministic self-check of the distribution oracles ----
inline CriterionResult crit_distribution_oracles(const Options&) {
  CriterionResult r{0, "distribution-oracles"};
  detail::Check c;
  c.expect(std::abs(normal_cdf(0.0) - 0.5) < 1e-14, "normal_cdf(0)=0.5");
  c.expect(std::abs(normal_cdf(1.6448536269514722) - 0.95) < 1e-9, "normal_cdf(z95)=0.95");
  c.expect(std::abs(normal_cdf(-1.6448536269514722) - 0.05) < 1e-9, "normal_cdf(-z95)=0.05");
  c.expect(std::abs(normal_upper_quantile(0.05) - 1.6448536269514722) < 1e-8, "Z_0.05");
  c.expect(chi2_upper_tail(0.0, 7.0) == 1.0, "chi2_upper_tail(0)=1");
  c.expect(std::abs(chi2_upper_tail(5.991464547107979, 2.0) - 0.05) < 1e-9, "chi2(df=2) 95% point");
  bool part_unity = true;
  for (double a : {0.5, 2.0, 17.5, 300.0})
    for (double x : {0.1, 1.0, 25.0, 400.0})
      part_unity = part_unity && std::abs(gamma_p(a, x) + gamma_q(a, x) - 1.0) < 1e-12;
  c.expect(part_unity, "gamma_p+gamma_q=1");
  c.expect(chi2_upper_tail(1000.0, 1000.0) > 0.4 && chi2_upper_tail(1000.0, 1000.0) < 0.6,
           "chi2 bulk sanity");
  r.pass = c.ok;
  r.detail = c.text;
  return r;
}

// --- criterion 1: residual-based null, bounded n/T ------------------------
inline CriterionResult crit_null_grj_lpa(const Options& o) {
  CriterionResult r{1, "null-grj-size-lpa"};
  McConfig cfg;
  cfg.scenario = Scenario::null_cov;
  cfg.n = cfg.T = 100;
  cfg.reps = 2000;
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  const McSummary s = run_experiment(cfg);
  detail::Check c;
  c.expect(s.degenerate_count == 0, "no degenerate reps");
  c.expect(s.mean_J >= -0.3 && s.mean_J <= 0.3, "mean_J=" + detail::fmt(s.mean_J) + " in [-0.3,0.3]");
  c.expect(s.var_J >= 3.4 && s.var_J <= 4.6, "var_J=" + detail::fmt(s.var_J) + " in [3.4,4.6]");
  c.expect(s.rejection_rate >= 0.035 && s.rejection_rate <= 0.065,
           "rejection=" + detail::fmt(s.rejection_rate) + " in [0.035,0.065]");
  c.expect(s.ks_statistic < 0.05, "KS=" + detail::fmt(s.ks_statistic) + " < 0.05");
  c.expect(s.seconds < 120.0, "runtime=" + detail::fmt(s.seconds) + "s < 120s");
  r.pass = c.ok;
  r.detail = c.text;
  return r;
}

// --- criterion 2: raw-data non-normal centering ----------------------------
inline CriterionResult crit_raw_nonnormal(const Options& o) {
  CriterionResult r{2, "raw-nonnormal-centering"};
  McConfig cfg;
  cfg.scenario = Scenario::null_cov;
  cfg.n = cfg.T = 200;
  cfg.reps = 1000;
  cfg.seed = o.seed + 1;
  cfg.threads = o.threads;
  cfg.mode = McMode::raw;
  cfg.dist = ErrorDistribution::standardized_gamma(4.0);
  const McSummary s = run_experiment(cfg);
  detail::Check c;
  c.expect(std::abs(s.mean_TU_minus_n - 2.5) <= 0.3,
           "mean(TU-n)=" + detail::fmt(s.mean_TU_minus_n) + " within 2.5+-0.3");
  r.pass = c.ok;
  r.detail = c.text;
  return r;
}

// --- criterion 3: residual-based null, n >> T ------------------------------
inline CriterionResult crit_null_grj_ulpa(const Options& o) {
  CriterionResult r{3, "null-grj-size-ulpa"};
  McConfig cfg;
  cfg.scenario = Scenario::null_cov;
  cfg.T = 100;
  cfg.ulpa_delta = 1.5;  // n = ceil(100^1.5) = 1000
  cfg.reps = 1000;
  cfg.seed = o.seed + 2;
  cfg.threads = o.threads;
  const McSummary s = run_experiment(cfg);
  detail::Check c;
  c.expect(s.n == 1000, "n=1000 from T^1.5 rule");
  c.expect(s.rejection_rate >= 0.03 && s.rejection_rate <= 0.07,
           "rejection=" + detail::fmt(s.rejection_rate) + " in [0.03,0.07]");
  c.expect(s.seconds < 300.0, "runtime=" + detail::fmt(s.seconds) + "s < 300s");
  r.pass = c.ok;
  r.detail = c.text;
  return r;
}

// --- criterion 4: weak-factor power and its h=0 size reduction -------------
// Note: at n = T = 100 the sampling distribution of J under h = 2 has
// variance ~ 6.8 (sample-spike leverage; the library's own finite-n variance
// formula predicts it, and it decays like 1/T toward the asymptotic 4), so
// the rejection rate sits near 0.55 and approaches the asymptotic 0.6388
// only as the panel grows. The stated tolerance is asserted as written; the
// larger-panel trend is measured and reported alongside.
inline CriterionResult crit_weak_factor_power(const Options& o) {
  CriterionResult r{4, "weak-factor-power-lpa"};
  McConfig cfg;
  cfg.scenario = Scenario::weak_s1;
  cfg.n = cfg.T = 100;
  cfg.reps = 2000;
  cfg.seed = o.seed + 3;
  cfg.threads = o.threads;
  cfg.h = {2.0};
  const McSummary s = run_experiment(cfg);

  const double theory = power_weak_lpa(cfg.h, 1.0, 0.05).power;

  McConfig cfg0 = cfg;
  cfg0.h = {0.0};
  cfg0.seed = o.seed + 4;
  const McSummary s0 = run_experiment(cfg0);

  // finite-size variance of T U predicted from the spiked spectrum
  std::vector<double> lam(cfg.n, 1.0);
  lam[0] = 3.0;
  const auto fin = spiked_alt_moments(sigma_traces(CovarianceSpec::diagonal(lam), cfg.n), 3.0,
                                      cfg.n, cfg.T);

  // informational: same pipeline at n = T = 400
  McConfig big = cfg;
  big.n = big.T = 400;
  big.reps = 500;
  big.seed = o.seed + 3;
  const McSummary sb = run_experiment(big);

  detail::Check c;
  c.expect(std::abs(theory - 0.6388) < 2e-3, "formula power=" + detail::fmt(theory) + " ~ 0.6388");
  c.expect(std::abs(s.rejection_rate - 0.6388) <= 0.05,
           "empirical=" + detail::fmt(s.rejection_rate) + " within 0.6388+-0.05");
  c.expect(s0.rejection_rate >= 0.035 && s0.rejection_rate <= 0.065,
           "h=0 size=" + detail::fmt(s0.rejection_rate) + " in [0.035,0.065]");
  r.pass = c.ok;
  r.detail = c.text + "; context: var_J=" + detail::fmt(s.var_J) + " (finite-n prediction " +
             detail::fmt(fin.sigma2) + ", asymptotic 4), n=T=400 rate=" +
             detail::fmt(sb.rejection_rate);
  return r;
}

// --- criterion 5: residual drift shrinks with T ----------------------------
inline CriterionResult crit_residual_drift(const Options& o) {
  CriterionResult r{5, "residual-drift-shrinkage"};
  McConfig cfg;
  cfg.scenario = Scenario::null_cov;
  cfg.reps = 500;
  cfg.seed = o.seed + 5;
  cfg.threads = o.threads;
  const auto pts = gap_check(cfg, {{50, 50}, {100, 100}, {200, 200}});
  detail::Check c;
  c.expect(pts.size() == 3, "three grid points");
  std::string meds;
  for (const auto& p : pts) meds += detail::fmt(p.median_abs_centered) + " ";
  c.expect(pts[0].median_abs_centered > pts[1].median_abs_centered &&
               pts[1].median_abs_centered > pts[2].median_abs_centered,
           "median |T(U_hat-U)-c_T| decreasing over T=50,100,200: " + meds);
  r.pass = c.ok;
  r.detail = c.text;
  return r;
}

// --- criterion 6: grouped-spike CLT machinery ------------------------------
inline CriterionResult crit_spiked_clt(const Options& o) {
  CriterionResult r{6, "spiked-clt-moments"};
  detail::Check c;

  // (a) algebraic null reduction: T mu = n + gamma4 - 2, exactly
  for (const auto& [n, T, g4, scale] :
       std::vector<std::tuple<std::size_t, std::size_t, double, double>>{
           {100, 50, 3.0, 1.0}, {200, 200, 4.5, 1.0}, {37, 61, 2.2, 2.5}}) {
    const auto st = sigma_traces(CovarianceSpec::identity(scale), n);
    const auto m = spiked_alt_moments(st, g4, n, T);
    const double expect = double(n) + g4 - 2.0;
    c.expect(detail::rel_diff(double(T) * m.mu, expect) < 1e-12,
             "T*mu(identity," + std::to_string(n) + "," + std::to_string(T) + ")=n+g4-2");
  }

  // (b) scale invariance of (mu, sigma2) under Sigma -> c Sigma
  {
    std::vector<double> lam(50, 1.0);
    lam[0] = 3.5;
    lam[1] = 1.2;
    const std::size_t n = lam.size(), T = 80;
    const double g4 = 3.6;
    const auto base = spiked_alt_moments(sigma_traces(CovarianceSpec::diagonal(lam), n), g4, n, T);
    for (double scale : {0.5, 2.0, 10.0}) {
      std::vector<double> lam2 = lam;
      for (double& l : lam2) l *= scale;
      const auto ms = spiked_alt_moments(sigma_traces(CovarianceSpec::diagonal(lam2), n), g4, n, T);
      c.expect(detail::rel_diff(ms.mu, base.mu) < 1e-12 &&
                   detail::rel_diff(ms.sigma2, base.sigma2) < 1e-12,
               "scale " + detail::fmt(scale) + " leaves (mu,sigma2) fixed");
    }
  }

  // (c) distributional: diagonal spiked spectrum with growing spikes,
  //     T(U-mu)/sigma against N(0,1)
  {
    McConfig cfg;
    cfg.scenario = Scenario::intermediate_s3;
    cfg.n = cfg.T = 200;
    cfg.reps = 1000;
    cfg.seed = o.seed + 6;
    cfg.threads = o.threads;
    cfg.r = 3;
    cfg.d = {1.0, 1.5, 2.0};
    cfg.alpha_exp = 0.3;
    cfg.mode = McMode::raw;
    const McResult res = run_experiment_full(cfg);
    const auto st = sigma_traces(cfg.population_covariance(cfg.n), cfg.n);
    const auto m = spiked_alt_moments(st, cfg.dist.gamma4(), cfg.n, cfg.T);
    const double sigma = std::sqrt(m.sigma2);
    std::vector<double> z;
    for (const auto& rec : res.records)
      if (!rec.degenerate) z.push_back((double(cfg.T) * rec.U - double(cfg.T) * m.mu) / sigma);
    const double ks = ks_vs_standard_normal(z);
    c.expect(z.size() == cfg.reps, "all reps usable");
    c.expect(ks < 0.1, "KS(T(U-mu)/sigma)=" + detail::fmt(ks) + " < 0.1");
  }

  r.pass = c.ok;
  r.detail = c.text;
  return r;
}

// --- criterion 7: consistency under divergent / growing spikes -------------
inline CriterionResult crit_consistency_trends(const Options& o) {
  CriterionResult r{7, "consistency-trends"};
  detail::Check c;

  {  // many bounded spikes
    McConfig cfg;
    cfg.scenario = Scenario::divergent_s2;
    cfg.n = cfg.T = 200;
    cfg.reps = 500;
    cfg.seed = o.seed + 7;
    cfg.threads = o.threads;
    cfg.tau = 0.2;
    cfg.h = {3.0};
    const McSummary s = run_experiment(cfg);
    c.expect(s.rejection_rate > 0.9, "divergent-count rejection=" + detail::fmt(s.rejection_rate) + " > 0.9");
    if (s.theory_power)
      c.expect(std::abs(*s.theory_power - s.rejection_rate) <= 0.05,
               "matches formula power=" + detail::fmt(*s.theory_power) + " within 0.05");
  }

  {  // few growing spikes
    McConfig cfg;
    cfg.scenario = Scenario::intermediate_s3;
    cfg.n = cfg.T = 200;
    cfg.reps = 500;
    cfg.seed = o.seed + 8;
    cfg.threads = o.threads;
    cfg.r = 2;
    cfg.d = {1.0, 1.5};
    cfg.alpha_exp = 0.6;
    const McSummary s = run_experiment(cfg);
    c.expect(s.rejection_rate > 0.9, "growing-spike rejection=" + detail::fmt(s.rejection_rate) + " > 0.9");
    if (s.theory_power)
      c.expect(std::abs(*s.theory_power - s.rejection_rate) <= 0.05,
               "matches formula power=" + detail::fmt(*s.theory_power) + " within 0.05");
  }

  {  // drift growth with spike exponent 0.75: expected ratio (400/100)^{2a-1} = 2
    McConfig cfg;
    cfg.scenario = Scenario::intermediate_s3;
    cfg.reps = 500;
    cfg.seed = o.seed + 9;
    cfg.threads = o.threads;
    cfg.r = 2;
    cfg.d = {1.0, 1.5};
    cfg.alpha_exp = 0.75;
    const auto pts = gap_check(cfg, {{100, 100}, {400, 400}});
    const double m100 = pts[0].median_gap, m400 = pts[1].median_gap;
    const double ratio = m400 / m100;
    c.expect(m100 > 0.0 && m400 > m100, "median drift grows: " + detail::fmt(m100) + " -> " + detail::fmt(m400));
    c.expect(ratio >= 1.0 && ratio <= 4.0,
             "growth ratio=" + detail::fmt(ratio) + " within factor 2 of sqrt(4)=2");
  }

  r.pass = c.ok;
  r.detail = c.text;
  return r;
}

// --- criterion 8: oracle equivalences ---------------------------------------
inline CriterionResult crit_trace_oracles(const Options& o) {
  CriterionResult r{8, "trace-oracle-equivalence"};
  detail::Check c;

  {  // Gram vs dense on 50 random instances
    RandomStream g(Seed{o.seed + 10, 0}, Draws::disturbance);
    double worst = 0.0;
    bool cauchy_ok = true;
    for (int inst = 0; inst < 50; ++inst) {
      const std::size_t n = 5 + g.next_u32() % 196;
      const std::size_t T = 5 + g.next_u32() % 196;
      const double scale = 0.25 + 4.0 * g.uniform01();
      Matrix m(n, T);
      for (double& x : m.flat()) x = scale * g.normal();
      const DisturbanceMatrix v(std::move(m));
      const auto a = sample_traces_dense(v);
      const auto b = sample_traces_gram(v);
      worst = std::max(worst, detail::rel_diff(a.tr_s2, b.tr_s2));
      cauchy_ok = cauchy_ok && a.tr_s2 >= a.tr_s * a.tr_s / double(n) * (1.0 - 1e-12);
    }
    c.expect(worst <= 1e-10, "Gram vs dense worst rel diff=" + detail::fmt(worst) + " <= 1e-10");
    c.expect(cauchy_ok, "tr_s2 >= tr_s^2/n");
  }

  {  // spiked closed form vs dense materialization oracle
    double worst = 0.0;
    for (const std::size_t n : {40, 200, 500}) {
      for (const std::size_t spikes : {1, 5, 10}) {
        for (const auto policy : {LoadingPolicy::canonical, LoadingPolicy::random_orthonormal}) {
          std::vector<double> h(spikes);
          for (std::size_t j = 0; j < spikes; ++j) h[j] = 0.5 + double(j) * 1.25;
          const auto spec = CovarianceSpec::spiked(1.3, h, policy, o.seed + 11);
          const auto fast = sigma_traces(spec, n);
          const auto dense = detail::dense_traces_oracle(
              detail::materialize_spiked(*spec.as_spiked(), n));
          const std::vector<std::pair<double, double>> pairs = {
              {fast.tr1, dense.tr1},     {fast.tr2, dense.tr2},   {fast.tr3, dense.tr3},
              {fast.tr4, dense.tr4},     {fast.had11, dense.had11}, {fast.had12, dense.had12},
              {fast.had22, dense.had22}};
          for (const auto& [x, y] : pairs) worst = std::max(worst, detail::rel_diff(x, y));
        }
      }
    }
    c.expect(worst <= 1e-10, "spiked closed form worst rel diff=" + detail::fmt(worst) + " <= 1e-10");
  }

  r.pass = c.ok;
  r.detail = c.text;
  return r;
}

// --- criterion 9: CSV byte-determinism across thread counts ----------------
inline CriterionResult crit_thread_determinism(const Options& o) {
  CriterionResult r{9, "thread-determinism"};
  detail::Check c;
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path();
  const std::string tag = std::to_string(std::uint64_t(o.seed) * 2654435761u % 100000);
  const fs::path csv1 = dir / ("panelsphere_det1_" + tag + ".csv");
  const fs::path csv2 = dir / ("panelsphere_det2_" + tag + ".csv");

  if (!o.cli_path.empty()) {
    const fs::path cfgp = dir / ("panelsphere_det_cfg_" + tag + ".cfg");
    {
      std::ofstream cf(cfgp);
      cf << "scenario=null\nn=100\nT=100\nreps=2000\nseed=" << o.seed << "\nalpha=0.05\n";
    }
    auto run = [&](int threads, const fs::path& out) {
      const std::string cmd = "\"" + o.cli_path + "\" simulate --config \"" + cfgp.string() +
                              "\" --threads " + std::to_string(threads) + " --csv \"" +
                              out.string() + "\" > /dev/null";
      return std::system(cmd.c_str()) == 0;
    };
    c.expect(run(1, csv1), "CLI run --threads 1");
    c.expect(run(8, csv2), "CLI run --threads 8");
    fs::remove(cfgp);
  } else {
    McConfig cfg;
    cfg.scenario = Scenario::null_cov;
    cfg.n = cfg.T = 100;
    cfg.reps = 2000;
    cfg.seed = o.seed;
    cfg.threads = 1;
    cfg.csv_path = csv1.string();
    run_experiment(cfg);
    cfg.threads = 8;
    cfg.csv_path = csv2.string();
    run_experiment(cfg);
    c.expect(true, "in-process runs (no CLI path given)");
  }

  std::string b1, b2;
  c.expect(detail::read_file_bytes(csv1.string(), b1) && detail::read_file_bytes(csv2.string(), b2),
           "both CSVs written");
  c.expect(!b1.empty() && b1 == b2, "per-rep CSV byte-identical for threads {1,8}");
  std::error_code ec;
  fs::remove(csv1, ec);
  fs::remove(csv2, ec);
  r.pass = c.ok;
  r.detail = c.text;
  return r;
}

// --- criterion 10: general-covariance formulas ------------------------------
inline CriterionResult crit_general_cov_formulas(const Options&) {
  CriterionResult r{10, "general-covariance-formulas"};
  detail::Check c;

  {  // hand-substituted variance at the all-ones point, c = 1
    const auto lim = general_cov_limit({1, 1, 1, 1}, {1, 2}, 1.0, 100, 3.0, false, 0.05);
    c.expect(detail::rel_diff(lim.s2, 12.0) < 1e-12, "s^2=" + detail::fmt(lim.s2) + " == 12");
    c.expect(!lim.note.empty(), "moment-convention note reported");
  }

  {  // diagonal branch at gamma4=3 collapses onto the general branch exactly
    double worst = 0.0;
    for (const auto& [theta, cc] : std::vector<std::pair<std::array<double, 4>, double>>{
             {{1.5, 2.5, 4.5, 8.5}, 0.7}, {{2, 5, 14, 41}, 1.0}, {{1, 1.2, 1.6, 2.3}, 2.5}}) {
      const auto vt = mp_moments(theta, cc);
      const auto a = general_cov_limit(theta, vt, cc, 200, 3.0, true, 0.05);
      const auto b = general_cov_limit(theta, vt, cc, 200, 3.0, false, 0.05);
      worst = std::max(worst, detail::rel_diff(a.s2, b.s2));
    }
    c.expect(worst < 1e-12, "diagonal(g4=3) == general branch, worst rel diff=" + detail::fmt(worst));
  }

  {  // consistency boundary of the diagonal-branch power at huge T:
    // power separates from alpha iff c + 1 < (vartheta2 + theta2 + g4 - 3)/vartheta1^2.
    // theta is a valid spectrum; vartheta is a free input of the formula, so both
    // sides of the boundary can be exercised.
    const std::size_t big_T = 1000000;
    const std::array<double, 4> theta{1.0, 1.2, 1.6, 2.3};
    const double cc = 1.5;  // boundary value c+1 = 2.5
    const auto low = general_cov_limit(theta, {1.0, 0.9}, cc, big_T, 3.0, true, 0.05);   // q = 2.1
    const auto high = general_cov_limit(theta, {1.0, 2.0}, cc, big_T, 3.0, true, 0.05);  // q = 3.2
    c.expect(low.power < 0.05, "sub-boundary power=" + detail::fmt(low.power) + " < alpha");
    c.expect(high.power > 0.99, "super-boundary power=" + detail::fmt(high.power) + " -> 1");
  }

  {  // MP moments behave: c -> 0 collapses to the population moments
    const auto m = mp_moments({1, 1, 1, 1}, 1e-12);
    c.expect(detail::rel_diff(m[0], 1.0) < 1e-12 && detail::rel_diff(m[1], 1.0) < 1e-9,
             "vartheta -> theta as c -> 0");
  }

  r.pass = c.ok;
  r.detail = c.text;
  return r;
}

inline std::vector<CriterionResult> run(const Options& opts, std::ostream& out) {
  const std::vector<std::pair<int, Criterion>> table = {
      {0, crit_distribution_oracles}, {1, crit_null_grj_lpa},
      {2, crit_raw_nonnormal},        {3, crit_null_grj_ulpa},
      {4, crit_weak_factor_power},    {5, crit_residual_drift},
      {6, crit_spiked_clt},           {7, crit_consistency_trends},
      {8, crit_trace_oracles},        {9, crit_thread_determinism},
      {10, crit_general_cov_formulas}};
  std::vector<CriterionResult> results;
  for (const auto& [id, fn] : table) {
    if (!opts.only.empty() &&
        std::find(opts.only.begin(), opts.only.end(), id) == opts.only.end())
      continue;
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult res;
    try {
      res = fn(opts);
    } catch (const std::exception& e) {
      res.id = id;
      res.name = "criterion-" + std::to_string(id);
      res.pass = false;
      res.detail = std::string("exception: ") + e.what();
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out << "criterion " << res.id << " [" << res.name << "] " << (res.pass ? "PASS" : "FAIL")
        << " (" << res.detail << ") [" << detail::fmt(res.seconds) << "s]\n";
    out.flush();
    results.push_back(std::move(res));
  }
  return results;
}

inline bool all_passed(const std::vector<CriterionResult>& rs) {
  if (rs.empty()) return false;
  for (const auto& r : rs)
    if (!r.pass) return false;
  return true;
}

}  // namespace panelsphere::validate
