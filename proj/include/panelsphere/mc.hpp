#pragma once

// Monte-Carlo harness: size/power experiments, distributional diagnostics,
// and residual-drift studies.
//
// Replication r draws everything from streams keyed (master seed, r), so the
// per-rep records are identical whether the reps run on 1 thread or 64, and
// extending reps never perturbs earlier replications. Degenerate
// replications are recorded with a reason and excluded from aggregates,
// never resampled.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "panelsphere/common.hpp"
#include "panelsphere/power.hpp"
#include "panelsphere/simulate.hpp"
#include "panelsphere/sphericity.hpp"
#include "panelsphere/stats.hpp"
#include "panelsphere/within.hpp"

namespace panelsphere {

enum class Scenario { null_cov, weak_s1, divergent_s2, intermediate_s3, strong, general_cov };

inline const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::null_cov: return "null";
    case Scenario::weak_s1: return "weak-s1";
    case Scenario::divergent_s2: return "divergent-s2";
    case Scenario::intermediate_s3: return "intermediate-s3";
    case Scenario::strong: return "strong";
    case Scenario::general_cov: return "general-cov";
  }
  return "?";
}

inline Scenario parse_scenario(const std::string& s) {
  if (s == "null") return Scenario::null_cov;
  if (s == "weak-s1") return Scenario::weak_s1;
  if (s == "divergent-s2") return Scenario::divergent_s2;
  if (s == "intermediate-s3") return Scenario::intermediate_s3;
  if (s == "strong") return Scenario::strong;
  if (s == "general-cov") return Scenario::general_cov;
  throw ConfigError("unknown scenario '" + s +
                    "'; valid: null, weak-s1, divergent-s2, intermediate-s3, strong, general-cov");
}

enum class McMode { residual, raw };

struct McConfig {
  Scenario scenario = Scenario::null_cov;
  std::size_t n = 100;
  std::size_t T = 100;
  std::optional<double> ulpa_delta;  // when set and n not given: n = ceil(T^delta)
  std::size_t reps = 1000;
  std::uint64_t seed = 1;
  ErrorDistribution dist = ErrorDistribution::gaussian();
  double alpha = 0.05;

  // null / general-cov
  double sigma_nu2 = 1.0;
  std::vector<double> diag_values;  // general-cov spectrum values
  std::vector<double> diag_props;   // and their proportions (default equal)

  // factor alternatives
  std::vector<double> h;   // explicit spikes (weak-s1, divergent-s2)
  std::vector<double> d;   // coefficients for h_j = d_j * n^alpha_exp
  double tau = 0.0;        // divergent count rule r = floor(tau n)
  std::size_t r = 1;       // fixed factor count
  double alpha_exp = 0.0;  // spike growth exponent
  double sigma_eps2 = 1.0;
  bool loadings_random = false;

  // regression layer
  std::vector<double> beta = {1.0, -0.5};
  RegressorLaw regressor_law = RegressorLaw::gaussian;

  McMode mode = McMode::residual;
  std::string csv_path;  // per-rep CSV; empty = do not write
  int threads = 1;

  std::size_t effective_n() const {
    if (ulpa_delta) {
      if (!(*ulpa_delta > 1.0 && *ulpa_delta < 2.0))
        throw ConfigError("ulpa delta must satisfy 1 < delta < 2");
      return std::size_t(std::ceil(std::pow(double(T), *ulpa_delta)));
    }
    return n;
  }

  FactorAlternative factor_alternative() const {
    FactorAlternative alt;
    alt.sigma_eps2 = sigma_eps2;
    alt.loadings = loadings_random ? LoadingPolicy::random_orthonormal : LoadingPolicy::canonical;
    alt.loadings_seed = seed;
    switch (scenario) {
      case Scenario::weak_s1:
        alt.r = h.size();
        alt.h = h;
        break;
      case Scenario::divergent_s2:
        alt.tau = tau;
        alt.h = h;
        break;
      case Scenario::intermediate_s3:
        alt.r = r;
        alt.d = d;
        alt.exponent = alpha_exp;
        alt.use_exponent_rule = true;
        break;
      case Scenario::strong:
        alt.r = r;
        alt.d = d;
        alt.exponent = 1.0;
        alt.use_exponent_rule = true;
        break;
      default:
        throw ConfigError("factor_alternative: scenario has no factor structure");
    }
    return alt;
  }

  CovarianceSpec population_covariance(std::size_t dim) const {
    switch (scenario) {
      case Scenario::null_cov:
        return CovarianceSpec::identity(sigma_nu2);
      case Scenario::general_cov: {
        if (diag_values.empty()) throw ConfigError("general-cov: diag_values required");
        std::vector<double> props = diag_props;
        if (props.empty()) props.assign(diag_values.size(), 1.0 / double(diag_values.size()));
        if (props.size() != diag_values.size())
          throw ConfigError("general-cov: diag_props size mismatch");
        std::vector<double> lam;
        lam.reserve(dim);
        std::size_t assigned = 0;
        for (std::size_t q = 0; q + 1 < diag_values.size(); ++q) {
          const auto cnt = std::size_t(std::llround(props[q] * double(dim)));
          for (std::size_t i = 0; i < cnt && assigned < dim; ++i, ++assigned)
            lam.push_back(diag_values[q]);
        }
        while (assigned < dim) {
          lam.push_back(diag_values.back());
          ++assigned;
        }
        return CovarianceSpec::diagonal(std::move(lam));
      }
      default:
        return factor_alternative().covariance_at(dim);
    }
  }
};

struct RepRecord {
  std::size_t rep = 0;
  double U = 0.0;
  double U_hat = 0.0;
  double gamma4_hat = 0.0;
  double J = 0.0;
  double p_value = 1.0;
  double gap = 0.0;  // T (U_hat - U); 0 in raw mode
  bool degenerate = false;
  std::string reason;
};

struct McSummary {
  std::string scenario;
  std::size_t n = 0, T = 0, reps = 0, reps_used = 0, degenerate_count = 0;
  double alpha = 0.05;
  double rejection_rate = 0.0;
  double mean_J = 0.0, var_J = 0.0, skew_J = 0.0;
  double ks_statistic = 0.0;  // J/2 against N(0,1)
  double gap_mean = 0.0, gap_median = 0.0;            // of T(U_hat - U) - c_T
  double gap_abs_median = 0.0;                        // median |T(U_hat-U) - c_T|
  double mean_TU_minus_n = 0.0, var_TU = 0.0;
  double mean_gamma4_hat = 0.0;
  // binomial size band: |rate - alpha| <= 3 sqrt(alpha(1-alpha)/reps_used)
  double size_band_halfwidth = 0.0;
  bool size_within_band = false;
  std::string degenerate_reason;  // first reason observed, when any rep failed
  std::optional<double> theory_power;
  std::optional<double> theory_center, theory_s2;  // general-cov comparison
  std::string theory_note;
  std::string csv_path;
  double seconds = 0.0;
};

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline void write_rep_csv(const std::string& path, const std::vector<RepRecord>& recs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open CSV path: " + path);
  out << "rep,U,U_hat,gamma4_hat,J,p_value,gap\n";
  char buf[512];
  for (const auto& r : recs) {
    if (r.degenerate) continue;
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.rep, r.U,
                  r.U_hat, r.gamma4_hat, r.J, r.p_value, r.gap);
    out << buf;
  }
}

}  // namespace detail

// One replication. Raw mode: U from the true disturbances, known gamma4.
// Residual mode: panel -> within fit -> residual-based test, with the raw U
// of the true disturbances kept for the drift diagnostics.
inline RepRecord run_one_rep(const McConfig& cfg, std::size_t rep) {
  RepRecord rec;
  rec.rep = rep;
  const std::size_t n = cfg.effective_n();
  const std::size_t T = cfg.T;
  const Seed seed{cfg.seed, std::uint32_t(rep)};
  try {
    DisturbanceMatrix v = [&]() {
      switch (cfg.scenario) {
        case Scenario::null_cov:
        case Scenario::general_cov:
          return gen_disturbances(cfg.population_covariance(n), cfg.dist, n, T, seed);
        default:
          return gen_factor_disturbances(cfg.factor_alternative(), cfg.dist, n, T, seed);
      }
    }();

    const SampleTracePair raw_traces = sample_traces(v);
    const double u_raw = john_u(raw_traces);
    rec.U = u_raw;

    if (cfg.mode == McMode::raw) {
      const TestReport rep_raw = raw_panel_test(u_raw, cfg.dist.gamma4(), n, T);
      rec.U_hat = u_raw;
      rec.gamma4_hat = cfg.dist.gamma4();
      rec.J = 2.0 * rep_raw.standardized;
      rec.p_value = rep_raw.p_value;
      rec.gap = 0.0;
      return rec;
    }

    const PanelData panel = gen_panel(cfg.beta, v, seed, cfg.regressor_law);
    const WithinFit fit = within_ols(panel);
    const TestReport rep_grj = grj_test(fit);
    rec.U_hat = rep_grj.u;
    rec.gamma4_hat = *rep_grj.gamma4_hat;
    rec.J = 2.0 * rep_grj.standardized;
    rec.p_value = rep_grj.p_value;
    rec.gap = double(T) * (rep_grj.u - u_raw);
    return rec;
  } catch (const Error& e) {
    rec.degenerate = true;
    rec.reason = e.what();
    return rec;
  }
}

// Theory power for the configured scenario, when a formula applies.
inline void attach_theory(const McConfig& cfg, McSummary& s) {
  const std::size_t n = cfg.effective_n();
  const std::size_t T = cfg.T;
  const double g4 = cfg.dist.gamma4();
  try {
    switch (cfg.scenario) {
      case Scenario::null_cov:
        s.theory_power = cfg.alpha;
        break;
      case Scenario::weak_s1: {
        if (cfg.ulpa_delta) {
          const auto eta = eta_limits(cfg.population_covariance(n), n);
          s.theory_power = power_weak_ulpa(eta, g4, T, cfg.alpha).power;
        } else {
          s.theory_power = power_weak_lpa(cfg.h, double(n) / double(T), cfg.alpha).power;
        }
        break;
      }
      case Scenario::divergent_s2: {
        const auto spec = cfg.population_covariance(n);
        const auto st = sigma_traces(spec, n);
        const auto m = spiked_alt_moments(st, g4, n, T);
        const double B1 = st.tr1 / double(n), B2 = st.tr2 / double(n);
        s.theory_power = power_divergent_weak(B1, B2, n, cfg.tau, g4, std::sqrt(m.sigma2),
                                              cfg.alpha).power;
        break;
      }
      case Scenario::intermediate_s3:
      case Scenario::strong: {
        const auto st = sigma_traces(cfg.population_covariance(n), n);
        const auto m = spiked_alt_moments(st, g4, n, T);
        s.theory_power = power_growing_spikes(m.mu, std::sqrt(m.sigma2), n, T, g4, cfg.alpha).power;
        break;
      }
      case Scenario::general_cov: {
        const auto spec = cfg.population_covariance(n);
        const auto ms = make_moment_set(spec, n, T);
        const auto lim = general_cov_limit(ms.theta, ms.vartheta, ms.c, T, g4,
                                           /*diagonal=*/true, cfg.alpha);
        s.theory_power = lim.power;
        s.theory_center = lim.center;
        s.theory_s2 = lim.s2;
        s.theory_note = lim.note;
        break;
      }
    }
  } catch (const Error& e) {
    s.theory_note = std::string("theory power unavailable: ") + e.what();
  }
}

struct McResult {
  McSummary summary;
  std::vector<RepRecord> records;
};

inline McResult run_experiment_full(const McConfig& cfg) {
  if (cfg.reps < 1) throw ConfigError("reps must be >= 1");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("alpha must be in (0,1)");
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<RepRecord> recs(cfg.reps);
  const int threads = std::max(1, cfg.threads);
  if (threads == 1) {
    for (std::size_t rep = 0; rep < cfg.reps; ++rep) recs[rep] = run_one_rep(cfg, rep);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t rep = next.fetch_add(1);
        if (rep >= cfg.reps) return;
        recs[rep] = run_one_rep(cfg, rep);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(threads));
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  McSummary s;
  s.scenario = scenario_name(cfg.scenario);
  s.n = cfg.effective_n();
  s.T = cfg.T;
  s.reps = cfg.reps;
  s.alpha = cfg.alpha;
  s.csv_path = cfg.csv_path;

  std::vector<double> js, j_half, gaps, tus, g4s;
  std::size_t rejections = 0;
  for (const auto& r : recs) {
    if (r.degenerate) {
      ++s.degenerate_count;
      if (s.degenerate_reason.empty()) s.degenerate_reason = r.reason;
      continue;
    }
    ++s.reps_used;
    js.push_back(r.J);
    j_half.push_back(r.J / 2.0);
    tus.push_back(double(s.T) * r.U);
    g4s.push_back(r.gamma4_hat);
    if (cfg.mode == McMode::residual) gaps.push_back(r.gap - double(s.n) / double(s.T));
    if (r.p_value < cfg.alpha) ++rejections;
  }
  if (s.reps_used > 0) {
    s.rejection_rate = double(rejections) / double(s.reps_used);
    const auto mj = sample_moments(js);
    s.mean_J = mj.mean;
    s.var_J = mj.var;
    s.skew_J = mj.skew;
    if (s.reps_used >= 2) s.ks_statistic = ks_vs_standard_normal(j_half);
    const auto mtu = sample_moments(tus);
    s.mean_TU_minus_n = mtu.mean - double(s.n);
    s.var_TU = mtu.var;
    s.mean_gamma4_hat = sample_moments(g4s).mean;
    if (!gaps.empty()) {
      s.gap_mean = sample_moments(gaps).mean;
      s.gap_median = detail::median_of(gaps);
      std::vector<double> abs_gaps(gaps.size());
      for (std::size_t i = 0; i < gaps.size(); ++i) abs_gaps[i] = std::abs(gaps[i]);
      s.gap_abs_median = detail::median_of(abs_gaps);
    }
    s.size_band_halfwidth =
        3.0 * std::sqrt(cfg.alpha * (1.0 - cfg.alpha) / double(s.reps_used));
    s.size_within_band = std::abs(s.rejection_rate - cfg.alpha) <= s.size_band_halfwidth;
  }
  attach_theory(cfg, s);

  if (!cfg.csv_path.empty()) detail::write_rep_csv(cfg.csv_path, recs);

  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return McResult{std::move(s), std::move(recs)};
}

inline McSummary run_experiment(const McConfig& cfg) { return run_experiment_full(cfg).summary; }

// Residual-drift study: distribution of T(U_hat - U) across a grid of panel
// sizes. Requires residual mode (the drift needs both the true disturbances
// and the residual statistic).
struct GapPoint {
  std::size_t n = 0, T = 0, reps_used = 0, degenerate_count = 0;
  double median_abs_centered = 0.0;  // median |T(U_hat-U) - c_T|
  double median_gap = 0.0;           // median T(U_hat-U)
  double mean_gap = 0.0;
};

inline std::vector<GapPoint> gap_check(McConfig cfg,
                                       const std::vector<std::pair<std::size_t, std::size_t>>& sizes) {
  if (cfg.mode != McMode::residual)
    throw ConfigError("gap_check: needs residual mode with the truth record retained");
  std::vector<GapPoint> out;
  out.reserve(sizes.size());
  for (const auto& [nn, tt] : sizes) {
    cfg.n = nn;
    cfg.T = tt;
    cfg.ulpa_delta.reset();
    const McResult res = run_experiment_full(cfg);
    GapPoint gp;
    gp.n = nn;
    gp.T = tt;
    gp.reps_used = res.summary.reps_used;
    gp.degenerate_count = res.summary.degenerate_count;
    const double c_T = double(nn) / double(tt);
    std::vector<double> gap, abs_centered;
    for (const auto& r : res.records) {
      if (r.degenerate) continue;
      gap.push_back(r.gap);
      abs_centered.push_back(std::abs(r.gap - c_T));
    }
    gp.median_gap = detail::median_of(gap);
    gp.median_abs_centered = detail::median_of(abs_centered);
    gp.mean_gap = gap.empty() ? 0.0 : sample_moments(gap).mean;
    out.push_back(gp);
  }
  return out;
}

struct Diagnostics {
  double mean = 0.0, var = 0.0, skew = 0.0, ks = 0.0;
  bool degenerate = false;
};

inline Diagnostics distribution_diagnostics(std::span<const double> samples) {
  if (samples.size() < 30)
    throw DiagnosticError("distribution_diagnostics: need at least 30 samples");
  Diagnostics d;
  const auto m = sample_moments(samples);
  d.mean = m.mean;
  d.var = m.var;
  d.skew = m.skew;
  d.degenerate = m.degenerate;
  d.ks = d.degenerate ? 1.0 : ks_vs_standard_normal(samples);
  return d;
}

}  // namespace panelsphere
