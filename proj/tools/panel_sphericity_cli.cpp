// panel-sphericity: sphericity tests for the error terms of fixed-effects
// panel regressions, plus the simulation and power machinery behind them.
//
// Subcommands:
//   test      run a sphericity test on a balanced panel CSV
//   simulate  run a Monte-Carlo experiment from a key=value config
//   power     evaluate an asymptotic power formula
//   gen       generate a synthetic panel CSV
//   validate  run the full validation suite
//
// Exit codes: 0 ok, 1 error, 2 statistical rejection at the chosen level.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "panelsphere/mc.hpp"
#include "panelsphere/panel_csv.hpp"
#include "panelsphere/power.hpp"
#include "panelsphere/simulate.hpp"
#include "panelsphere/sphericity.hpp"
#include "panelsphere/validate.hpp"
#include "panelsphere/within.hpp"

namespace ps = panelsphere;

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void print_kv(const std::string& k, const std::string& v) { std::cout << k << '=' << v << '\n'; }
void print_kv(const std::string& k, double v) { print_kv(k, num(v)); }

// Covariance spec strings: identity[:scale] | diag:v1,v2,... (vKxN repeats) |
// spiked:sigma_eps2:h1,h2[,...][:random]
ps::CovarianceSpec parse_sigma_spec(const std::string& s, std::uint64_t seed) {
  auto parts = ps::detail::split(s, ':');
  const std::string kind = ps::detail::trim(parts[0]);
  if (kind == "identity") {
    const double scale = parts.size() > 1 ? ps::detail::parse_double(parts[1], "identity scale") : 1.0;
    return ps::CovarianceSpec::identity(scale);
  }
  if (kind == "diag") {
    if (parts.size() < 2) throw ps::ConfigError("diag spec needs eigenvalues, e.g. diag:2,1,1");
    std::vector<double> lam;
    for (const auto& tok : ps::detail::split(parts[1], ',')) {
      const auto t = ps::detail::trim(tok);
      if (t.empty()) continue;
      const auto x = t.find('x');
      if (x == std::string::npos) {
        lam.push_back(ps::detail::parse_double(t, "eigenvalue"));
      } else {
        const double v = ps::detail::parse_double(t.substr(0, x), "eigenvalue");
        const auto cnt = std::size_t(std::llround(ps::detail::parse_double(t.substr(x + 1), "count")));
        for (std::size_t i = 0; i < cnt; ++i) lam.push_back(v);
      }
    }
    return ps::CovarianceSpec::diagonal(std::move(lam));
  }
  if (kind == "spiked") {
    if (parts.size() < 3) throw ps::ConfigError("spiked spec: spiked:sigma_eps2:h1,h2[,...][:random]");
    const double se2 = ps::detail::parse_double(parts[1], "sigma_eps2");
    const auto h = ps::detail::parse_double_list(parts[2], "spikes");
    const bool random = parts.size() > 3 && ps::detail::trim(parts[3]) == "random";
    return ps::CovarianceSpec::spiked(se2, h,
                                      random ? ps::LoadingPolicy::random_orthonormal
                                             : ps::LoadingPolicy::canonical,
                                      seed);
  }
  throw ps::ConfigError("unknown covariance spec '" + s + "'; use identity[:s], diag:..., spiked:...");
}

int cmd_test(const std::string& path, const std::string& variant, double alpha,
             const std::string& gamma4_flag, int threads) {
  const ps::PanelData panel = ps::read_panel_csv(path);
  ps::TestReport report;

  if (variant == "grj") {
    const ps::WithinFit fit = ps::within_ols(panel);
    report = ps::grj_test(fit, threads);
    print_kv("variant", "grj");
    print_kv("k", double(panel.k()));
  } else if (variant == "raw" || variant == "classic") {
    const ps::DisturbanceMatrix v(panel.y);
    const ps::SampleTracePair tp = ps::sample_traces(v, threads);
    const double u = ps::john_u(tp);
    if (variant == "classic") {
      report = ps::classic_john_test(u, v.n(), v.T());
    } else {
      double g4;
      if (gamma4_flag == "estimate") {
        const double m2 = tp.tr_s / double(v.n());
        ps::NeumaierSum s4;
        for (double x : panel.y.flat()) s4.add(x * x * x * x);
        const double m4 = s4.value() / double(v.n() * v.T());
        g4 = m4 / (m2 * m2);
      } else {
        g4 = ps::detail::parse_double(gamma4_flag, "--gamma4");
      }
      report = ps::raw_panel_test(u, g4, v.n(), v.T());
    }
    print_kv("variant", variant);
    if (panel.k() > 0) print_kv("note_regressors", "ignored by raw/classic variants");
  } else {
    throw ps::ConfigError("unknown variant '" + variant + "'; valid: grj, raw, classic");
  }

  print_kv("n", double(report.n));
  print_kv("T", double(report.T));
  print_kv("c_T", report.c_T);
  print_kv("u", report.u);
  print_kv("standardized", report.standardized);
  print_kv("p_value", report.p_value);
  if (report.gamma4_hat) print_kv("gamma4_hat", *report.gamma4_hat);
  print_kv("alpha", alpha);
  const bool reject = report.p_value < alpha;
  print_kv("reject", reject ? "1" : "0");
  if (!report.notes.empty()) print_kv("notes", report.notes);
  return reject ? 2 : 0;
}

void print_summary(const ps::McSummary& s, std::uint64_t seed, int threads) {
  print_kv("scenario", s.scenario);
  print_kv("n", double(s.n));
  print_kv("T", double(s.T));
  print_kv("reps", double(s.reps));
  print_kv("reps_used", double(s.reps_used));
  print_kv("degenerate_count", double(s.degenerate_count));
  print_kv("alpha", s.alpha);
  print_kv("seed", std::to_string(seed));
  print_kv("threads", std::to_string(threads));
  print_kv("rejection_rate", s.rejection_rate);
  print_kv("mean_J", s.mean_J);
  print_kv("var_J", s.var_J);
  print_kv("skew_J", s.skew_J);
  print_kv("ks_statistic", s.ks_statistic);
  print_kv("mean_TU_minus_n", s.mean_TU_minus_n);
  print_kv("var_TU", s.var_TU);
  print_kv("mean_gamma4_hat", s.mean_gamma4_hat);
  print_kv("gap_mean", s.gap_mean);
  print_kv("gap_median", s.gap_median);
  print_kv("gap_abs_median", s.gap_abs_median);
  print_kv("size_band_halfwidth", s.size_band_halfwidth);
  print_kv("size_within_band", s.size_within_band ? "1" : "0");
  if (!s.degenerate_reason.empty()) print_kv("degenerate_reason", s.degenerate_reason);
  if (s.theory_power) print_kv("theory_power", *s.theory_power);
  if (s.theory_center) print_kv("theory_center", *s.theory_center);
  if (s.theory_s2) print_kv("theory_s2", *s.theory_s2);
  if (!s.theory_note.empty()) print_kv("theory_note", s.theory_note);
  if (!s.csv_path.empty()) print_kv("csv", s.csv_path);
  print_kv("seconds", s.seconds);
}

void print_power_result(const ps::PowerResult& r) {
  print_kv("formula", r.scenario);
  for (const auto& [k, v] : r.inputs) print_kv(k, v);
  print_kv("alpha", r.alpha);
  print_kv("power", r.power);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sphericity tests for large fixed-effects panels"};
  app.require_subcommand(1);
  // free the short -h so `--h <spikes>` stays available on subcommands
  app.set_help_flag("--help", "print help");

  // --- test ---
  auto* t = app.add_subcommand("test", "run a sphericity test on a panel CSV");
  std::string t_input, t_variant = "grj", t_gamma4 = "estimate";
  double t_alpha = 0.05;
  int t_threads = 1;
  std::uint64_t t_seed = 0;
  t->add_option("--input,-i,input", t_input, "panel CSV (unit,time,y,x1..xk)")->required();
  t->add_option("--variant", t_variant, "grj | raw | classic");
  t->add_option("--alpha", t_alpha, "test level");
  t->add_option("--gamma4", t_gamma4, "'estimate' or a numeric fourth moment (raw variant)");
  t->add_option("--threads", t_threads, "threads for trace kernels");
  t->add_option("--seed", t_seed, "unused by test; accepted for interface uniformity")
      ->envname("PANEL_SPHERICITY_SEED");

  // --- simulate ---
  auto* sim = app.add_subcommand("simulate", "run a Monte-Carlo experiment");
  std::string sim_config, sim_csv;
  std::optional<std::uint64_t> sim_seed;
  std::optional<std::size_t> sim_reps;
  std::optional<int> sim_threads;
  sim->add_option("--config,-c,config", sim_config, "key=value config file")->required();
  sim->add_option("--reps", sim_reps, "override reps");
  sim->add_option("--seed", sim_seed, "override seed")->envname("PANEL_SPHERICITY_SEED");
  sim->add_option("--threads", sim_threads, "override threads");
  sim->add_option("--csv", sim_csv, "override per-rep CSV path");

  // --- power ---
  auto* pw = app.add_subcommand("power", "evaluate an asymptotic power formula");
  pw->set_help_flag("--help", "print help");
  std::string pw_formula, pw_sigma, pw_theta, pw_vartheta, pw_eta, pw_h;
  double pw_alpha = 0.05, pw_cT = 1.0, pw_gamma4 = 3.0, pw_tau = 0.0, pw_c = 1.0;
  double pw_B1 = 0.0, pw_B2 = 0.0, pw_mu = 0.0, pw_sigma_val = 0.0;
  std::optional<double> pw_nu4;
  std::size_t pw_n = 100, pw_T = 100;
  bool pw_diagonal = false;
  std::uint64_t pw_seed = 0;
  pw->add_option("--formula", pw_formula, "s1 | ulpa | s2 | s3 | h1star | general-cov")->required();
  pw->add_option("--h", pw_h, "comma list of spikes (s1)");
  pw->add_option("--c_T", pw_cT, "aspect ratio n/T (s1)");
  pw->add_option("--alpha", pw_alpha, "test level");
  pw->add_option("--sigma", pw_sigma, "covariance spec: identity[:s] | diag:... | spiked:...");
  pw->add_option("--eta", pw_eta, "eta1,eta2,eta3 (ulpa; else derived from --sigma)");
  pw->add_option("--theta", pw_theta, "theta1..theta4 (general-cov; else from --sigma)");
  pw->add_option("--vartheta", pw_vartheta, "vartheta1,vartheta2 (general-cov; default MP moments)");
  pw->add_option("--gamma4", pw_gamma4, "error fourth moment");
  pw->add_option("--n", pw_n, "cross-section size");
  pw->add_option("--T", pw_T, "time length");
  pw->add_option("--c", pw_c, "aspect ratio for general-cov");
  pw->add_option("--tau", pw_tau, "spiked fraction (s2)");
  pw->add_option("--B1", pw_B1, "tr Sigma / n (s2; else from --sigma)");
  pw->add_option("--B2", pw_B2, "tr Sigma^2 / n (s2; else from --sigma)");
  pw->add_option("--nu4", pw_nu4, "kurtosis constant for s2 (default gamma4-3)");
  pw->add_option("--mu", pw_mu, "mean of U (s3; else from --sigma)");
  pw->add_option("--sigma-val", pw_sigma_val, "std dev of T U (s2/s3; else from --sigma)");
  pw->add_flag("--diagonal", pw_diagonal, "use the diagonal-Sigma branch (general-cov)");
  pw->add_option("--seed", pw_seed, "seed for random loading directions")
      ->envname("PANEL_SPHERICITY_SEED");

  // --- gen ---
  auto* gn = app.add_subcommand("gen", "generate a synthetic panel CSV");
  gn->set_help_flag("--help", "print help");
  std::string gn_output, gn_scenario = "null", gn_dist = "gaussian", gn_h, gn_beta;
  std::size_t gn_n = 100, gn_T = 100, gn_k = 2, gn_r = 1;
  double gn_shape = 4.0, gn_sigma_nu2 = 1.0, gn_alpha_exp = 0.0, gn_tau = 0.0;
  std::uint64_t gn_seed = 1;
  gn->add_option("--output,-o,output", gn_output, "output CSV path")->required();
  gn->add_option("--scenario", gn_scenario, "null | weak-s1 | divergent-s2 | intermediate-s3 | strong");
  gn->add_option("--n", gn_n, "units");
  gn->add_option("--T", gn_T, "time points");
  gn->add_option("--k", gn_k, "regressors (>= 1)");
  gn->add_option("--dist", gn_dist, "gaussian | gamma | uniform | rademacher");
  gn->add_option("--dist-shape", gn_shape, "gamma shape");
  gn->add_option("--sigma-nu2", gn_sigma_nu2, "error variance under null");
  gn->add_option("--h", gn_h, "spikes (factor scenarios)");
  gn->add_option("--tau", gn_tau, "spiked fraction (divergent-s2)");
  gn->add_option("--r", gn_r, "factor count (intermediate-s3/strong)");
  gn->add_option("--alpha-exp", gn_alpha_exp, "spike growth exponent");
  gn->add_option("--beta", gn_beta, "comma list of slopes (default alternating 1,-0.5)");
  gn->add_option("--seed", gn_seed, "seed")->envname("PANEL_SPHERICITY_SEED");

  // --- validate ---
  auto* va = app.add_subcommand("validate", "run the full validation suite");
  std::uint64_t va_seed = 42;
  int va_threads = 1;
  std::vector<int> va_only;
  va->add_option("--seed", va_seed, "master seed")->envname("PANEL_SPHERICITY_SEED");
  va->add_option("--threads", va_threads, "threads for the experiments");
  va->add_option("--only", va_only, "run only these criterion ids")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (t->parsed()) return cmd_test(t_input, t_variant, t_alpha, t_gamma4, t_threads);

    if (sim->parsed()) {
      ps::McConfig cfg = ps::parse_mc_config_file(sim_config);
      if (sim_reps) cfg.reps = *sim_reps;
      if (sim_seed) cfg.seed = *sim_seed;
      if (sim_threads) cfg.threads = *sim_threads;
      if (!sim_csv.empty()) cfg.csv_path = sim_csv;
      const ps::McSummary s = ps::run_experiment(cfg);
      print_summary(s, cfg.seed, cfg.threads);
      return 0;
    }

    if (pw->parsed()) {
      if (pw_formula == "s1") {
        const auto h = ps::detail::parse_double_list(pw_h.empty() ? "0" : pw_h, "--h");
        print_power_result(ps::power_weak_lpa(h, pw_cT, pw_alpha));
      } else if (pw_formula == "ulpa") {
        std::array<double, 3> eta{};
        if (!pw_eta.empty()) {
          const auto v = ps::detail::parse_double_list(pw_eta, "--eta");
          if (v.size() != 3) throw ps::ConfigError("--eta needs three values");
          eta = {v[0], v[1], v[2]};
        } else if (!pw_sigma.empty()) {
          eta = ps::eta_limits(parse_sigma_spec(pw_sigma, pw_seed), pw_n);
        } else {
          throw ps::ConfigError("ulpa formula needs --eta or --sigma");
        }
        print_power_result(ps::power_weak_ulpa(eta, pw_gamma4, pw_T, pw_alpha));
      } else if (pw_formula == "h1star" || pw_formula == "s2" || pw_formula == "s3") {
        std::optional<ps::SpikedAltMoments> m;
        std::optional<ps::SigmaTraces> st;
        if (!pw_sigma.empty()) {
          st = ps::sigma_traces(parse_sigma_spec(pw_sigma, pw_seed), pw_n);
          m = ps::spiked_alt_moments(*st, pw_gamma4, pw_n, pw_T);
        }
        if (pw_formula == "h1star") {
          if (!m) throw ps::ConfigError("h1star needs --sigma");
          print_kv("formula", "h1star");
          print_kv("n", double(pw_n));
          print_kv("T", double(pw_T));
          print_kv("gamma4", pw_gamma4);
          print_kv("mu", m->mu);
          print_kv("T_mu", double(pw_T) * m->mu);
          print_kv("sigma2", m->sigma2);
          print_kv("sigma", std::sqrt(m->sigma2));
          print_kv("theta1", m->theta1);
          print_kv("theta2", m->theta2);
          print_kv("omega1", m->omega1);
          print_kv("omega2", m->omega2);
          print_kv("omega3", m->omega3);
          print_kv("c_T", m->c_T);
          return 0;
        }
        const double sigma = pw_sigma_val > 0.0 ? pw_sigma_val
                                                : (m ? std::sqrt(m->sigma2)
                                                     : throw ps::ConfigError(
                                                           "need --sigma or --sigma-val"));
        if (pw_formula == "s2") {
          double B1 = pw_B1, B2 = pw_B2;
          if (st) {
            B1 = st->tr1 / double(pw_n);
            B2 = st->tr2 / double(pw_n);
          }
          print_power_result(
              ps::power_divergent_weak(B1, B2, pw_n, pw_tau, pw_gamma4, sigma, pw_alpha, pw_nu4));
        } else {
          const double mu = m ? m->mu : pw_mu;
          print_power_result(ps::power_growing_spikes(mu, sigma, pw_n, pw_T, pw_gamma4, pw_alpha));
        }
      } else if (pw_formula == "general-cov") {
        std::array<double, 4> theta{};
        if (!pw_theta.empty()) {
          const auto v = ps::detail::parse_double_list(pw_theta, "--theta");
          if (v.size() != 4) throw ps::ConfigError("--theta needs four values");
          theta = {v[0], v[1], v[2], v[3]};
        } else if (!pw_sigma.empty()) {
          theta = ps::theta_moments(parse_sigma_spec(pw_sigma, pw_seed), pw_n);
        } else {
          throw ps::ConfigError("general-cov needs --theta or --sigma");
        }
        std::array<double, 2> vt{};
        if (!pw_vartheta.empty()) {
          const auto v = ps::detail::parse_double_list(pw_vartheta, "--vartheta");
          if (v.size() != 2) throw ps::ConfigError("--vartheta needs two values");
          vt = {v[0], v[1]};
        } else {
          vt = ps::mp_moments(theta, pw_c);
        }
        const auto lim = ps::general_cov_limit(theta, vt, pw_c, pw_T, pw_gamma4, pw_diagonal, pw_alpha);
        print_kv("formula", "general-cov");
        print_kv("branch", lim.branch);
        print_kv("theta1", theta[0]);
        print_kv("theta2", theta[1]);
        print_kv("theta3", theta[2]);
        print_kv("theta4", theta[3]);
        print_kv("vartheta1", vt[0]);
        print_kv("vartheta2", vt[1]);
        print_kv("c", pw_c);
        print_kv("T", double(pw_T));
        print_kv("gamma4", pw_gamma4);
        print_kv("s2", lim.s2);
        print_kv("center", lim.center);
        print_kv("alpha", pw_alpha);
        print_kv("power", lim.power);
        print_kv("note", lim.note);
      } else {
        throw ps::ConfigError("unknown formula '" + pw_formula +
                              "'; valid: s1, ulpa, s2, s3, h1star, general-cov");
      }
      return 0;
    }

    if (gn->parsed()) {
      ps::McConfig cfg;
      cfg.scenario = ps::parse_scenario(gn_scenario);
      cfg.n = gn_n;
      cfg.T = gn_T;
      cfg.seed = gn_seed;
      cfg.sigma_nu2 = gn_sigma_nu2;
      cfg.tau = gn_tau;
      cfg.r = gn_r;
      cfg.alpha_exp = gn_alpha_exp;
      if (cfg.scenario == ps::Scenario::intermediate_s3 || cfg.scenario == ps::Scenario::strong) {
        cfg.d = gn_h.empty() ? std::vector<double>{1.0} : ps::detail::parse_double_list(gn_h, "--h");
      } else if (!gn_h.empty()) {
        cfg.h = ps::detail::parse_double_list(gn_h, "--h");
      }
      if (gn_dist == "gaussian") cfg.dist = ps::ErrorDistribution::gaussian();
      else if (gn_dist == "gamma") cfg.dist = ps::ErrorDistribution::standardized_gamma(gn_shape);
      else if (gn_dist == "uniform") cfg.dist = ps::ErrorDistribution::standardized_uniform();
      else if (gn_dist == "rademacher") cfg.dist = ps::ErrorDistribution::rademacher();
      else throw ps::ConfigError("unknown dist '" + gn_dist + "'");

      if (gn_k < 1 || gn_k > 16) throw ps::ConfigError("--k must be in [1,16]");
      std::vector<double> beta;
      if (!gn_beta.empty()) {
        beta = ps::detail::parse_double_list(gn_beta, "--beta");
        if (beta.size() != gn_k) throw ps::ConfigError("--beta length must equal --k");
      } else {
        for (std::size_t q = 0; q < gn_k; ++q) beta.push_back(q % 2 == 0 ? 1.0 : -0.5);
      }

      const ps::Seed seed{cfg.seed, 0};
      ps::DisturbanceMatrix v = [&]() {
        switch (cfg.scenario) {
          case ps::Scenario::null_cov:
          case ps::Scenario::general_cov:
            return ps::gen_disturbances(cfg.population_covariance(cfg.n), cfg.dist, cfg.n, cfg.T, seed);
          default:
            return ps::gen_factor_disturbances(cfg.factor_alternative(), cfg.dist, cfg.n, cfg.T, seed);
        }
      }();
      const ps::PanelData panel = ps::gen_panel(beta, v, seed, cfg.regressor_law);
      ps::write_panel_csv(gn_output, panel);
      print_kv("output", gn_output);
      print_kv("n", double(cfg.n));
      print_kv("T", double(cfg.T));
      print_kv("k", double(gn_k));
      print_kv("seed", std::to_string(cfg.seed));
      return 0;
    }

    if (va->parsed()) {
      ps::validate::Options opts;
      opts.seed = va_seed;
      opts.threads = va_threads;
      opts.only = va_only;
      opts.cli_path = argv[0];
      const auto results = ps::validate::run(opts, std::cout);
      return ps::validate::all_passed(results) ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
