// Drives the built CLI binary end to end: exit codes, key=value output,
// reproducibility. Takes the binary path as argv[1].

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void check(bool ok, const std::string& what) {
  if (ok) {
    std::cout << "ok: " << what << "\n";
  } else {
    ++g_failures;
    std::cout << "FAIL: " << what << "\n";
  }
}

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run(const std::string& cmd) {
  const fs::path tmp = fs::temp_directory_path() / "ps_cli_out.txt";
  const std::string full = cmd + " > \"" + tmp.string() + "\" 2>&1";
  const int rc = std::system(full.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  std::ifstream in(tmp);
  std::ostringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

std::map<std::string, std::string> kv(const std::string& text) {
  std::map<std::string, std::string> m;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) m[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return m;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: cli_exec_tests <path-to-cli>\n";
    return 1;
  }
  const std::string cli = std::string("\"") + argv[1] + "\"";
  const fs::path dir = fs::temp_directory_path();
  const fs::path csv = dir / "ps_cli_panel.csv";
  const fs::path cfg = dir / "ps_cli_sim.cfg";
  const fs::path sim1 = dir / "ps_cli_sim1.csv";
  const fs::path sim2 = dir / "ps_cli_sim2.csv";

  // --- gen + test (grj) on a null panel: p in (0,1), reproducible ---
  {
    const auto g = run(cli + " gen --output \"" + csv.string() + "\" --n 100 --T 100 --k 2 --seed 42");
    check(g.exit_code == 0, "gen exits 0");
    const auto t1 = run(cli + " test --input \"" + csv.string() + "\" --variant grj --alpha 0.05");
    const auto m1 = kv(t1.out);
    check(t1.exit_code == 0 || t1.exit_code == 2, "test exits 0 or 2 on a valid panel");
    const double p = std::atof(m1.at("p_value").c_str());
    check(p > 0.0 && p < 1.0, "p_value in (0,1), got " + m1.at("p_value"));
    check(m1.at("variant") == "grj", "variant echoed");
    const auto t2 = run(cli + " test --input \"" + csv.string() + "\" --variant grj --alpha 0.05");
    check(t1.out == t2.out && t1.exit_code == t2.exit_code, "test output bit-identical across runs");
  }

  // --- noiseless panel -> degenerate residual error, exit 1 ---
  {
    const fs::path noiseless = dir / "ps_cli_noiseless.csv";
    std::ofstream out(noiseless);
    out << "unit,time,y,x1\n";
    for (int i = 1; i <= 5; ++i)
      for (int t = 1; t <= 5; ++t) {
        const double x = 0.1 * i + 0.7 * t;
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g\n", i, t, 2.0 * x + i, x);
        out << buf;
      }
    out.close();
    const auto t = run(cli + " test --input \"" + noiseless.string() + "\"");
    check(t.exit_code == 1, "noiseless panel exits 1");
    check(t.out.find("perfect fit") != std::string::npos || t.out.find("zero residuals") != std::string::npos,
          "degenerate-residual message printed");
    fs::remove(noiseless);
  }

  // --- classic variant on a small panel matches the chi-square oracle ---
  {
    const fs::path tiny = dir / "ps_cli_tiny.csv";
    std::ofstream out(tiny);
    out << "unit,time,y\n";
    out << "1,1,1\n1,2,0.25\n1,3,-0.7\n2,1,0.15\n2,2,1.3\n2,3,-0.6\n";
    out.close();
    const auto t = run(cli + " test --input \"" + tiny.string() + "\" --variant classic");
    const auto m = kv(t.out);
    check(t.exit_code == 0 || t.exit_code == 2, "classic variant runs");
    check(m.count("p_value") == 1 && m.at("variant") == "classic", "classic report printed");
    // independent oracle: for n=2 the chi-square upper tail with df=2 is
    // exp(-x/2) at x = n*T*u/2 = 3u
    const double u = std::atof(m.at("u").c_str());
    const double p = std::atof(m.at("p_value").c_str());
    check(std::abs(p - std::exp(-1.5 * u)) < 1e-9, "classic p matches closed-form chi2 tail");
    fs::remove(tiny);
  }

  // --- simulate: --threads 1 vs 8 byte-identical per-rep CSV ---
  {
    {
      std::ofstream out(cfg);
      out << "scenario=null\nn=50\nT=50\nreps=200\nseed=4242\nalpha=0.05\n";
    }
    const auto s1 =
        run(cli + " simulate --config \"" + cfg.string() + "\" --threads 1 --csv \"" + sim1.string() + "\"");
    const auto s8 =
        run(cli + " simulate --config \"" + cfg.string() + "\" --threads 8 --csv \"" + sim2.string() + "\"");
    check(s1.exit_code == 0 && s8.exit_code == 0, "simulate exits 0");
    check(!slurp(sim1).empty() && slurp(sim1) == slurp(sim2),
          "per-rep CSV byte-identical for --threads 1 vs 8");
    const auto m = kv(s1.out);
    check(m.count("rejection_rate") == 1 && m.count("mean_J") == 1, "summary keys present");
    const auto bad = run(cli + " simulate --config /nonexistent.cfg");
    check(bad.exit_code == 1, "missing config exits 1");
  }

  // --- weak-s1 simulate reports the formula power next to the empirical rate ---
  {
    const fs::path cfg2 = dir / "ps_cli_s1.cfg";
    {
      std::ofstream out(cfg2);
      out << "scenario=weak-s1\nn=60\nT=60\nreps=150\nseed=7\nh=2\n";
    }
    const auto s = run(cli + " simulate --config \"" + cfg2.string() + "\"");
    const auto m = kv(s.out);
    check(s.exit_code == 0 && m.count("theory_power") == 1, "theory_power included for weak-s1");
    const double tp = std::atof(m.at("theory_power").c_str());
    check(std::abs(tp - 0.6388) < 1e-3, "theory_power ~ 0.6388, got " + m.at("theory_power"));
    fs::remove(cfg2);
  }

  // --- power formulas through the CLI ---
  {
    const auto p0 = run(cli + " power --formula s1 --h 0 --alpha 0.05 --c_T 1");
    check(std::abs(std::atof(kv(p0.out).at("power").c_str()) - 0.05) < 1e-9,
          "s1 with h=0 gives power = alpha");
    const auto ph = run(cli + " power --formula h1star --sigma identity --n 100 --T 100 --gamma4 3");
    const auto mh = kv(ph.out);
    check(std::abs(std::atof(mh.at("T_mu").c_str()) - 101.0) < 1e-9,
          "h1star identity prints T_mu = n + gamma4 - 2 = 101");
    const auto pu = run(cli + " power --formula ulpa --sigma diag:2,1,1,1 --n 4 --T 100 --gamma4 3");
    check(std::abs(std::atof(kv(pu.out).at("power").c_str()) - 0.99996) < 1e-4,
          "ulpa formula reproduces the diagonal {2,1,1,1} power");
    const auto pg = run(cli + " power --formula general-cov --theta 1,1,1,1 --vartheta 1,2 --c 1 --T 100");
    const auto mg = kv(pg.out);
    check(std::abs(std::atof(mg.at("s2").c_str()) - 12.0) < 1e-9, "general-cov s2 = 12 echoed");
    check(mg.count("note") == 1, "moment-convention note emitted");
    const auto pbad = run(cli + " power --formula nope");
    check(pbad.exit_code == 1, "unknown formula exits 1");
  }

  // --- unbalanced CSV parse error: exit 1, names the cell ---
  {
    const fs::path ub = dir / "ps_cli_unbal.csv";
    {
      std::ofstream out(ub);
      out << "unit,time,y\n1,1,0.4\n1,2,0.6\n2,1,0.5\n";
    }
    const auto t = run(cli + " test --input \"" + ub.string() + "\"");
    check(t.exit_code == 1, "unbalanced panel exits 1");
    check(t.out.find("(2,2)") != std::string::npos, "offending (unit,time) named");
    fs::remove(ub);
  }

  // --- env seed fallback: PANEL_SPHERICITY_SEED drives gen when --seed absent ---
  {
    const fs::path e1 = dir / "ps_cli_env1.csv";
    const fs::path e2 = dir / "ps_cli_env2.csv";
    const auto g1 = run("PANEL_SPHERICITY_SEED=99 " + cli + " gen --output \"" + e1.string() +
                        "\" --n 10 --T 10 --k 1");
    const auto g2 = run("PANEL_SPHERICITY_SEED=99 " + cli + " gen --output \"" + e2.string() +
                        "\" --n 10 --T 10 --k 1");
    check(g1.exit_code == 0 && g2.exit_code == 0, "env-seeded gen runs");
    check(slurp(e1) == slurp(e2), "env seed reproducible");
    fs::remove(e1);
    fs::remove(e2);
  }

  fs::remove(csv);
  fs::remove(cfg);
  fs::remove(sim1);
  fs::remove(sim2);

  std::cout << (g_failures == 0 ? "cli_exec_tests: all ok\n"
                                : "cli_exec_tests: FAILURES\n");
  return g_failures == 0 ? 0 : 1;
}
