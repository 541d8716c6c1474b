#pragma once

// File formats of the CLI:
//  * balanced panel CSV with header  unit,time,y,x1,...,xk ;
//  * key=value config files ('#' comments) mirroring the McConfig fields.
// Floats are serialized with 17 significant digits so write-then-read is
// bit-exact.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "panelsphere/common.hpp"
#include "panelsphere/mc.hpp"
#include "panelsphere/simulate.hpp"

namespace panelsphere {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ParseError("bad number for " + what + ": '" + s + "'");
  return v;
}

inline std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& tok : split(s, ','))
    if (!trim(tok).empty()) out.push_back(parse_double(trim(tok), what));
  return out;
}

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Write a generated panel as unit,time,y,x1..xk. Units and times are 1-based
// consecutive integers.
inline void write_panel_csv(const std::string& path, const PanelData& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out << "unit,time,y";
  for (std::size_t q = 1; q <= p.k(); ++q) out << ",x" << q;
  out << "\n";
  for (std::size_t i = 0; i < p.n(); ++i) {
    for (std::size_t t = 0; t < p.T(); ++t) {
      out << (i + 1) << ',' << (t + 1) << ',' << detail::fmt17(p.y(i, t));
      for (std::size_t q = 0; q < p.k(); ++q) out << ',' << detail::fmt17(p.x[q](i, t));
      out << "\n";
    }
  }
}

// Parse a balanced panel. Unit/time labels may be arbitrary integers; the
// grid must be complete (every unit observed at every time, no duplicates).
inline PanelData read_panel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file: " + path);
  // strip a potential BOM
  if (line.size() >= 3 && line[0] == '\xef') line = line.substr(3);
  auto header = detail::split(detail::trim(line), ',');
  if (header.size() < 3 || detail::trim(header[0]) != "unit" || detail::trim(header[1]) != "time" ||
      detail::trim(header[2]) != "y")
    throw ParseError("header must be unit,time,y[,x1,...,xk]");
  const std::size_t k = header.size() - 3;
  for (std::size_t q = 0; q < k; ++q)
    if (detail::trim(header[3 + q]) != "x" + std::to_string(q + 1))
      throw ParseError("regressor columns must be named x1..xk in order");

  struct Row {
    long long unit, time;
    double y;
    std::vector<double> x;
  };
  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    auto cells = detail::split(t, ',');
    if (cells.size() != header.size())
      throw ParseError("line " + std::to_string(lineno) + ": expected " +
                       std::to_string(header.size()) + " cells");
    Row r;
    r.unit = std::llround(detail::parse_double(detail::trim(cells[0]), "unit"));
    r.time = std::llround(detail::parse_double(detail::trim(cells[1]), "time"));
    r.y = detail::parse_double(detail::trim(cells[2]), "y");
    r.x.resize(k);
    for (std::size_t q = 0; q < k; ++q)
      r.x[q] = detail::parse_double(detail::trim(cells[3 + q]), "x" + std::to_string(q + 1));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ParseError("no data rows in " + path);

  std::vector<long long> units, times;
  for (const auto& r : rows) {
    units.push_back(r.unit);
    times.push_back(r.time);
  }
  std::sort(units.begin(), units.end());
  units.erase(std::unique(units.begin(), units.end()), units.end());
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  const std::size_t n = units.size(), T = times.size();
  if (n < 2 || T < 2) throw ParseError("panel needs at least 2 units and 2 times");

  auto unit_index = [&](long long u) {
    return std::size_t(std::lower_bound(units.begin(), units.end(), u) - units.begin());
  };
  auto time_index = [&](long long t) {
    return std::size_t(std::lower_bound(times.begin(), times.end(), t) - times.begin());
  };

  PanelData p;
  p.y = Matrix(n, T);
  p.x.assign(k, Matrix(n, T));
  std::vector<char> seen(n * T, 0);
  for (const auto& r : rows) {
    const std::size_t i = unit_index(r.unit), t = time_index(r.time);
    if (seen[i * T + t])
      throw ParseError("duplicate cell at (unit,time)=(" + std::to_string(r.unit) + "," +
                       std::to_string(r.time) + ")");
    seen[i * T + t] = 1;
    p.y(i, t) = r.y;
    for (std::size_t q = 0; q < k; ++q) p.x[q](i, t) = r.x[q];
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < T; ++t)
      if (!seen[i * T + t])
        throw ParseError("unbalanced panel: missing cell at (unit,time)=(" +
                         std::to_string(units[i]) + "," + std::to_string(times[t]) + ")");
  if (!p.y.all_finite()) throw ParseError("non-finite y value");
  for (const auto& xq : p.x)
    if (!xq.all_finite()) throw ParseError("non-finite regressor value");
  return p;
}

// key=value config for cmd_simulate / cmd_gen. Keys mirror McConfig.
inline McConfig parse_mc_config_text(std::istream& in) {
  McConfig cfg;
  static const char* const kKeys[] = {
      "scenario",   "n",    "T",         "delta",      "reps",     "seed", "dist",
      "dist_shape", "alpha", "sigma_nu2", "diag_values", "diag_props", "h", "d",
      "tau",        "r",    "alpha_exp", "sigma_eps2", "loadings", "k",    "beta",
      "regressors", "mode", "csv",       "threads"};
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::size_t> k_requested;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = detail::trim(line);
    const auto hash = t.find('#');
    if (hash != std::string::npos) t = detail::trim(t.substr(0, hash));
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string val = detail::trim(t.substr(eq + 1));
    if (std::find_if(std::begin(kKeys), std::end(kKeys),
                     [&](const char* s) { return key == s; }) == std::end(kKeys)) {
      std::string valid;
      for (const char* s : kKeys) {
        if (!valid.empty()) valid += ", ";
        valid += s;
      }
      throw ConfigError("unknown config key '" + key + "'; valid keys: " + valid);
    }
    try {
      if (key == "scenario") cfg.scenario = parse_scenario(val);
      else if (key == "n") cfg.n = std::size_t(std::llround(detail::parse_double(val, key)));
      else if (key == "T") cfg.T = std::size_t(std::llround(detail::parse_double(val, key)));
      else if (key == "delta") cfg.ulpa_delta = detail::parse_double(val, key);
      else if (key == "reps") cfg.reps = std::size_t(std::llround(detail::parse_double(val, key)));
      else if (key == "seed") cfg.seed = std::strtoull(val.c_str(), nullptr, 10);
      else if (key == "dist") {
        if (val == "gaussian") cfg.dist = ErrorDistribution::gaussian();
        else if (val == "gamma") cfg.dist = ErrorDistribution::standardized_gamma(cfg.dist.shape > 0 ? cfg.dist.shape : 4.0);
        else if (val == "uniform") cfg.dist = ErrorDistribution::standardized_uniform();
        else if (val == "rademacher") cfg.dist = ErrorDistribution::rademacher();
        else throw ConfigError("unknown dist '" + val + "'; valid: gaussian, gamma, uniform, rademacher");
      } else if (key == "dist_shape") {
        const double a = detail::parse_double(val, key);
        if (cfg.dist.kind == ErrorDistribution::Kind::standardized_gamma)
          cfg.dist = ErrorDistribution::standardized_gamma(a);
        else cfg.dist.shape = a;
      }
      else if (key == "alpha") cfg.alpha = detail::parse_double(val, key);
      else if (key == "sigma_nu2") cfg.sigma_nu2 = detail::parse_double(val, key);
      else if (key == "diag_values") cfg.diag_values = detail::parse_double_list(val, key);
      else if (key == "diag_props") cfg.diag_props = detail::parse_double_list(val, key);
      else if (key == "h") cfg.h = detail::parse_double_list(val, key);
      else if (key == "d") cfg.d = detail::parse_double_list(val, key);
      else if (key == "tau") cfg.tau = detail::parse_double(val, key);
      else if (key == "r") cfg.r = std::size_t(std::llround(detail::parse_double(val, key)));
      else if (key == "alpha_exp") cfg.alpha_exp = detail::parse_double(val, key);
      else if (key == "sigma_eps2") cfg.sigma_eps2 = detail::parse_double(val, key);
      else if (key == "loadings") {
        if (val == "canonical") cfg.loadings_random = false;
        else if (val == "random") cfg.loadings_random = true;
        else throw ConfigError("loadings must be canonical or random");
      }
      else if (key == "k") k_requested = std::size_t(std::llround(detail::parse_double(val, key)));
      else if (key == "beta") cfg.beta = detail::parse_double_list(val, key);
      else if (key == "regressors") {
        if (val == "gaussian") cfg.regressor_law = RegressorLaw::gaussian;
        else if (val == "uniform") cfg.regressor_law = RegressorLaw::uniform;
        else throw ConfigError("regressors must be gaussian or uniform");
      }
      else if (key == "mode") {
        if (val == "residual") cfg.mode = McMode::residual;
        else if (val == "raw") cfg.mode = McMode::raw;
        else throw ConfigError("mode must be residual or raw");
      }
      else if (key == "csv") cfg.csv_path = val;
      else if (key == "threads") cfg.threads = int(std::llround(detail::parse_double(val, key)));
    } catch (const ParseError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (k_requested) {
    if (*k_requested < 1 || *k_requested > 16) throw ConfigError("k must be in [1,16]");
    if (cfg.beta.size() != *k_requested) {
      // default slope pattern when beta not spelled out
      std::vector<double> b(*k_requested);
      for (std::size_t q = 0; q < *k_requested; ++q)
        b[q] = (q < cfg.beta.size()) ? cfg.beta[q] : (q % 2 == 0 ? 1.0 : -0.5);
      cfg.beta = std::move(b);
    }
  }
  return cfg;
}

inline McConfig parse_mc_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  return parse_mc_config_text(in);
}

}  // namespace panelsphere
