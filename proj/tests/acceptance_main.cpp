// Acceptance runner: executes every validation criterion at its pinned
// tolerance and prints one PASS/FAIL line per criterion. Nonzero exit on any
// failure. --cli <path> lets the thread-determinism criterion drive the real
// binary.

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>

#include "panelsphere/validate.hpp"

int main(int argc, char** argv) {
  panelsphere::validate::Options opts;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    auto next = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << "missing value for " << a << "\n";
        std::exit(1);
      }
      return argv[++i];
    };
    if (a == "--cli") {
      opts.cli_path = next();
    } else if (a == "--seed") {
      opts.seed = std::strtoull(next().c_str(), nullptr, 10);
    } else if (a == "--threads") {
      opts.threads = std::atoi(next().c_str());
    } else if (a == "--only") {
      const std::string list = next();
      std::string cur;
      for (char ch : list + ",") {
        if (ch == ',') {
          if (!cur.empty()) opts.only.push_back(std::atoi(cur.c_str()));
          cur.clear();
        } else {
          cur.push_back(ch);
        }
      }
    } else {
      std::cerr << "unknown flag " << a << "\n";
      return 1;
    }
  }

  const auto results = panelsphere::validate::run(opts, std::cout);
  std::size_t passed = 0;
  for (const auto& r : results) passed += r.pass ? 1 : 0;
  std::cout << "acceptance: " << passed << "/" << results.size() << " criteria passed\n";
  return panelsphere::validate::all_passed(results) ? 0 : 1;
}
