#pragma once

#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "liouville/errors.hpp"
#include "liouville/problem.hpp"

namespace liouville {

/** Run configuration parsed from a plain-text key = value file.  Unknown keys
 *  are errors; '#' starts a comment. */
struct Config {
  // domain / grid
  double L = 1.0;
  int n = 512;
  // problem
  double alpha = 1.0;
  double beta = 1.0;
  double lambda = 0.05;
  std::vector<double> lambda_grid;  // optional sweep
  std::vector<Well> wells;
  double min_separation = 0.2;  // fraction of L
  // geometry of the construction
  double gamma_fraction = 0.495;   // chart radius cap, fraction of L/ (or half-distance)
  double cutoff_c1 = 0.85;         // bubble cutoff inner constant (C1*delta)
  double cutoff_c2 = 1.15;         // bubble cutoff outer constant (C2*delta)
  double green_cutoff_lo = 0.65;   // eta == 1 inside green_cutoff_lo * gamma
  double green_cutoff_hi = 0.95;   // eta == 0 outside green_cutoff_hi * gamma
  double sigma = 0.5;              // star-norm exponent
  double chi_radius = 5.0;         // R0: projection cutoff radius (expanded units)
  double min_core_cells = 5.0;     // resolvability gate: eps >= min_core_cells * h
  double h_ring_target = std::numeric_limits<double>::quiet_NaN();  // optional calibration
  // solver tolerances
  double tol_linear = 1e-10;
  double tol_newton = 1e-10;
  double tol_fixed_point = 1e-11;
  double tol_reduced = 1e-10;
  int max_newton = 60;
  // continuation
  double continue_lambda_max = 1.5;
  double continue_step = 0.05;
  int continue_max_points = 400;
  // output
  std::string out_dir = "out";
  int workers = 1;

  std::map<std::string, std::string> raw;  // snapshot for the manifest
};

namespace detail {
inline std::vector<double> parse_numbers(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (ss >> tok) {
    // allow comma separated lists too
    for (char& c : tok)
      if (c == ',') c = ' ';
    std::stringstream ts(tok);
    double v;
    while (ts >> v) out.push_back(v);
  }
  return out;
}
}  // namespace detail

/** Parse config text.  Points are listed as "x y [a11 a12 a22]" groups
 *  separated by ';'. */
inline Config parse_config_text(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      // blank or stray text
      std::stringstream ss(line);
      std::string tok;
      if (ss >> tok)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return (a == std::string::npos) ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    c.raw[key] = val;

    auto num = [&](double& slot) {
      try {
        slot = std::stod(val);
      } catch (...) {
        throw ConfigError("config key '" + key + "': bad numeric value '" + val + "'");
      }
    };
    auto inum = [&](int& slot) {
      try {
        slot = std::stoi(val);
      } catch (...) {
        throw ConfigError("config key '" + key + "': bad integer value '" + val + "'");
      }
    };

    if (key == "L") num(c.L);
    else if (key == "n") inum(c.n);
    else if (key == "alpha") num(c.alpha);
    else if (key == "beta") num(c.beta);
    else if (key == "lambda") num(c.lambda);
    else if (key == "lambda_grid") c.lambda_grid = detail::parse_numbers(val);
    else if (key == "points") {
      c.wells.clear();
      std::stringstream groups(val);
      std::string grp;
      while (std::getline(groups, grp, ';')) {
        auto nums = detail::parse_numbers(grp);
        if (nums.empty()) continue;
        Well w;
        if (nums.size() == 2) {
          w.p1 = nums[0];
          w.p2 = nums[1];
        } else if (nums.size() == 5) {
          w.p1 = nums[0];
          w.p2 = nums[1];
          w.a11 = nums[2];
          w.a12 = nums[3];
          w.a22 = nums[4];
        } else {
          throw ConfigError("config key 'points': each group needs 2 or 5 numbers");
        }
        c.wells.push_back(w);
      }
      if (c.wells.empty()) throw ConfigError("config key 'points': no points given");
    } else if (key == "min_separation") num(c.min_separation);
    else if (key == "gamma_fraction") num(c.gamma_fraction);
    else if (key == "cutoff_c1") num(c.cutoff_c1);
    else if (key == "cutoff_c2") num(c.cutoff_c2);
    else if (key == "green_cutoff_lo") num(c.green_cutoff_lo);
    else if (key == "green_cutoff_hi") num(c.green_cutoff_hi);
    else if (key == "sigma") num(c.sigma);
    else if (key == "chi_radius") num(c.chi_radius);
    else if (key == "min_core_cells") num(c.min_core_cells);
    else if (key == "h_ring_target") num(c.h_ring_target);
    else if (key == "tol_linear") num(c.tol_linear);
    else if (key == "tol_newton") num(c.tol_newton);
    else if (key == "tol_fixed_point") num(c.tol_fixed_point);
    else if (key == "tol_reduced") num(c.tol_reduced);
    else if (key == "max_newton") inum(c.max_newton);
    else if (key == "continue_lambda_max") num(c.continue_lambda_max);
    else if (key == "continue_step") num(c.continue_step);
    else if (key == "continue_max_points") inum(c.continue_max_points);
    else if (key == "out_dir") c.out_dir = val;
    else if (key == "workers") inum(c.workers);
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  if (c.wells.empty()) {
    Well w;
    w.p1 = 0.5 * c.L;
    w.p2 = 0.5 * c.L;
    c.wells.push_back(w);
  }
  return c;
}

inline Config load_config(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw ConfigError("cannot open config file: " + path);
  std::string text;
  char buf[4096];
  size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, fp)) > 0) text.append(buf, got);
  std::fclose(fp);
  return parse_config_text(text);
}

inline CurvatureProblem problem_from_config(const Config& c) {
  Grid2D g(c.L, c.n);
  return build_problem(g, c.wells, c.beta, c.alpha, c.lambda, c.min_separation);
}

}  // namespace liouville
