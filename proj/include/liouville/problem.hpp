#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "liouville/errors.hpp"
#include "liouville/grid.hpp"

namespace liouville {

/** One prescribed zero of f: location plus an SPD shape matrix A (identity
 *  for an isotropic well). */
struct Well {
  double p1 = 0.0, p2 = 0.0;
  double a11 = 1.0, a12 = 0.0, a22 = 1.0;
};

/** Analytic curvature weight f(x) = beta * prod_j d_j(x)^2 with
 *  d_j^2 = (L/pi)^2 [a11 sin^2(pi dx1/L) + 2 a12 sin(pi dx1/L) sin(pi dx2/L)
 *                    + a22 sin^2(pi dx2/L)],
 *  dx = x - p_j.  Zeros exactly at the p_j with Hessian 2 beta A_j
 *  prod_{i != j} d_i^2(p_j); smooth and periodic by construction. */
class AnalyticF {
 public:
  AnalyticF() = default;
  AnalyticF(double side, std::vector<Well> wells, double beta)
      : L_(side), wells_(std::move(wells)), beta_(beta) {
    for (const Well& w : wells_) {
      double det = w.a11 * w.a22 - w.a12 * w.a12;
      if (!(w.a11 > 0.0) || !(det > 0.0))
        throw BadProblem("AnalyticF: well shape matrix must be positive definite");
    }
  }

  double side() const { return L_; }
  double beta() const { return beta_; }
  const std::vector<Well>& wells() const { return wells_; }
  void rescale(double factor) { beta_ *= factor; }

  /** d_j^2 at x. */
  double well_d2(int j, double x1, double x2) const {
    const Well& w = wells_[j];
    double s1 = std::sin(M_PI * (x1 - w.p1) / L_);
    double s2 = std::sin(M_PI * (x2 - w.p2) / L_);
    double q = w.a11 * s1 * s1 + 2.0 * w.a12 * s1 * s2 + w.a22 * s2 * s2;
    return (L_ / M_PI) * (L_ / M_PI) * q;
  }

  double value(double x1, double x2) const {
    double prod = beta_;
    for (int j = 0; j < (int)wells_.size(); ++j) prod *= well_d2(j, x1, x2);
    return prod;
  }

  /** Analytic Hessian of f at zero j: 2 beta A_j prod_{i != j} d_i^2(p_j). */
  std::array<double, 3> hessian_at(int j) const {
    const Well& w = wells_[j];
    double coef = 2.0 * beta_;
    for (int i = 0; i < (int)wells_.size(); ++i)
      if (i != j) coef *= well_d2(i, w.p1, w.p2);
    return {coef * w.a11, coef * w.a12, coef * w.a22};
  }

  /** f(x)/|x - p_j|^2 with the removable limit at p_j (the angular function
   *  a(theta) as r -> 0). */
  double over_r2(int j, double x1, double x2) const {
    const Well& w = wells_[j];
    double d1 = std::remainder(x1 - w.p1, L_);
    double d2 = std::remainder(x2 - w.p2, L_);
    double r2 = d1 * d1 + d2 * d2;
    if (r2 < 1e-24 * L_ * L_) {
      auto H = hessian_at(j);
      return 0.25 * (H[0] + H[2]);  // angular mean at the degenerate point
    }
    if (r2 < 1e-12 * L_ * L_) {
      auto H = hessian_at(j);
      return 0.5 * (H[0] * d1 * d1 + 2 * H[1] * d1 * d2 + H[2] * d2 * d2) / r2;
    }
    return value(x1, x2) / r2;
  }

 private:
  double L_ = 1.0;
  std::vector<Well> wells_;
  double beta_ = 1.0;
};

/** Hypothesis checklist and chart-wise quadratic bounds for one problem. */
struct ValidationReport {
  struct PerPoint {
    double beta1 = 0.0, beta2 = 0.0;  // bounds of f/r^2 over the chart
    double ratio = 0.0;
    double hessian_eig_min = 0.0, hessian_eig_max = 0.0;
    double f_at_point = 0.0;
  };
  std::vector<PerPoint> points;
  double f_grid_min = 0.0;
  double f_integral = 0.0;
  double min_pairwise_distance = 0.0;
  bool f_nonnegative = false;
  bool f_not_identically_zero = false;
  bool zeros_ok = false;
  bool hessians_positive = false;
  bool alpha_positive = false;
  bool ok() const {
    return f_nonnegative && f_not_identically_zero && zeros_ok && hessians_positive &&
           alpha_positive;
  }
};

/** Full problem data: analytic f with its sampled field, alpha > 0, lambda,
 *  and the prescribed zeros with analytic Hessians. */
struct CurvatureProblem {
  Grid2D grid;
  AnalyticF f_analytic;
  ScalarField f;
  double alpha = 1.0;
  double lambda = 0.0;
  std::vector<std::array<double, 2>> points;
  std::vector<std::array<double, 3>> hessians;  // (f11, f12, f22) per point

  int n_points() const { return (int)points.size(); }
  double area() const { return grid.side_length * grid.side_length; }

  /** kappa_lambda = -f + lambda^2 at a node. */
  double kappa(int i, int j) const { return -f(i, j) + lambda * lambda; }

  ScalarField kappa_field() const {
    ScalarField k = f;
    k *= -1.0;
    k += lambda * lambda;
    return k;
  }

  /** Resample f and rebuild metadata on a different grid. */
  CurvatureProblem on_grid(const Grid2D& g) const {
    CurvatureProblem q = *this;
    q.grid = g;
    q.f = ScalarField(g);
    q.f.fill_from([&](double x, double y) { return f_analytic.value(x, y); });
    return q;
  }

  /** Exact scaling: replacing f by s*f shifts the nonlinear Green function by
   *  -log s; used for calibrating the bubble scale window. */
  void rescale_f(double s) {
    f_analytic.rescale(s);
    f *= s;
    for (auto& H : hessians)
      for (double& v : H) v *= s;
  }
};

inline std::pair<double, double> sym2x2_eig(const std::array<double, 3>& H) {
  double tr = H[0] + H[2];
  double disc = std::sqrt(std::max(0.0, (H[0] - H[2]) * (H[0] - H[2]) + 4 * H[1] * H[1]));
  return {0.5 * (tr - disc), 0.5 * (tr + disc)};
}

/** Build the product-of-wells problem.  Throws BadPoints when the zeros are
 *  too close on the torus and BadProblem on hypothesis violations. */
inline CurvatureProblem build_problem(const Grid2D& grid, const std::vector<Well>& wells,
                                      double beta, double alpha, double lambda,
                                      double min_separation_frac = 0.2) {
  if (wells.empty()) throw BadProblem("build_problem: need at least one zero of f");
  if (!(alpha > 0.0)) throw BadProblem("build_problem: alpha must be positive");
  if (!(beta > 0.0)) throw BadProblem("build_problem: beta must be positive");
  if (lambda < 0.0) throw BadProblem("build_problem: lambda must be nonnegative");
  const double L = grid.side_length;
  for (size_t a = 0; a < wells.size(); ++a)
    for (size_t b = a + 1; b < wells.size(); ++b) {
      double d = grid.pdist(wells[a].p1, wells[a].p2, wells[b].p1, wells[b].p2);
      if (d < min_separation_frac * L)
        throw BadPoints("build_problem: zeros " + std::to_string(a) + " and " +
                        std::to_string(b) + " closer than " +
                        std::to_string(min_separation_frac) + "*L on the torus");
    }

  CurvatureProblem p;
  p.grid = grid;
  p.f_analytic = AnalyticF(L, wells, beta);
  p.f = ScalarField(grid);
  p.f.fill_from([&](double x, double y) { return p.f_analytic.value(x, y); });
  p.alpha = alpha;
  p.lambda = lambda;
  for (size_t j = 0; j < wells.size(); ++j) {
    p.points.push_back({wells[j].p1, wells[j].p2});
    p.hessians.push_back(p.f_analytic.hessian_at((int)j));
    auto [lo, hi] = sym2x2_eig(p.hessians.back());
    if (lo < 1e-6)
      throw BadProblem("build_problem: Hessian at zero " + std::to_string(j) +
                       " nearly degenerate (min eigenvalue " + std::to_string(lo) + ")");
  }
  return p;
}

/** Chart-wise verification of the quadratic pinching beta1 r^2 <= f <= beta2 r^2
 *  plus the hypothesis checklist. */
inline ValidationReport validate(const CurvatureProblem& p, double chart_radius) {
  ValidationReport rep;
  const Grid2D& g = p.grid;
  rep.f_grid_min = p.f.values()[0];
  for (double v : p.f.values()) rep.f_grid_min = std::min(rep.f_grid_min, v);
  rep.f_integral = integrate(p.f);
  rep.f_nonnegative = rep.f_grid_min >= -1e-12 * std::max(1.0, p.f.max_abs());
  rep.f_not_identically_zero = p.f.max_abs() > 1e-12;
  rep.alpha_positive = p.alpha > 0.0;
  rep.zeros_ok = true;
  rep.hessians_positive = true;
  rep.min_pairwise_distance = g.side_length;
  for (int a = 0; a < p.n_points(); ++a)
    for (int b = a + 1; b < p.n_points(); ++b)
      rep.min_pairwise_distance =
          std::min(rep.min_pairwise_distance, g.pdist(p.points[a][0], p.points[a][1],
                                                      p.points[b][0], p.points[b][1]));

  for (int j = 0; j < p.n_points(); ++j) {
    ValidationReport::PerPoint pp;
    pp.f_at_point = p.f_analytic.value(p.points[j][0], p.points[j][1]);
    if (!(std::abs(pp.f_at_point) <= 1e-12)) rep.zeros_ok = false;
    auto [lo, hi] = sym2x2_eig(p.hessians[j]);
    pp.hessian_eig_min = lo;
    pp.hessian_eig_max = hi;
    if (lo < 1e-6) rep.hessians_positive = false;
    // bounds of f/r^2 over the chart: grid scan plus the r -> 0 limit values
    double b1 = lo / 2.0, b2 = hi / 2.0;  // limits of a(theta)
    for (int i = 0; i < g.n; ++i) {
      for (int k = 0; k < g.n; ++k) {
        double r = g.pdist(g.x(i), g.x(k), p.points[j][0], p.points[j][1]);
        if (r <= chart_radius && r > 0.5 * g.h) {
          double v = p.f_analytic.over_r2(j, g.x(i), g.x(k));
          b1 = std::min(b1, v);
          b2 = std::max(b2, v);
        }
      }
    }
    pp.beta1 = b1;
    pp.beta2 = b2;
    pp.ratio = (b1 > 0) ? b2 / b1 : std::numeric_limits<double>::infinity();
    rep.points.push_back(pp);
  }
  return rep;
}

/** Area of the set where kappa_lambda > 0 (shrinks like lambda^2 as the
 *  wells tighten). */
inline double kappa_positive_area(const CurvatureProblem& p) {
  double cnt = 0.0;
  double l2 = p.lambda * p.lambda;
  for (double v : p.f.values())
    if (l2 - v > 0.0) cnt += 1.0;
  return cnt * p.grid.h * p.grid.h;
}

/** Default chart radius: largest disk on which the quadratic pinching stays
 *  moderate and charts around distinct zeros remain disjoint. */
inline double default_chart_radius(const CurvatureProblem& p) {
  double gamma = 0.495 * p.grid.side_length;
  for (int a = 0; a < p.n_points(); ++a)
    for (int b = a + 1; b < p.n_points(); ++b)
      gamma = std::min(gamma, 0.5 * p.grid.pdist(p.points[a][0], p.points[a][1],
                                                 p.points[b][0], p.points[b][1]));
  return gamma;
}

}  // namespace liouville
