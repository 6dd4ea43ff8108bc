#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "liouville/helmholtz.hpp"
#include "liouville/problem.hpp"
#include "liouville/quadrature.hpp"
#include "liouville/radial.hpp"

namespace liouville {
namespace green {

// ---------------------------------------------------------------------------
// Quintic C^2 bump: 1 on r <= a, 0 on r >= b.
// ---------------------------------------------------------------------------

inline double bump(double r, double a, double b) {
  if (r <= a) return 1.0;
  if (r >= b) return 0.0;
  double s = (r - a) / (b - a);
  return 1.0 + s * s * s * (-10.0 + s * (15.0 - 6.0 * s));
}

inline double bump_d1(double r, double a, double b) {
  if (r <= a || r >= b) return 0.0;
  double w = b - a, s = (r - a) / w;
  return -30.0 * s * s * (1.0 - s) * (1.0 - s) / w;
}

inline double bump_d2(double r, double a, double b) {
  if (r <= a || r >= b) return 0.0;
  double w = b - a, s = (r - a) / w;
  return -60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (w * w);
}

// ---------------------------------------------------------------------------
// Singular template Gamma(r) = -4 log r + V(r) and its radial ingredients.
// ---------------------------------------------------------------------------

/** e^{V(r)} / r^2 = 2 / (r log(1/r))^2: the radial factor carried by every
 *  singular integrand near a bubbling point. */
inline double singular_factor(double r) {
  double lg = std::log(1.0 / r);
  return 2.0 / (r * r * lg * lg);
}

inline double template_value_r(double r) {
  if (!(r > 0.0) || r >= 1.0)
    throw DomainError("singular_template: needs 0 < r < 1, got " + std::to_string(r));
  return -4.0 * std::log(r) + radial::v_exact(r);
}

inline double template_deriv_r(double r) {
  return -4.0 / r + radial::v_exact_deriv(r);
}

/** Gamma centered at p, evaluated at x (periodic distance). */
inline double singular_template(const Grid2D& g, double p1, double p2, double x1, double x2) {
  return template_value_r(g.pdist(x1, x2, p1, p2));
}

// ---------------------------------------------------------------------------
// Near-field cell averages of A(x) * S(|x-p|) with S = singular_factor.
// The antiderivative of S in polar coordinates is exact: S r dr = d(2/|log r|),
// which keeps the integrable singularity at p harmless.
// ---------------------------------------------------------------------------

namespace detail {

inline double radial_antiderivative(double r) {
  // int S(r) r dr = -2/log r  (r < 1)
  return -2.0 / std::log(r);
}

}  // namespace detail

/** Cell average of A(x) S(|x-p|) over the h-cell centered at a node. */
template <class AFn>
double singular_cell_average(const Grid2D& g, double node_x, double node_y, double p1,
                             double p2, AFn&& A, int n_theta = 384, int nseg = 6) {
  const double hh = 0.5 * g.h;
  // reduce p to the image nearest the node
  p1 = node_x - g.pdiff(node_x, p1);
  p2 = node_y - g.pdiff(node_y, p2);
  double r = std::hypot(node_x - p1, node_y - p2);
  if (r > 2.5 * g.h) {
    double v = gauss2d(
        [&](double x, double y) {
          double rr = std::hypot(x - p1, y - p2);
          return A(x, y) * singular_factor(rr);
        },
        node_x - hh, node_x + hh, node_y - hh, node_y + hh);
    return v / (g.h * g.h);
  }
  // ray sweep with the exact radial antiderivative
  const double x0 = node_x - hh, x1 = node_x + hh, y0 = node_y - hh, y1 = node_y + hh;
  const double dth = 2.0 * M_PI / n_theta;
  double acc = 0.0;
  for (int m = 0; m < n_theta; ++m) {
    double th = (m + 0.5) * dth;
    double c = std::cos(th), s = std::sin(th);
    double tmin = 0.0, tmax = 1e300;
    bool miss = false;
    if (std::abs(c) > 1e-14) {
      double ta = (x0 - p1) / c, tb = (x1 - p1) / c;
      if (ta > tb) std::swap(ta, tb);
      tmin = std::max(tmin, ta);
      tmax = std::min(tmax, tb);
    } else if (p1 < x0 || p1 > x1) {
      miss = true;
    }
    if (std::abs(s) > 1e-14) {
      double ta = (y0 - p2) / s, tb = (y1 - p2) / s;
      if (ta > tb) std::swap(ta, tb);
      tmin = std::max(tmin, ta);
      tmax = std::min(tmax, tb);
    } else if (p2 < y0 || p2 > y1) {
      miss = true;
    }
    if (miss || tmax <= tmin) continue;
    double r_lo = tmin;
    for (int q = 0; q < nseg; ++q) {
      double r_hi = tmin + (tmax - tmin) * (q + 1) / nseg;
      double Plo = (r_lo <= 0.0) ? 0.0 : detail::radial_antiderivative(r_lo);
      double Phi = detail::radial_antiderivative(r_hi);
      double rm = 0.5 * (r_lo + r_hi);
      acc += A(p1 + rm * c, p2 + rm * s) * (Phi - Plo) * dth;
      r_lo = r_hi;
    }
  }
  return acc / (g.h * g.h);
}

// ---------------------------------------------------------------------------
// Green function of the singular problem: G = sum_j eta_j Gamma_j + H.
// ---------------------------------------------------------------------------

struct GreenParams {
  double gamma_fraction = 0.495;  // chart radius cap (fraction of L)
  double cutoff_lo = 0.65;        // eta == 1 inside cutoff_lo * gamma
  double cutoff_hi = 0.95;        // eta == 0 outside cutoff_hi * gamma
  double tol_newton = 1e-10;      // relative residual target of the H solve
  double tol_linear = 1e-10;
  int max_newton = 60;
  double ring_fraction = 0.55;      // default extraction radius, fraction of gamma
  double near_field_factor = 0.08;  // cell-average radius = max(4h, factor*gamma)
};

struct GreenFunction {
  CurvatureProblem problem;
  GreenParams params;
  double chart_radius = 0.0;  // gamma
  ScalarField H;              // regular part
  ScalarField theta;          // source term as used in the discrete solve
  ScalarField coeff;          // C = f e^{eta Gamma}, cell-averaged near points
  double theta_total = 0.0;       // h^2 sum of theta (continuum value -8 pi n)
  double theta_consistency = 0.0; // theta_total + 8 pi n, per unit area
  double mass_check = 0.0;        // independent quadrature of f e^G
  double newton_residual = 0.0;
  int newton_iterations = 0;
  std::vector<double> H_ring;     // ring extraction at ring_fraction * gamma

  double gamma() const { return chart_radius; }
  double eta(double r) const {
    return bump(r, params.cutoff_lo * chart_radius, params.cutoff_hi * chart_radius);
  }

  /** G sampled at a point (diagnostic; distance floored at h/4 near the
   *  singularities). */
  double G_at(double x, double y) const {
    const Grid2D& g = problem.grid;
    double v = sample(H, x, y);
    for (int j = 0; j < problem.n_points(); ++j) {
      double r = g.pdist(x, y, problem.points[j][0], problem.points[j][1]);
      double e = eta(r);
      if (e > 0.0) v += e * template_value_r(std::max(r, 0.25 * g.h));
    }
    return v;
  }
};

/** Near-singularity cells whose nonlinear term C e^H is cell-averaged with
 *  the current H instead of evaluated at the node (pointwise sampling of the
 *  barely-integrable coefficient would dominate the error budget there). */
struct NearFieldCells {
  std::vector<size_t> node;
  std::vector<double> x, y;   // node coordinates
  std::vector<double> p1, p2; // owning singular point
  std::vector<int> point;     // index of the owning point

  bool empty() const { return node.empty(); }

  /** avg over each cell of (f/r^2) S(r) e^H, bicubic in H. */
  void values(const CurvatureProblem& prob, const ScalarField& H,
              std::vector<double>& out) const {
    out.resize(node.size());
    for (size_t i = 0; i < node.size(); ++i) {
      int j = point[i];
      out[i] = green::singular_cell_average(
          prob.grid, x[i], y[i], p1[i], p2[i],
          [&](double xx, double yy) {
            return prob.f_analytic.over_r2(j, xx, yy) * std::exp(sample(H, xx, yy));
          },
          96, 3);
    }
  }
};

namespace detail {

/** Solve Delta H - C e^H + alpha = Theta by damped Newton; each step is a
 *  nonnegative-coefficient Helmholtz solve.  Shared by the Green module and
 *  its tests.  When near-field cells are given, their C e^H term is
 *  cell-averaged against the current iterate. */
inline void solve_h_equation(const Grid2D& g, const ScalarField& C, const ScalarField& theta,
                             double alpha, ScalarField& H, double tol_newton,
                             double tol_linear, int max_newton, double* out_resid,
                             int* out_iters, const CurvatureProblem* prob = nullptr,
                             const NearFieldCells* near = nullptr) {
  const size_t N = (size_t)g.n * g.n;
  Vec resid(N), delta(N);
  // uniform per-node scale: the equation's bulk data level, not the (huge)
  // near-singularity node values
  double s0 = std::abs(alpha) + std::abs(integrate(theta)) / (g.side_length * g.side_length);
  if (s0 == 0.0) s0 = 1.0;
  double scale = s0 * std::sqrt((double)N);

  std::vector<double> near_vals;
  auto nonlinear_term = [&](const ScalarField& Hf, size_t k) {
    return C.data()[k] * std::exp(Hf.data()[k]);
  };
  auto residual = [&](const ScalarField& Hf, Vec& out) {
    ScalarField lap = laplacian(Hf);
    for (size_t k = 0; k < N; ++k)
      out[k] = lap.data()[k] - nonlinear_term(Hf, k) + alpha - theta.data()[k];
    if (near && prob) {
      near->values(*prob, Hf, near_vals);
      for (size_t i = 0; i < near->node.size(); ++i) {
        size_t k = near->node[i];
        out[k] = lap.data()[k] - near_vals[i] + alpha - theta.data()[k];
      }
    }
  };

  residual(H, resid);
  double rn = norm2(resid) / scale;
  int it = 0;
  for (; it < max_newton && rn > tol_newton; ++it) {
    // Jacobian: Delta - diag(C e^H); solve (-Delta + C e^H) delta = resid.
    // Near-field cells use the averaged value as their diagonal (quasi-Newton).
    std::vector<double> c(N);
    for (size_t k = 0; k < N; ++k) c[k] = C.data()[k] * std::exp(H.data()[k]);
    if (near && prob && !near_vals.empty())
      for (size_t i = 0; i < near->node.size(); ++i) c[near->node[i]] = near_vals[i];
    bool all_zero = true;
    for (size_t k = 0; k < N && all_zero; ++k)
      if (c[k] != 0.0) all_zero = false;
    std::fill(delta.begin(), delta.end(), 0.0);
    if (all_zero) {
      // degenerate linearization: periodic Poisson with the zero-mean convention
      Spectral& sp = spectral_for(g);
      Vec rhs = resid;
      double m = 0.0;
      for (double v : rhs) m += v;
      m /= (double)N;
      if (std::abs(m) > 1e-10 * (scale / std::sqrt((double)N)) + 1e-14)
        throw SingularSystem("solve_h_equation: incompatible mean with C == 0");
      for (double& v : rhs) v -= m;
      sp.solve_shifted(rhs.data(), 0.0, delta.data());
      double dm = 0.0;
      for (double v : delta) dm += v;
      dm /= (double)N;
      for (double& v : delta) v -= dm;
    } else {
      HelmholtzOperator op(g, c, tol_linear);
      op.solve(resid, delta);
    }
    // line search on the residual norm
    double step = 1.0;
    ScalarField Htry = H;
    Vec rtry(N);
    for (int ls = 0; ls < 25; ++ls) {
      for (size_t k = 0; k < N; ++k) Htry.data()[k] = H.data()[k] + step * delta.data()[k];
      residual(Htry, rtry);
      double rt = norm2(rtry) / scale;
      if (rt < rn * (1.0 - 0.25 * step) || rt < tol_newton) {
        H = Htry;
        resid = rtry;
        rn = rt;
        break;
      }
      step *= 0.5;
      if (ls == 24)
        throw NoConvergence("solve_h_equation: line search stalled at residual " +
                            std::to_string(rn));
    }
  }
  if (rn > tol_newton)
    throw NoConvergence("solve_h_equation: residual " + std::to_string(rn) + " after " +
                        std::to_string(it) + " Newton steps");
  if (out_resid) *out_resid = rn;
  if (out_iters) *out_iters = it;
}

}  // namespace detail

/** Source term of the regular-part equation: consistency of the assembled
 *  G = sum eta_j Gamma_j + H with the singular problem requires
 *  Theta = -[eta S(r) + 2 eta' Gamma' + Gamma (eta'' + eta'/r)] per point.
 *  Its integral equals -8 pi per point; the gap of the discrete sum from that
 *  value is the recorded consistency diagnostic. */
inline ScalarField compute_theta(const CurvatureProblem& p, double gamma,
                                 const GreenParams& prm) {
  const Grid2D& g = p.grid;
  ScalarField theta(g);
  const double a = prm.cutoff_lo * gamma, b = prm.cutoff_hi * gamma;
  const double r_reg = std::max(4.0 * g.h, prm.near_field_factor * gamma);
  for (int j = 0; j < p.n_points(); ++j) {
    const double p1 = p.points[j][0], p2 = p.points[j][1];
    for (int i = 0; i < g.n; ++i) {
      double x = g.x(i);
      for (int k = 0; k < g.n; ++k) {
        double y = g.x(k);
        double r = g.pdist(x, y, p1, p2);
        if (r >= b + 2.0 * g.h) continue;
        double val = 0.0;
        if (r < r_reg) {
          // eta == 1 here; cell-average the singular factor
          val = -singular_cell_average(g, x, y, p1, p2, [](double, double) { return 1.0; });
        } else if (r > a - 2.0 * g.h) {
          // cutoff annulus: sharp radial structure, cell-average it against
          // the nearest periodic image of the point
          double px = x - g.pdiff(x, p1), py = y - g.pdiff(y, p2);
          double hh = 0.5 * g.h;
          val = gauss2d_avg4(
              [&](double xx, double yy) {
                double rr = std::hypot(xx - px, yy - py);
                if (rr >= b) return 0.0;
                double vv = -bump(rr, a, b) * singular_factor(rr);
                if (rr > a) {
                  double e1 = bump_d1(rr, a, b), e2 = bump_d2(rr, a, b);
                  vv -= 2.0 * e1 * template_deriv_r(rr) +
                        template_value_r(rr) * (e2 + e1 / rr);
                }
                return vv;
              },
              x - hh, x + hh, y - hh, y + hh);
        } else {
          val = -bump(r, a, b) * singular_factor(r);
        }
        theta(i, k) += val;
      }
    }
  }
  return theta;
}

/** Coefficient field C = f e^{sum eta_j Gamma_j}, cell-averaged near the
 *  singular points.  Optionally reports the averaged cells so the nonlinear
 *  solve can re-average them against its running iterate. */
inline ScalarField compute_coefficient(const CurvatureProblem& p, double gamma,
                                       const GreenParams& prm,
                                       NearFieldCells* near = nullptr) {
  const Grid2D& g = p.grid;
  ScalarField C(g);
  const double a = prm.cutoff_lo * gamma, b = prm.cutoff_hi * gamma;
  const double r_reg = std::max(4.0 * g.h, prm.near_field_factor * gamma);
  auto template_exponent = [&](double xx, double yy) {
    double expo = 0.0;
    for (int j = 0; j < p.n_points(); ++j) {
      double r = g.pdist(xx, yy, p.points[j][0], p.points[j][1]);
      if (r < b) expo += bump(r, a, b) * template_value_r(r);
    }
    return expo;
  };
  for (int i = 0; i < g.n; ++i) {
    double x = g.x(i);
    for (int k = 0; k < g.n; ++k) {
      double y = g.x(k);
      bool averaged = false;
      bool annulus = false;
      for (int j = 0; j < p.n_points(); ++j) {
        double r = g.pdist(x, y, p.points[j][0], p.points[j][1]);
        if (r < r_reg) {
          // f e^Gamma = (f/r^2) S(r); average it over the cell
          C(i, k) = singular_cell_average(
              g, x, y, p.points[j][0], p.points[j][1],
              [&](double xx, double yy) { return p.f_analytic.over_r2(j, xx, yy); });
          if (near) {
            near->node.push_back((size_t)i * g.n + k);
            near->x.push_back(x);
            near->y.push_back(y);
            near->p1.push_back(p.points[j][0]);
            near->p2.push_back(p.points[j][1]);
            near->point.push_back(j);
          }
          averaged = true;
          break;
        }
        if (r > a - 2.0 * g.h && r < b + 2.0 * g.h) annulus = true;
      }
      if (averaged) continue;
      if (annulus) {
        double hh = 0.5 * g.h;
        C(i, k) = gauss2d_avg4(
            [&](double xx, double yy) {
              return p.f_analytic.value(xx, yy) * std::exp(template_exponent(xx, yy));
            },
            x - hh, x + hh, y - hh, y + hh);
      } else {
        C(i, k) = p.f_analytic.value(x, y) * std::exp(template_exponent(x, y));
      }
    }
  }
  return C;
}

/** Independent mass quadrature: int f e^{eta Gamma + H} with the disk around
 *  each point integrated in log-polar coordinates (substitution s = -1/log r
 *  removes the singularity exactly). */
inline double mass_quadrature(const CurvatureProblem& p, double gamma, const GreenParams& prm,
                              const ScalarField& H) {
  const Grid2D& g = p.grid;
  const double a = prm.cutoff_lo * gamma, b = prm.cutoff_hi * gamma;
  const double r_patch = std::max(8.0 * g.h, 0.1 * gamma);
  // grid part outside the patches
  double acc = 0.0;
  std::vector<double> cells;
  cells.reserve((size_t)g.n * g.n);
  for (int i = 0; i < g.n; ++i) {
    double x = g.x(i);
    for (int k = 0; k < g.n; ++k) {
      double y = g.x(k);
      double expo = H(i, k);
      bool inside_patch = false;
      for (int j = 0; j < p.n_points(); ++j) {
        double r = g.pdist(x, y, p.points[j][0], p.points[j][1]);
        if (r < r_patch) {
          inside_patch = true;
          break;
        }
        if (r < b) expo += bump(r, a, b) * template_value_r(r);
      }
      cells.push_back(inside_patch ? 0.0 : p.f_analytic.value(x, y) * std::exp(expo));
    }
  }
  acc = kahan_sum(cells) * g.h * g.h;
  // log-polar patches
  for (int j = 0; j < p.n_points(); ++j) {
    const double p1 = p.points[j][0], p2 = p.points[j][1];
    const double s_max = -1.0 / std::log(r_patch);
    const int n_s = 48, n_th = 96;
    double patch = 0.0;
    for (int a_s = 0; a_s < n_s; ++a_s) {
      // Gauss-Legendre would be fine; midpoint keeps it simple and smooth
      double s = s_max * (a_s + 0.5) / n_s;
      double r = std::exp(-1.0 / s);
      if (r < 1e-300) continue;
      double row = 0.0;
      for (int m = 0; m < n_th; ++m) {
        double th = 2.0 * M_PI * (m + 0.5) / n_th;
        double x = p1 + r * std::cos(th), y = p2 + r * std::sin(th);
        row += p.f_analytic.over_r2(j, x, y) * std::exp(sample(H, x, y));
      }
      patch += 2.0 * row / n_th * (s_max / n_s);
    }
    acc += patch * 2.0 * M_PI;
  }
  return acc;
}

/** Angular ring average of a field around a point (bicubic samples). */
inline double ring_mean(const ScalarField& f, double p1, double p2, double r,
                        int n_theta = 256) {
  double acc = 0.0;
  for (int m = 0; m < n_theta; ++m) {
    double th = 2.0 * M_PI * m / n_theta;
    acc += sample(f, p1 + r * std::cos(th), p2 + r * std::sin(th));
  }
  return acc / n_theta;
}

/** Ring extraction of the regular part: the angular mean of H at radius r
 *  around p_j.  Inside the eta == 1 region this equals the angular mean of
 *  G - Gamma, the desk-scale reading of the continuum value at p_j.  The
 *  profile crawls like 1/|log r| toward its limit, so the radius is part of
 *  the reading; the default sits at 0.55*gamma where grid convergence of the
 *  solve is clean. */
inline double extract_H_at(const GreenFunction& gf, int j, double r) {
  const auto& pt = gf.problem.points[j];
  if (!(r > 0.0) || r > gf.params.cutoff_lo * gf.chart_radius)
    throw DomainError("extract_H_at: radius outside the pure-template region");
  return ring_mean(gf.H, pt[0], pt[1], r);
}

/** Fit H_ring(r) = H_inf + c/|log r| over a log-spaced radius window; returns
 *  {H_inf, c}.  The paper-limit value of the regular part at p_j. */
inline std::array<double, 2> extract_H_limit_fit(const GreenFunction& gf, int j,
                                                 int n_radii = 12) {
  const Grid2D& g = gf.problem.grid;
  double r_lo = std::max(6.0 * g.h, 1e-4);
  double r_hi = 0.8 * gf.params.cutoff_lo * gf.chart_radius;
  if (r_lo >= r_hi) throw InsufficientResolution("extract_H_limit_fit: window empty");
  std::vector<double> X, yv;
  for (int i = 0; i < n_radii; ++i) {
    double r = r_lo * std::pow(r_hi / r_lo, (double)i / (n_radii - 1));
    X.push_back(1.0);
    X.push_back(1.0 / std::abs(std::log(r)));
    yv.push_back(extract_H_at(gf, j, r));
  }
  auto beta = least_squares(X, yv, 2);
  return {beta[0], beta[1]};
}

/** Solve the regular-part equation for the problem's full set of points. */
inline GreenFunction solve_regular_part(const CurvatureProblem& p,
                                        GreenParams prm = GreenParams(),
                                        const ScalarField* H0 = nullptr) {
  ValidationReport rep = validate(p, 0.05 * p.grid.side_length);
  if (!rep.ok())
    throw BadProblem("solve_regular_part: hypothesis check failed (f >= 0: " +
                     std::to_string(rep.f_nonnegative) +
                     ", zeros: " + std::to_string(rep.zeros_ok) +
                     ", hessians: " + std::to_string(rep.hessians_positive) + ")");
  GreenFunction gf;
  gf.problem = p;
  gf.params = prm;
  double gamma = prm.gamma_fraction * p.grid.side_length;
  for (int a = 0; a < p.n_points(); ++a)
    for (int b = a + 1; b < p.n_points(); ++b)
      gamma = std::min(gamma, 0.5 * p.grid.pdist(p.points[a][0], p.points[a][1],
                                                 p.points[b][0], p.points[b][1]));
  if (prm.cutoff_hi * gamma >= 1.0)
    throw BadProblem("solve_regular_part: chart radius " + std::to_string(gamma) +
                     " too large for the unit-scale template (needs hi*gamma < 1)");
  if (gamma < 20.0 * p.grid.h)
    throw ResolutionError("solve_regular_part: chart radius below 20 cells");
  gf.chart_radius = gamma;

  gf.theta = compute_theta(p, gamma, prm);
  NearFieldCells near;
  gf.coeff = compute_coefficient(p, gamma, prm, &near);
  gf.theta_total = integrate(gf.theta);
  gf.theta_consistency =
      (gf.theta_total + 8.0 * M_PI * p.n_points()) / p.area();
  // pin the discrete total of Theta to its continuum value -8 pi n (uniform
  // shift by the recorded quadrature gap); this makes the solved H satisfy
  // the discrete mass balance exactly and keeps the extracted regular-part
  // values grid-stable
  gf.theta += -gf.theta_consistency;

  gf.H = H0 ? *H0 : ScalarField(p.grid);
  detail::solve_h_equation(p.grid, gf.coeff, gf.theta, p.alpha, gf.H, prm.tol_newton,
                           prm.tol_linear, prm.max_newton, &gf.newton_residual,
                           &gf.newton_iterations, &gf.problem, &near);
  gf.mass_check = mass_quadrature(p, gamma, prm, gf.H);
  for (int j = 0; j < p.n_points(); ++j)
    gf.H_ring.push_back(extract_H_at(gf, j, prm.ring_fraction * gamma));
  return gf;
}

// ---------------------------------------------------------------------------
// Mode-decay diagnostic around a point.
// ---------------------------------------------------------------------------

struct ModeDecayReport {
  std::vector<double> radii;
  std::vector<std::vector<double>> a_abs;  // |a_k(r)| for k = 0..k_max
  std::vector<double> a0;                  // signed mean mode
  double b0 = 0.0;                         // J(p)
  double L_measured_last = 0.0;            // a0 at the smallest radius
  double L_theory = 0.0;                   // -log(alpha0 e^{b0})
  double k_exponent_smallest = 0.0;        // fitted decay in k at smallest radius
  double k_exponent_second = 0.0;
  std::vector<double> log_r_exponents;     // fitted decay of |a_k| in 1/|log r|
  int k_max = 8;
};

/** Angular Fourier analysis of F = H - J around point j, where J solves the
 *  auxiliary Dirichlet problem -Delta J = alpha on B(p, gamma/2), J = H on
 *  the boundary. */
inline ModeDecayReport mode_decay_diagnostic(const GreenFunction& gf, int j,
                                             const std::vector<double>& radii,
                                             int k_max = 8) {
  const Grid2D& g = gf.problem.grid;
  const auto& pt = gf.problem.points[j];
  const double rho = 0.5 * gf.chart_radius;
  const int n_theta = 256;
  for (double r : radii) {
    if (!(r > 0.0) || r >= rho)
      throw DomainError("mode_decay_diagnostic: radii must lie in (0, gamma/2)");
    if (2.0 * M_PI * r / g.h < 8.0 * k_max)
      throw InsufficientResolution(
          "mode_decay_diagnostic: fewer than 8 angular samples per mode at r = " +
          std::to_string(r));
  }

  // boundary trace of H -> harmonic coefficients of J
  std::vector<std::complex<double>> trace(n_theta);
  for (int m = 0; m < n_theta; ++m) {
    double th = 2.0 * M_PI * m / n_theta;
    trace[m] = sample(gf.H, pt[0] + rho * std::cos(th), pt[1] + rho * std::sin(th));
  }
  int kJ = 32;
  std::vector<std::complex<double>> cJ(2 * kJ + 1);
  for (int k = -kJ; k <= kJ; ++k) {
    std::complex<double> acc = 0.0;
    for (int m = 0; m < n_theta; ++m) {
      double th = 2.0 * M_PI * m / n_theta;
      acc += trace[m] * std::exp(std::complex<double>(0.0, -k * th));
    }
    cJ[k + kJ] = acc / (double)n_theta;
  }
  auto J_value = [&](double r, double th) {
    std::complex<double> acc = 0.0;
    for (int k = -kJ; k <= kJ; ++k)
      acc += cJ[k + kJ] * std::pow(r / rho, std::abs(k)) *
             std::exp(std::complex<double>(0.0, k * th));
    return acc.real() + gf.problem.alpha * (rho * rho - r * r) / 4.0;
  };

  ModeDecayReport rep;
  rep.k_max = k_max;
  rep.radii = radii;
  rep.b0 = cJ[kJ].real() + gf.problem.alpha * rho * rho / 4.0;
  const auto& Hs = gf.problem.hessians[j];
  double alpha0 = 0.25 * (Hs[0] + Hs[2]);
  rep.L_theory = -std::log(alpha0 * std::exp(rep.b0));

  for (double r : radii) {
    std::vector<std::complex<double>> Fv(n_theta);
    for (int m = 0; m < n_theta; ++m) {
      double th = 2.0 * M_PI * m / n_theta;
      double Hval = sample(gf.H, pt[0] + r * std::cos(th), pt[1] + r * std::sin(th));
      Fv[m] = Hval - J_value(r, th);
    }
    std::vector<double> row;
    double a0s = 0.0;
    for (int k = 0; k <= k_max; ++k) {
      std::complex<double> acc = 0.0;
      for (int m = 0; m < n_theta; ++m) {
        double th = 2.0 * M_PI * m / n_theta;
        acc += Fv[m] * std::exp(std::complex<double>(0.0, -k * th));
      }
      acc /= (double)n_theta;
      if (k == 0) a0s = acc.real();
      row.push_back(std::abs(acc));
    }
    rep.a_abs.push_back(row);
    rep.a0.push_back(a0s);
  }
  rep.L_measured_last = rep.a0.back();

  // fitted exponent in k over k in [2, k_max] at the two smallest radii
  auto k_exponent = [&](const std::vector<double>& row) {
    std::vector<double> X, yv;
    for (int k = 2; k <= k_max; ++k) {
      if (row[k] <= 0.0) continue;
      X.push_back(1.0);
      X.push_back(std::log((double)k));
      yv.push_back(std::log(row[k]));
    }
    if (yv.size() < 3) return 0.0;
    return least_squares(X, yv, 2)[1];
  };
  // radii are sorted by the caller from large to small or arbitrary; find the
  // two smallest
  std::vector<size_t> idx(radii.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return radii[a] < radii[b]; });
  rep.k_exponent_smallest = k_exponent(rep.a_abs[idx[0]]);
  rep.k_exponent_second = idx.size() > 1 ? k_exponent(rep.a_abs[idx[1]]) : 0.0;

  // decay of |a_k(r)| against 1/log^2 r, fitted per k >= 1 in log-log form
  for (int k = 1; k <= k_max; ++k) {
    std::vector<double> X, yv;
    for (size_t i = 0; i < radii.size(); ++i) {
      double v = rep.a_abs[i][k];
      if (v <= 0.0) continue;
      X.push_back(1.0);
      X.push_back(std::log(1.0 / std::abs(std::log(radii[i]))));
      yv.push_back(std::log(v));
    }
    rep.log_r_exponents.push_back(yv.size() >= 3 ? least_squares(X, yv, 2)[1] : 0.0);
  }
  return rep;
}

}  // namespace green
}  // namespace liouville
