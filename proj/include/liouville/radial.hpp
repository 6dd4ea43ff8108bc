#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "liouville/errors.hpp"

namespace liouville {
namespace radial {

/** Closed-form radial solution V(r) = -2 log((1/sqrt(2)) log(1/r)) of
 *  V'' + V'/r - e^V/r^2 = 0 on 0 < r < 1. */
inline double v_exact(double r) {
  if (!(r > 0.0) || r >= 1.0)
    throw DomainError("v_exact: r must lie in (0,1), got " + std::to_string(r));
  return -2.0 * std::log(std::log(1.0 / r) / std::sqrt(2.0));
}

/** dV/dr of the closed form. */
inline double v_exact_deriv(double r) {
  if (!(r > 0.0) || r >= 1.0) throw DomainError("v_exact_deriv: r outside (0,1)");
  return 2.0 / (r * std::log(1.0 / r));
}

/** e^{V(r)} = 2 / log^2(1/r); extends smoothly to tiny r. */
inline double exp_v_exact(double r) {
  double lg = std::log(1.0 / r);
  return 2.0 / (lg * lg);
}

/** Per-point bubble parameters.  epsilon = lambda*delta always; the center
 *  offset k lives in expanded coordinates (physical shift = epsilon*k). */
struct BubbleConfig {
  double lambda = 0.0;
  double delta = 0.0;
  double epsilon = 0.0;
  double k1 = 0.0, k2 = 0.0;
  double cutoff_inner = 0.0;  // C1 * delta
  double cutoff_outer = 0.0;  // C2 * delta

  BubbleConfig() = default;
  BubbleConfig(double lam, double del, double kk1 = 0.0, double kk2 = 0.0,
               double c1 = 0.85, double c2 = 1.15)
      : lambda(lam), delta(del), epsilon(lam * del), k1(kk1), k2(kk2),
        cutoff_inner(c1 * del), cutoff_outer(c2 * del) {
    if (!(lam > 0.0) || !(del > 0.0))
      throw DomainError("BubbleConfig: lambda and delta must be positive");
    if (!(cutoff_inner < cutoff_outer))
      throw DomainError("BubbleConfig: cutoff radii out of order");
  }
};

/** w_delta(|x - eps*k|) = log(8 delta^2 / (eps^2 + |x - eps*k|^2)^2);
 *  (x1,x2) is the displacement from the chart center. */
inline double bubble(const BubbleConfig& cfg, double x1, double x2) {
  double d1 = x1 - cfg.epsilon * cfg.k1;
  double d2 = x2 - cfg.epsilon * cfg.k2;
  double s = cfg.epsilon * cfg.epsilon + d1 * d1 + d2 * d2;
  return std::log(8.0 * cfg.delta * cfg.delta) - 2.0 * std::log(s);
}

/** lambda^2 e^{w_delta}: closed form 8 eps^2 / (eps^2 + |x-eps k|^2)^2. */
inline double bubble_lambda2_exp(const BubbleConfig& cfg, double x1, double x2) {
  double d1 = x1 - cfg.epsilon * cfg.k1;
  double d2 = x2 - cfg.epsilon * cfg.k2;
  double s = cfg.epsilon * cfg.epsilon + d1 * d1 + d2 * d2;
  return 8.0 * cfg.epsilon * cfg.epsilon / (s * s);
}

/** Gradient of w_delta at displacement (x1,x2) from the chart center. */
inline std::array<double, 2> bubble_gradient(const BubbleConfig& cfg, double x1, double x2) {
  double d1 = x1 - cfg.epsilon * cfg.k1;
  double d2 = x2 - cfg.epsilon * cfg.k2;
  double s = cfg.epsilon * cfg.epsilon + d1 * d1 + d2 * d2;
  return {-4.0 * d1 / s, -4.0 * d2 / s};
}

/** Laplacian of w_delta (= -lambda^2 e^{w_delta}, the bubble equation). */
inline double bubble_laplacian(const BubbleConfig& cfg, double x1, double x2) {
  return -bubble_lambda2_exp(cfg, x1, x2);
}

/** Kernels of the linearized limit operator: z0 (dilation) and z1, z2
 *  (translations) in expanded coordinates. */
inline double kernel_z(int i, double z1, double z2) {
  double r2 = z1 * z1 + z2 * z2;
  switch (i) {
    case 0: return 2.0 * (1.0 - r2) / (1.0 + r2);
    case 1: return -4.0 * z1 / (1.0 + r2);
    case 2: return -4.0 * z2 / (1.0 + r2);
    default: throw DomainError("kernel_z: index must be 0, 1 or 2");
  }
}

/** Bubble-scale selection: delta = (1/2) e^{H/2} / |log lambda|.  The
 *  logarithmic form log 8 delta^2 = -2 log(|log lambda|/sqrt 2) + H is
 *  checked against it to rounding. */
inline double select_delta(double lambda, double H_at_p) {
  if (!(lambda > 0.0) || lambda >= 1.0)
    throw DomainError("select_delta: lambda must lie in (0,1)");
  double delta = 0.5 * std::exp(H_at_p / 2.0) / std::abs(std::log(lambda));
  double lhs = std::log(8.0 * delta * delta);
  double rhs = -2.0 * std::log(std::abs(std::log(lambda)) / std::sqrt(2.0)) + H_at_p;
  if (std::abs(lhs - rhs) > 1e-10 * std::max(1.0, std::abs(rhs)))
    throw Error("select_delta: scale identity violated (numerical)");
  return delta;
}

// ---------------------------------------------------------------------------
// Cell ODE: F'' = delta^2 e^F in t = log r, F(t0) = F'(t0) = 0 at
// t0 = log(1/delta).  Zero-energy first integral (F')^2/2 = delta^2 (e^F - 1).
// ---------------------------------------------------------------------------

/** Radial profile in the coordinate t = log r: accepted integrator nodes with
 *  values and first derivatives, Hermite-sampled in between. */
struct RadialProfile {
  double delta = 0.0;
  double t0 = 0.0;                  // abscissa of the initial data
  std::vector<double> t, v, vp;     // strictly increasing nodes
  double t_min = 0.0, t_max = 0.0;  // validity interval
  bool blowup_flagged = false;
  double t_star = 0.0;              // forward blow-up coordinate (if flagged)
  double energy_drift_sup = 0.0;
  double ode_residual_sup = 0.0;    // interpolant residual, sampled
  bool extend_by_zero = false;      // value(t < t0) == 0 (glued cell function)

  size_t locate(double tt) const {
    size_t lo = 0, hi = t.size() - 1;
    while (hi - lo > 1) {
      size_t mid = (lo + hi) / 2;
      if (t[mid] <= tt) lo = mid;
      else hi = mid;
    }
    return lo;
  }

  double value(double tt) const {
    if (extend_by_zero && tt < t0) return 0.0;
    if (tt < t_min - 1e-12 || tt > t_max + 1e-12)
      throw DomainError("RadialProfile: abscissa outside validity interval");
    tt = std::clamp(tt, t_min, t_max);
    size_t i = locate(tt);
    double hseg = t[i + 1] - t[i];
    double s = (tt - t[i]) / hseg;
    double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
    double h10 = s * (1 - s) * (1 - s);
    double h01 = s * s * (3 - 2 * s);
    double h11 = s * s * (s - 1);
    return h00 * v[i] + h10 * hseg * vp[i] + h01 * v[i + 1] + h11 * hseg * vp[i + 1];
  }

  double derivative(double tt) const {
    if (extend_by_zero && tt < t0) return 0.0;
    if (tt < t_min - 1e-12 || tt > t_max + 1e-12)
      throw DomainError("RadialProfile: abscissa outside validity interval");
    tt = std::clamp(tt, t_min, t_max);
    size_t i = locate(tt);
    double hseg = t[i + 1] - t[i];
    double s = (tt - t[i]) / hseg;
    double d00 = 6 * s * (s - 1) / hseg;
    double d10 = (1 - s) * (1 - 3 * s);
    double d01 = -6 * s * (s - 1) / hseg;
    double d11 = s * (3 * s - 2);
    return d00 * v[i] + d10 * vp[i] + d01 * v[i + 1] + d11 * vp[i + 1];
  }

  /** Export as two-column CSV (abscissa, value). */
  void write_csv(const std::string& path) const {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw Error("cannot open for writing: " + path);
    std::fprintf(fp, "t,value\n");
    for (size_t i = 0; i < t.size(); ++i) std::fprintf(fp, "%.17g,%.17g\n", t[i], v[i]);
    std::fclose(fp);
  }
};

namespace detail {

/** One Dormand-Prince 5(4) step for (v, w) with w = v', v'' = c2 e^v.
 *  Returns the embedded error estimate. */
inline double dp45_step(double c2, double tt, double& v, double& w, double dt) {
  auto f = [c2](double vv, double ww, double* dv, double* dw) {
    *dv = ww;
    *dw = c2 * std::exp(vv);
  };
  (void)tt;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                   b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  double k1v, k1w, k2v, k2w, k3v, k3w, k4v, k4w, k5v, k5w, k6v, k6w, k7v, k7w;
  f(v, w, &k1v, &k1w);
  f(v + dt * a21 * k1v, w + dt * a21 * k1w, &k2v, &k2w);
  f(v + dt * (a31 * k1v + a32 * k2v), w + dt * (a31 * k1w + a32 * k2w), &k3v, &k3w);
  f(v + dt * (a41 * k1v + a42 * k2v + a43 * k3v),
    w + dt * (a41 * k1w + a42 * k2w + a43 * k3w), &k4v, &k4w);
  f(v + dt * (a51 * k1v + a52 * k2v + a53 * k3v + a54 * k4v),
    w + dt * (a51 * k1w + a52 * k2w + a53 * k3w + a54 * k4w), &k5v, &k5w);
  f(v + dt * (a61 * k1v + a62 * k2v + a63 * k3v + a64 * k4v + a65 * k5v),
    w + dt * (a61 * k1w + a62 * k2w + a63 * k3w + a64 * k4w + a65 * k5w), &k6v, &k6w);
  double v5 = v + dt * (b1 * k1v + b3 * k3v + b4 * k4v + b5 * k5v + b6 * k6v);
  double w5 = w + dt * (b1 * k1w + b3 * k3w + b4 * k4w + b5 * k5w + b6 * k6w);
  f(v5, w5, &k7v, &k7w);
  double errv = dt * (e1 * k1v + e3 * k3v + e4 * k4v + e5 * k5v + e6 * k6v + e7 * k7v);
  double errw = dt * (e1 * k1w + e3 * k3w + e4 * k4w + e5 * k5w + e6 * k6w + e7 * k7w);
  v = v5;
  w = w5;
  return std::max(std::abs(errv), std::abs(errw));
}

inline void integrate_direction(double c2, double t0, double t_end, double v_cap,
                                std::vector<double>& T, std::vector<double>& V,
                                std::vector<double>& W, bool* capped, double* t_cap) {
  const double tol = 1e-12;
  double tt = t0, v = T.empty() ? 0.0 : V.back(), w = T.empty() ? 0.0 : W.back();
  if (T.empty()) {
    T.push_back(tt);
    V.push_back(0.0);
    W.push_back(0.0);
    v = 0.0;
    w = 0.0;
  }
  double dir = (t_end > t0) ? 1.0 : -1.0;
  double dt = dir * 1e-3;
  *capped = false;
  int guard = 0;
  while (dir * (t_end - tt) > 1e-14 && ++guard < 2000000) {
    if (dir * (tt + dt) > dir * t_end) dt = t_end - tt;
    double vn = v, wn = w;
    double err = dp45_step(c2, tt, vn, wn, dt);
    double scale = tol * std::max({1.0, std::abs(vn), std::abs(wn)});
    if (err <= scale) {
      tt += dt;
      v = vn;
      w = wn;
      T.push_back(tt);
      V.push_back(v);
      W.push_back(w);
      if (v >= v_cap) {
        *capped = true;
        *t_cap = tt;
        return;
      }
    }
    double fac = 0.9 * std::pow(scale / std::max(err, 1e-300), 0.2);
    dt *= std::clamp(fac, 0.2, 5.0);
    if (std::abs(dt) < 1e-16) throw Error("cell ODE: step underflow");
  }
}

}  // namespace detail

/** Integrate the cell equation from its zero initial data at t0 = log(1/delta),
 *  forward to t_max and backward over a symmetric span.  Throws BlowUp (with
 *  the computed blow-up coordinate) when t_max lies beyond it. */
inline RadialProfile solve_cell(double delta, double t_max, double back_span = 4.0) {
  if (!(delta > 0.0) || delta >= 0.5)
    throw DomainError("solve_cell: delta must lie in (0, 1/2)");
  const double t0 = std::log(1.0 / delta);
  const double c2 = delta * delta;
  const double v_cap = 30.0;

  // forward leg
  std::vector<double> Tf, Vf, Wf;
  bool capped = false;
  double t_cap = 0.0;
  detail::integrate_direction(c2, t0, std::max(t_max, t0 + 1e-9), v_cap, Tf, Vf, Wf,
                              &capped, &t_cap);
  double t_star = 0.0;
  if (capped) {
    // remaining time to blow-up from the capped state via the first integral
    double vc = Vf.back();
    double rem = (2.0 / (delta * std::sqrt(2.0))) * std::atan(1.0 / std::sqrt(std::exp(vc) - 1.0));
    t_star = t_cap + rem;
    throw BlowUp("solve_cell: t_max " + std::to_string(t_max) +
                     " exceeds the blow-up coordinate " + std::to_string(t_star),
                 t_star);
  }

  // backward leg (profile is even about t0; integrated, not mirrored)
  std::vector<double> Tb, Vb, Wb;
  bool capped_b = false;
  double t_cap_b = 0.0;
  detail::integrate_direction(c2, t0, t0 - back_span, v_cap, Tb, Vb, Wb, &capped_b,
                              &t_cap_b);

  RadialProfile prof;
  prof.delta = delta;
  prof.t0 = t0;
  prof.t.reserve(Tb.size() + Tf.size());
  for (size_t i = Tb.size(); i-- > 1;) {
    prof.t.push_back(Tb[i]);
    prof.v.push_back(Vb[i]);
    prof.vp.push_back(Wb[i]);
  }
  for (size_t i = 0; i < Tf.size(); ++i) {
    prof.t.push_back(Tf[i]);
    prof.v.push_back(Vf[i]);
    prof.vp.push_back(Wf[i]);
  }
  prof.t_min = prof.t.front();
  prof.t_max = prof.t.back();

  // estimate the forward blow-up coordinate from the first integral without
  // integrating into the stiff region (diagnostic; exact trajectory obeys it)
  prof.blowup_flagged = true;
  {
    double vend = prof.v.back();
    double rem = (vend > 1e-12)
                     ? (2.0 / (delta * std::sqrt(2.0))) *
                           std::atan(1.0 / std::sqrt(std::expm1(vend)))
                     : 0.0;
    // from zero value the full half-period is pi/(sqrt2 delta)
    if (vend <= 1e-12) rem = M_PI / (std::sqrt(2.0) * delta) - (prof.t.back() - t0);
    prof.t_star = prof.t.back() + rem;
  }

  double drift = 0.0, resid = 0.0;
  for (size_t i = 0; i < prof.t.size(); ++i) {
    double en = 0.5 * prof.vp[i] * prof.vp[i] - c2 * std::expm1(prof.v[i]);
    drift = std::max(drift, std::abs(en));
  }
  for (size_t i = 0; i + 1 < prof.t.size(); ++i) {
    double hseg = prof.t[i + 1] - prof.t[i];
    for (double s : {0.25, 0.5, 0.75}) {
      double tt = prof.t[i] + s * hseg;
      double dd = (prof.derivative(tt + 1e-6 * hseg) - prof.derivative(tt - 1e-6 * hseg)) /
                  (2e-6 * hseg);
      resid = std::max(resid, std::abs(dd - c2 * std::exp(prof.value(tt))));
    }
  }
  prof.energy_drift_sup = drift;
  prof.ode_residual_sup = resid;
  return prof;
}

/** Forward blow-up coordinate of the cell trajectory, computed by capped
 *  integration plus the closed-form remainder. */
inline double cell_blowup_coordinate(double delta) {
  try {
    solve_cell(delta, std::log(1.0 / delta) + 2.0 * M_PI / (std::sqrt(2.0) * delta));
  } catch (const BlowUp& b) {
    return b.t_star;
  }
  throw Error("cell_blowup_coordinate: integration unexpectedly survived");
}

}  // namespace radial
}  // namespace liouville
