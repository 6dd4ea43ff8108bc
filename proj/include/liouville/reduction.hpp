#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "liouville/ansatz.hpp"
#include "liouville/linear.hpp"

namespace liouville {
namespace reduction {

/** Quadratic-and-higher remainder of the exponential nonlinearity around the
 *  ansatz, original variable: N(phi) = (f - lambda^2) e^U (e^phi - 1 - phi).
 *  The expanded-variable term on chart j is eps_j^2 times this. */
inline ScalarField nonlinear_term(const ansatz::Ansatz& an, const ScalarField& phi) {
  const CurvatureProblem& p = an.problem;
  double lam2 = p.lambda * p.lambda;
  ScalarField out(p.grid);
  for (int i = 0; i < p.grid.n; ++i)
    for (int k = 0; k < p.grid.n; ++k) {
      double ph = phi(i, k);
      out(i, k) = (p.f(i, k) - lam2) * std::exp(an.U(i, k)) * (std::expm1(ph) - ph);
    }
  return out;
}

struct CorrectionParams {
  double tol_increment = 1e-11;      // sup-norm of successive differences
  int max_iterations = 50;
  double contraction_limit = 0.9;    // NoContraction beyond this, 3 in a row
  bool newton = true;                // Newton steps on the projected problem
                                     // (false: the plain Picard map T(N(.)+E))
};

struct CorrectionResult {
  ScalarField phi;
  std::vector<double> c_original;   // scalars of the projected solve
  std::vector<double> c_expanded;
  std::vector<double> increments;
  std::vector<double> contraction;  // ratio of successive increments
  int iterations = 0;
  double phi_sup = 0.0;
  double theta_bound = 0.0;         // ||phi||_inf / (eps log(1/eps)), eps = max eps_j
};

/** Solve the projected nonlinear problem
 *    Lhat(phi) = N(phi) + E + sum c chi Z,  <chi Z, phi> = 0.
 *  Picard mode iterates phi <- T(N(phi) + E) literally; Newton mode (default)
 *  relinearizes the exponential at U + phi each step, which keeps the
 *  iteration count flat when the desk-scale correction is not small. */
inline CorrectionResult solve_correction(const ansatz::Ansatz& an,
                                         const linear::ProjectedOperator& op,
                                         const ScalarField& Ehat,
                                         CorrectionParams prm = CorrectionParams(),
                                         const ScalarField* warm = nullptr) {
  const Grid2D& g = an.problem.grid;
  const CurvatureProblem& p = an.problem;
  const double lam2 = p.lambda * p.lambda;
  CorrectionResult res;
  ScalarField phi = warm ? *warm : ScalarField(g);
  linear::ProjectedSolve ps;
  int slow = 0;
  for (int m = 0; m < prm.max_iterations; ++m) {
    double inc = 0.0;
    if (prm.newton) {
      // residual of the nonlinear problem at phi:
      // F(phi) = Delta(U+phi) - (f-lam2) e^{U+phi} + alpha = N(phi) + E-hat + Lhat(phi)
      ScalarField Fres = laplacian(phi);
      for (int i = 0; i < g.n; ++i)
        for (int k = 0; k < g.n; ++k)
          Fres(i, k) += -Ehat(i, k) -
                        (p.f(i, k) - lam2) *
                            (std::exp(an.U(i, k) + phi(i, k)) - std::exp(an.U(i, k))) -
                        0.0;
      // note: -Ehat = Delta_h U - (f-lam2) e^U + alpha, so Fres = F(phi)
      const linear::ProjectedOperator* step_op = &op;
      std::unique_ptr<linear::ProjectedOperator> fresh;
      if (m > 0 || warm) {
        fresh = std::make_unique<linear::ProjectedOperator>(an, linear::ProjectedParams(),
                                                            &phi);
        step_op = fresh.get();
      }
      // Lhat_phi(delta) = -F(phi) + c chi Z with B^T(phi + delta) = 0
      std::vector<double> target = step_op->constraint_values(phi);
      for (double& v : target) v = -v;
      Fres *= -1.0;
      ps = step_op->solve(Fres, nullptr, &target);
      inc = ps.phi.max_abs();
      phi += ps.phi;
    } else {
      ScalarField rhs = nonlinear_term(an, phi);
      rhs += Ehat;
      ps = op.solve(rhs, &phi);
      for (size_t t = 0; t < phi.size(); ++t)
        inc = std::max(inc, std::abs(ps.phi.data()[t] - phi.data()[t]));
      phi = ps.phi;
    }
    res.increments.push_back(inc);
    res.iterations = m + 1;
    if (res.increments.size() >= 2) {
      double ratio = inc / std::max(res.increments[res.increments.size() - 2], 1e-300);
      res.contraction.push_back(ratio);
      if (ratio > prm.contraction_limit) {
        if (++slow >= 3)
          throw NoContraction("solve_correction: contraction factor above " +
                                  std::to_string(prm.contraction_limit) +
                                  " for 3 consecutive steps",
                              res.contraction);
      } else {
        slow = 0;
      }
    }
    if (inc <= prm.tol_increment) break;
  }
  if (res.increments.back() > prm.tol_increment)
    throw NoConvergence("solve_correction: no convergence after " +
                            std::to_string(prm.max_iterations) + " iterations",
                        res.increments);
  res.phi = phi;
  res.c_original = ps.c_original;
  res.c_expanded = ps.c_expanded;
  res.phi_sup = phi.max_abs();
  double eps = 0.0;
  for (const auto& b : an.bubbles) eps = std::max(eps, b.epsilon);
  res.theta_bound = res.phi_sup / (eps * std::log(1.0 / eps));
  return res;
}

struct ReducedParams {
  CorrectionParams correction;
  linear::ProjectedParams projected;
  ansatz::AnsatzParams ansatz_params;
  double tol_c = 1e-10;        // on the original-variable scalars
  int max_outer = 30;
  double fd_step_factor = 0.1; // jacobian step = factor * lambda/delta
  double ball_factor = 5.0;    // search confined to |k| <= ball * lambda/delta
};

/** Full reduced solve: offsets, correction, scalars, assembled solution. */
struct ReducedState {
  std::vector<std::array<double, 2>> offsets;
  ScalarField phi;
  ScalarField u;                     // U_eps + phi
  std::vector<double> c_original;
  std::vector<double> c_expanded;
  std::vector<double> c_history;     // max |c| per outer iteration
  std::vector<double> jacobian;      // (2n)x(2n) finite-difference dc/dk at k = 0
  ansatz::Ansatz an;
  CorrectionResult correction;
  int outer_iterations = 0;
};

namespace detail {

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

struct Evaluator {
  const CurvatureProblem& p;
  std::shared_ptr<const green::GreenFunction> gf;
  const ReducedParams& prm;
  ScalarField warm_phi;
  bool have_warm = false;

  struct Eval {
    std::vector<double> c;
    ansatz::Ansatz an;
    CorrectionResult corr;
  };

  Eval operator()(const std::vector<std::array<double, 2>>& k) {
    Eval ev{.c = {}, .an = ansatz::build(p, gf, k, prm.ansatz_params), .corr = {}};
    // the discrete-operator error: the corrected field then satisfies the
    // discrete equation up to the projection scalars
    ScalarField Ehat = ansatz::discrete_error(ev.an);
    linear::ProjectedOperator op(ev.an, prm.projected);
    ev.corr = solve_correction(ev.an, op, Ehat, prm.correction,
                               have_warm ? &warm_phi : nullptr);
    ev.c = ev.corr.c_original;
    warm_phi = ev.corr.phi;
    have_warm = true;
    return ev;
  }
};

}  // namespace detail

/** Find offsets k_j killing the projection scalars, by damped quasi-Newton
 *  with a centered finite-difference Jacobian frozen at k = 0. */
inline ReducedState solve_reduced(const CurvatureProblem& p,
                                  std::shared_ptr<const green::GreenFunction> gf,
                                  ReducedParams prm = ReducedParams()) {
  const int nb = p.n_points();
  const int m = 2 * nb;
  detail::Evaluator eval{p, gf, prm, ScalarField(), false};

  std::vector<std::array<double, 2>> k(nb, {0.0, 0.0});
  auto ev0 = eval(k);
  ReducedState st;
  st.c_history.push_back(detail::max_abs(ev0.c));

  // admissible ball and finite-difference step per bubble
  std::vector<double> ball(nb), step(nb);
  for (int j = 0; j < nb; ++j) {
    double ld = p.lambda / ev0.an.bubbles[j].delta;
    ball[j] = prm.ball_factor * ld;
    step[j] = prm.fd_step_factor * ld;
  }

  // frozen Jacobian at k = 0 (centered differences)
  std::vector<double> J((size_t)m * m, 0.0);
  for (int col = 0; col < m; ++col) {
    int j = col / 2, comp = col % 2;
    auto kp = k, km = k;
    kp[j][comp] += step[j];
    km[j][comp] -= step[j];
    auto evp = eval(kp), evm = eval(km);
    for (int row = 0; row < m; ++row)
      J[(size_t)row * m + col] = (evp.c[row] - evm.c[row]) / (2.0 * step[j]);
  }
  st.jacobian = J;

  auto current = ev0;
  double cnorm = detail::max_abs(current.c);
  int outer = 0;
  for (; outer < prm.max_outer && cnorm > prm.tol_c; ++outer) {
    std::vector<double> rhs = current.c;
    std::vector<double> dk = dense_solve(J, rhs);
    double damp = 1.0;
    bool accepted = false;
    for (int half = 0; half < 12; ++half) {
      auto kt = k;
      for (int j = 0; j < nb; ++j) {
        kt[j][0] -= damp * dk[2 * j];
        kt[j][1] -= damp * dk[2 * j + 1];
        double kn = std::hypot(kt[j][0], kt[j][1]);
        if (kn > ball[j]) {  // stay inside the degree-argument ball
          kt[j][0] *= ball[j] / kn;
          kt[j][1] *= ball[j] / kn;
        }
      }
      auto evt = eval(kt);
      double cn = detail::max_abs(evt.c);
      if (cn < cnorm || cn <= prm.tol_c) {
        k = kt;
        current = std::move(evt);
        cnorm = cn;
        accepted = true;
        break;
      }
      damp *= 0.5;
    }
    st.c_history.push_back(cnorm);
    if (!accepted)
      throw ReducedSolveFailed("solve_reduced: damping failed to reduce |c| below " +
                                   std::to_string(cnorm),
                               cnorm);
  }
  if (cnorm > prm.tol_c)
    throw ReducedSolveFailed("solve_reduced: |c| = " + std::to_string(cnorm) + " after " +
                                 std::to_string(prm.max_outer) + " outer iterations",
                             cnorm);

  st.offsets = k;
  st.an = std::move(current.an);
  st.correction = std::move(current.corr);
  st.phi = st.correction.phi;
  st.u = st.an.U;
  st.u += st.phi;
  st.c_original = st.correction.c_original;
  st.c_expanded = st.correction.c_expanded;
  st.outer_iterations = outer;
  return st;
}

// ---------------------------------------------------------------------------
// Solution verification report.
// ---------------------------------------------------------------------------

struct VerifyReport {
  double residual_sup = 0.0;        // PDE residual away from the cores
  double residual_sup_full = 0.0;   // including core cells (FD-noise bound)
  double residual_l2 = 0.0;
  std::vector<double> bubble_mass;  // lambda^2 int_{B(p_j, rho)} e^u
  double mass_radius = 0.0;
  double solvability_gap = 0.0;     // |int (f-lambda^2) e^u - alpha Area| rel.
  double identity13_gap = 0.0;      // Eq.-style testing against e^{-u}, rel.
  std::vector<double> profile_sup_err;  // rescaled core profile vs log 8/(1+|y|^2)^2
  std::vector<double> delta_fitted;
  std::vector<std::array<double, 2>> centers;
  bool produced = true;
};

/** Diagnostics of a candidate solution field (always produced). */
inline VerifyReport verify_solution(const CurvatureProblem& p, const ScalarField& u,
                                    const std::vector<radial::BubbleConfig>* bubbles = nullptr,
                                    double chart_radius = 0.0) {
  const Grid2D& g = p.grid;
  VerifyReport rep;
  const double lam2 = p.lambda * p.lambda;
  if (chart_radius <= 0.0) chart_radius = default_chart_radius(p);
  rep.mass_radius = 0.5 * chart_radius;

  // PDE residual
  ScalarField lap = laplacian(u);
  double sup = 0.0, sup_full = 0.0, l2 = 0.0;
  for (int i = 0; i < g.n; ++i) {
    for (int k = 0; k < g.n; ++k) {
      double r = lap(i, k) - (p.f(i, k) - lam2) * std::exp(u(i, k)) + p.alpha;
      sup_full = std::max(sup_full, std::abs(r));
      l2 += r * r;
      bool near_core = false;
      for (int j = 0; j < p.n_points(); ++j)
        if (g.pdist(g.x(i), g.x(k), p.points[j][0], p.points[j][1]) < 8 * g.h)
          near_core = true;
      if (!near_core) sup = std::max(sup, std::abs(r));
    }
  }
  rep.residual_sup = sup;
  rep.residual_sup_full = sup_full;
  rep.residual_l2 = std::sqrt(l2) * g.h;

  // per-bubble masses and rescaled profiles
  for (int j = 0; j < p.n_points(); ++j) {
    const double p1 = p.points[j][0], p2 = p.points[j][1];
    double mass = 0.0;
    for (int i = 0; i < g.n; ++i)
      for (int k = 0; k < g.n; ++k)
        if (g.pdist(g.x(i), g.x(k), p1, p2) < rep.mass_radius)
          mass += std::exp(u(i, k));
    rep.bubble_mass.push_back(lam2 * mass * g.h * g.h);

    // bubble scale and center: from the given configs or fitted at the peak
    double eps, delta, c1 = p1, c2 = p2;
    if (bubbles) {
      eps = (*bubbles)[j].epsilon;
      delta = (*bubbles)[j].delta;
      c1 = p1 + eps * (*bubbles)[j].k1;
      c2 = p2 + eps * (*bubbles)[j].k2;
    } else {
      // locate the local peak near p_j, then read delta from the peak height
      int bi = (int)std::llround(p1 / g.h), bk = (int)std::llround(p2 / g.h);
      for (int pass = 0; pass < 64; ++pass) {
        int ci = bi, ck = bk;
        for (int a = -1; a <= 1; ++a)
          for (int b = -1; b <= 1; ++b)
            if (u.at_wrapped(bi + a, bk + b) > u.at_wrapped(ci, ck)) {
              ci = g.wrap(bi + a);
              ck = g.wrap(bk + b);
            }
        if (ci == bi && ck == bk) break;
        bi = ci;
        bk = ck;
      }
      c1 = g.x(bi);
      c2 = g.x(bk);
      double upeak = u(bi, bk);
      delta = std::exp(-(upeak - std::log(8.0) + 4 * std::log(p.lambda)) / 2.0);
      eps = p.lambda * delta;
    }
    rep.delta_fitted.push_back(delta);
    rep.centers.push_back({c1, c2});
    double worst = 0.0;
    for (double yr : {0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 10.0}) {
      for (int mth = 0; mth < 16; ++mth) {
        double th = 2 * M_PI * mth / 16.0;
        double y1 = yr * std::cos(th), y2 = yr * std::sin(th);
        double x1 = c1 + eps * y1, x2 = c2 + eps * y2;
        double val = sample(u, x1, x2) + 4 * std::log(p.lambda) + 2 * std::log(delta);
        double target = std::log(8.0 / std::pow(1.0 + yr * yr, 2));
        worst = std::max(worst, std::abs(val - target));
        if (yr == 0.0) break;
      }
    }
    rep.profile_sup_err.push_back(worst);
  }

  // integrated identities
  double mass_total = 0.0, kappa_total = 0.0, test_total = 0.0, kappa_abs = 0.0;
  ScalarField gx(g), gy(g);
  spectral_for(g).gradient(u, gx, gy);
  for (int i = 0; i < g.n; ++i) {
    for (int k = 0; k < g.n; ++k) {
      double eu = std::exp(u(i, k));
      mass_total += (p.f(i, k) - lam2) * eu;
      double kap = -p.f(i, k) + lam2;
      kappa_total += kap;
      kappa_abs += std::abs(kap);
      double g2 = gx(i, k) * gx(i, k) + gy(i, k) * gy(i, k);
      test_total += (g2 + p.alpha) * std::exp(-u(i, k));
    }
  }
  double h2 = g.h * g.h;
  rep.solvability_gap =
      std::abs(mass_total * h2 - p.alpha * p.area()) / (p.alpha * p.area());
  rep.identity13_gap =
      std::abs(kappa_total * h2 + test_total * h2) / std::max(kappa_abs * h2, 1e-300);
  return rep;
}

// ---------------------------------------------------------------------------
// Structure diagnostics of the reduced system.
// ---------------------------------------------------------------------------

/** Jacobian-structure report: dc/dk at 0 compared against the predicted
 *  s * D^2 f(p_j) shape, plus definiteness of the symmetric part. */
struct JacobianStructure {
  std::vector<double> scale;        // fitted s per bubble
  std::vector<double> misfit;       // relative Frobenius misfit per bubble
  std::vector<double> sym_eig_min;  // of the symmetrized 2x2 block
  double kernel_integral = 0.0;     // I > 0 of the limiting kernel quadrature
};

inline JacobianStructure jacobian_structure(const ReducedState& st,
                                            const CurvatureProblem& p) {
  JacobianStructure js;
  const int nb = p.n_points();
  const int m = 2 * nb;
  for (int j = 0; j < nb; ++j) {
    double a = st.jacobian[(size_t)(2 * j) * m + (2 * j)];
    double b = st.jacobian[(size_t)(2 * j) * m + (2 * j + 1)];
    double c = st.jacobian[(size_t)(2 * j + 1) * m + (2 * j)];
    double d = st.jacobian[(size_t)(2 * j + 1) * m + (2 * j + 1)];
    const auto& Hs = p.hessians[j];
    // least-squares scale for J ~ s * Hess
    double num = a * Hs[0] + (b + c) * Hs[1] + d * Hs[2];
    double den = Hs[0] * Hs[0] + 2 * Hs[1] * Hs[1] + Hs[2] * Hs[2];
    double s = num / den;
    double m00 = a - s * Hs[0], m01 = b - s * Hs[1], m10 = c - s * Hs[1],
           m11 = d - s * Hs[2];
    double mis = std::sqrt(m00 * m00 + m01 * m01 + m10 * m10 + m11 * m11) /
                 (std::abs(s) * std::sqrt(den));
    js.scale.push_back(s);
    js.misfit.push_back(mis);
    auto eig = sym2x2_eig({a, 0.5 * (b + c), d});
    js.sym_eig_min.push_back(eig.first);
  }
  // I = int C0 y1^2/(1+|y|) H0/(1+|y|^2)^2 over the chi-ball, C0 = 1, H0 = 8
  double I = 0.0;
  const int nr = 400, nth = 64;
  const double R = linear::ProjectedParams().chi_radius + 1.0;
  for (int a = 0; a < nr; ++a) {
    double r = R * (a + 0.5) / nr;
    double row = 0.0;
    for (int t = 0; t < nth; ++t) {
      double th = 2 * M_PI * (t + 0.5) / nth;
      double y1 = r * std::cos(th);
      row += y1 * y1 / (1.0 + r) * 8.0 / std::pow(1.0 + r * r, 2);
    }
    I += row / nth * 2 * M_PI * r * (R / nr);
  }
  js.kernel_integral = I;
  return js;
}

/** Odd moments of the limiting kernel vanish (quadrature check used by the
 *  reduction's parity arguments). */
inline std::array<double, 2> odd_moment_check(double R = 12.0) {
  double m1 = 0.0, m12 = 0.0;
  const int nr = 600, nth = 128;
  for (int a = 0; a < nr; ++a) {
    double r = R * (a + 0.5) / nr;
    double r1 = 0.0, r2 = 0.0;
    for (int t = 0; t < nth; ++t) {
      double th = 2 * M_PI * (t + 0.5) / nth;
      double y1 = r * std::cos(th), y2 = r * std::sin(th);
      double w = 1.0 / ((1.0 + r) * std::pow(1.0 + r * r, 2));
      r1 += y1 * w;
      r2 += y1 * y2 * w;
    }
    m1 += r1 / nth * 2 * M_PI * r * (R / nr);
    m12 += r2 / nth * 2 * M_PI * r * (R / nr);
  }
  return {m1, m12};
}

}  // namespace reduction
}  // namespace liouville
