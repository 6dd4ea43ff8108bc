#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include "liouville/green.hpp"
#include "liouville/problem.hpp"
#include "liouville/radial.hpp"

namespace liouville {
namespace ansatz {

struct AnsatzParams {
  double cutoff_c1 = 0.85;     // eta == 1 inside C1*delta
  double cutoff_c2 = 1.15;     // eta == 0 outside C2*delta
  double min_core_cells = 5.0; // resolvability gate: eps >= min_core_cells * h
  double sigma = 0.5;          // star-norm exponent
  double k_admissible = 10.0;  // |k_j| <= k_admissible * lambda/delta_j
  int match_iterations = 3;    // fixed point for the matching-scale delta
};

/** Weight of the star norm for chart j at original-variable displacement r:
 *  max{eps^2, |y|^{-2-sigma}} with y = r/eps. */
inline double star_weight(double r, double eps, double sigma) {
  double e2 = eps * eps;
  if (r <= 0.0) return 1e300;  // |y|^{-2-sigma} -> infinity at the center
  double w = std::pow(r / eps, -2.0 - sigma);
  return std::max(e2, w);
}

/** Glued first approximation U_eps and its building blocks. */
struct Ansatz {
  CurvatureProblem problem;  // carries lambda
  std::shared_ptr<const green::GreenFunction> gf;
  AnsatzParams params;
  std::vector<radial::BubbleConfig> bubbles;
  std::vector<double> H_match;              // regular-part reading fed to the delta rule
  std::vector<double> match_radius;         // where it was read
  std::vector<radial::RadialProfile> cells; // per-bubble cell profile (extend-by-zero)
  ScalarField G_nodes;   // assembled Green function at nodes (floored at the points)
  ScalarField U;         // the glued approximation, original variable
  ScalarField gradH_x, gradH_y;             // spectral gradient of the regular part
  std::vector<double> overlap_sup;          // sup |u_eps^j - G| on the matching circle

  double lambda() const { return problem.lambda; }

  /** u_eps^j(x) = w_delta(|x - p_j - eps k|) + F~(|x - p_j|). */
  double bubble_part(int j, double x, double y) const {
    const auto& pt = problem.points[j];
    const auto& cfg = bubbles[j];
    double d1 = problem.grid.pdiff(x, pt[0]);
    double d2 = problem.grid.pdiff(y, pt[1]);
    double r = std::hypot(d1, d2);
    double w = radial::bubble(cfg, d1, d2);
    double F = (r > 0) ? cells[j].value(std::log(r / cfg.epsilon)) : 0.0;
    return w + F;
  }

  /** G evaluated off-grid: template (analytic) + H (bicubic). */
  double G_value(double x, double y) const {
    double v = sample(gf->H, x, y);
    for (int j = 0; j < problem.n_points(); ++j) {
      double r = problem.grid.pdist(x, y, problem.points[j][0], problem.points[j][1]);
      double e = gf->eta(r);
      if (e > 0.0) v += e * green::template_value_r(std::max(r, 1e-300));
    }
    return v;
  }
};

/** Matching-scale reading of the regular part.  Near the gluing annulus the
 *  bubble body is a pure log (its log-log part is frozen at scale lambda by
 *  the delta rule) plus the cell function, so the value fed to the rule must
 *  be read against the same frozen template:
 *    H_eff(r) = ring(H)(r) + [V(r) - V(lambda)] - F(r; delta)
 *             = ring(G + 4 log|x|)(r) - V(lambda) - F(r),
 *  which reduces to the continuum H(p_j) as r and lambda separate.  The cell
 *  value along its first integral is closed-form:
 *  F(r) = -2 log cos(delta log(r/lambda)/sqrt 2). */
inline double matching_reading(const green::GreenFunction& gf, int j, double r,
                               double lambda, double delta_guess) {
  double vr = -2.0 * std::log(std::log(1.0 / r) / std::sqrt(2.0));
  double vl = -2.0 * std::log(std::log(1.0 / lambda) / std::sqrt(2.0));
  double F = 0.0;
  if (delta_guess > 0.0 && r > lambda) {
    double phase = delta_guess * std::log(r / lambda) / std::sqrt(2.0);
    if (phase < 0.45 * M_PI) F = -2.0 * std::log(std::cos(phase));
  }
  return green::extract_H_at(gf, j, r) + (vr - vl) - F;
}

/** Fixed point for the bubble scale: delta solves
 *  delta = select_delta(lambda, H_eff(matching radius(delta))).  The ring is
 *  read at sqrt(C1 C2) * delta, clamped to the template zone. */
inline std::pair<double, double> match_scale(const green::GreenFunction& gf, int j,
                                             double lambda, const AnsatzParams& prm,
                                             double* radius_out = nullptr) {
  double gamma = gf.chart_radius;
  double r_cap = 0.55 * gamma;
  double r_floor = std::max(6.0 * gf.problem.grid.h, 0.02 * gamma);
  double r_match = 0.4 * gamma;
  double H = 0.0, delta = 0.0;
  for (int it = 0; it < prm.match_iterations + 2; ++it) {
    H = matching_reading(gf, j, r_match, lambda, delta);
    delta = radial::select_delta(lambda, H);
    r_match = std::clamp(std::sqrt(prm.cutoff_c1 * prm.cutoff_c2) * delta, r_floor, r_cap);
  }
  H = matching_reading(gf, j, r_match, lambda, delta);
  delta = radial::select_delta(lambda, H);
  if (radius_out) *radius_out = r_match;
  return {delta, H};
}

/** Build the glued approximation with per-point offsets k_j (expanded units). */
inline Ansatz build(const CurvatureProblem& p,
                    std::shared_ptr<const green::GreenFunction> gf,
                    const std::vector<std::array<double, 2>>& offsets,
                    AnsatzParams prm = AnsatzParams()) {
  if ((int)offsets.size() != p.n_points())
    throw DomainError("ansatz::build: one offset per point required");
  if (!(p.lambda > 0.0) || p.lambda >= 1.0)
    throw DomainError("ansatz::build: lambda must lie in (0,1)");
  Ansatz an;
  an.problem = p;
  an.gf = gf;
  an.params = prm;
  const Grid2D& g = p.grid;
  const double gamma = gf->chart_radius;

  for (int j = 0; j < p.n_points(); ++j) {
    double r_match = 0.0;
    auto [delta, Hm] = match_scale(*gf, j, p.lambda, prm, &r_match);
    radial::BubbleConfig cfg(p.lambda, delta, offsets[j][0], offsets[j][1], prm.cutoff_c1,
                             prm.cutoff_c2);
    // scale-rule identity (exact by construction, asserted)
    double lhs = std::log(8 * delta * delta) +
                 2 * std::log(std::abs(std::log(p.lambda)) / std::sqrt(2.0)) - Hm;
    if (std::abs(lhs) > 1e-10)
      throw Error("ansatz::build: delta rule identity violated");
    if (cfg.epsilon < prm.min_core_cells * g.h)
      throw ResolutionError("ansatz::build: bubble core eps = " + std::to_string(cfg.epsilon) +
                            " below " + std::to_string(prm.min_core_cells) + " cells (h = " +
                            std::to_string(g.h) + ")");
    if (cfg.cutoff_outer > gf->params.cutoff_lo * gamma)
      throw ResolutionError("ansatz::build: bubble cutoff " + std::to_string(cfg.cutoff_outer) +
                            " leaves the pure-template zone " +
                            std::to_string(gf->params.cutoff_lo * gamma));
    double kn = std::hypot(offsets[j][0], offsets[j][1]);
    if (kn > prm.k_admissible * p.lambda / delta)
      throw DomainError("ansatz::build: offset |k| = " + std::to_string(kn) +
                        " outside the admissible ball C*lambda/delta");
    an.bubbles.push_back(cfg);
    an.H_match.push_back(Hm);
    an.match_radius.push_back(r_match);
    // cell profile out to the outer cutoff with margin
    double t_max = std::log(prm.cutoff_c2 / p.lambda) + 0.7;
    radial::RadialProfile prof = radial::solve_cell(delta, t_max, 1.0);
    prof.extend_by_zero = true;
    an.cells.push_back(std::move(prof));
  }

  // assembled Green function at nodes (distance floored near the points; those
  // nodes are always covered by the bubble core)
  an.G_nodes = ScalarField(g);
  an.G_nodes.fill_from([&](double x, double y) {
    double v = 0.0;
    for (int j = 0; j < p.n_points(); ++j) {
      double r = g.pdist(x, y, p.points[j][0], p.points[j][1]);
      double e = gf->eta(r);
      if (e > 0.0) v += e * green::template_value_r(std::max(r, 0.25 * g.h));
    }
    return v;
  });
  an.G_nodes += gf->H;

  // glue
  an.U = ScalarField(g);
  for (int i = 0; i < g.n; ++i) {
    double x = g.x(i);
    for (int k = 0; k < g.n; ++k) {
      double y = g.x(k);
      double val = 0.0;
      bool core = false;
      double eta_sum = 0.0;
      for (int j = 0; j < p.n_points(); ++j) {
        double r = g.pdist(x, y, p.points[j][0], p.points[j][1]);
        const auto& cfg = an.bubbles[j];
        if (r >= cfg.cutoff_outer) continue;
        double e = green::bump(r, cfg.cutoff_inner, cfg.cutoff_outer);
        val += e * an.bubble_part(j, x, y);
        eta_sum += e;
        if (e >= 1.0) core = true;
      }
      if (!core && eta_sum < 1.0) val += (1.0 - eta_sum) * an.G_nodes(i, k);
      an.U(i, k) = val;
    }
  }

  // spectral gradient of H for the error assembly
  an.gradH_x = ScalarField(g);
  an.gradH_y = ScalarField(g);
  spectral_for(g).gradient(gf->H, an.gradH_x, an.gradH_y);

  // overlap diagnostic on the matching circles
  for (int j = 0; j < p.n_points(); ++j) {
    const auto& pt = p.points[j];
    double rc = std::sqrt(an.bubbles[j].cutoff_inner * an.bubbles[j].cutoff_outer);
    double worst = 0.0;
    for (int m = 0; m < 180; ++m) {
      double th = 2 * M_PI * m / 180.0;
      double x = pt[0] + rc * std::cos(th), y = pt[1] + rc * std::sin(th);
      worst = std::max(worst, std::abs(an.bubble_part(j, x, y) - an.G_value(x, y)));
    }
    an.overlap_sup.push_back(worst);
  }
  return an;
}

/** Star norm of an original-variable right-hand side on chart j: the expanded
 *  field is eps^2 times the original one, so the norm reads
 *  sup_x eps_j^2 |h(x)| / max{eps_j^2, (|x-p_j|/eps_j)^{-2-sigma}}. */
inline double star_norm_chart(const Ansatz& an, const ScalarField& h, int j) {
  const Grid2D& g = h.grid();
  const auto& pt = an.problem.points[j];
  const double eps = an.bubbles[j].epsilon;
  double worst = 0.0;
  for (int i = 0; i < g.n; ++i) {
    for (int k = 0; k < g.n; ++k) {
      double r = g.pdist(g.x(i), g.x(k), pt[0], pt[1]);
      double w = star_weight(r, eps, an.params.sigma);
      worst = std::max(worst, eps * eps * std::abs(h(i, k)) / w);
    }
  }
  return worst;
}

/** Multi-chart star norm: the sum over charts. */
inline double star_norm(const Ansatz& an, const ScalarField& h) {
  double total = 0.0;
  for (int j = 0; j < an.problem.n_points(); ++j) total += star_norm_chart(an, h, j);
  return total;
}

/** Ansatz error in the original variable:
 *  Ehat(x) = -[Delta U - f e^U + lambda^2 e^U + alpha](x), assembled
 *  semi-analytically (closed forms for the bubble and cell parts, the Green
 *  equation for Delta G, spectral gradients of H).  The expanded-variable
 *  error on chart j is E_j(y) = eps_j^2 Ehat(p_j + eps_j y). */
struct ErrorReport {
  ScalarField field;                 // Ehat, original variable
  std::vector<double> star_norms;    // per chart
  double star_total = 0.0;
};

/** Ansatz error of the discrete operator itself:
 *  -[Delta_h U - (f - lambda^2) e^U + alpha].  This is the right-hand side
 *  the correction solve must use so that the corrected field satisfies the
 *  discrete equation (the semi-analytic report below carries the glue seams'
 *  one-sided values instead and serves the norm diagnostics). */
inline ScalarField discrete_error(const Ansatz& an) {
  const CurvatureProblem& p = an.problem;
  const double lam2 = p.lambda * p.lambda;
  ScalarField out = laplacian(an.U);
  for (int i = 0; i < p.grid.n; ++i)
    for (int k = 0; k < p.grid.n; ++k)
      out(i, k) = -(out(i, k) - (p.f(i, k) - lam2) * std::exp(an.U(i, k)) + p.alpha);
  return out;
}

inline ErrorReport expanded_error(const Ansatz& an) {
  const CurvatureProblem& p = an.problem;
  const Grid2D& g = p.grid;
  const double lam2 = p.lambda * p.lambda;
  ErrorReport rep;
  rep.field = ScalarField(g);

  for (int i = 0; i < g.n; ++i) {
    double x = g.x(i);
    for (int k = 0; k < g.n; ++k) {
      double y = g.x(k);
      // charts are disjoint: at most one bubble is active here
      int active = -1;
      double r = 0.0, d1 = 0.0, d2 = 0.0;
      for (int j = 0; j < p.n_points(); ++j) {
        double a1 = g.pdiff(x, p.points[j][0]), a2 = g.pdiff(y, p.points[j][1]);
        double rr = std::hypot(a1, a2);
        if (rr < an.bubbles[j].cutoff_outer) {
          active = j;
          r = rr;
          d1 = a1;
          d2 = a2;
          break;
        }
      }
      double lapU;
      if (active < 0) {
        // far field: U == G and Delta G = f e^G - alpha exactly
        lapU = p.f(i, k) * std::exp(an.G_nodes(i, k)) - p.alpha;
      } else {
        const auto& cfg = an.bubbles[active];
        double t = (r > 0) ? std::log(r / cfg.epsilon) : -1e300;
        double lap_u = radial::bubble_laplacian(cfg, d1, d2);
        if (t > an.cells[active].t0)  // cell region r > lambda
          lap_u += cfg.delta * cfg.delta * std::exp(an.cells[active].value(t)) / (r * r);
        double e = green::bump(r, cfg.cutoff_inner, cfg.cutoff_outer);
        if (e >= 1.0) {
          lapU = lap_u;
        } else {
          // Delta(eta u + (1-eta) G) = eta Delta u + (1-eta) Delta G
          //   + (Delta eta)(u - G) + 2 grad(eta).grad(u - G)
          double Gv = an.G_nodes(i, k);
          double uj = an.bubble_part(active, x, y);
          double e1 = green::bump_d1(r, cfg.cutoff_inner, cfg.cutoff_outer);
          double e2 = green::bump_d2(r, cfg.cutoff_inner, cfg.cutoff_outer);
          auto gw = radial::bubble_gradient(cfg, d1, d2);
          double Fp = an.cells[active].derivative(t);  // dF/dt = r dF/dr
          double ux = gw[0] + Fp * d1 / (r * r);
          double uy = gw[1] + Fp * d2 / (r * r);
          double Gp = green::template_deriv_r(r);
          double Gx = Gp * d1 / r + an.gradH_x(i, k);
          double Gy = Gp * d2 / r + an.gradH_y(i, k);
          double lapG = p.f(i, k) * std::exp(Gv) - p.alpha;
          double radial_dot = (d1 / r) * (ux - Gx) + (d2 / r) * (uy - Gy);
          lapU = e * lap_u + (1.0 - e) * lapG + (e2 + e1 / r) * (uj - Gv) +
                 2.0 * e1 * radial_dot;
        }
      }
      double U = an.U(i, k);
      rep.field(i, k) = -(lapU - (p.f(i, k) - lam2) * std::exp(U) + p.alpha);
    }
  }
  for (int j = 0; j < p.n_points(); ++j)
    rep.star_norms.push_back(star_norm_chart(an, rep.field, j));
  for (double v : rep.star_norms) rep.star_total += v;
  return rep;
}

}  // namespace ansatz
}  // namespace liouville
