#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "liouville/fft.hpp"
#include "liouville/grid.hpp"
#include "liouville/linsolve.hpp"

namespace liouville {

/** Matrix-free application of A = -Delta_h + diag(q) on the periodic grid. */
inline void apply_helmholtz(const Grid2D& g, const std::vector<double>& q,
                            const Vec& x, Vec& y) {
  const int n = g.n;
  const double ih2 = 1.0 / (g.h * g.h);
  for (int i = 0; i < n; ++i) {
    const size_t row = (size_t)i * n;
    const size_t rm = (size_t)((i == 0) ? n - 1 : i - 1) * n;
    const size_t rp = (size_t)((i == n - 1) ? 0 : i + 1) * n;
    for (int j = 0; j < n; ++j) {
      const int jm = (j == 0) ? n - 1 : j - 1;
      const int jp = (j == n - 1) ? 0 : j + 1;
      y[row + j] = (4.0 * x[row + j] - x[rm + j] - x[rp + j] - x[row + jm] - x[row + jp]) * ih2 +
                   q[row + j] * x[row + j];
    }
  }
}

/** Reusable solver state for (-Delta_h + diag(q)) phi = rhs with one fixed
 *  coefficient field q.  The constant-coefficient part is inverted exactly in
 *  the trigonometric basis and serves as the preconditioner for CG (q >= 0)
 *  or MINRES (sign-indefinite q). */
class HelmholtzOperator {
 public:
  HelmholtzOperator(const Grid2D& g, std::vector<double> q, double tol = 1e-10,
                    int maxit = 20000)
      : grid_(g), q_(std::move(q)), tol_(tol), maxit_(maxit) {
    double qmin = q_[0], qmax = q_[0], qposs = 0.0;
    for (double v : q_) {
      qmin = std::min(qmin, v);
      qmax = std::max(qmax, v);
      if (v > 0) qposs += v;
    }
    qmin_ = qmin;
    qmax_ = qmax;
    shift_ = qposs / (double)q_.size();
    if (shift_ <= 0.0) shift_ = 0.0;
    constant_ = (qmax - qmin) <= 1e-13 * std::max(1.0, std::abs(qmax));
  }

  const Grid2D& grid() const { return grid_; }
  double q_min() const { return qmin_; }
  bool definite() const { return qmin_ >= 0.0; }

  void apply(const Vec& x, Vec& y) const { apply_helmholtz(grid_, q_, x, y); }

  /** Solve into x (also the warm start).  Returns iteration stats. */
  IterStats solve(const Vec& rhs, Vec& x) const {
    Spectral& sp = spectral_for(grid_);
    IterStats st;
    if (constant_) {
      // exact inversion; mean handling for the singular q == 0 case is the
      // caller's job (solve_helmholtz checks compatibility first)
      sp.solve_shifted(rhs.data(), qmax_ >= 0 ? (qmin_ + qmax_) * 0.5 : qmin_, x.data());
      st.iterations = 0;
      Vec Ax(x.size());
      apply(x, Ax);
      double num = 0.0, den = 0.0;
      for (size_t i = 0; i < x.size(); ++i) {
        double d = rhs[i] - Ax[i];
        num += d * d;
        den += rhs[i] * rhs[i];
      }
      st.rel_residual = den > 0 ? std::sqrt(num / den) : 0.0;
      return st;
    }
    double s = std::max(shift_, 1e-12);
    auto A = [&](const Vec& in, Vec& out) { apply(in, out); };
    auto M = [&](const Vec& in, Vec& out) { sp.solve_shifted(in.data(), s, out.data()); };
    if (definite()) return pcg(A, M, rhs, x, tol_, maxit_);
    return pminres(A, M, rhs, x, tol_, maxit_);
  }

 private:
  Grid2D grid_;
  std::vector<double> q_;
  double tol_;
  int maxit_;
  double qmin_ = 0.0, qmax_ = 0.0, shift_ = 0.0;
  bool constant_ = false;
};

/** Solve (-Delta + c) phi = rhs, c >= 0 pointwise, to relative residual tol.
 *  When c == 0 the right-hand side must have (near) zero mean and the
 *  zero-mean solution is returned. */
inline ScalarField solve_helmholtz(const ScalarField& c, const ScalarField& rhs,
                                   double tol = 1e-10, int maxit = 20000) {
  const Grid2D& g = c.grid();
  if (rhs.grid() != g) throw DomainError("solve_helmholtz: grid mismatch");
  double cmin = c.values()[0], cmax = c.values()[0];
  for (double v : c.values()) {
    cmin = std::min(cmin, v);
    cmax = std::max(cmax, v);
  }
  if (cmin < 0.0)
    throw DomainError("solve_helmholtz: coefficient must be nonnegative (min " +
                      std::to_string(cmin) + ")");
  if (cmax == 0.0) {
    // pure periodic Poisson: compatibility requires zero mean
    double m = mean(rhs);
    double scale = rhs.max_abs();
    if (std::abs(m) > 1e-10 * std::max(scale, 1e-300))
      throw SingularSystem("solve_helmholtz: c == 0 and rhs mean " + std::to_string(m) +
                           " exceeds tolerance");
    ScalarField phi(g);
    Spectral& sp = spectral_for(g);
    sp.solve_shifted(rhs.data(), 0.0, phi.data());
    double mm = mean(phi);
    phi += -mm;  // exact zero-mean convention
    Vec Ax(phi.size());
    apply_helmholtz(g, c.values(), phi.values(), Ax);
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < phi.size(); ++i) {
      double d = rhs.values()[i] - Ax[i];
      num += d * d;
      den += rhs.values()[i] * rhs.values()[i];
    }
    phi.achieved_residual = den > 0 ? std::sqrt(num / den) : 0.0;
    return phi;
  }
  HelmholtzOperator op(g, c.values(), tol, maxit);
  ScalarField phi(g);
  IterStats st = op.solve(rhs.values(), phi.values());
  phi.achieved_residual = st.rel_residual;
  return phi;
}

}  // namespace liouville
