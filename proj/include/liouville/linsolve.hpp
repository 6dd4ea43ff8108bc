#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <vector>

#include "liouville/errors.hpp"

namespace liouville {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0, c = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double y = a[i] * b[i] - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline void axpy(double a, const Vec& x, Vec& y) {
  for (size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

struct IterStats {
  int iterations = 0;
  double rel_residual = 0.0;
  std::vector<double> history;  // relative residual per iteration
};

/** Preconditioned conjugate gradient for SPD systems.
 *  apply_A(x, y): y = A x;  apply_M(r, z): z = M^{-1} r (M SPD).
 *  Terminates on true relative 2-norm residual <= tol. */
template <class ApplyA, class ApplyM>
IterStats pcg(ApplyA&& apply_A, ApplyM&& apply_M, const Vec& b, Vec& x, double tol,
              int maxit) {
  const size_t N = b.size();
  IterStats st;
  double bnorm = norm2(b);
  if (bnorm == 0.0) {
    x.assign(N, 0.0);
    return st;
  }
  Vec r(N), z(N), p(N), Ap(N);
  apply_A(x, Ap);
  for (size_t i = 0; i < N; ++i) r[i] = b[i] - Ap[i];
  apply_M(r, z);
  p = z;
  double rz = dot(r, z);
  for (int it = 1; it <= maxit; ++it) {
    apply_A(p, Ap);
    double pAp = dot(p, Ap);
    if (pAp <= 0.0)
      throw SingularSystem("pcg: operator not positive definite (pAp = " +
                           std::to_string(pAp) + ")");
    double alpha = rz / pAp;
    axpy(alpha, p, x);
    axpy(-alpha, Ap, r);
    double rn = norm2(r) / bnorm;
    st.history.push_back(rn);
    st.iterations = it;
    if (rn <= tol) {
      // recurrence can drift; confirm against the true residual
      apply_A(x, Ap);
      double tn = 0.0;
      for (size_t i = 0; i < N; ++i) {
        double d = b[i] - Ap[i];
        tn += d * d;
      }
      tn = std::sqrt(tn) / bnorm;
      st.rel_residual = tn;
      if (tn <= tol * 4.0) return st;
      for (size_t i = 0; i < N; ++i) r[i] = b[i] - Ap[i];
    }
    apply_M(r, z);
    double rz_new = dot(r, z);
    double beta = rz_new / rz;
    rz = rz_new;
    for (size_t i = 0; i < N; ++i) p[i] = z[i] + beta * p[i];
  }
  st.rel_residual = st.history.empty() ? 1.0 : st.history.back();
  throw NoConvergence("pcg: no convergence after " + std::to_string(maxit) +
                          " iterations (rel res " + std::to_string(st.rel_residual) + ")",
                      st.history);
}

/** Preconditioned MINRES for symmetric (possibly indefinite) systems with an
 *  SPD preconditioner.  Terminates on true relative 2-norm residual <= tol. */
template <class ApplyA, class ApplyM>
IterStats pminres(ApplyA&& apply_A, ApplyM&& apply_M, const Vec& b, Vec& x, double tol,
                  int maxit) {
  const size_t N = b.size();
  IterStats st;
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    x.assign(N, 0.0);
    return st;
  }
  Vec r1(N), r2(N), y(N), v(N), w(N, 0.0), w1(N, 0.0), w2(N, 0.0), tmp(N);

  auto true_resid = [&](const Vec& xx) {
    apply_A(xx, tmp);
    double tn = 0.0;
    for (size_t i = 0; i < N; ++i) {
      double d = b[i] - tmp[i];
      tn += d * d;
    }
    return std::sqrt(tn) / bnorm;
  };

  int total_it = 0;
  for (int restart = 0; restart < 4; ++restart) {
    apply_A(x, tmp);
    for (size_t i = 0; i < N; ++i) r1[i] = b[i] - tmp[i];
    apply_M(r1, y);
    double beta1 = dot(r1, y);
    if (beta1 < 0.0) throw SingularSystem("pminres: preconditioner not SPD");
    beta1 = std::sqrt(beta1);
    if (beta1 == 0.0) {
      st.rel_residual = true_resid(x);
      return st;
    }
    r2 = r1;
    double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
    double cs = -1.0, sn = 0.0, oldeps = 0.0;
    std::fill(w.begin(), w.end(), 0.0);
    std::fill(w2.begin(), w2.end(), 0.0);

    for (int it = 1; it <= maxit; ++it) {
      ++total_it;
      double s = 1.0 / beta;
      for (size_t i = 0; i < N; ++i) v[i] = s * y[i];
      apply_A(v, tmp);
      if (it >= 2) axpy(-beta / oldb, r1, tmp);
      double alfa = dot(v, tmp);
      axpy(-alfa / beta, r2, tmp);
      r1 = r2;
      r2 = tmp;
      apply_M(r2, y);
      oldb = beta;
      double betasq = dot(r2, y);
      if (betasq < 0.0) throw SingularSystem("pminres: preconditioner not SPD");
      beta = std::sqrt(betasq);

      oldeps = epsln;
      double delta = cs * dbar + sn * alfa;
      double gbar = sn * dbar - cs * alfa;
      epsln = sn * beta;
      dbar = -cs * beta;
      double gamma = std::sqrt(gbar * gbar + beta * beta);
      gamma = std::max(gamma, 1e-300);
      cs = gbar / gamma;
      sn = beta / gamma;
      double phi = cs * phibar;
      phibar = sn * phibar;

      w1 = w2;
      w2 = w;
      for (size_t i = 0; i < N; ++i)
        w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
      axpy(phi, w, x);

      double est = phibar / beta1;  // relative residual in the M^{-1} norm
      st.history.push_back(est);
      st.iterations = total_it;
      if (est <= tol * 0.5 || it == maxit) {
        double tn = true_resid(x);
        st.rel_residual = tn;
        if (tn <= tol) return st;
        if (it == maxit) break;
        // keep iterating inside this cycle with a tighter estimate target
        tol = tol * std::max(0.1, 0.5 * tol / std::max(tn, 1e-300));
      }
    }
  }
  throw NoConvergence("pminres: no convergence (rel res " +
                          std::to_string(st.rel_residual) + ")",
                      st.history);
}

/** Restarted GMRES with right preconditioning for mildly nonsymmetric
 *  systems (bordered continuation steps).  apply_M approximates A^{-1}. */
template <class ApplyA, class ApplyM>
IterStats gmres(ApplyA&& apply_A, ApplyM&& apply_M, const Vec& b, Vec& x, double tol,
                int restart_len, int max_restarts) {
  const size_t N = b.size();
  IterStats st;
  double bnorm = norm2(b);
  if (bnorm == 0.0) {
    x.assign(N, 0.0);
    return st;
  }
  const int m = restart_len;
  std::vector<Vec> V(m + 1, Vec(N));
  std::vector<Vec> Z(m, Vec(N));
  std::vector<double> H((size_t)(m + 1) * m, 0.0);
  Vec cs(m), sn(m), g(m + 1), tmp(N);

  for (int cycle = 0; cycle < max_restarts; ++cycle) {
    apply_A(x, tmp);
    Vec r(N);
    for (size_t i = 0; i < N; ++i) r[i] = b[i] - tmp[i];
    double rnorm = norm2(r);
    st.rel_residual = rnorm / bnorm;
    if (st.rel_residual <= tol) return st;
    for (size_t i = 0; i < N; ++i) V[0][i] = r[i] / rnorm;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = rnorm;
    int k = 0;
    for (; k < m; ++k) {
      apply_M(V[k], Z[k]);
      apply_A(Z[k], V[k + 1]);
      for (int j = 0; j <= k; ++j) {
        double hjk = dot(V[j], V[k + 1]);
        H[(size_t)j * m + k] = hjk;
        axpy(-hjk, V[j], V[k + 1]);
      }
      double hk1 = norm2(V[k + 1]);
      H[(size_t)(k + 1) * m + k] = hk1;
      if (hk1 > 1e-300)
        for (size_t i = 0; i < N; ++i) V[k + 1][i] /= hk1;
      // Givens rotations
      for (int j = 0; j < k; ++j) {
        double t1 = H[(size_t)j * m + k], t2 = H[(size_t)(j + 1) * m + k];
        H[(size_t)j * m + k] = cs[j] * t1 + sn[j] * t2;
        H[(size_t)(j + 1) * m + k] = -sn[j] * t1 + cs[j] * t2;
      }
      double t1 = H[(size_t)k * m + k], t2 = H[(size_t)(k + 1) * m + k];
      double rr = std::hypot(t1, t2);
      cs[k] = t1 / rr;
      sn[k] = t2 / rr;
      H[(size_t)k * m + k] = rr;
      H[(size_t)(k + 1) * m + k] = 0.0;
      double gk = g[k];
      g[k] = cs[k] * gk;
      g[k + 1] = -sn[k] * gk;
      ++st.iterations;
      st.history.push_back(std::abs(g[k + 1]) / bnorm);
      if (std::abs(g[k + 1]) / bnorm <= tol * 0.5) {
        ++k;
        break;
      }
    }
    // back substitution
    std::vector<double> ycoef(k, 0.0);
    for (int i = k - 1; i >= 0; --i) {
      double s = g[i];
      for (int j = i + 1; j < k; ++j) s -= H[(size_t)i * m + j] * ycoef[j];
      ycoef[i] = s / H[(size_t)i * m + i];
    }
    for (int j = 0; j < k; ++j) axpy(ycoef[j], Z[j], x);
  }
  apply_A(x, tmp);
  double tn = 0.0;
  for (size_t i = 0; i < N; ++i) {
    double d = b[i] - tmp[i];
    tn += d * d;
  }
  st.rel_residual = std::sqrt(tn) / bnorm;
  if (st.rel_residual <= tol) return st;
  throw NoConvergence("gmres: no convergence (rel res " +
                          std::to_string(st.rel_residual) + ")",
                      st.history);
}

// ---------------------------------------------------------------------------
// Small dense helpers (constraint blocks, Hessians, regression fits).
// ---------------------------------------------------------------------------

/** Gaussian elimination with partial pivoting; A is m x m row-major and is
 *  destroyed.  Solves in place into b. */
inline void dense_solve_inplace(std::vector<double>& A, std::vector<double>& b, int m) {
  for (int col = 0; col < m; ++col) {
    int piv = col;
    for (int r = col + 1; r < m; ++r)
      if (std::abs(A[(size_t)r * m + col]) > std::abs(A[(size_t)piv * m + col])) piv = r;
    if (std::abs(A[(size_t)piv * m + col]) < 1e-300)
      throw SingularSystem("dense_solve: singular matrix");
    if (piv != col) {
      for (int c = 0; c < m; ++c) std::swap(A[(size_t)piv * m + c], A[(size_t)col * m + c]);
      std::swap(b[piv], b[col]);
    }
    for (int r = col + 1; r < m; ++r) {
      double f = A[(size_t)r * m + col] / A[(size_t)col * m + col];
      if (f == 0.0) continue;
      for (int c = col; c < m; ++c) A[(size_t)r * m + c] -= f * A[(size_t)col * m + c];
      b[r] -= f * b[col];
    }
  }
  for (int r = m - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < m; ++c) s -= A[(size_t)r * m + c] * b[c];
    b[r] = s / A[(size_t)r * m + r];
  }
}

inline std::vector<double> dense_solve(std::vector<double> A, std::vector<double> b) {
  int m = (int)b.size();
  dense_solve_inplace(A, b, m);
  return b;
}

/** Ordinary least squares for a small column basis: returns coefficients of
 *  size k minimizing ||X beta - y||_2.  X is row-major n x k. */
inline std::vector<double> least_squares(const std::vector<double>& X,
                                         const std::vector<double>& y, int k) {
  int n = (int)y.size();
  std::vector<double> XtX((size_t)k * k, 0.0), Xty(k, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < k; ++a) {
      Xty[a] += X[(size_t)i * k + a] * y[i];
      for (int b = 0; b <= a; ++b) XtX[(size_t)a * k + b] += X[(size_t)i * k + a] * X[(size_t)i * k + b];
    }
  }
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b) XtX[(size_t)a * k + b] = XtX[(size_t)b * k + a];
  return dense_solve(std::move(XtX), std::move(Xty));
}

}  // namespace liouville
