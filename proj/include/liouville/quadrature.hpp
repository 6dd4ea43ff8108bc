#pragma once

#include <cmath>
#include <functional>

#include "liouville/errors.hpp"

namespace liouville {

namespace detail {
template <class F>
double adaptive_simpson_rec(F&& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1);
}
}  // namespace detail

template <class F>
double adaptive_simpson(F&& f, double a, double b, double tol = 1e-12, int max_depth = 40) {
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

/** Nodes/weights for 8-point Gauss-Legendre on [-1,1]. */
inline constexpr double kGauss8X[8] = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
inline constexpr double kGauss8W[8] = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

/** Nodes/weights for 4-point Gauss-Legendre on [-1,1]. */
inline constexpr double kGauss4X[4] = {-0.8611363115940526, -0.3399810435848563,
                                       0.3399810435848563, 0.8611363115940526};
inline constexpr double kGauss4W[4] = {0.3478548451374538, 0.6521451548625461,
                                       0.6521451548625461, 0.3478548451374538};

/** 4x4 tensor Gauss-Legendre cell average over [x0,x1]x[y0,y1]. */
template <class F>
double gauss2d_avg4(F&& f, double x0, double x1, double y0, double y1) {
  const double cx = 0.5 * (x0 + x1), hx = 0.5 * (x1 - x0);
  const double cy = 0.5 * (y0 + y1), hy = 0.5 * (y1 - y0);
  double acc = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      acc += kGauss4W[a] * kGauss4W[b] * f(cx + hx * kGauss4X[a], cy + hy * kGauss4X[b]);
  return acc * 0.25;
}

/** Tensor Gauss-Legendre integral of f over the rectangle [x0,x1]x[y0,y1]. */
template <class F>
double gauss2d(F&& f, double x0, double x1, double y0, double y1) {
  const double cx = 0.5 * (x0 + x1), hx = 0.5 * (x1 - x0);
  const double cy = 0.5 * (y0 + y1), hy = 0.5 * (y1 - y0);
  double acc = 0.0;
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b)
      acc += kGauss8W[a] * kGauss8W[b] * f(cx + hx * kGauss8X[a], cy + hy * kGauss8X[b]);
  return acc * hx * hy;
}

}  // namespace liouville
