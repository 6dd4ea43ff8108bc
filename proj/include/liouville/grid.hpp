#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "liouville/errors.hpp"

namespace liouville {

/** Uniform grid on the periodic square [0,L)^2, n points per side. */
struct Grid2D {
  double side_length = 1.0;
  int n = 0;
  double h = 0.0;

  Grid2D() = default;
  Grid2D(double side, int points) : side_length(side), n(points), h(side / points) {
    if (points < 16 || points % 2 != 0)
      throw DomainError("Grid2D: n must be even and >= 16, got " + std::to_string(points));
    if (!(side > 0.0) || !std::isfinite(side))
      throw DomainError("Grid2D: side length must be positive and finite");
  }

  bool operator==(const Grid2D& o) const {
    return side_length == o.side_length && n == o.n;
  }
  bool operator!=(const Grid2D& o) const { return !(*this == o); }

  /** Index arithmetic modulo n. */
  int wrap(int i) const {
    int r = i % n;
    return r < 0 ? r + n : r;
  }

  double x(int i) const { return i * h; }

  /** Shortest signed periodic displacement a - b. */
  double pdiff(double a, double b) const { return std::remainder(a - b, side_length); }

  /** Shortest periodic distance between two points. */
  double pdist(double ax, double ay, double bx, double by) const {
    return std::hypot(pdiff(ax, bx), pdiff(ay, by));
  }
};

/** Grid-sampled real function, stored row-major: value(i,j) = f(x_i, y_j). */
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const Grid2D& g, double fill = 0.0)
      : grid_(g), v_((size_t)g.n * g.n, fill) {}

  const Grid2D& grid() const { return grid_; }
  int n() const { return grid_.n; }
  size_t size() const { return v_.size(); }

  double& operator()(int i, int j) { return v_[(size_t)i * grid_.n + j]; }
  double operator()(int i, int j) const { return v_[(size_t)i * grid_.n + j]; }

  /** Access with periodic index wrapping. */
  double at_wrapped(int i, int j) const {
    return v_[(size_t)grid_.wrap(i) * grid_.n + grid_.wrap(j)];
  }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::vector<double>& values() { return v_; }
  const std::vector<double>& values() const { return v_; }

  bool all_finite() const {
    for (double x : v_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  double max_abs() const {
    double m = 0.0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
  }

  /** Fill from a function of the grid coordinates (x, y). */
  template <class F>
  void fill_from(F&& f) {
    const int n = grid_.n;
    for (int i = 0; i < n; ++i) {
      const double x = grid_.x(i);
      for (int j = 0; j < n; ++j) v_[(size_t)i * n + j] = f(x, grid_.x(j));
    }
  }

  ScalarField& operator+=(const ScalarField& o) {
    for (size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    for (size_t k = 0; k < v_.size(); ++k) v_[k] -= o.v_[k];
    return *this;
  }
  ScalarField& operator*=(double s) {
    for (double& x : v_) x *= s;
    return *this;
  }
  ScalarField& operator+=(double s) {
    for (double& x : v_) x += s;
    return *this;
  }

  /** Relative residual achieved by the solve that produced this field
   *  (NaN when the field did not come from a solve). */
  double achieved_residual = std::numeric_limits<double>::quiet_NaN();

 private:
  Grid2D grid_;
  std::vector<double> v_;
};

inline ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
inline ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
inline ScalarField operator*(double s, ScalarField a) { return a *= s; }

/** Compensated (Kahan) sum; keeps large-grid integrals deterministic and
 *  accurate without changing summation order. */
inline double kahan_sum(const std::vector<double>& v) {
  double s = 0.0, c = 0.0;
  for (double x : v) {
    double y = x - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s;
}

/** Five-point periodic Laplacian, second order. */
inline ScalarField laplacian(const ScalarField& f) {
  const Grid2D& g = f.grid();
  const int n = g.n;
  const double ih2 = 1.0 / (g.h * g.h);
  ScalarField out(g);
  for (int i = 0; i < n; ++i) {
    const int im = (i == 0) ? n - 1 : i - 1;
    const int ip = (i == n - 1) ? 0 : i + 1;
    for (int j = 0; j < n; ++j) {
      const int jm = (j == 0) ? n - 1 : j - 1;
      const int jp = (j == n - 1) ? 0 : j + 1;
      out(i, j) = (f(im, j) + f(ip, j) + f(i, jm) + f(i, jp) - 4.0 * f(i, j)) * ih2;
    }
  }
  return out;
}

/** h^2-weighted sum: trapezoid = midpoint on a periodic grid, spectrally
 *  accurate for smooth periodic integrands. */
inline double integrate(const ScalarField& f) {
  return kahan_sum(f.values()) * f.grid().h * f.grid().h;
}

inline double mean(const ScalarField& f) {
  return kahan_sum(f.values()) / (double)f.size();
}

namespace detail {
/** Cubic Lagrange weights on the stencil {-1,0,1,2} at offset t in [0,1). */
inline void cubic_weights(double t, double w[4]) {
  w[0] = -t * (t - 1.0) * (t - 2.0) / 6.0;
  w[1] = (t * t - 1.0) * (t - 2.0) / 2.0;
  w[2] = -t * (t + 1.0) * (t - 2.0) / 2.0;
  w[3] = t * (t * t - 1.0) / 6.0;
}
}  // namespace detail

/** Bicubic periodic interpolation (tensor cubic Lagrange).  Exact at grid
 *  nodes and for cubics; O(h^4) for smooth fields. */
inline double sample(const ScalarField& f, double px, double py) {
  const Grid2D& g = f.grid();
  const double sx = px / g.h, sy = py / g.h;
  double fx = std::floor(sx), fy = std::floor(sy);
  double tx = sx - fx, ty = sy - fy;
  int i0 = g.wrap((int)fx), j0 = g.wrap((int)fy);
  double wx[4], wy[4];
  detail::cubic_weights(tx, wx);
  detail::cubic_weights(ty, wy);
  int ii[4], jj[4];
  for (int a = 0; a < 4; ++a) {
    ii[a] = g.wrap(i0 + a - 1);
    jj[a] = g.wrap(j0 + a - 1);
  }
  double acc = 0.0;
  for (int a = 0; a < 4; ++a) {
    double row = 0.0;
    for (int b = 0; b < 4; ++b) row += wy[b] * f(ii[a], jj[b]);
    acc += wx[a] * row;
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Field serialization.  Binary: one ASCII header line "LVF1 <L-hex> <n>",
// then n*n doubles row-major (bit-exact round trip).  CSV: same header as a
// comment, then one row per line with %.17g values.
// ---------------------------------------------------------------------------

inline void write_field_binary(const ScalarField& f, const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw Error("cannot open for writing: " + path);
  std::fprintf(fp, "LVF1 %a %d\n", f.grid().side_length, f.grid().n);
  size_t nw = std::fwrite(f.data(), sizeof(double), f.size(), fp);
  std::fclose(fp);
  if (nw != f.size()) throw Error("short write: " + path);
}

inline ScalarField read_field_binary(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw Error("cannot open for reading: " + path);
  char magic[8] = {0};
  double L = 0.0;
  int n = 0;
  if (std::fscanf(fp, "%7s %la %d", magic, &L, &n) != 3 || std::strcmp(magic, "LVF1") != 0) {
    std::fclose(fp);
    throw Error("bad field header in " + path);
  }
  std::fgetc(fp);  // newline
  ScalarField f{Grid2D(L, n)};
  size_t nr = std::fread(f.data(), sizeof(double), f.size(), fp);
  std::fclose(fp);
  if (nr != f.size()) throw Error("short read: " + path);
  return f;
}

inline void write_field_csv(const ScalarField& f, const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw Error("cannot open for writing: " + path);
  std::fprintf(fp, "# L=%.17g n=%d\n", f.grid().side_length, f.grid().n);
  const int n = f.grid().n;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      std::fprintf(fp, "%.17g%c", f(i, j), j + 1 == n ? '\n' : ',');
  }
  std::fclose(fp);
}

inline ScalarField read_field_csv(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw Error("cannot open for reading: " + path);
  double L = 0.0;
  int n = 0;
  if (std::fscanf(fp, "# L=%lg n=%d", &L, &n) != 2) {
    std::fclose(fp);
    throw Error("bad csv field header in " + path);
  }
  ScalarField f{Grid2D(L, n)};
  for (size_t k = 0; k < f.size(); ++k) {
    double x;
    if (std::fscanf(fp, "%lg", &x) != 1) {
      std::fclose(fp);
      throw Error("csv field truncated: " + path);
    }
    f.data()[k] = x;
    int c = std::fgetc(fp);
    (void)c;
  }
  std::fclose(fp);
  return f;
}

/** Interpolate a field onto a finer/coarser grid (bicubic). */
inline ScalarField regrid(const ScalarField& f, const Grid2D& target) {
  ScalarField out(target);
  out.fill_from([&](double x, double y) { return sample(f, x, y); });
  return out;
}

}  // namespace liouville
