#pragma once

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "liouville/grid.hpp"

namespace liouville {

/** Real 2D FFT workspace for one grid size.  Plans use FFTW_ESTIMATE so
 *  results are reproducible across runs and machines. */
class Spectral {
 public:
  explicit Spectral(const Grid2D& g) : grid_(g), n_(g.n), nc_(g.n * (g.n / 2 + 1)) {
    in_ = fftw_alloc_real((size_t)n_ * n_);
    out_ = fftw_alloc_complex(nc_);
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd_ = fftw_plan_dft_r2c_2d(n_, n_, in_, out_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_2d(n_, n_, out_, in_, FFTW_ESTIMATE);
  }
  ~Spectral() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(in_);
    fftw_free(out_);
  }
  Spectral(const Spectral&) = delete;
  Spectral& operator=(const Spectral&) = delete;

  const Grid2D& grid() const { return grid_; }

  /** Symbol of the discrete (five-point) -Laplacian at mode (k1,k2). */
  double neg_lap_symbol(int k1, int k2) const {
    const double s1 = std::sin(M_PI * k1 / n_);
    const double s2 = std::sin(M_PI * k2 / n_);
    return 4.0 * (s1 * s1 + s2 * s2) / (grid_.h * grid_.h);
  }

  /** Solve (-Delta_h + shift) u = rhs exactly in the trigonometric basis.
   *  For shift == 0 the mean of rhs is dropped and the zero-mean solution
   *  returned. */
  void solve_shifted(const double* rhs, double shift, double* u) const {
    std::memcpy(in_, rhs, sizeof(double) * (size_t)n_ * n_);
    fftw_execute(fwd_);
    const int nch = n_ / 2 + 1;
    const double scale = 1.0 / ((double)n_ * n_);
    for (int k1 = 0; k1 < n_; ++k1) {
      for (int k2 = 0; k2 < nch; ++k2) {
        double denom = neg_lap_symbol(k1, k2) + shift;
        size_t idx = (size_t)k1 * nch + k2;
        if (denom == 0.0) {
          out_[idx][0] = 0.0;
          out_[idx][1] = 0.0;
        } else {
          out_[idx][0] *= scale / denom;
          out_[idx][1] *= scale / denom;
        }
      }
    }
    fftw_execute(bwd_);
    std::memcpy(u, in_, sizeof(double) * (size_t)n_ * n_);
  }

  /** True spectral gradient (ik symbol); used for integral diagnostics, not
   *  for operator assembly. */
  void gradient(const ScalarField& f, ScalarField& gx, ScalarField& gy) const {
    const int nch = n_ / 2 + 1;
    const double scale = 1.0 / ((double)n_ * n_);
    const double two_pi_over_L = 2.0 * M_PI / grid_.side_length;
    std::vector<fftw_complex> hat(nc_);
    std::memcpy(in_, f.data(), sizeof(double) * (size_t)n_ * n_);
    fftw_execute(fwd_);
    std::memcpy(hat.data(), out_, sizeof(fftw_complex) * nc_);

    auto wave = [&](int k) { return (k <= n_ / 2) ? k : k - n_; };
    for (int axis = 0; axis < 2; ++axis) {
      for (int k1 = 0; k1 < n_; ++k1) {
        // Nyquist derivative mode is dropped (odd symbol).
        double kx = (k1 == n_ / 2) ? 0.0 : wave(k1) * two_pi_over_L;
        for (int k2 = 0; k2 < nch; ++k2) {
          double ky = (k2 == n_ / 2) ? 0.0 : wave(k2) * two_pi_over_L;
          double k = (axis == 0) ? kx : ky;
          size_t idx = (size_t)k1 * nch + k2;
          double re = hat[idx][0], im = hat[idx][1];
          out_[idx][0] = -k * im * scale;
          out_[idx][1] = k * re * scale;
        }
      }
      fftw_execute(bwd_);
      std::memcpy(axis == 0 ? gx.data() : gy.data(), in_, sizeof(double) * (size_t)n_ * n_);
    }
  }

  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }

 private:
  Grid2D grid_;
  int n_;
  int nc_;
  double* in_;
  fftw_complex* out_;
  fftw_plan fwd_;
  fftw_plan bwd_;
};

/** Process-wide cache of FFT workspaces keyed by (n, L). */
inline Spectral& spectral_for(const Grid2D& g) {
  static std::map<std::pair<int, double>, std::unique_ptr<Spectral>> cache;
  static std::mutex m;
  std::lock_guard<std::mutex> lock(m);
  auto key = std::make_pair(g.n, g.side_length);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, std::make_unique<Spectral>(g)).first;
  return *it->second;
}

}  // namespace liouville
