#pragma once

#include <Eigen/Dense>

#include "fsgen/errors.hpp"

namespace fsgen {

// A real vector-valued function on [0, 1), sampled on the uniform grid
// t_i = i / resolution (left endpoints). Column c holds channel c.
struct GridFunction {
  int resolution = 0;
  int channels = 0;
  Eigen::MatrixXd values;  // resolution x channels

  static GridFunction zeros(int resolution, int channels);
  static GridFunction constant(int resolution, int channels, double value);
  static GridFunction from_values(Eigen::MatrixXd v);

  double t(int i) const { return static_cast<double>(i) / resolution; }
  bool all_finite() const { return values.allFinite(); }
};

// Truncated half-spectrum of a real GridFunction. Row k holds the complex
// coefficient of frequency k (0 <= k < modes); negative frequencies are
// implied by Hermitian symmetry. source_resolution is the grid size the
// spectrum was taken from; it fixes the inverse normalization.
struct SpectrumTensor {
  int modes = 0;
  int channels = 0;
  int source_resolution = 0;
  Eigen::MatrixXcd coeff;  // modes x channels
};

// Number of representable half-spectrum modes on an n-point grid.
inline int nyquist_modes(int n) { return n / 2 + 1; }

// sqrt( (1/n) * sum_i sum_c f[i][c]^2 )
double quadrature_l2_norm(const GridFunction& f);

// c[k] = sum_i f[i] * exp(-2*pi*i*k*i/n), k in [0, modes)
SpectrumTensor forward_spectrum(const GridFunction& f, int modes);

// f[j] = (1/n_src) * sum_k w_k * Re(c[k] * exp(+2*pi*i*k*j/resolution))
// where w_k = 1 for k = 0 and for the source Nyquist bin (2k = n_src),
// else 2. Truncated spectra are zero-padded implicitly.
GridFunction inverse_spectrum(const SpectrumTensor& s, int resolution);

// Band-limited resampling: forward at the largest mode count both grids
// support, then inverse at the target size. Identity when sizes match.
GridFunction resample(const GridFunction& f, int new_resolution);

GridFunction concat_channels(const GridFunction& a, const GridFunction& b);

namespace detail {

// Cached cos/sin tables for a grid of size n: entry (i, k) holds
// cos/sin(2*pi*i*k/n) for k up to nyquist_modes(n) - 1.
struct DftBasis {
  Eigen::MatrixXd cos_t;  // n x nyquist_modes(n)
  Eigen::MatrixXd sin_t;
};
const DftBasis& dft_basis(int n);

// Per-mode weights w_k / n_src used by the inverse transform.
Eigen::VectorXd inverse_scale(int source_resolution, int modes);

// Raw kernels shared with the autodiff graph. `scale` has one entry per
// mode and multiplies that mode's coefficient (forward) or term (inverse).
Eigen::MatrixXcd dft_apply(const Eigen::MatrixXd& v, int modes,
                           const Eigen::VectorXd& scale);
Eigen::MatrixXd idft_apply(const Eigen::MatrixXcd& c, int n_out,
                           const Eigen::VectorXd& scale);

}  // namespace detail

}  // namespace fsgen
