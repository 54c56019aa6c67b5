#include "fsgen/grid.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <string>

namespace fsgen {

GridFunction GridFunction::zeros(int resolution, int channels) {
  GridFunction g;
  g.resolution = resolution;
  g.channels = channels;
  g.values = Eigen::MatrixXd::Zero(resolution, channels);
  return g;
}

GridFunction GridFunction::constant(int resolution, int channels,
                                    double value) {
  GridFunction g = zeros(resolution, channels);
  g.values.setConstant(value);
  return g;
}

GridFunction GridFunction::from_values(Eigen::MatrixXd v) {
  GridFunction g;
  g.resolution = static_cast<int>(v.rows());
  g.channels = static_cast<int>(v.cols());
  g.values = std::move(v);
  return g;
}

double quadrature_l2_norm(const GridFunction& f) {
  if (f.resolution < 1)
    throw ResolutionMismatch("quadrature_l2_norm on empty grid");
  return std::sqrt(f.values.squaredNorm() / f.resolution);
}

namespace detail {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

std::map<int, DftBasis>& basis_cache() {
  static std::map<int, DftBasis> cache;
  return cache;
}
std::mutex basis_mutex;
}  // namespace

const DftBasis& dft_basis(int n) {
  std::lock_guard<std::mutex> lock(basis_mutex);
  auto it = basis_cache().find(n);
  if (it != basis_cache().end()) return it->second;
  DftBasis b;
  int m = nyquist_modes(n);
  b.cos_t.resize(n, m);
  b.sin_t.resize(n, m);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < m; ++k) {
      // reduce i*k mod n first so the angle stays in [0, 2pi)
      long long r = (static_cast<long long>(i) * k) % n;
      double a = kTwoPi * static_cast<double>(r) / n;
      b.cos_t(i, k) = std::cos(a);
      b.sin_t(i, k) = std::sin(a);
    }
  }
  return basis_cache().emplace(n, std::move(b)).first->second;
}

Eigen::VectorXd inverse_scale(int source_resolution, int modes) {
  Eigen::VectorXd s(modes);
  for (int k = 0; k < modes; ++k) {
    double w = (k == 0 || 2 * k == source_resolution) ? 1.0 : 2.0;
    s(k) = w / source_resolution;
  }
  return s;
}

Eigen::MatrixXcd dft_apply(const Eigen::MatrixXd& v, int modes,
                           const Eigen::VectorXd& scale) {
  const int n = static_cast<int>(v.rows());
  const DftBasis& b = dft_basis(n);
  Eigen::MatrixXcd out(modes, v.cols());
  out.real() = scale.asDiagonal() * (b.cos_t.leftCols(modes).transpose() * v);
  out.imag() = scale.asDiagonal() * (-(b.sin_t.leftCols(modes).transpose() * v));
  return out;
}

Eigen::MatrixXd idft_apply(const Eigen::MatrixXcd& c, int n_out,
                           const Eigen::VectorXd& scale) {
  const int m = static_cast<int>(c.rows());
  const DftBasis& b = dft_basis(n_out);
  Eigen::MatrixXd re = scale.asDiagonal() * c.real();
  Eigen::MatrixXd im = scale.asDiagonal() * c.imag();
  return b.cos_t.leftCols(m) * re - b.sin_t.leftCols(m) * im;
}

}  // namespace detail

SpectrumTensor forward_spectrum(const GridFunction& f, int modes) {
  if (f.resolution < 1)
    throw ResolutionMismatch("forward_spectrum on empty grid");
  if (modes < 1 || modes > nyquist_modes(f.resolution))
    throw ModesExceedNyquist("requested " + std::to_string(modes) +
                             " modes at resolution " +
                             std::to_string(f.resolution));
  SpectrumTensor s;
  s.modes = modes;
  s.channels = f.channels;
  s.source_resolution = f.resolution;
  s.coeff = detail::dft_apply(f.values, modes, Eigen::VectorXd::Ones(modes));
  return s;
}

GridFunction inverse_spectrum(const SpectrumTensor& s, int resolution) {
  if (s.modes < 1 || s.source_resolution < 1)
    throw ResolutionMismatch("inverse_spectrum on empty spectrum");
  if (resolution < 1 || resolution < 2 * (s.modes - 1))
    throw ResolutionBelowModeSupport(
        "resolution " + std::to_string(resolution) + " cannot carry " +
        std::to_string(s.modes) + " modes");
  GridFunction g;
  g.resolution = resolution;
  g.channels = s.channels;
  g.values = detail::idft_apply(
      s.coeff, resolution, detail::inverse_scale(s.source_resolution, s.modes));
  return g;
}

GridFunction resample(const GridFunction& f, int new_resolution) {
  if (new_resolution < 2)
    throw ResolutionBelowModeSupport("resample target must be >= 2");
  if (new_resolution == f.resolution) return f;
  int modes = std::min(nyquist_modes(f.resolution), nyquist_modes(new_resolution));
  return inverse_spectrum(forward_spectrum(f, modes), new_resolution);
}

GridFunction concat_channels(const GridFunction& a, const GridFunction& b) {
  if (a.resolution != b.resolution)
    throw ResolutionMismatch("concat_channels: " + std::to_string(a.resolution) +
                             " vs " + std::to_string(b.resolution));
  GridFunction g;
  g.resolution = a.resolution;
  g.channels = a.channels + b.channels;
  g.values.resize(a.resolution, g.channels);
  g.values.leftCols(a.channels) = a.values;
  g.values.rightCols(b.channels) = b.values;
  return g;
}

}  // namespace fsgen
