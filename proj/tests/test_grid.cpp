#include <cmath>
#include <complex>
#include <random>

#include "doctest.h"
#include "fsgen/grid.hpp"

using namespace fsgen;

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::MatrixXd random_values(int n, int c, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(n, c);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

// Independent slow transform used as the numeric reference.
Eigen::MatrixXcd naive_forward(const Eigen::MatrixXd& v, int modes) {
  const int n = static_cast<int>(v.rows());
  Eigen::MatrixXcd c(modes, v.cols());
  for (int k = 0; k < modes; ++k)
    for (int ch = 0; ch < v.cols(); ++ch) {
      std::complex<double> acc(0.0, 0.0);
      for (int i = 0; i < n; ++i)
        acc += v(i, ch) * std::exp(std::complex<double>(
                              0.0, -2.0 * kPi * k * i / n));
      c(k, ch) = acc;
    }
  return c;
}

Eigen::MatrixXd naive_inverse(const Eigen::MatrixXcd& c, int n_src,
                              int n_out) {
  const int modes = static_cast<int>(c.rows());
  Eigen::MatrixXd v(n_out, c.cols());
  for (int j = 0; j < n_out; ++j)
    for (int ch = 0; ch < c.cols(); ++ch) {
      double acc = 0.0;
      for (int k = 0; k < modes; ++k) {
        double w = (k == 0 || 2 * k == n_src) ? 1.0 : 2.0;
        acc += w * (c(k, ch) * std::exp(std::complex<double>(
                                   0.0, 2.0 * kPi * k * j / n_out)))
                       .real();
      }
      v(j, ch) = acc / n_src;
    }
  return v;
}

}  // namespace

TEST_CASE("forward spectrum matches the slow reference transform") {
  auto f = GridFunction::from_values(random_values(16, 3, 11));
  auto s = forward_spectrum(f, 9);
  auto ref = naive_forward(f.values, 9);
  CHECK((s.coeff - ref).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(s.modes == 9);
  CHECK(s.channels == 3);
  CHECK(s.source_resolution == 16);
}

TEST_CASE("pure cosine concentrates in one bin") {
  const int n = 8;
  Eigen::MatrixXd v(n, 1);
  for (int i = 0; i < n; ++i) v(i, 0) = std::cos(2.0 * kPi * i / n);
  auto s = forward_spectrum(GridFunction::from_values(v), nyquist_modes(n));
  CHECK(s.coeff(1, 0).real() == doctest::Approx(n / 2.0).epsilon(1e-9));
  CHECK(std::abs(s.coeff(1, 0).imag()) < 1e-9);
  for (int k = 0; k < s.modes; ++k)
    if (k != 1) CHECK(std::abs(s.coeff(k, 0)) < 1e-9);
}

TEST_CASE("forward then inverse is the identity at full mode count") {
  auto f = GridFunction::from_values(random_values(32, 2, 3));
  auto back = inverse_spectrum(forward_spectrum(f, nyquist_modes(32)), 32);
  CHECK((back.values - f.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("inverse at a finer grid reproduces the band-limited function") {
  const int n = 8, up = 32;
  Eigen::MatrixXd v(n, 1);
  for (int i = 0; i < n; ++i) v(i, 0) = std::cos(2.0 * kPi * i / n);
  auto s = forward_spectrum(GridFunction::from_values(v), nyquist_modes(n));
  auto g = inverse_spectrum(s, up);
  for (int j = 0; j < up; ++j)
    CHECK(g.values(j, 0) ==
          doctest::Approx(std::cos(2.0 * kPi * j / up)).epsilon(1e-9));
}

TEST_CASE("inverse matches the slow reference on truncated spectra") {
  auto f = GridFunction::from_values(random_values(24, 2, 7));
  auto s = forward_spectrum(f, 5);
  auto g = inverse_spectrum(s, 24);
  auto ref = naive_inverse(s.coeff, 24, 24);
  CHECK((g.values - ref).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("quadrature norm of a unit sine is sqrt(1/2)") {
  const int n = 128;
  Eigen::MatrixXd v(n, 1);
  for (int i = 0; i < n; ++i) v(i, 0) = std::sin(2.0 * kPi * i / n);
  CHECK(quadrature_l2_norm(GridFunction::from_values(v)) ==
        doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
}

TEST_CASE("energy identity ties the two normalizations together") {
  const int n = 16;
  auto f = GridFunction::from_values(random_values(n, 1, 5));
  auto s = forward_spectrum(f, nyquist_modes(n));
  double time_energy = f.values.col(0).squaredNorm() / n;
  double freq_energy = 0.0;
  for (int k = 0; k < s.modes; ++k) {
    double w = (k == 0 || 2 * k == n) ? 1.0 : 2.0;
    freq_energy += w * std::norm(s.coeff(k, 0)) / (double(n) * n);
  }
  CHECK(time_energy == doctest::Approx(freq_energy).epsilon(1e-9));
}

TEST_CASE("resample is the identity at the same size") {
  auto f = GridFunction::from_values(random_values(20, 3, 9));
  auto g = resample(f, 20);
  CHECK((g.values - f.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("resample preserves band-limited signals across sizes") {
  const int n = 64, down = 32;
  Eigen::MatrixXd v(n, 1);
  for (int i = 0; i < n; ++i) v(i, 0) = std::cos(2.0 * kPi * 3 * i / n);
  auto g = resample(GridFunction::from_values(v), down);
  for (int j = 0; j < down; ++j)
    CHECK(g.values(j, 0) ==
          doctest::Approx(std::cos(2.0 * kPi * 3 * j / down)).epsilon(1e-9));
  auto back = resample(g, n);
  for (int i = 0; i < n; ++i)
    CHECK(back.values(i, 0) == doctest::Approx(v(i, 0)).epsilon(1e-9));
}

TEST_CASE("transform argument validation") {
  auto f = GridFunction::zeros(8, 1);
  CHECK_THROWS_AS(forward_spectrum(f, nyquist_modes(8) + 1),
                  ModesExceedNyquist);
  SpectrumTensor s = forward_spectrum(f, 5);
  CHECK_THROWS_AS(inverse_spectrum(s, 7), ResolutionBelowModeSupport);
  CHECK_NOTHROW(inverse_spectrum(s, 8));
}

TEST_CASE("channel concatenation") {
  auto a = GridFunction::constant(8, 2, 1.0);
  auto b = GridFunction::constant(8, 1, 2.0);
  auto c = concat_channels(a, b);
  CHECK(c.channels == 3);
  CHECK(c.values.col(0).isConstant(1.0));
  CHECK(c.values.col(2).isConstant(2.0));
  auto wrong = GridFunction::zeros(4, 1);
  CHECK_THROWS_AS(concat_channels(a, wrong), ResolutionMismatch);
}
