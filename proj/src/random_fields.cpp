#include "fsgen/random_fields.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <tuple>

#include "fsgen/rng.hpp"

namespace fsgen {

namespace {

void check_spec(const GrfSpec& spec, int resolution) {
  if (resolution < 2)
    throw ResolutionBelowModeSupport("grf resolution must be >= 2");
  if (spec.channels < 1)
    throw ChannelCountNotOne("grf channels must be >= 1");
  if (!(spec.variance > 0.0))
    throw CholeskyFailure("grf variance must be positive");
  if (spec.kernel == GrfKernel::SquaredExponential && !(spec.length_scale > 0.0))
    throw CholeskyFailure("grf length_scale must be positive");
}

using CholKey = std::tuple<double, double, int>;  // (length_scale, variance, n)

std::map<CholKey, Eigen::MatrixXd>& chol_cache() {
  static std::map<CholKey, Eigen::MatrixXd> cache;
  return cache;
}
std::mutex chol_mutex;

// Lower Cholesky factor of the squared-exponential Gram matrix.
const Eigen::MatrixXd& sqexp_cholesky(double length_scale, double variance,
                                      int n) {
  std::lock_guard<std::mutex> lock(chol_mutex);
  CholKey key{length_scale, variance, n};
  auto it = chol_cache().find(key);
  if (it != chol_cache().end()) return it->second;

  Eigen::MatrixXd k(n, n);
  double inv2l2 = 1.0 / (2.0 * length_scale * length_scale);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double d = static_cast<double>(i - j) / n;
      double v = variance * std::exp(-d * d * inv2l2);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  for (double jitter : {1e-8 * variance, 1e-6 * variance}) {
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(kj);
    if (llt.info() == Eigen::Success) {
      return chol_cache().emplace(key, llt.matrixL()).first->second;
    }
  }
  throw CholeskyFailure("squared-exponential Gram matrix not PD at n = " +
                        std::to_string(n));
}

}  // namespace

GridFunction sample_grf(const GrfSpec& spec, int resolution,
                        std::uint64_t seed) {
  check_spec(spec, resolution);
  Rng rng(seed);
  GridFunction g = GridFunction::zeros(resolution, spec.channels);
  if (spec.kernel == GrfKernel::WhiteNoise) {
    double s = std::sqrt(spec.variance);
    for (int c = 0; c < spec.channels; ++c)
      for (int i = 0; i < resolution; ++i) g.values(i, c) = s * rng.gauss();
    return g;
  }
  const Eigen::MatrixXd& l =
      sqexp_cholesky(spec.length_scale, spec.variance, resolution);
  Eigen::VectorXd z(resolution);
  for (int c = 0; c < spec.channels; ++c) {
    for (int i = 0; i < resolution; ++i) z(i) = rng.gauss();
    g.values.col(c) = l.triangularView<Eigen::Lower>() * z;
  }
  return g;
}

GaussianProcessEstimate fit_gp(const std::vector<GridFunction>& features,
                               int grid_size) {
  if (features.size() < 2)
    throw TooFewSamples("fit_gp needs at least 2 features, got " +
                        std::to_string(features.size()));
  if (grid_size < 2)
    throw ResolutionBelowModeSupport("fit_gp grid_size must be >= 2");
  const int n = static_cast<int>(features.size());
  Eigen::MatrixXd phi(n, grid_size);
  for (int i = 0; i < n; ++i) {
    if (features[i].channels != 1)
      throw ChannelCountNotOne("fit_gp feature " + std::to_string(i) + " has " +
                               std::to_string(features[i].channels) +
                               " channels");
    phi.row(i) = resample(features[i], grid_size).values.col(0).transpose();
  }
  GaussianProcessEstimate gp;
  gp.grid_size = grid_size;
  gp.mean = phi.colwise().mean().transpose();
  Eigen::MatrixXd centered = phi.rowwise() - gp.mean.transpose();
  gp.covariance = (centered.transpose() * centered) / n;
  gp.covariance = 0.5 * (gp.covariance + gp.covariance.transpose()).eval();
  return gp;
}

Eigen::MatrixXd covariance_operator_matrix(const GaussianProcessEstimate& gp) {
  if (gp.grid_size < 1) throw TooFewSamples("empty GP estimate");
  return gp.covariance / gp.grid_size;
}

}  // namespace fsgen
