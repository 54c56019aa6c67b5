#pragma once

#include <cstdint>
#include <vector>

#include "fsgen/grid.hpp"

namespace fsgen {

enum class GrfKernel { SquaredExponential, WhiteNoise };

// Stationary Gaussian random field on [0, 1).
struct GrfSpec {
  GrfKernel kernel = GrfKernel::SquaredExponential;
  double length_scale = 0.1;  // ignored for WhiteNoise
  double variance = 1.0;      // pointwise variance k(t, t)
  int channels = 1;           // independent channels
};

// Draw one field on an n-point grid. Deterministic in (spec, resolution,
// seed). SquaredExponential uses a Cholesky factor of the kernel Gram
// matrix with jitter 1e-8*variance, retried once at 1e-6*variance.
GridFunction sample_grf(const GrfSpec& spec, int resolution,
                        std::uint64_t seed);

// Moment-matched Gaussian description of a feature population on a fixed
// grid: sample mean and population covariance (1/n normalization).
struct GaussianProcessEstimate {
  int grid_size = 0;
  Eigen::VectorXd mean;        // grid_size
  Eigen::MatrixXd covariance;  // grid_size x grid_size, symmetric PSD
};

// Features must be single-channel; each is resampled to grid_size first.
GaussianProcessEstimate fit_gp(const std::vector<GridFunction>& features,
                               int grid_size);

// Discretized covariance operator: covariance / grid_size, so that traces
// approximate integral traces.
Eigen::MatrixXd covariance_operator_matrix(const GaussianProcessEstimate& gp);

}  // namespace fsgen
