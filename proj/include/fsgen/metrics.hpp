#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fsgen/data.hpp"
#include "fsgen/neural_op.hpp"
#include "fsgen/random_fields.hpp"

namespace fsgen {

// Bottleneck features, one 1-channel function per motion pair.
struct FeatureSet {
  std::vector<GridFunction> features;
  std::string source;  // "real" | "generated"
};

// Symmetric PSD square root via eigendecomposition; eigenvalues clamped at
// zero from below.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m);

// Squared Wasserstein-2 distance between the Gaussian processes moment-
// matched to the two feature populations on `grid_size` points:
//   (1/r)*sum((mean1-mean2)^2) + tr(M1 + M2 - 2*sqrt(sqrt(M1) M2 sqrt(M1)))
// with M = covariance / r. Tiny negative results are clamped to 0.
double f2id(const FeatureSet& a, const FeatureSet& b, int grid_size);

// Run each pair through the autoencoder's encoder half and channel-average
// the bottleneck output to one scalar function per pair.
FeatureSet extract_features(const Checkpoint& ae,
                            const std::vector<DyadicPair>& pairs,
                            const std::string& source_tag);

// Seeded split into two halves; mean squared quadrature-L2 distance
// between the paired halves.
double diversity_score(const FeatureSet& features, std::uint64_t seed);

// Biased V-statistic MMD^2 with Gaussian kernel exp(-|a-b|^2 / (2 bw^2)).
double mmd_squared(const std::vector<Eigen::VectorXd>& x,
                   const std::vector<Eigen::VectorXd>& y, double bandwidth);
// Median of pooled pairwise Euclidean distances; 1.0 when degenerate.
double median_heuristic_bandwidth(const std::vector<Eigen::VectorXd>& x,
                                  const std::vector<Eigen::VectorXd>& y);

// MMD-A: mean over time steps of MMD^2 between per-step pose vectors.
// MMD-S: MMD^2 between whole flattened sequences. Motions are spectrally
// resampled to a common frame count first.
double mmd_a(const std::vector<MotionSequence>& real,
             const std::vector<MotionSequence>& gen);
double mmd_s(const std::vector<MotionSequence>& real,
             const std::vector<MotionSequence>& gen);

// Average position error / average variance error of joint j between
// paired corpora (no normalization, no resampling).
double ape(const std::vector<MotionSequence>& gen,
           const std::vector<MotionSequence>& real, int joint);
double ave(const std::vector<MotionSequence>& gen,
           const std::vector<MotionSequence>& real, int joint);

struct EvalConfig {
  int grid_size = 64;  // moment-matching grid for f2id
  int reps = 5;
  int sample = 1000;   // with-replacement draws per repetition
  std::uint64_t seed = 0;
  int root_joint = 0;
};

struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> reps;
};

struct EvalReport {
  // fixed order: f2id, diversity, mmd_a, mmd_s, ape_root, ave_root
  std::vector<std::pair<std::string, MetricStats>> metrics;
  std::string to_text() const;
};

// Paired corpora (same length, index-matched conditions). Each repetition
// draws one shared with-replacement index sample applied to both corpora,
// so identical corpora score exactly zero on the paired metrics.
EvalReport evaluate_suite(const std::vector<DyadicPair>& real,
                          const std::vector<DyadicPair>& gen,
                          const Checkpoint& ae, const EvalConfig& cfg);

}  // namespace fsgen
