#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsgen/data.hpp"
#include "fsgen/neural_op.hpp"
#include "fsgen/skeleton.hpp"

namespace fsgen {

struct TrainConfig {
  int epochs = 200;
  double lr0 = 1e-4;
  int lr_halving_period = 50;  // epochs between halvings
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double lambda_gp = 10.0;   // gradient penalty weight
  double lambda_sym = 0.1;   // symmetry penalty weight
  int critic_steps_per_gen = 5;
  int batch_size = 4;
  std::uint64_t seed = 0;
  int train_resolution = 0;  // 0: keep the data's native frame count

  // model / run shape
  int width = 16;
  int modes_cap = 12;
  int head_hidden = 32;
  int checkpoint_every = 10;
  int noise_channels = 0;  // 0: one noise channel per output channel (3J)
  double noise_length_scale = 0.1;
  double noise_variance = 1.0;
  double split_ratio = 0.8;

  void validate() const;  // throws BadConfig
};

// Flat `key = value` text, '#' comments; keys are the field names above.
TrainConfig load_train_config(const std::string& path);
void set_config_key(TrainConfig& c, const std::string& key,
                    const std::string& value);

double lr_at(int epoch, const TrainConfig& c);

// Bias-corrected Adam. Complex kernel entries are updated as independent
// real and imaginary components.
struct AdamState {
  UnoTensors m, v;
  long long t = 0;
  bool with_head = false;
};
AdamState adam_init(const ArchConfig& cfg);
void adam_step(UnoTensors& params, const UnoGrads& grads, AdamState& st,
               double lr, const TrainConfig& c);

// Mean over frames and mirrored bone pairs of the squared difference of
// left/right bone lengths.
double symmetry_penalty(const MotionSequence& motion,
                        const SkeletonSpec& skeleton);
// Same quantity as a differentiable scalar node over a frames x 3J grid.
int emit_symmetry_penalty(graph::Graph& g, int grid_node,
                          const SkeletonSpec& skeleton);

// Channel conventions, fixed project-wide:
//   critic input  = concat(response, condition)  (6J channels)
//   gen input     = concat(noise, condition)     (noise_ch + 3J channels)
//   pair-as-grid  = concat(actor_b, actor_a)     (response first)
GridFunction pair_grid(const DyadicPair& p);

struct CriticStep {
  double loss = 0.0;
  double penalty = 0.0;    // mean (|grad| - 1)^2 over the batch
  double grad_norm = 0.0;  // mean |grad| over the batch
  UnoGrads grads;
};
// WGAN critic objective on one batch: mean d(fake) - mean d(real) +
// lambda_gp * mean (|input grad of d at interpolant| - 1)^2. Fakes are
// treated as constants; gradients flow to critic parameters only,
// including through the penalty (second-order sweep).
CriticStep critic_loss(const UnoModel& critic, const UnoModel& gen,
                       const std::vector<DyadicPair>& batch,
                       const GrfSpec& noise, std::uint64_t seed,
                       double lambda_gp);

struct GenStep {
  double loss = 0.0;
  double symmetry = 0.0;
  UnoGrads grads;
};
// Generator objective: -mean d(fake) + lambda_sym * symmetry penalty on
// the generated motion (denormalized first when stats are given).
GenStep generator_loss(const UnoModel& critic, const UnoModel& gen,
                       const std::vector<DyadicPair>& batch,
                       const GrfSpec& noise, std::uint64_t seed,
                       double lambda_sym, const SkeletonSpec& skeleton,
                       const NormStats* denorm_stats);

struct TrainResult {
  UnoModel gen;
  UnoModel critic;
  NormStats stats;
  GrfSpec noise;
};
// Adversarial training on an (already split) list of training pairs.
// Writes train_log.tsv plus periodic and final checkpoints into out_dir.
TrainResult train(const TrainConfig& c, const std::vector<DyadicPair>& pairs,
                  const std::string& out_dir, const SkeletonSpec& skeleton);

struct AeResult {
  UnoModel model;
  NormStats stats;
};
// Skip-free reconstruction autoencoder over pair grids (6J -> 6J),
// quadrature-weighted mean squared error. The bottleneck supplies the
// feature map used by the evaluation metrics.
AeResult train_autoencoder(const TrainConfig& c,
                           const std::vector<DyadicPair>& pairs,
                           const std::string& out_dir);

// Run a generator checkpoint on one conditioning motion: resample to
// `resolution` (0 keeps the native count), normalize with the embedded
// stats, draw the embedded noise law with `seed`, and denormalize the
// response.
MotionSequence generate_response(const Checkpoint& gen_checkpoint,
                                 const MotionSequence& condition,
                                 int resolution, std::uint64_t seed);

}  // namespace fsgen
