#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fsgen/grid.hpp"
#include "fsgen/random_fields.hpp"
#include "fsgen/skeleton.hpp"

namespace fsgen {

// A motion clip: positions(t, 3j + d) is coordinate d (0=x, 1=y, 2=z) of
// joint j at frame t. Frames are dt seconds apart.
struct MotionSequence {
  int joints = 0;
  int frames = 0;
  double dt = 0.0;
  Eigen::MatrixXd positions;  // frames x 3*joints, joint-major

  double duration() const { return frames * dt; }
  static MotionSequence zeros(int joints, int frames, double dt);
  bool all_finite() const { return positions.allFinite(); }
};

// Two actors sharing a clock. By convention actor_a carries the
// conditioning role and actor_b the generated/response role.
struct DyadicPair {
  MotionSequence actor_a;
  MotionSequence actor_b;
  std::string label;
};

// Binary motion file ("PMO1"): magic, u32 joints, u32 frames, f32 dt, then
// frames*joints*3 little-endian f32 positions in (frame, joint, xyz) order.
void write_motion(const std::string& path, const MotionSequence& m);
MotionSequence read_motion(const std::string& path);

// Dyadic file ("PMO2"): magic, shared header as above, then actor A block
// and actor B block of frames*joints*3 f32 each.
void write_pair(const std::string& path, const DyadicPair& p);
DyadicPair read_pair(const std::string& path);

// Coupled synthetic task: actor A moves by random band-limited sinusoid
// mixtures around a symmetric rest pose; actor B is A mirrored in x,
// delayed by `delay` seconds (circularly), plus GRF noise of scale
// noise_sigma. With noise_sigma = 0 the pair is exactly the analytic
// delayed mirror, which makes the conditional mean known in closed form.
struct SynthSpec {
  int pairs = 0;
  int joints = 4;
  int frames = 64;
  double dt = 1.0 / 30.0;
  double delay = 0.1;        // seconds
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;
  bool mirror = true;        // x-mirroring toggle (off for some tests)
  int max_frequency = 5;     // cycles per clip, keep below Nyquist
};
std::vector<DyadicPair> synth_coupled(const SynthSpec& spec);

// The noise-free responder for a given conditioning motion under the
// synthetic task's law: x-mirror (optional) plus circular delay.
MotionSequence delayed_mirror_responder(const MotionSequence& a, double delay,
                                        bool mirror);

// Seeded shuffle, then first round(ratio*n) pairs are the train split.
std::pair<std::vector<DyadicPair>, std::vector<DyadicPair>> split(
    const std::vector<DyadicPair>& pairs, double ratio, std::uint64_t seed);

// Per-channel standardization statistics pooled over both actors of the
// training split. Channels with std below 1e-12 get std 1 so constant
// coordinates pass through unscaled.
struct NormStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
};
NormStats compute_norm_stats(const std::vector<DyadicPair>& pairs);
MotionSequence normalize(const MotionSequence& m, const NormStats& s);
MotionSequence denormalize(const MotionSequence& m, const NormStats& s);
DyadicPair normalize(const DyadicPair& p, const NormStats& s);

// Exchangeability augmentation: swap actor roles when coin is true.
DyadicPair swap_augment(const DyadicPair& p, bool coin);

// Motion <-> grid function (channels = 3*joints, joint-major). Duration is
// carried separately so resolution changes preserve physical time.
GridFunction to_grid_function(const MotionSequence& m);
MotionSequence from_grid_function(const GridFunction& g, double duration);

MotionSequence resample_motion(const MotionSequence& m, int frames);

}  // namespace fsgen
