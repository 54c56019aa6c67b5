#include <cmath>
#include <complex>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "fsgen/data.hpp"

using namespace fsgen;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

MotionSequence random_motion(int joints, int frames, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  MotionSequence m = MotionSequence::zeros(joints, frames, 1.0 / 30.0);
  for (int t = 0; t < frames; ++t)
    for (int c = 0; c < 3 * joints; ++c) m.positions(t, c) = g(rng);
  return m;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void dump(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("single-actor files round trip through 32-bit storage") {
  auto m = random_motion(3, 17, 1);
  auto path = temp_path("fsgen_motion.pmo1");
  write_motion(path, m);
  auto back = read_motion(path);
  CHECK(back.joints == 3);
  CHECK(back.frames == 17);
  CHECK(back.dt == doctest::Approx(1.0 / 30.0).epsilon(1e-7));
  for (int t = 0; t < 17; ++t)
    for (int c = 0; c < 9; ++c)
      CHECK(back.positions(t, c) ==
            static_cast<double>(static_cast<float>(m.positions(t, c))));
  std::filesystem::remove(path);
}

TEST_CASE("single-actor file size is exactly header plus payload") {
  auto m = random_motion(2, 3, 2);
  auto path = temp_path("fsgen_size.pmo1");
  write_motion(path, m);
  CHECK(std::filesystem::file_size(path) == 16 + 12 * 2 * 3);  // 88 bytes
  std::filesystem::remove(path);
}

TEST_CASE("pair files round trip with the label from the file stem") {
  DyadicPair p;
  p.actor_a = random_motion(2, 9, 3);
  p.actor_b = random_motion(2, 9, 4);
  p.label = "ignored-on-write";
  auto path = temp_path("fsgen_pair_x07.pmo2");
  write_pair(path, p);
  auto back = read_pair(path);
  CHECK(back.label == "fsgen_pair_x07");
  CHECK(back.actor_a.frames == 9);
  for (int t = 0; t < 9; ++t)
    for (int c = 0; c < 6; ++c) {
      CHECK(back.actor_a.positions(t, c) ==
            static_cast<double>(static_cast<float>(p.actor_a.positions(t, c))));
      CHECK(back.actor_b.positions(t, c) ==
            static_cast<double>(static_cast<float>(p.actor_b.positions(t, c))));
    }
  auto mismatched = p;
  mismatched.actor_b = random_motion(2, 8, 5);
  CHECK_THROWS_AS(write_pair(path, mismatched), ShapeMismatch);
  std::filesystem::remove(path);
}

TEST_CASE("malformed motion files raise typed errors") {
  auto m = random_motion(2, 5, 6);
  auto path = temp_path("fsgen_bad.pmo1");
  write_motion(path, m);
  const std::string good = slurp(path);

  dump(path, "XXXX" + good.substr(4));
  CHECK_THROWS_AS(read_motion(path), BadMagic);

  dump(path, good.substr(0, 10));
  CHECK_THROWS_AS(read_motion(path), TruncatedFile);

  dump(path, good.substr(0, good.size() - 3));
  CHECK_THROWS_AS(read_motion(path), TruncatedFile);

  dump(path, good + "zz");
  CHECK_THROWS_AS(read_motion(path), TruncatedFile);

  std::string nan_bytes = good;
  const unsigned char quiet_nan[4] = {0x00, 0x00, 0xC0, 0x7F};
  std::memcpy(nan_bytes.data() + 16, quiet_nan, 4);
  dump(path, nan_bytes);
  CHECK_THROWS_AS(read_motion(path), NonFiniteValue);

  CHECK_THROWS_AS(read_motion(temp_path("fsgen_does_not_exist.pmo1")),
                  TruncatedFile);
  std::filesystem::remove(path);
}

TEST_CASE("noiseless synthesis is exactly the delayed mirror law") {
  SynthSpec spec;
  spec.pairs = 4;
  spec.joints = 3;
  spec.frames = 32;
  spec.delay = 0.1;
  spec.noise_sigma = 0.0;
  spec.seed = 99;
  auto pairs = synth_coupled(spec);
  REQUIRE(pairs.size() == 4);
  for (const auto& p : pairs) {
    auto expected = delayed_mirror_responder(p.actor_a, spec.delay, true);
    CHECK((p.actor_b.positions - expected.positions).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("zero delay without mirroring copies the lead actor") {
  SynthSpec spec;
  spec.pairs = 2;
  spec.joints = 2;
  spec.frames = 16;
  spec.delay = 0.0;
  spec.noise_sigma = 0.0;
  spec.mirror = false;
  spec.seed = 5;
  for (const auto& p : synth_coupled(spec))
    CHECK((p.actor_b.positions - p.actor_a.positions).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("integer-frame delays are circular shifts with an x flip") {
  auto a = random_motion(2, 10, 7);
  a.dt = 0.1;
  auto b = delayed_mirror_responder(a, 0.2, true);  // exactly two frames
  for (int t = 0; t < 10; ++t)
    for (int j = 0; j < 2; ++j)
      for (int d = 0; d < 3; ++d) {
        double src = a.positions((t - 2 + 10) % 10, 3 * j + d);
        if (d == 0) src = -src;
        CHECK(b.positions(t, 3 * j + d) == doctest::Approx(src).epsilon(1e-12));
      }
}

TEST_CASE("fractional delays use the exact spectral phase shift") {
  const int n = 16;
  auto a = MotionSequence::zeros(1, n, 0.1);
  for (int t = 0; t < n; ++t)
    for (int c = 0; c < 3; ++c)
      a.positions(t, c) = std::cos(2.0 * kPi * (c + 1) * t / n + 0.3 * c);
  const double delay = 0.05;  // half a frame
  auto b = delayed_mirror_responder(a, delay, false);
  double shift = delay / a.dt;
  for (int t = 0; t < n; ++t)
    for (int c = 0; c < 3; ++c)
      CHECK(b.positions(t, c) ==
            doctest::Approx(
                std::cos(2.0 * kPi * (c + 1) * (t - shift) / n + 0.3 * c))
                .epsilon(1e-9));
}

TEST_CASE("delays outside the clip are rejected") {
  auto a = random_motion(1, 10, 8);
  a.dt = 0.1;
  CHECK_THROWS_AS(delayed_mirror_responder(a, -0.01, true), BadDelay);
  CHECK_THROWS_AS(delayed_mirror_responder(a, 1.01, true), BadDelay);
}

TEST_CASE("split partitions the corpus at the requested ratio") {
  SynthSpec spec;
  spec.pairs = 10;
  spec.joints = 1;
  spec.frames = 8;
  spec.seed = 11;
  auto pairs = synth_coupled(spec);
  auto [train, eval] = split(pairs, 0.8, 3);
  CHECK(train.size() == 8);
  CHECK(eval.size() == 2);
  std::vector<std::string> seen;
  for (const auto& p : train) seen.push_back(p.label);
  for (const auto& p : eval) seen.push_back(p.label);
  std::sort(seen.begin(), seen.end());
  std::vector<std::string> want;
  for (const auto& p : pairs) want.push_back(p.label);
  std::sort(want.begin(), want.end());
  CHECK(seen == want);
  auto [train2, eval2] = split(pairs, 0.8, 3);
  CHECK(train2[0].label == train[0].label);  // seeded shuffle reproduces
}

TEST_CASE("standardization is exact and reversible") {
  SynthSpec spec;
  spec.pairs = 12;
  spec.joints = 2;
  spec.frames = 16;
  spec.seed = 13;
  auto pairs = synth_coupled(spec);
  auto stats = compute_norm_stats(pairs);

  double worst_mean = 0.0, worst_var = 0.0;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(6);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(6);
  long long count = 0;
  for (const auto& p : pairs) {
    auto np = normalize(p, stats);
    for (const auto* m : {&np.actor_a, &np.actor_b}) {
      sum += m->positions.colwise().sum().transpose();
      sq += m->positions.cwiseAbs2().colwise().sum().transpose();
      count += m->frames;
    }
  }
  for (int c = 0; c < 6; ++c) {
    double mean = sum[c] / count;
    double var = sq[c] / count - mean * mean;
    worst_mean = std::max(worst_mean, std::abs(mean));
    if (stats.stddev[c] > 1e-6)
      worst_var = std::max(worst_var, std::abs(var - 1.0));
  }
  CHECK(worst_mean < 1e-10);
  CHECK(worst_var < 1e-9);

  auto round = denormalize(normalize(pairs[0].actor_a, stats), stats);
  CHECK((round.positions - pairs[0].actor_a.positions).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("constant coordinates pass through standardization unchanged") {
  DyadicPair p;
  p.actor_a = MotionSequence::zeros(1, 8, 0.1);
  p.actor_b = MotionSequence::zeros(1, 8, 0.1);
  p.actor_a.positions.col(1).setConstant(5.0);
  p.actor_b.positions.col(1).setConstant(5.0);
  auto stats = compute_norm_stats({p});
  CHECK(stats.stddev[1] == 1.0);  // clamped, not zero
  auto n = normalize(p.actor_a, stats);
  CHECK(n.positions.col(1).isZero(1e-14));
  CHECK_THROWS_AS(compute_norm_stats({}), EmptyDataset);
}

TEST_CASE("role swap augmentation") {
  DyadicPair p;
  p.actor_a = random_motion(1, 4, 20);
  p.actor_b = random_motion(1, 4, 21);
  auto same = swap_augment(p, false);
  CHECK((same.actor_a.positions - p.actor_a.positions).cwiseAbs().maxCoeff() ==
        0.0);
  auto flipped = swap_augment(p, true);
  CHECK((flipped.actor_a.positions - p.actor_b.positions)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((flipped.actor_b.positions - p.actor_a.positions)
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("grid conversions preserve values and physical time") {
  auto m = random_motion(2, 12, 22);
  auto g = to_grid_function(m);
  CHECK(g.resolution == 12);
  CHECK(g.channels == 6);
  auto back = from_grid_function(g, m.duration());
  CHECK(back.frames == 12);
  CHECK(back.dt == doctest::Approx(m.dt).epsilon(1e-12));
  CHECK((back.positions - m.positions).cwiseAbs().maxCoeff() < 1e-15);

  auto up = resample_motion(m, 24);
  CHECK(up.frames == 24);
  CHECK(up.dt == doctest::Approx(m.dt / 2).epsilon(1e-12));
  CHECK(up.duration() == doctest::Approx(m.duration()).epsilon(1e-12));

  auto same = resample_motion(m, 12);
  CHECK((same.positions - m.positions).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("synthetic lead actors stay band limited") {
  SynthSpec spec;
  spec.pairs = 3;
  spec.joints = 2;
  spec.frames = 64;
  spec.max_frequency = 5;
  spec.noise_sigma = 0.0;
  spec.seed = 30;
  for (const auto& p : synth_coupled(spec)) {
    auto g = to_grid_function(p.actor_a);
    auto s = forward_spectrum(g, nyquist_modes(64));
    for (int k = 6; k < s.modes; ++k)
      CHECK(s.coeff.row(k).cwiseAbs().maxCoeff() < 1e-9);
  }
}
