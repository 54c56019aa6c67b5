#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <type_traits>
#include <vector>

#include "doctest.h"
#include "fsgen/neural_op.hpp"

using namespace fsgen;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

GridFunction band_limited(int resolution, int channels, int modes,
                          unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  SpectrumTensor s;
  s.modes = modes;
  s.channels = channels;
  s.source_resolution = resolution;
  s.coeff.resize(modes, channels);
  for (int k = 0; k < modes; ++k)
    for (int c = 0; c < channels; ++c)
      s.coeff(k, c) = std::complex<double>(g(rng), g(rng)) *
                      (double(resolution) / (1.0 + k));
  return inverse_spectrum(s, resolution);
}

int dof_count(const UnoTensors& t, bool with_head) {
  int n = 0;
  auto visit = [&n](auto& x) {
    using T = std::decay_t<decltype(x)>;
    if constexpr (std::is_same_v<T, std::vector<Eigen::MatrixXcd>>) {
      for (const auto& mk : x) n += 2 * static_cast<int>(mk.size());
    } else {
      n += static_cast<int>(x.size());
    }
  };
  for_each_tensor(const_cast<UnoTensors&>(t), with_head, visit);
  return n;
}

// Visits the dof-th real degree of freedom: returns the current value and
// optionally adds h.
double touch_dof(UnoTensors& t, bool with_head, int dof, double h) {
  double out = 0.0;
  int at = 0;
  auto visit = [&](auto& x) {
    using T = std::decay_t<decltype(x)>;
    if constexpr (std::is_same_v<T, std::vector<Eigen::MatrixXcd>>) {
      for (auto& mk : x) {
        int span = 2 * static_cast<int>(mk.size());
        if (dof >= at && dof < at + span) {
          int local = dof - at;
          auto& z = *(mk.data() + local / 2);
          if (local % 2 == 0) {
            out = z.real();
            z += h;
          } else {
            out = z.imag();
            z += std::complex<double>(0.0, h);
          }
        }
        at += span;
      }
    } else {
      int span = static_cast<int>(x.size());
      if (dof >= at && dof < at + span) {
        out = *(x.data() + (dof - at));
        *(x.data() + (dof - at)) += h;
      }
      at += span;
    }
  };
  for_each_tensor(t, with_head, visit);
  return out;
}

double get_dof(const UnoTensors& t, bool with_head, int dof) {
  return touch_dof(const_cast<UnoTensors&>(t), with_head, dof, 0.0);
}

double sum_sq(const GridFunction& g) { return g.values.squaredNorm(); }

}  // namespace

TEST_CASE("seven-layer config computes per-layer mode counts") {
  auto cfg = ArchConfig::uno7(6, 3, 16, 12, 64, true, false, 32);
  REQUIRE(cfg.layers.size() == 7);
  CHECK(cfg.layers[0].modes == 12);  // 64 -> 32, nyquist 17, capped
  CHECK(cfg.layers[1].modes == 9);   // 32 -> 16, nyquist 9
  CHECK(cfg.layers[2].modes == 5);   // 16 -> 8, nyquist 5
  CHECK(cfg.layers[3].modes == 5);   // bottleneck at 8
  CHECK(cfg.layers[4].modes == 5);
  CHECK(cfg.layers[5].modes == 9);
  CHECK(cfg.layers[6].modes == 12);
  CHECK(cfg.layers[0].in_channels == 16);
  CHECK(cfg.layers[3].in_channels == 128);
  CHECK(cfg.layers[6].out_channels == 16);
  CHECK_NOTHROW(cfg.validate());
  auto other = ArchConfig::uno7(6, 3, 8, 12, 64, true, false, 32);
  CHECK(cfg.signature() != other.signature());
}

TEST_CASE("config validation rejects broken stacks") {
  auto cfg = ArchConfig::uno7(4, 4, 8, 5, 32, true, false, 16);
  auto six = cfg;
  six.layers.pop_back();
  CHECK_THROWS_AS(six.validate(), InvalidArchitecture);
  auto bad_chain = cfg;
  bad_chain.layers[2].in_channels += 1;
  CHECK_THROWS_AS(bad_chain.validate(), InvalidArchitecture);
}

TEST_CASE("zero parameters propagate only the projection bias") {
  auto cfg = ArchConfig::uno7(2, 3, 4, 3, 16, true, false, 8);
  UnoModel m{cfg, zeros_like(cfg)};
  m.p.project.bias << 0.5, -1.0, 2.0;
  auto [out, tape] = uno_forward(m, band_limited(16, 2, 3, 1), false);
  REQUIRE(!out.is_scalar);
  CHECK(out.grid.resolution == 16);
  CHECK(out.grid.channels == 3);
  CHECK((out.grid.values.col(0).array() - 0.5).abs().maxCoeff() < 1e-12);
  CHECK((out.grid.values.col(1).array() + 1.0).abs().maxCoeff() < 1e-12);
  CHECK((out.grid.values.col(2).array() - 2.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("zeroed scalar head returns exactly zero") {
  auto cfg = ArchConfig::uno7(2, 4, 4, 3, 16, true, true, 8);
  UnoModel m{cfg, zeros_like(cfg)};
  auto [out, tape] = uno_forward(m, band_limited(16, 2, 3, 2), false);
  REQUIRE(out.is_scalar);
  CHECK(out.scalar == 0.0);
}

TEST_CASE("identity spectral layer reduces to the activation") {
  LayerConfig cfg{3, 3, 4, 1, 1};
  SpectralLayerParams p;
  p.kernel.assign(4, Eigen::MatrixXcd::Zero(3, 3));
  p.pointwise = Eigen::MatrixXd::Identity(3, 3);
  p.bias = Eigen::VectorXd::Zero(3);
  auto v = band_limited(16, 3, 4, 3);
  auto out = spectral_layer_forward(p, cfg, v, false);
  for (int i = 0; i < 16; ++i)
    for (int c = 0; c < 3; ++c)
      CHECK(out.values(i, c) ==
            doctest::Approx(graph::ew_eval(graph::EwFn::Gelu, v.values(i, c)))
                .epsilon(1e-12));
  auto lin = spectral_layer_forward(p, cfg, v, true);
  CHECK((lin.values - v.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single retained mode rotates a cosine analytically") {
  // kernel on mode 1 equal to i maps cos(2 pi t) -> -sin(2 pi t)
  LayerConfig cfg{1, 1, 2, 1, 1};
  SpectralLayerParams p;
  p.kernel.assign(2, Eigen::MatrixXcd::Zero(1, 1));
  p.kernel[1](0, 0) = std::complex<double>(0.0, 1.0);
  p.pointwise = Eigen::MatrixXd::Zero(1, 1);
  p.bias = Eigen::VectorXd::Zero(1);
  const int n = 16;
  Eigen::MatrixXd v(n, 1);
  for (int i = 0; i < n; ++i) v(i, 0) = std::cos(2.0 * kPi * i / n);
  auto out = spectral_layer_forward(p, cfg, GridFunction::from_values(v), true);
  for (int i = 0; i < n; ++i)
    CHECK(out.values(i, 0) ==
          doctest::Approx(-std::sin(2.0 * kPi * i / n)).epsilon(1e-9));
}

TEST_CASE("pointwise maps commute with band-limited resampling") {
  PointwiseParams p;
  p.weight = Eigen::MatrixXd::Random(3, 2);
  p.bias = Eigen::VectorXd::Random(2);
  auto v = band_limited(32, 3, 5, 4);
  auto a = resample(pointwise_apply(p, v), 64);
  auto b = pointwise_apply(p, resample(v, 64));
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("scalar head with constant unit weight integrates the function") {
  FunctionalHeadParams head;
  head.w1 = Eigen::MatrixXd::Zero(1, 4);
  head.b1 = Eigen::VectorXd::Zero(4);
  head.w2 = Eigen::MatrixXd::Zero(4, 1);
  head.b2 = Eigen::VectorXd::Ones(1);  // forces the gate to 1 everywhere
  auto c = GridFunction::constant(32, 1, 2.75);
  CHECK(functional_head_forward(head, c) == doctest::Approx(2.75).epsilon(1e-12));
  auto v = band_limited(32, 1, 4, 5);
  CHECK(functional_head_forward(head, v) ==
        doctest::Approx(v.values.mean()).epsilon(1e-9));
}

TEST_CASE("identity-activation zero-bias networks are linear") {
  auto cfg = ArchConfig::uno7(1, 1, 2, 2, 8, true, false, 4);
  cfg.identity_activations = true;
  UnoModel m = init_params(cfg, 17);
  auto a = band_limited(8, 1, 2, 6);
  auto b = band_limited(8, 1, 2, 7);
  GridFunction ab = GridFunction::from_values(a.values + b.values);
  auto [fa, t1] = uno_forward(m, a, false);
  auto [fb, t2] = uno_forward(m, b, false);
  auto [fab, t3] = uno_forward(m, ab, false);
  CHECK((fab.grid.values - fa.grid.values - fb.grid.values)
            .cwiseAbs()
            .maxCoeff() < 1e-9);
}

TEST_CASE("reverse sweep of a linear network matches its dense matrix") {
  auto cfg = ArchConfig::uno7(1, 1, 2, 2, 8, true, false, 4);
  cfg.identity_activations = true;
  UnoModel m = init_params(cfg, 19);
  const int n = 8;
  Eigen::MatrixXd dense(n, n);
  for (int j = 0; j < n; ++j) {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, 1);
    e(j, 0) = 1.0;
    auto [out, tape] = uno_forward(m, GridFunction::from_values(e), false);
    dense.col(j) = out.grid.values.col(0);
  }
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(n, 1);
  auto [out, tape] = uno_forward(m, GridFunction::from_values(x), true);
  auto [grads, input_grad] =
      backward(m, tape, GridFunction::from_values(
                            Eigen::MatrixXd(out.grid.values)));
  Eigen::MatrixXd expected = dense.transpose() * (dense * x);
  CHECK((input_grad.values - expected).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("parameter gradients match finite differences") {
  auto cfg = ArchConfig::uno7(2, 2, 4, 3, 16, true, false, 8);
  UnoModel m = init_params(cfg, 23);
  auto x = band_limited(16, 2, 3, 8);

  auto loss_of = [&](const UnoModel& model) {
    auto [out, tape] = uno_forward(model, x, false);
    return sum_sq(out.grid);
  };

  auto [out, tape] = uno_forward(m, x, true);
  GridFunction cot = out.grid;
  cot.values *= 2.0;
  auto [grads, input_grad] = backward(m, tape, cot);

  std::mt19937 rng(99);
  int total = dof_count(m.p, false);
  const double h = 1e-5;
  for (int trial = 0; trial < 48; ++trial) {
    int dof = static_cast<int>(rng() % static_cast<unsigned>(total));
    UnoModel plus = m, minus = m;
    touch_dof(plus.p, false, dof, h);
    touch_dof(minus.p, false, dof, -h);
    double num = (loss_of(plus) - loss_of(minus)) / (2.0 * h);
    double ana = get_dof(grads, false, dof);
    CHECK(std::abs(num - ana) <=
          1e-4 * std::max({1.0, std::abs(num), std::abs(ana)}));
  }
}

TEST_CASE("scalar-head parameter gradients match finite differences") {
  auto cfg = ArchConfig::uno7(2, 4, 4, 3, 16, true, true, 8);
  UnoModel m = init_params(cfg, 29);
  auto x = band_limited(16, 2, 3, 9);

  auto loss_of = [&](const UnoModel& model) {
    auto [out, tape] = uno_forward(model, x, false);
    return out.scalar;
  };

  auto [out, tape] = uno_forward(m, x, true);
  auto [grads, input_grad] = backward(m, tape, 1.0);

  std::mt19937 rng(101);
  int total = dof_count(m.p, true);
  const double h = 1e-5;
  for (int trial = 0; trial < 48; ++trial) {
    int dof = static_cast<int>(rng() % static_cast<unsigned>(total));
    UnoModel plus = m, minus = m;
    touch_dof(plus.p, true, dof, h);
    touch_dof(minus.p, true, dof, -h);
    double num = (loss_of(plus) - loss_of(minus)) / (2.0 * h);
    double ana = get_dof(grads, true, dof);
    CHECK(std::abs(num - ana) <=
          1e-4 * std::max({1.0, std::abs(num), std::abs(ana)}));
  }
}

TEST_CASE("head input-gradient norm matches finite differences") {
  auto cfg = ArchConfig::uno7(2, 4, 4, 3, 16, true, true, 8);
  UnoModel m = init_params(cfg, 31);
  auto x = band_limited(16, 2, 3, 10);
  const int n = x.resolution;

  auto value_of = [&](const GridFunction& input) {
    auto [out, tape] = uno_forward(m, input, false);
    return out.scalar;
  };

  const double h = 1e-6;
  double sq = 0.0;
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < x.channels; ++c) {
      GridFunction plus = x, minus = x;
      plus.values(i, c) += h;
      minus.values(i, c) -= h;
      double partial = (value_of(plus) - value_of(minus)) / (2.0 * h);
      sq += partial * partial;
    }
  double expected = std::sqrt(sq * n);
  CHECK(input_gradient_norm(m, x) ==
        doctest::Approx(expected).epsilon(1e-4));
}

TEST_CASE("gradient norm requires a scalar head") {
  auto cfg = ArchConfig::uno7(2, 2, 4, 3, 16, true, false, 8);
  UnoModel m = init_params(cfg, 37);
  CHECK_THROWS_AS(input_gradient_norm(m, band_limited(16, 2, 3, 11)),
                  NoFunctionalHead);
}

TEST_CASE("outputs are stable across input discretizations") {
  auto cfg = ArchConfig::uno7(2, 2, 8, 5, 64, true, false, 16);
  UnoModel m = init_params(cfg, 41);
  SpectrumTensor s;
  s.modes = 5;
  s.channels = 2;
  s.source_resolution = 64;
  s.coeff.resize(5, 2);
  std::mt19937 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int k = 0; k < 5; ++k)
    for (int c = 0; c < 2; ++c)
      s.coeff(k, c) = std::complex<double>(g(rng), g(rng)) * 64.0 / (1.0 + k);
  auto coarse = inverse_spectrum(s, 64);
  auto fine_s = s;
  auto fine = inverse_spectrum(fine_s, 128);
  // same underlying function; inverse normalization keeps values aligned
  auto [out64, t1] = uno_forward(m, coarse, false);
  auto [out128, t2] = uno_forward(m, fine, false);
  CHECK(out128.grid.resolution == 128);
  auto down = resample(out128.grid, 64);
  double rel = std::sqrt((down.values - out64.grid.values).squaredNorm() /
                         out64.grid.values.squaredNorm());
  CHECK(rel < 0.05);
}

TEST_CASE("scalar head is stable across input discretizations") {
  auto cfg = ArchConfig::uno7(2, 4, 4, 5, 64, true, true, 8);
  UnoModel m = init_params(cfg, 43);
  auto x64 = band_limited(64, 2, 5, 12);
  auto x128 = resample(x64, 128);
  auto [a, t1] = uno_forward(m, x64, false);
  auto [b, t2] = uno_forward(m, x128, false);
  CHECK(std::abs(a.scalar - b.scalar) <
        1e-3 * std::max(1.0, std::abs(a.scalar)));
}

TEST_CASE("initialization is deterministic in the seed") {
  auto cfg = ArchConfig::uno7(2, 2, 4, 3, 16, true, true, 8);
  UnoModel a = init_params(cfg, 55);
  UnoModel b = init_params(cfg, 55);
  UnoModel c = init_params(cfg, 56);
  int total = dof_count(a.p, true);
  bool all_equal = true, any_diff = false;
  for (int d = 0; d < total; ++d) {
    if (get_dof(a.p, true, d) != get_dof(b.p, true, d)) all_equal = false;
    if (get_dof(a.p, true, d) != get_dof(c.p, true, d)) any_diff = true;
  }
  CHECK(all_equal);
  CHECK(any_diff);
  CHECK(a.p.head.w1.rows() == 2);   // head reads the projected channels
  CHECK(a.p.head.w1.cols() == 8);
  CHECK(a.p.head.w2.rows() == 8);
  CHECK(a.p.head.w2.cols() == 1);
  CHECK(a.p.lift.bias.isZero());
  CHECK(a.p.project.bias.isZero());
}

TEST_CASE("encoder half produces a single-channel bottleneck map") {
  auto cfg = ArchConfig::uno7(4, 4, 4, 3, 16, false, false, 8);
  UnoModel m = init_params(cfg, 61);
  auto x = band_limited(16, 4, 3, 13);
  auto f = bottleneck_forward(m, x);
  CHECK(f.resolution == 2);
  CHECK(f.channels == 1);
  CHECK(f.all_finite());
  CHECK_THROWS_AS(bottleneck_forward(m, band_limited(16, 3, 3, 13)),
                  ChannelMismatch);
}

TEST_CASE("checkpoints round trip bit-exactly") {
  auto cfg = ArchConfig::uno7(4, 2, 4, 3, 16, true, false, 8);
  UnoModel m = init_params(cfg, 67);
  NormStats stats;
  stats.mean = Eigen::VectorXd::Random(4);
  stats.stddev = Eigen::VectorXd::Random(4).cwiseAbs().array() + 0.5;
  GrfSpec noise;
  noise.kernel = GrfKernel::SquaredExponential;
  noise.length_scale = 0.17;
  noise.variance = 1.25;
  noise.channels = 2;
  auto path = temp_path("fsgen_ckpt_test.uno");
  save_checkpoint(path, m, &stats, &noise);
  Checkpoint ck = load_checkpoint(path);
  CHECK(ck.model.config.signature() == cfg.signature());
  int total = dof_count(m.p, false);
  for (int d = 0; d < total; ++d)
    CHECK(get_dof(ck.model.p, false, d) == get_dof(m.p, false, d));
  REQUIRE(ck.stats.has_value());
  CHECK((ck.stats->mean - stats.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ck.stats->stddev - stats.stddev).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(ck.noise.has_value());
  CHECK(ck.noise->length_scale == 0.17);
  CHECK(ck.noise->variance == 1.25);
  CHECK(ck.noise->channels == 2);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint corruption is rejected with typed errors") {
  auto cfg = ArchConfig::uno7(2, 2, 4, 3, 16, true, false, 8);
  UnoModel m = init_params(cfg, 71);
  auto path = temp_path("fsgen_ckpt_corrupt.uno");
  save_checkpoint(path, m);

  auto slurp = [&]() {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  auto dump = [&](const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  };
  const std::string original = slurp();

  dump("XXXX" + original.substr(4));
  CHECK_THROWS_AS(load_checkpoint(path), BadMagic);
  dump(original.substr(0, original.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(path), TruncatedFile);
  dump(original + "!");
  CHECK_THROWS_AS(load_checkpoint(path), TruncatedFile);

  UnoModel bad = m;
  bad.p.project.weight(0, 0) = std::nan("");
  save_checkpoint(path, bad);
  CHECK_THROWS_AS(load_checkpoint(path), NonFiniteValue);
  std::filesystem::remove(path);
}

TEST_CASE("tapes protect against misuse") {
  auto cfg = ArchConfig::uno7(2, 2, 4, 3, 16, true, false, 8);
  UnoModel m = init_params(cfg, 73);
  auto x = band_limited(16, 2, 3, 14);
  auto [out, tape] = uno_forward(m, x, false);
  GridFunction cot = GridFunction::constant(16, 2, 1.0);
  CHECK_THROWS_AS(backward(m, tape, cot), TapeMismatch);

  auto head_cfg = ArchConfig::uno7(2, 4, 4, 3, 16, true, true, 8);
  UnoModel hm = init_params(head_cfg, 74);
  auto [hout, htape] = uno_forward(hm, x, true);
  CHECK_THROWS_AS(backward(hm, htape, cot), TapeMismatch);
}
