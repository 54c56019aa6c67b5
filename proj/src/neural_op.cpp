#include "fsgen/neural_op.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fsgen/rng.hpp"

namespace fsgen {

namespace {

int round_resolution(int n, int num, int den) {
  return static_cast<int>(
      std::llround(static_cast<double>(n) * num / den));
}

Eigen::VectorXd ones_scale(int modes) { return Eigen::VectorXd::Ones(modes); }

double gelu(double x) { return graph::ew_eval(graph::EwFn::Gelu, x); }

}  // namespace

ArchConfig ArchConfig::uno7(int in_channels, int out_channels, int width,
                            int modes_cap, int base_resolution, bool skips,
                            bool with_head, int head_hidden) {
  ArchConfig cfg;
  cfg.in_channels = in_channels;
  cfg.width = width;
  cfg.out_channels = out_channels;
  cfg.modes_cap = modes_cap;
  cfg.base_resolution = base_resolution;
  cfg.skips = skips;
  cfg.with_head = with_head;
  cfg.head_hidden = head_hidden;

  const int factors[7][2] = {{1, 2}, {1, 2}, {1, 2}, {1, 1},
                             {2, 1}, {2, 1}, {2, 1}};
  // encoder doubles channels, decoder halves; skips concatenate the
  // mirrored encoder output onto the decoder input
  int ch[8];
  ch[0] = width;
  for (int l = 0; l < 3; ++l) ch[l + 1] = ch[l] * 2;
  ch[4] = ch[3];
  for (int l = 4; l < 7; ++l) ch[l + 1] = ch[l] / 2;

  if (skips) cfg.skip_links = {{2, 4}, {1, 5}, {0, 6}};

  int res = base_resolution;
  for (int l = 0; l < 7; ++l) {
    LayerConfig lc;
    lc.in_channels = ch[l];
    for (const auto& link : cfg.skip_links)
      if (link.second == l) lc.in_channels += ch[link.first + 1];
    lc.out_channels = ch[l + 1];
    lc.factor_num = factors[l][0];
    lc.factor_den = factors[l][1];
    int out_res = round_resolution(res, lc.factor_num, lc.factor_den);
    lc.modes = std::min(modes_cap, nyquist_modes(std::min(res, out_res)));
    cfg.layers.push_back(lc);
    res = out_res;
  }
  cfg.validate();
  return cfg;
}

void ArchConfig::validate() const {
  if (layers.size() != 7)
    throw InvalidArchitecture("expected exactly 7 spectral layers, got " +
                              std::to_string(layers.size()));
  if (in_channels < 1 || out_channels < 1 || width < 1)
    throw InvalidArchitecture("channel counts must be positive");
  long long num = 1, den = 1;
  for (const auto& l : layers) {
    if (l.modes < 1 || l.factor_num < 1 || l.factor_den < 1 ||
        l.in_channels < 1 || l.out_channels < 1)
      throw InvalidArchitecture("bad layer config");
    num *= l.factor_num;
    den *= l.factor_den;
  }
  if (num != den)
    throw InvalidArchitecture("resolution factors must multiply to 1");
  // channel chain
  int ch = width;
  for (int l = 0; l < 7; ++l) {
    int expect = ch;
    for (const auto& link : skip_links) {
      if (link.second == l) {
        if (link.first < 0 || link.first >= l)
          throw InvalidArchitecture("skip link must go forward");
        expect += layers[link.first].out_channels;
      }
    }
    if (layers[l].in_channels != expect)
      throw InvalidArchitecture("layer " + std::to_string(l) +
                                " input channels " +
                                std::to_string(layers[l].in_channels) +
                                " != " + std::to_string(expect));
    ch = layers[l].out_channels;
  }
  if (ch != width)
    throw InvalidArchitecture("final layer must restore the lift width");
  if (with_head && head_hidden < 1)
    throw InvalidArchitecture("head_hidden must be positive");
}

std::uint64_t ArchConfig::signature() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t x) {
    h ^= x + 0x9e3779b97f4a7c15ULL;
    h *= 1099511628211ULL;
  };
  mix(in_channels);
  mix(width);
  mix(out_channels);
  mix(modes_cap);
  mix(base_resolution);
  mix(skips ? 1 : 0);
  mix(with_head ? 2 : 0);
  mix(head_hidden);
  mix(identity_activations ? 4 : 0);
  for (const auto& l : layers) {
    mix(l.in_channels);
    mix(l.out_channels);
    mix(l.modes);
    mix(l.factor_num);
    mix(l.factor_den);
  }
  for (const auto& s : skip_links) {
    mix(s.first);
    mix(s.second);
  }
  return h;
}

UnoTensors zeros_like(const ArchConfig& cfg) {
  UnoTensors t;
  t.lift.weight = Eigen::MatrixXd::Zero(cfg.in_channels, cfg.width);
  t.lift.bias = Eigen::VectorXd::Zero(cfg.width);
  for (const auto& l : cfg.layers) {
    SpectralLayerParams p;
    p.kernel.assign(l.modes,
                    Eigen::MatrixXcd::Zero(l.in_channels, l.out_channels));
    p.pointwise = Eigen::MatrixXd::Zero(l.in_channels, l.out_channels);
    p.bias = Eigen::VectorXd::Zero(l.out_channels);
    t.layers.push_back(std::move(p));
  }
  t.project.weight = Eigen::MatrixXd::Zero(cfg.width, cfg.out_channels);
  t.project.bias = Eigen::VectorXd::Zero(cfg.out_channels);
  if (cfg.with_head) {
    t.head.w1 = Eigen::MatrixXd::Zero(cfg.out_channels, cfg.head_hidden);
    t.head.b1 = Eigen::VectorXd::Zero(cfg.head_hidden);
    t.head.w2 = Eigen::MatrixXd::Zero(cfg.head_hidden, 1);
    t.head.b2 = Eigen::VectorXd::Zero(1);
  }
  return t;
}

UnoModel init_params(const ArchConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  auto fill_gauss = [&rng](Eigen::MatrixXd& m, double std) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = std * rng.gauss();
  };
  UnoModel model;
  model.config = cfg;
  model.p = zeros_like(cfg);
  fill_gauss(model.p.lift.weight, std::sqrt(2.0 / cfg.in_channels));
  for (size_t l = 0; l < cfg.layers.size(); ++l) {
    const auto& lc = cfg.layers[l];
    auto& lp = model.p.layers[l];
    // complex entries with |z| std 1/(in*out): each component std/sqrt(2)
    double comp =
        1.0 / (static_cast<double>(lc.in_channels) * lc.out_channels) /
        std::sqrt(2.0);
    for (auto& rk : lp.kernel)
      for (Eigen::Index i = 0; i < rk.rows(); ++i)
        for (Eigen::Index j = 0; j < rk.cols(); ++j)
          rk(i, j) = std::complex<double>(comp * rng.gauss(),
                                          comp * rng.gauss());
    fill_gauss(lp.pointwise, std::sqrt(2.0 / lc.in_channels));
  }
  fill_gauss(model.p.project.weight, std::sqrt(2.0 / cfg.width));
  if (cfg.with_head) {
    fill_gauss(model.p.head.w1, std::sqrt(2.0 / cfg.out_channels));
    fill_gauss(model.p.head.w2, std::sqrt(2.0 / cfg.head_hidden));
  }
  return model;
}

// --- standalone ops ---

GridFunction pointwise_apply(const PointwiseParams& p, const GridFunction& v) {
  if (v.channels != p.weight.rows())
    throw ChannelMismatch("pointwise_apply: " + std::to_string(v.channels) +
                          " channels vs weight rows " +
                          std::to_string(p.weight.rows()));
  GridFunction out;
  out.resolution = v.resolution;
  out.channels = static_cast<int>(p.weight.cols());
  out.values = (v.values * p.weight).rowwise() + p.bias.transpose();
  return out;
}

GridFunction spectral_layer_forward(const SpectralLayerParams& p,
                                    const LayerConfig& cfg,
                                    const GridFunction& v,
                                    bool identity_activation) {
  if (v.channels != cfg.in_channels)
    throw ChannelMismatch("spectral layer expects " +
                          std::to_string(cfg.in_channels) + " channels, got " +
                          std::to_string(v.channels));
  if (static_cast<int>(p.kernel.size()) != cfg.modes)
    throw InvalidArchitecture("kernel mode count mismatch");
  const int n_in = v.resolution;
  if (cfg.modes > nyquist_modes(n_in))
    throw ModesExceedNyquist("layer keeps " + std::to_string(cfg.modes) +
                             " modes but works at resolution " +
                             std::to_string(n_in));
  const int n_out = round_resolution(n_in, cfg.factor_num, cfg.factor_den);

  Eigen::MatrixXcd spec =
      detail::dft_apply(v.values, cfg.modes, ones_scale(cfg.modes));
  Eigen::MatrixXcd mixed(cfg.modes, cfg.out_channels);
  for (int k = 0; k < cfg.modes; ++k) mixed.row(k) = spec.row(k) * p.kernel[k];
  Eigen::MatrixXd conv = detail::idft_apply(
      mixed, n_out, detail::inverse_scale(n_in, cfg.modes));

  Eigen::MatrixXd lin = (v.values * p.pointwise).rowwise() + p.bias.transpose();
  if (n_out != n_in) {
    int m = std::min(nyquist_modes(n_in), nyquist_modes(n_out));
    lin = detail::idft_apply(detail::dft_apply(lin, m, ones_scale(m)), n_out,
                             detail::inverse_scale(n_in, m));
  }
  GridFunction out;
  out.resolution = n_out;
  out.channels = cfg.out_channels;
  out.values = conv + lin;
  if (!identity_activation)
    out.values = out.values.unaryExpr([](double x) { return gelu(x); });
  return out;
}

double functional_head_forward(const FunctionalHeadParams& p,
                               const GridFunction& v,
                               bool identity_activation) {
  if (v.channels != p.w1.rows())
    throw ChannelMismatch("functional head expects " +
                          std::to_string(p.w1.rows()) + " channels, got " +
                          std::to_string(v.channels));
  const int n = v.resolution;
  Eigen::MatrixXd h = (v.values * p.w1).rowwise() + p.b1.transpose();
  if (!identity_activation)
    h = h.unaryExpr([](double x) { return gelu(x); });
  Eigen::VectorXd kappa = (h * p.w2).col(0).array() + p.b2(0);
  return kappa.dot(v.values.rowwise().sum()) / n;
}

// --- graph emission ---

namespace {

// band-limited resample as graph nodes
int emit_resample(graph::Graph& g, int v, int n_in, int n_out) {
  if (n_in == n_out) return v;
  int m = std::min(nyquist_modes(n_in), nyquist_modes(n_out));
  return g.idft(g.dft(v, m, ones_scale(m)), n_out,
                detail::inverse_scale(n_in, m));
}

}  // namespace

UnoBinding emit_uno(graph::Graph& g, const UnoModel& model, int input_node,
                    bool params_need_grad) {
  const ArchConfig& cfg = model.config;
  cfg.validate();
  const graph::Value& in_val = g.val(input_node);
  if (in_val.kind != graph::Kind::Grid)
    throw ShapeMismatch("uno input must be a grid node");
  if (in_val.m.cols() != cfg.in_channels)
    throw ChannelMismatch("uno expects " + std::to_string(cfg.in_channels) +
                          " input channels, got " +
                          std::to_string(in_val.m.cols()));
  const int input_res = static_cast<int>(in_val.m.rows());

  UnoBinding b;
  b.input = input_node;
  b.lift_w = g.leaf_grid(model.p.lift.weight, params_need_grad);
  b.lift_b = g.leaf_vec(model.p.lift.bias, params_need_grad);

  // Pin the internal computation to the configured base grid: band-limited
  // resampling at entry (and back at exit) keeps pointwise nonlinearities and
  // residual paths on a fixed grid, so outputs agree across input resolutions.
  int entry = emit_resample(g, input_node, input_res, cfg.base_resolution);
  int x = g.add_bias(g.matmul(entry, b.lift_w), b.lift_b);
  int res = cfg.base_resolution;

  std::vector<int> layer_out_node(7, -1);
  std::vector<int> layer_out_res(7, 0);
  b.layers.resize(7);

  for (int l = 0; l < 7; ++l) {
    const LayerConfig& lc = cfg.layers[l];
    // skip concatenation (resampled if rounding desynced the grids)
    for (const auto& link : cfg.skip_links) {
      if (link.second == l) {
        int enc = emit_resample(g, layer_out_node[link.first],
                                layer_out_res[link.first], res);
        x = g.concat2(x, enc);
      }
    }
    if (lc.modes > nyquist_modes(res))
      throw ModesExceedNyquist("layer " + std::to_string(l) + " keeps " +
                               std::to_string(lc.modes) +
                               " modes but works at resolution " +
                               std::to_string(res));
    int n_out = round_resolution(res, lc.factor_num, lc.factor_den);

    auto& ln = b.layers[l];
    ln.r = g.leaf_stack(model.p.layers[l].kernel, params_need_grad);
    ln.w = g.leaf_grid(model.p.layers[l].pointwise, params_need_grad);
    ln.b = g.leaf_vec(model.p.layers[l].bias, params_need_grad);

    int conv = g.idft(g.mm_n(g.dft(x, lc.modes, ones_scale(lc.modes)), ln.r),
                      n_out, detail::inverse_scale(res, lc.modes));
    int lin = g.add_bias(g.matmul(x, ln.w), ln.b);
    lin = emit_resample(g, lin, res, n_out);
    int pre = g.add2(conv, lin);
    x = cfg.identity_activations ? pre : g.ew(pre, graph::EwFn::Gelu);
    res = n_out;
    layer_out_node[l] = x;
    layer_out_res[l] = res;
  }

  // rounding on odd grids can leave the decoder a few samples off; pin it
  // back to the base grid before the output stages
  x = emit_resample(g, x, res, cfg.base_resolution);
  res = cfg.base_resolution;

  b.proj_w = g.leaf_grid(model.p.project.weight, params_need_grad);
  b.proj_b = g.leaf_vec(model.p.project.bias, params_need_grad);
  int y = g.add_bias(g.matmul(x, b.proj_w), b.proj_b);
  b.grid_output = emit_resample(g, y, res, input_res);

  if (cfg.with_head) {
    b.head_w1 = g.leaf_grid(model.p.head.w1, params_need_grad);
    b.head_b1 = g.leaf_vec(model.p.head.b1, params_need_grad);
    b.head_w2 = g.leaf_grid(model.p.head.w2, params_need_grad);
    b.head_b2 = g.leaf_vec(model.p.head.b2, params_need_grad);
    // the scalar readout integrates on the base grid, so its value does not
    // depend on how finely the caller sampled the input
    int h = g.add_bias(g.matmul(y, b.head_w1), b.head_b1);
    if (!cfg.identity_activations) h = g.ew(h, graph::EwFn::Gelu);
    int kappa = g.add_bias(g.matmul(h, b.head_w2), b.head_b2);
    b.output = g.scale_c(g.dot_sum(kappa, g.chan_sum(y)), 1.0 / res);
  } else {
    b.output = b.grid_output;
  }
  return b;
}

UnoGrads collect_grads(const graph::Graph& g, const UnoModel& m,
                       const UnoBinding& binding,
                       const std::vector<int>& grad_of) {
  UnoGrads grads = zeros_like(m.config);
  auto grid_at = [&](int id, Eigen::MatrixXd& dst) {
    if (id < 0 || id >= static_cast<int>(grad_of.size())) return;
    int gid = grad_of[id];
    if (gid >= 0) dst = g.val(gid).m;
  };
  auto vec_at = [&](int id, Eigen::VectorXd& dst) {
    if (id < 0 || id >= static_cast<int>(grad_of.size())) return;
    int gid = grad_of[id];
    if (gid >= 0) dst = g.val(gid).v;
  };
  auto stack_at = [&](int id, std::vector<Eigen::MatrixXcd>& dst) {
    if (id < 0 || id >= static_cast<int>(grad_of.size())) return;
    int gid = grad_of[id];
    if (gid >= 0) dst = g.val(gid).k;
  };
  grid_at(binding.lift_w, grads.lift.weight);
  vec_at(binding.lift_b, grads.lift.bias);
  for (int l = 0; l < 7; ++l) {
    stack_at(binding.layers[l].r, grads.layers[l].kernel);
    grid_at(binding.layers[l].w, grads.layers[l].pointwise);
    vec_at(binding.layers[l].b, grads.layers[l].bias);
  }
  grid_at(binding.proj_w, grads.project.weight);
  vec_at(binding.proj_b, grads.project.bias);
  if (m.config.with_head) {
    grid_at(binding.head_w1, grads.head.w1);
    vec_at(binding.head_b1, grads.head.b1);
    grid_at(binding.head_w2, grads.head.w2);
    vec_at(binding.head_b2, grads.head.b2);
  }
  return grads;
}

std::pair<ForwardOut, Tape> uno_forward(const UnoModel& m,
                                        const GridFunction& input,
                                        bool record_tape) {
  Tape tape;
  tape.g = std::make_shared<graph::Graph>();
  int in_node = tape.g->leaf_grid(input.values, record_tape);
  tape.binding = emit_uno(*tape.g, m, in_node, record_tape);
  tape.recorded = record_tape;
  tape.arch_sig = m.config.signature();

  ForwardOut out;
  const graph::Value& v = tape.g->val(tape.binding.output);
  if (m.config.with_head) {
    out.is_scalar = true;
    out.scalar = v.s;
  } else {
    out.grid = GridFunction::from_values(v.m);
  }
  return {std::move(out), std::move(tape)};
}

namespace {

std::pair<UnoGrads, GridFunction> run_backward(const UnoModel& m, Tape& tape,
                                               int cot_node) {
  if (!tape.recorded || !tape.g)
    throw TapeMismatch("backward needs a tape recorded with record_tape");
  if (tape.arch_sig != m.config.signature())
    throw TapeMismatch("tape was recorded for a different architecture");
  auto grad_of = tape.g->backward(tape.binding.output, cot_node);
  UnoGrads grads = collect_grads(*tape.g, m, tape.binding, grad_of);
  const graph::Value& in_val = tape.g->val(tape.binding.input);
  GridFunction input_grad = GridFunction::zeros(
      static_cast<int>(in_val.m.rows()), static_cast<int>(in_val.m.cols()));
  int gid = grad_of[tape.binding.input];
  if (gid >= 0) input_grad.values = tape.g->val(gid).m;
  return {std::move(grads), std::move(input_grad)};
}

}  // namespace

std::pair<UnoGrads, GridFunction> backward(const UnoModel& m, Tape& tape,
                                           const GridFunction& cotangent) {
  if (m.config.with_head)
    throw TapeMismatch("grid cotangent against a scalar-output model");
  const graph::Value& out_val = tape.g->val(tape.binding.output);
  if (cotangent.values.rows() != out_val.m.rows() ||
      cotangent.values.cols() != out_val.m.cols())
    throw ShapeMismatch("cotangent shape does not match output");
  int cot = tape.g->leaf_grid(cotangent.values);
  return run_backward(m, tape, cot);
}

std::pair<UnoGrads, GridFunction> backward(const UnoModel& m, Tape& tape,
                                           double cotangent) {
  if (!m.config.with_head)
    throw TapeMismatch("scalar cotangent against a grid-output model");
  int cot = tape.g->leaf_scalar(cotangent);
  return run_backward(m, tape, cot);
}

double input_gradient_norm(const UnoModel& m, const GridFunction& input) {
  if (!m.config.with_head)
    throw NoFunctionalHead("input_gradient_norm needs a functional head");
  graph::Graph g;
  int in_node = g.leaf_grid(input.values, true);
  UnoBinding b = emit_uno(g, m, in_node, false);
  auto grad_of = g.backward(b.output);
  int gid = grad_of[in_node];
  if (gid < 0) return 0.0;
  // raw partials -> L2 Riesz representer is n * partials
  const Eigen::MatrixXd& partials = g.val(gid).m;
  return std::sqrt(partials.squaredNorm() * input.resolution);
}

GridFunction bottleneck_forward(const UnoModel& m, const GridFunction& input) {
  if (input.channels != m.config.in_channels)
    throw ChannelMismatch("bottleneck_forward channel mismatch");
  GridFunction x =
      pointwise_apply(m.p.lift, resample(input, m.config.base_resolution));
  for (int l = 0; l <= 3; ++l) {
    for (const auto& link : m.config.skip_links)
      if (link.second == l)
        throw InvalidArchitecture("bottleneck_forward needs a skip-free stack");
    x = spectral_layer_forward(m.p.layers[l], m.config.layers[l], x,
                               m.config.identity_activations);
  }
  GridFunction out;
  out.resolution = x.resolution;
  out.channels = 1;
  out.values = x.values.rowwise().mean();
  return out;
}

// --- checkpoints ---

namespace {

constexpr char kMagic[4] = {'U', 'N', 'O', '1'};

struct Writer {
  std::string buf;
  void u8(std::uint8_t x) { buf.push_back(static_cast<char>(x)); }
  void u32(std::uint32_t x) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void f64(double d) {
    std::uint64_t x;
    std::memcpy(&x, &d, 8);
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(x >> (8 * i)));
  }
};

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  explicit Reader(const std::string& b) : buf(b) {}
  void need(size_t n) {
    if (pos + n > buf.size())
      throw TruncatedFile("checkpoint ends after " + std::to_string(buf.size()) +
                          " bytes");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i)
      x |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos++]))
           << (8 * i);
    return x;
  }
  double f64() {
    need(8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i)
      x |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos++]))
           << (8 * i);
    double d;
    std::memcpy(&d, &x, 8);
    return d;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const UnoModel& m,
                     const NormStats* stats, const GrfSpec* noise) {
  m.config.validate();
  Writer w;
  w.buf.append(kMagic, 4);
  w.u32(1);  // version
  const ArchConfig& c = m.config;
  w.u32(c.in_channels);
  w.u32(c.width);
  w.u32(c.out_channels);
  w.u32(c.modes_cap);
  w.u32(c.base_resolution);
  w.u8(c.skips ? 1 : 0);
  w.u8(c.with_head ? 1 : 0);
  w.u8(c.identity_activations ? 1 : 0);
  w.u8(0);
  w.u32(c.head_hidden);
  w.u32(static_cast<std::uint32_t>(c.layers.size()));
  for (const auto& l : c.layers) {
    w.u32(l.in_channels);
    w.u32(l.out_channels);
    w.u32(l.modes);
    w.u32(l.factor_num);
    w.u32(l.factor_den);
  }
  w.u32(static_cast<std::uint32_t>(c.skip_links.size()));
  for (const auto& s : c.skip_links) {
    w.u32(s.first);
    w.u32(s.second);
  }
  if (stats) {
    w.u32(static_cast<std::uint32_t>(stats->mean.size()));
    for (Eigen::Index i = 0; i < stats->mean.size(); ++i) w.f64(stats->mean(i));
    for (Eigen::Index i = 0; i < stats->stddev.size(); ++i)
      w.f64(stats->stddev(i));
  } else {
    w.u32(0);
  }
  if (noise) {
    w.u8(1);
    w.u32(noise->kernel == GrfKernel::WhiteNoise ? 1 : 0);
    w.f64(noise->length_scale);
    w.f64(noise->variance);
    w.u32(noise->channels);
  } else {
    w.u8(0);
  }

  // parameters, declaration order, complex as (re, im)
  for_each_tensor(const_cast<UnoTensors&>(m.p), c.with_head,
                  [&w](auto& tensor) {
    using T = std::decay_t<decltype(tensor)>;
    if constexpr (std::is_same_v<T, Eigen::MatrixXd>) {
      for (Eigen::Index i = 0; i < tensor.rows(); ++i)
        for (Eigen::Index j = 0; j < tensor.cols(); ++j) w.f64(tensor(i, j));
    } else if constexpr (std::is_same_v<T, Eigen::VectorXd>) {
      for (Eigen::Index i = 0; i < tensor.size(); ++i) w.f64(tensor(i));
    } else {
      for (const auto& mk : tensor)
        for (Eigen::Index i = 0; i < mk.rows(); ++i)
          for (Eigen::Index j = 0; j < mk.cols(); ++j) {
            w.f64(mk(i, j).real());
            w.f64(mk(i, j).imag());
          }
    }
  });

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw BadConfig("cannot write checkpoint '" + path + "'");
  out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BadConfig("cannot open checkpoint '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  std::string buf = ss.str();
  Reader r(buf);
  r.need(4);
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    throw BadMagic("not a UNO1 checkpoint: '" + path + "'");
  r.pos = 4;
  std::uint32_t version = r.u32();
  if (version != 1)
    throw BadMagic("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ck;
  ArchConfig c;
  c.in_channels = static_cast<int>(r.u32());
  c.width = static_cast<int>(r.u32());
  c.out_channels = static_cast<int>(r.u32());
  c.modes_cap = static_cast<int>(r.u32());
  c.base_resolution = static_cast<int>(r.u32());
  c.skips = r.u8() != 0;
  c.with_head = r.u8() != 0;
  c.identity_activations = r.u8() != 0;
  r.u8();
  c.head_hidden = static_cast<int>(r.u32());
  std::uint32_t n_layers = r.u32();
  if (n_layers > 64) throw BadMagic("implausible layer count");
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    LayerConfig l;
    l.in_channels = static_cast<int>(r.u32());
    l.out_channels = static_cast<int>(r.u32());
    l.modes = static_cast<int>(r.u32());
    l.factor_num = static_cast<int>(r.u32());
    l.factor_den = static_cast<int>(r.u32());
    c.layers.push_back(l);
  }
  std::uint32_t n_skips = r.u32();
  if (n_skips > 64) throw BadMagic("implausible skip count");
  for (std::uint32_t i = 0; i < n_skips; ++i) {
    int a = static_cast<int>(r.u32());
    int b = static_cast<int>(r.u32());
    c.skip_links.push_back({a, b});
  }
  std::uint32_t n_stats = r.u32();
  if (n_stats > 0) {
    if (n_stats > 100000) throw BadMagic("implausible stats size");
    NormStats st;
    st.mean.resize(n_stats);
    st.stddev.resize(n_stats);
    for (std::uint32_t i = 0; i < n_stats; ++i) st.mean(i) = r.f64();
    for (std::uint32_t i = 0; i < n_stats; ++i) st.stddev(i) = r.f64();
    ck.stats = std::move(st);
  }
  if (r.u8() != 0) {
    GrfSpec gs;
    gs.kernel = r.u32() == 1 ? GrfKernel::WhiteNoise
                             : GrfKernel::SquaredExponential;
    gs.length_scale = r.f64();
    gs.variance = r.f64();
    gs.channels = static_cast<int>(r.u32());
    ck.noise = gs;
  }

  c.validate();
  ck.model.config = c;
  ck.model.p = zeros_like(c);
  for_each_tensor(ck.model.p, c.with_head, [&r](auto& tensor) {
    using T = std::decay_t<decltype(tensor)>;
    if constexpr (std::is_same_v<T, Eigen::MatrixXd>) {
      for (Eigen::Index i = 0; i < tensor.rows(); ++i)
        for (Eigen::Index j = 0; j < tensor.cols(); ++j) tensor(i, j) = r.f64();
    } else if constexpr (std::is_same_v<T, Eigen::VectorXd>) {
      for (Eigen::Index i = 0; i < tensor.size(); ++i) tensor(i) = r.f64();
    } else {
      for (auto& mk : tensor)
        for (Eigen::Index i = 0; i < mk.rows(); ++i)
          for (Eigen::Index j = 0; j < mk.cols(); ++j) {
            double re = r.f64();
            double im = r.f64();
            mk(i, j) = std::complex<double>(re, im);
          }
    }
  });
  if (r.pos != buf.size())
    throw TruncatedFile("checkpoint has " +
                        std::to_string(buf.size() - r.pos) +
                        " trailing bytes");
  bool finite = true;
  for_each_tensor(ck.model.p, c.with_head, [&finite](auto& tensor) {
    using T = std::decay_t<decltype(tensor)>;
    if constexpr (std::is_same_v<T, std::vector<Eigen::MatrixXcd>>) {
      for (const auto& mk : tensor) finite = finite && mk.allFinite();
    } else {
      finite = finite && tensor.allFinite();
    }
  });
  if (!finite) throw NonFiniteValue("checkpoint contains non-finite values");
  return ck;
}

}  // namespace fsgen
