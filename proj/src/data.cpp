#include "fsgen/data.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fsgen/rng.hpp"

namespace fsgen {

MotionSequence MotionSequence::zeros(int joints, int frames, double dt) {
  MotionSequence m;
  m.joints = joints;
  m.frames = frames;
  m.dt = dt;
  m.positions = Eigen::MatrixXd::Zero(frames, 3 * joints);
  return m;
}

// --- binary i/o ---

namespace {

void put_u32(std::string& buf, std::uint32_t x) {
  for (int i = 0; i < 4; ++i)
    buf.push_back(static_cast<char>(static_cast<std::uint8_t>(x >> (8 * i))));
}

void put_f32(std::string& buf, float f) {
  std::uint32_t x;
  std::memcpy(&x, &f, 4);
  put_u32(buf, x);
}

std::uint32_t get_u32(const std::string& buf, size_t pos) {
  std::uint32_t x = 0;
  for (int i = 0; i < 4; ++i)
    x |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos + i]))
         << (8 * i);
  return x;
}

float get_f32(const std::string& buf, size_t pos) {
  std::uint32_t x = get_u32(buf, pos);
  float f;
  std::memcpy(&f, &x, 4);
  return f;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TruncatedFile("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void append_block(std::string& buf, const MotionSequence& m) {
  for (int t = 0; t < m.frames; ++t)
    for (int c = 0; c < 3 * m.joints; ++c)
      put_f32(buf, static_cast<float>(m.positions(t, c)));
}

// header after the magic: joints, frames, dt
struct Pmo {
  std::uint32_t joints = 0;
  std::uint32_t frames = 0;
  float dt = 0.0f;
};

Pmo parse_header(const std::string& buf, const char* magic,
                 const std::string& path, size_t blocks) {
  if (buf.size() < 4 || std::memcmp(buf.data(), magic, 4) != 0)
    throw BadMagic("'" + path + "' is not a " + std::string(magic) + " file");
  if (buf.size() < 16)
    throw TruncatedFile("'" + path + "' ends inside the header");
  Pmo h;
  h.joints = get_u32(buf, 4);
  h.frames = get_u32(buf, 8);
  h.dt = get_f32(buf, 12);
  std::uint64_t expect =
      16 + 12ULL * h.joints * h.frames * blocks;  // 3 coords * f32
  if (buf.size() < expect)
    throw TruncatedFile("'" + path + "' holds " + std::to_string(buf.size()) +
                        " bytes, expected " + std::to_string(expect));
  if (buf.size() > expect)
    throw TruncatedFile("'" + path + "' has trailing bytes");
  return h;
}

MotionSequence parse_block(const std::string& buf, size_t pos, const Pmo& h,
                           const std::string& path) {
  MotionSequence m;
  m.joints = static_cast<int>(h.joints);
  m.frames = static_cast<int>(h.frames);
  m.dt = static_cast<double>(h.dt);
  m.positions.resize(m.frames, 3 * m.joints);
  for (int t = 0; t < m.frames; ++t)
    for (int c = 0; c < 3 * m.joints; ++c) {
      m.positions(t, c) =
          static_cast<double>(get_f32(buf, pos + 4ULL * (t * 3 * m.joints + c)));
    }
  if (!m.all_finite())
    throw NonFiniteValue("'" + path + "' contains non-finite positions");
  return m;
}

std::string stem_of(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

}  // namespace

void write_motion(const std::string& path, const MotionSequence& m) {
  if (!m.all_finite())
    throw NonFiniteValue("refusing to write non-finite motion");
  std::string buf;
  buf.append("PMO1", 4);
  put_u32(buf, static_cast<std::uint32_t>(m.joints));
  put_u32(buf, static_cast<std::uint32_t>(m.frames));
  put_f32(buf, static_cast<float>(m.dt));
  append_block(buf, m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TruncatedFile("cannot write '" + path + "'");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

MotionSequence read_motion(const std::string& path) {
  std::string buf = slurp(path);
  Pmo h = parse_header(buf, "PMO1", path, 1);
  return parse_block(buf, 16, h, path);
}

void write_pair(const std::string& path, const DyadicPair& p) {
  if (p.actor_a.joints != p.actor_b.joints ||
      p.actor_a.frames != p.actor_b.frames)
    throw ShapeMismatch("pair actors disagree on joints or frames");
  if (!p.actor_a.all_finite() || !p.actor_b.all_finite())
    throw NonFiniteValue("refusing to write non-finite pair");
  std::string buf;
  buf.append("PMO2", 4);
  put_u32(buf, static_cast<std::uint32_t>(p.actor_a.joints));
  put_u32(buf, static_cast<std::uint32_t>(p.actor_a.frames));
  put_f32(buf, static_cast<float>(p.actor_a.dt));
  append_block(buf, p.actor_a);
  append_block(buf, p.actor_b);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TruncatedFile("cannot write '" + path + "'");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

DyadicPair read_pair(const std::string& path) {
  std::string buf = slurp(path);
  Pmo h = parse_header(buf, "PMO2", path, 2);
  std::uint64_t block = 12ULL * h.joints * h.frames;
  DyadicPair p;
  p.actor_a = parse_block(buf, 16, h, path);
  p.actor_b = parse_block(buf, 16 + block, h, path);
  p.label = stem_of(path);
  return p;
}

// --- synthetic coupled task ---

MotionSequence delayed_mirror_responder(const MotionSequence& a, double delay,
                                        bool mirror) {
  if (delay < 0.0 || delay > a.duration())
    throw BadDelay("delay " + std::to_string(delay) +
                   " outside clip of length " + std::to_string(a.duration()));
  const int n = a.frames;
  double shift = a.dt > 0.0 ? delay / a.dt : 0.0;
  MotionSequence b = a;
  long long si = std::llround(shift);
  if (std::abs(shift - si) < 1e-9) {
    // integer circular shift: b(t) = a(t - shift)
    int s = static_cast<int>(((si % n) + n) % n);
    for (int t = 0; t < n; ++t)
      b.positions.row(t) = a.positions.row((t - s + n) % n);
  } else {
    // fractional shift applied spectrally (exact for band-limited signals)
    int modes = nyquist_modes(n);
    Eigen::MatrixXcd c = detail::dft_apply(a.positions, modes,
                                           Eigen::VectorXd::Ones(modes));
    for (int k = 0; k < modes; ++k)
      c.row(k) *= std::exp(std::complex<double>(0.0, -2.0 * M_PI * k * shift / n));
    b.positions = detail::idft_apply(c, n, detail::inverse_scale(n, modes));
  }
  if (mirror)
    for (int j = 0; j < b.joints; ++j) b.positions.col(3 * j) *= -1.0;
  return b;
}

std::vector<DyadicPair> synth_coupled(const SynthSpec& spec) {
  std::vector<DyadicPair> out;
  out.reserve(spec.pairs);
  const int ch = 3 * spec.joints;
  // keep every harmonic strictly below Nyquist so fractional delays stay exact
  const int harmonics =
      std::max(1, std::min(spec.max_frequency, (spec.frames - 1) / 2));
  for (int i = 0; i < spec.pairs; ++i) {
    Rng sig(derive_seed(spec.seed, 1, static_cast<std::uint64_t>(i)));
    MotionSequence a = MotionSequence::zeros(spec.joints, spec.frames, spec.dt);
    for (int j = 0; j < spec.joints; ++j) {
      double rest_y = 0.2 * j;  // x = z = 0 keeps the rest pose mirror-even
      for (int d = 0; d < 3; ++d) {
        Eigen::VectorXd wave = Eigen::VectorXd::Zero(spec.frames);
        for (int k = 1; k <= harmonics; ++k) {
          double amp = 0.3 / k;
          double ca = amp * sig.gauss();
          double cb = amp * sig.gauss();
          for (int t = 0; t < spec.frames; ++t) {
            double u = 2.0 * M_PI * k * t / spec.frames;
            wave(t) += ca * std::cos(u) + cb * std::sin(u);
          }
        }
        if (d == 1) wave.array() += rest_y;
        a.positions.col(3 * j + d) = wave;
      }
    }
    DyadicPair p;
    p.actor_a = a;
    p.actor_b = delayed_mirror_responder(a, spec.delay, spec.mirror);
    if (spec.noise_sigma > 0.0) {
      GrfSpec g;
      g.kernel = GrfKernel::SquaredExponential;
      g.length_scale = 0.1;
      g.variance = 1.0;
      g.channels = ch;
      GridFunction noise = sample_grf(
          g, spec.frames, derive_seed(spec.seed, 2, static_cast<std::uint64_t>(i)));
      p.actor_b.positions += spec.noise_sigma * noise.values;
    }
    p.label = "synth-" + std::to_string(i);
    out.push_back(std::move(p));
  }
  return out;
}

std::pair<std::vector<DyadicPair>, std::vector<DyadicPair>> split(
    const std::vector<DyadicPair>& pairs, double ratio, std::uint64_t seed) {
  std::vector<int> idx(pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) idx[i] = static_cast<int>(i);
  Rng rng(seed);
  for (size_t i = pairs.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.below(static_cast<std::uint64_t>(i))]);
  size_t n_train = static_cast<size_t>(
      std::llround(ratio * static_cast<double>(pairs.size())));
  n_train = std::min(n_train, pairs.size());
  std::pair<std::vector<DyadicPair>, std::vector<DyadicPair>> out;
  for (size_t i = 0; i < pairs.size(); ++i)
    (i < n_train ? out.first : out.second).push_back(pairs[idx[i]]);
  return out;
}

// --- normalization ---

NormStats compute_norm_stats(const std::vector<DyadicPair>& pairs) {
  if (pairs.empty()) throw EmptyDataset("no pairs to compute stats from");
  const int ch = 3 * pairs[0].actor_a.joints;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(ch);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(ch);
  long long count = 0;
  for (const auto& p : pairs)
    for (const MotionSequence* m : {&p.actor_a, &p.actor_b}) {
      if (m->positions.cols() != ch)
        throw ChannelMismatch("pairs disagree on joint count");
      sum += m->positions.colwise().sum().transpose();
      sq += m->positions.array().square().colwise().sum().matrix().transpose();
      count += m->frames;
    }
  NormStats s;
  s.mean = sum / static_cast<double>(count);
  Eigen::VectorXd var =
      sq / static_cast<double>(count) - s.mean.array().square().matrix();
  s.stddev = var.cwiseMax(0.0).cwiseSqrt();
  for (Eigen::Index i = 0; i < s.stddev.size(); ++i)
    if (s.stddev(i) < 1e-12) s.stddev(i) = 1.0;
  return s;
}

MotionSequence normalize(const MotionSequence& m, const NormStats& s) {
  if (m.positions.cols() != s.mean.size())
    throw ChannelMismatch("stats were computed for a different joint count");
  MotionSequence out = m;
  out.positions =
      (m.positions.rowwise() - s.mean.transpose()).array().rowwise() /
      s.stddev.transpose().array();
  return out;
}

MotionSequence denormalize(const MotionSequence& m, const NormStats& s) {
  if (m.positions.cols() != s.mean.size())
    throw ChannelMismatch("stats were computed for a different joint count");
  MotionSequence out = m;
  out.positions =
      (m.positions.array().rowwise() * s.stddev.transpose().array()).matrix();
  out.positions.rowwise() += s.mean.transpose();
  return out;
}

DyadicPair normalize(const DyadicPair& p, const NormStats& s) {
  DyadicPair out = p;
  out.actor_a = normalize(p.actor_a, s);
  out.actor_b = normalize(p.actor_b, s);
  return out;
}

DyadicPair swap_augment(const DyadicPair& p, bool coin) {
  if (!coin) return p;
  DyadicPair out;
  out.actor_a = p.actor_b;
  out.actor_b = p.actor_a;
  out.label = p.label;
  return out;
}

// --- grid conversions ---

GridFunction to_grid_function(const MotionSequence& m) {
  GridFunction g;
  g.resolution = m.frames;
  g.channels = 3 * m.joints;
  g.values = m.positions;
  return g;
}

MotionSequence from_grid_function(const GridFunction& g, double duration) {
  if (g.channels % 3 != 0)
    throw ChannelMismatch("grid channels must come in xyz triples");
  MotionSequence m;
  m.joints = g.channels / 3;
  m.frames = g.resolution;
  m.dt = g.resolution > 0 ? duration / g.resolution : 0.0;
  m.positions = g.values;
  return m;
}

MotionSequence resample_motion(const MotionSequence& m, int frames) {
  if (frames == m.frames) return m;
  GridFunction g = resample(to_grid_function(m), frames);
  return from_grid_function(g, m.duration());
}

}  // namespace fsgen
