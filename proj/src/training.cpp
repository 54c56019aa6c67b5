#include "fsgen/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fsgen/rng.hpp"

namespace fsgen {

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { throw BadConfig(what); };
  if (epochs < 1) bad("epochs must be >= 1");
  if (lr0 <= 0) bad("lr0 must be positive");
  if (lr_halving_period < 1) bad("lr_halving_period must be >= 1");
  if (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 || adam_beta2 >= 1)
    bad("adam betas must lie in [0, 1)");
  if (adam_eps <= 0) bad("adam_eps must be positive");
  if (lambda_gp < 0) bad("lambda_gp must be nonnegative");
  if (lambda_sym < 0) bad("lambda_sym must be nonnegative");
  if (critic_steps_per_gen < 1) bad("critic_steps_per_gen must be >= 1");
  if (batch_size < 1) bad("batch_size must be >= 1");
  if (train_resolution < 0) bad("train_resolution must be >= 0");
  if (width < 1 || modes_cap < 1 || head_hidden < 1)
    bad("width, modes_cap and head_hidden must be >= 1");
  if (checkpoint_every < 1) bad("checkpoint_every must be >= 1");
  if (noise_channels < 0) bad("noise_channels must be >= 0");
  if (noise_length_scale <= 0) bad("noise_length_scale must be positive");
  if (noise_variance <= 0) bad("noise_variance must be positive");
  if (!(split_ratio > 0.0 && split_ratio < 1.0))
    bad("split_ratio must lie in (0, 1)");
}

void set_config_key(TrainConfig& c, const std::string& key,
                    const std::string& value) {
  try {
    if (key == "epochs") c.epochs = std::stoi(value);
    else if (key == "lr0") c.lr0 = std::stod(value);
    else if (key == "lr_halving_period") c.lr_halving_period = std::stoi(value);
    else if (key == "adam_beta1") c.adam_beta1 = std::stod(value);
    else if (key == "adam_beta2") c.adam_beta2 = std::stod(value);
    else if (key == "adam_eps") c.adam_eps = std::stod(value);
    else if (key == "lambda_gp") c.lambda_gp = std::stod(value);
    else if (key == "lambda_sym") c.lambda_sym = std::stod(value);
    else if (key == "critic_steps_per_gen")
      c.critic_steps_per_gen = std::stoi(value);
    else if (key == "batch_size") c.batch_size = std::stoi(value);
    else if (key == "seed") c.seed = std::stoull(value);
    else if (key == "train_resolution") c.train_resolution = std::stoi(value);
    else if (key == "width") c.width = std::stoi(value);
    else if (key == "modes_cap") c.modes_cap = std::stoi(value);
    else if (key == "head_hidden") c.head_hidden = std::stoi(value);
    else if (key == "checkpoint_every") c.checkpoint_every = std::stoi(value);
    else if (key == "noise_channels") c.noise_channels = std::stoi(value);
    else if (key == "noise_length_scale")
      c.noise_length_scale = std::stod(value);
    else if (key == "noise_variance") c.noise_variance = std::stod(value);
    else if (key == "split_ratio") c.split_ratio = std::stod(value);
    else throw BadConfig("unknown config key '" + key + "'");
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw BadConfig("bad value '" + value + "' for config key '" + key + "'");
  }
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BadConfig("cannot open config '" + path + "'");
  TrainConfig c;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto trim = [](std::string s) {
      size_t b = s.find_first_not_of(" \t\r");
      size_t e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string t = trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw BadConfig("config line " + std::to_string(line_no) +
                      " is not `key = value`");
    set_config_key(c, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  c.validate();
  return c;
}

double lr_at(int epoch, const TrainConfig& c) {
  return c.lr0 * std::pow(2.0, -static_cast<double>(epoch / c.lr_halving_period));
}

// --- Adam ---

AdamState adam_init(const ArchConfig& cfg) {
  AdamState st;
  st.m = zeros_like(cfg);
  st.v = zeros_like(cfg);
  st.t = 0;
  st.with_head = cfg.with_head;
  return st;
}

namespace {

struct AdamScalars {
  double b1, b2, eps, lr, bc1, bc2;
};

void adam_real(Eigen::MatrixXd& th, const Eigen::MatrixXd& g,
               Eigen::MatrixXd& m, Eigen::MatrixXd& v, const AdamScalars& a) {
  if (th.rows() != g.rows() || th.cols() != g.cols())
    throw ShapeMismatch("adam_step: gradient shape mismatch");
  m = a.b1 * m + (1 - a.b1) * g;
  v = a.b2 * v.array().matrix() + (1 - a.b2) * g.array().square().matrix();
  th.array() -=
      a.lr * (m.array() / a.bc1) / ((v.array() / a.bc2).sqrt() + a.eps);
}

void adam_vec(Eigen::VectorXd& th, const Eigen::VectorXd& g,
              Eigen::VectorXd& m, Eigen::VectorXd& v, const AdamScalars& a) {
  if (th.size() != g.size())
    throw ShapeMismatch("adam_step: gradient size mismatch");
  m = a.b1 * m + (1 - a.b1) * g;
  v = a.b2 * v.array().matrix() + (1 - a.b2) * g.array().square().matrix();
  th.array() -=
      a.lr * (m.array() / a.bc1) / ((v.array() / a.bc2).sqrt() + a.eps);
}

void adam_cplx(Eigen::MatrixXcd& th, const Eigen::MatrixXcd& g,
               Eigen::MatrixXcd& m, Eigen::MatrixXcd& v,
               const AdamScalars& a) {
  if (th.rows() != g.rows() || th.cols() != g.cols())
    throw ShapeMismatch("adam_step: kernel gradient shape mismatch");
  for (Eigen::Index i = 0; i < th.rows(); ++i)
    for (Eigen::Index j = 0; j < th.cols(); ++j) {
      auto step = [&a](double& t, const double gr, double& mm, double& vv) {
        mm = a.b1 * mm + (1 - a.b1) * gr;
        vv = a.b2 * vv + (1 - a.b2) * gr * gr;
        t -= a.lr * (mm / a.bc1) / (std::sqrt(vv / a.bc2) + a.eps);
      };
      double tre = th(i, j).real(), tim = th(i, j).imag();
      double mre = m(i, j).real(), mim = m(i, j).imag();
      double vre = v(i, j).real(), vim = v(i, j).imag();
      step(tre, g(i, j).real(), mre, vre);
      step(tim, g(i, j).imag(), mim, vim);
      th(i, j) = {tre, tim};
      m(i, j) = {mre, mim};
      v(i, j) = {vre, vim};
    }
}

void tensors_axpy(UnoTensors& y, const UnoTensors& x, double a,
                  bool with_head) {
  y.lift.weight += a * x.lift.weight;
  y.lift.bias += a * x.lift.bias;
  for (size_t l = 0; l < y.layers.size(); ++l) {
    for (size_t k = 0; k < y.layers[l].kernel.size(); ++k)
      y.layers[l].kernel[k] += a * x.layers[l].kernel[k];
    y.layers[l].pointwise += a * x.layers[l].pointwise;
    y.layers[l].bias += a * x.layers[l].bias;
  }
  y.project.weight += a * x.project.weight;
  y.project.bias += a * x.project.bias;
  if (with_head) {
    y.head.w1 += a * x.head.w1;
    y.head.b1 += a * x.head.b1;
    y.head.w2 += a * x.head.w2;
    y.head.b2 += a * x.head.b2;
  }
}

bool tensors_finite(const UnoTensors& t, bool with_head) {
  bool ok = true;
  for_each_tensor(const_cast<UnoTensors&>(t), with_head, [&ok](auto& x) {
    using T = std::decay_t<decltype(x)>;
    if constexpr (std::is_same_v<T, std::vector<Eigen::MatrixXcd>>) {
      for (const auto& mk : x) ok = ok && mk.allFinite();
    } else {
      ok = ok && x.allFinite();
    }
  });
  return ok;
}

}  // namespace

void adam_step(UnoTensors& params, const UnoGrads& grads, AdamState& st,
               double lr, const TrainConfig& c) {
  ++st.t;
  AdamScalars a;
  a.b1 = c.adam_beta1;
  a.b2 = c.adam_beta2;
  a.eps = c.adam_eps;
  a.lr = lr;
  a.bc1 = 1.0 - std::pow(c.adam_beta1, static_cast<double>(st.t));
  a.bc2 = 1.0 - std::pow(c.adam_beta2, static_cast<double>(st.t));
  adam_real(params.lift.weight, grads.lift.weight, st.m.lift.weight,
            st.v.lift.weight, a);
  adam_vec(params.lift.bias, grads.lift.bias, st.m.lift.bias, st.v.lift.bias,
           a);
  for (size_t l = 0; l < params.layers.size(); ++l) {
    for (size_t k = 0; k < params.layers[l].kernel.size(); ++k)
      adam_cplx(params.layers[l].kernel[k], grads.layers[l].kernel[k],
                st.m.layers[l].kernel[k], st.v.layers[l].kernel[k], a);
    adam_real(params.layers[l].pointwise, grads.layers[l].pointwise,
              st.m.layers[l].pointwise, st.v.layers[l].pointwise, a);
    adam_vec(params.layers[l].bias, grads.layers[l].bias,
             st.m.layers[l].bias, st.v.layers[l].bias, a);
  }
  adam_real(params.project.weight, grads.project.weight, st.m.project.weight,
            st.v.project.weight, a);
  adam_vec(params.project.bias, grads.project.bias, st.m.project.bias,
           st.v.project.bias, a);
  if (st.with_head) {
    adam_real(params.head.w1, grads.head.w1, st.m.head.w1, st.v.head.w1, a);
    adam_vec(params.head.b1, grads.head.b1, st.m.head.b1, st.v.head.b1, a);
    adam_real(params.head.w2, grads.head.w2, st.m.head.w2, st.v.head.w2, a);
    adam_vec(params.head.b2, grads.head.b2, st.m.head.b2, st.v.head.b2, a);
  }
}

// --- symmetry penalty ---

namespace {

void check_bone(const Bone& b, int joints) {
  if (b.first < 0 || b.first >= joints || b.second < 0 || b.second >= joints)
    throw BadJointIndex("bone (" + std::to_string(b.first) + "," +
                        std::to_string(b.second) + ") outside " +
                        std::to_string(joints) + " joints");
}

}  // namespace

double symmetry_penalty(const MotionSequence& motion,
                        const SkeletonSpec& skeleton) {
  if (skeleton.mirror_pairs.empty()) return 0.0;
  const int n = motion.frames;
  double acc = 0.0;
  for (const auto& mp : skeleton.mirror_pairs) {
    check_bone(mp.first, motion.joints);
    check_bone(mp.second, motion.joints);
    for (int t = 0; t < n; ++t) {
      auto blen = [&motion, t](const Bone& b) {
        double s = 0.0;
        for (int d = 0; d < 3; ++d) {
          double diff = motion.positions(t, 3 * b.second + d) -
                        motion.positions(t, 3 * b.first + d);
          s += diff * diff;
        }
        return std::sqrt(s);
      };
      double d = blen(mp.first) - blen(mp.second);
      acc += d * d;
    }
  }
  return acc / (static_cast<double>(n) * skeleton.mirror_pairs.size());
}

int emit_symmetry_penalty(graph::Graph& g, int grid_node,
                          const SkeletonSpec& skeleton) {
  const auto& val = g.val(grid_node);
  const int n = static_cast<int>(val.m.rows());
  const int joints = static_cast<int>(val.m.cols()) / 3;
  if (skeleton.mirror_pairs.empty()) return g.leaf_scalar(0.0);
  int ones = g.leaf_grid(Eigen::MatrixXd::Ones(n, 1));
  int acc = -1;
  for (const auto& mp : skeleton.mirror_pairs) {
    check_bone(mp.first, joints);
    check_bone(mp.second, joints);
    auto blen = [&](const Bone& b) {
      int child = g.slice_c(grid_node, 3 * b.second, 3);
      int parent = g.slice_c(grid_node, 3 * b.first, 3);
      int d = g.add2(child, parent, 1.0, -1.0);
      int sq = g.chan_sum(g.emul(d, d));
      return g.ew(sq, graph::EwFn::SqrtEps);
    };
    int diff = g.add2(blen(mp.first), blen(mp.second), 1.0, -1.0);
    int term = g.dot_sum(g.emul(diff, diff), ones);
    acc = acc < 0 ? term : g.add2(acc, term);
  }
  return g.scale_c(
      acc, 1.0 / (static_cast<double>(n) * skeleton.mirror_pairs.size()));
}

// --- losses ---

GridFunction pair_grid(const DyadicPair& p) {
  return concat_channels(to_grid_function(p.actor_b),
                         to_grid_function(p.actor_a));
}

namespace {

GridFunction draw_noise(const GrfSpec& noise, int resolution,
                        std::uint64_t seed) {
  return sample_grf(noise, resolution, seed);
}

GridFunction run_generator(const UnoModel& gen, const GridFunction& condition,
                           const GrfSpec& noise, std::uint64_t seed) {
  GridFunction a = draw_noise(noise, condition.resolution, seed);
  GridFunction in = concat_channels(a, condition);
  auto [out, tape] = uno_forward(gen, in, false);
  return out.grid;
}

}  // namespace

CriticStep critic_loss(const UnoModel& critic, const UnoModel& gen,
                       const std::vector<DyadicPair>& batch,
                       const GrfSpec& noise, std::uint64_t seed,
                       double lambda_gp) {
  if (batch.empty()) throw EmptyDataset("critic_loss on empty batch");
  if (!critic.config.with_head)
    throw NoFunctionalHead("critic must end in a functional head");
  CriticStep out;
  out.grads = zeros_like(critic.config);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    GridFunction cond = to_grid_function(batch[i].actor_a);
    GridFunction real = to_grid_function(batch[i].actor_b);
    GridFunction fake =
        run_generator(gen, cond, noise, derive_seed(seed, 11, i));
    GridFunction real_pair = concat_channels(real, cond);
    GridFunction fake_pair = concat_channels(fake, cond);
    Rng mix(derive_seed(seed, 12, i));
    const double lam = mix.uniform01();
    Eigen::MatrixXd interp =
        lam * fake_pair.values + (1.0 - lam) * real_pair.values;

    graph::Graph g;
    int real_in = g.leaf_grid(real_pair.values);
    int fake_in = g.leaf_grid(fake_pair.values);
    int interp_in = g.leaf_grid(interp, true);
    UnoBinding b_real = emit_uno(g, critic, real_in, true);
    UnoBinding b_fake = emit_uno(g, critic, fake_in, true);
    UnoBinding b_int = emit_uno(g, critic, interp_in, true);

    auto grad1 = g.backward(b_int.output);
    int pen;
    double norm_val, pen_val;
    if (grad1[interp_in] >= 0) {
      int gsq = g.dot_sum(grad1[interp_in], grad1[interp_in]);
      int norm = g.sfun(g.scale_c(gsq, real_pair.resolution),
                        graph::SFn::SqrtE);
      int diff = g.add2(norm, g.leaf_scalar(1.0), 1.0, -1.0);
      pen = g.smul(diff, diff);
      norm_val = g.val(norm).s;
      pen_val = g.val(pen).s;
    } else {
      pen = g.leaf_scalar(1.0);  // zero gradient: (0 - 1)^2
      norm_val = 0.0;
      pen_val = 1.0;
    }
    int wdist = g.add2(b_fake.output, b_real.output, 1.0, -1.0);
    int total = g.add2(wdist, pen, 1.0, lambda_gp);

    auto grad2 = g.backward(total);
    for (const UnoBinding* b : {&b_real, &b_fake, &b_int})
      tensors_axpy(out.grads, collect_grads(g, critic, *b, grad2), inv,
                   true);
    out.loss += inv * g.val(total).s;
    out.penalty += inv * pen_val;
    out.grad_norm += inv * norm_val;
  }
  return out;
}

GenStep generator_loss(const UnoModel& critic, const UnoModel& gen,
                       const std::vector<DyadicPair>& batch,
                       const GrfSpec& noise, std::uint64_t seed,
                       double lambda_sym, const SkeletonSpec& skeleton,
                       const NormStats* denorm_stats) {
  if (batch.empty()) throw EmptyDataset("generator_loss on empty batch");
  GenStep out;
  out.grads = zeros_like(gen.config);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    GridFunction cond = to_grid_function(batch[i].actor_a);
    GridFunction a = draw_noise(noise, cond.resolution,
                                derive_seed(seed, 21, i));
    graph::Graph g;
    int noise_in = g.leaf_grid(a.values);
    int cond_in = g.leaf_grid(cond.values);
    UnoBinding gb = emit_uno(g, gen, g.concat2(noise_in, cond_in), true);
    int fake = gb.output;
    UnoBinding db = emit_uno(g, critic, g.concat2(fake, cond_in), false);

    int phys = fake;
    if (denorm_stats) {
      const int n = cond.resolution;
      Eigen::MatrixXd sig =
          denorm_stats->stddev.transpose().replicate(n, 1);
      Eigen::MatrixXd mu = denorm_stats->mean.transpose().replicate(n, 1);
      phys = g.add2(g.emul(fake, g.leaf_grid(sig)), g.leaf_grid(mu));
    }
    int sym = emit_symmetry_penalty(g, phys, skeleton);
    int total = g.add2(db.output, sym, -1.0, lambda_sym);

    auto grads = g.backward(total);
    tensors_axpy(out.grads, collect_grads(g, gen, gb, grads), inv, false);
    out.loss += inv * g.val(total).s;
    out.symmetry += inv * g.val(sym).s;
  }
  return out;
}

// --- training loops ---

namespace {

std::vector<DyadicPair> prepare_pairs(const std::vector<DyadicPair>& pairs,
                                      const NormStats& stats, int res) {
  std::vector<DyadicPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    DyadicPair q = normalize(p, stats);
    q.actor_a = resample_motion(q.actor_a, res);
    q.actor_b = resample_motion(q.actor_b, res);
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<int> shuffled_indices(size_t n, std::uint64_t seed) {
  std::vector<int> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  Rng rng(seed);
  for (size_t i = n; i > 1; --i)
    std::swap(idx[i - 1], idx[rng.below(static_cast<std::uint64_t>(i))]);
  return idx;
}

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

[[noreturn]] void abort_non_finite(const std::string& out_dir,
                                   const std::string& stage, int epoch,
                                   int batch, double loss) {
  std::ofstream dump(out_dir + "/diagnostics.txt", std::ios::app);
  dump << "non-finite " << stage << " loss " << g17(loss) << " at epoch "
       << epoch << " batch " << batch << "\n";
  throw NonFiniteLoss("non-finite " + stage + " loss at epoch " +
                      std::to_string(epoch) + ", batch " +
                      std::to_string(batch) + " (see diagnostics.txt)");
}

}  // namespace

TrainResult train(const TrainConfig& c, const std::vector<DyadicPair>& pairs,
                  const std::string& out_dir, const SkeletonSpec& skeleton) {
  c.validate();
  if (pairs.empty()) throw EmptyDataset("train called with no pairs");
  std::filesystem::create_directories(out_dir);
  const int joints = pairs[0].actor_a.joints;
  const int ch = 3 * joints;
  const int res =
      c.train_resolution > 0 ? c.train_resolution : pairs[0].actor_a.frames;

  NormStats stats = compute_norm_stats(pairs);
  std::vector<DyadicPair> data = prepare_pairs(pairs, stats, res);

  GrfSpec noise;
  noise.kernel = GrfKernel::SquaredExponential;
  noise.length_scale = c.noise_length_scale;
  noise.variance = c.noise_variance;
  noise.channels = c.noise_channels > 0 ? c.noise_channels : ch;

  ArchConfig gen_cfg =
      ArchConfig::uno7(noise.channels + ch, ch, c.width, c.modes_cap, res,
                       true, false, c.head_hidden);
  ArchConfig critic_cfg = ArchConfig::uno7(
      2 * ch, c.width, c.width, c.modes_cap, res, true, true, c.head_hidden);
  TrainResult r;
  r.gen = init_params(gen_cfg, derive_seed(c.seed, 101));
  r.critic = init_params(critic_cfg, derive_seed(c.seed, 102));
  r.stats = stats;
  r.noise = noise;
  AdamState gen_opt = adam_init(gen_cfg);
  AdamState critic_opt = adam_init(critic_cfg);

  std::ofstream log(out_dir + "/train_log.tsv", std::ios::trunc);
  if (!log) throw BadConfig("cannot write to '" + out_dir + "'");
  log << "# epoch\tlr\tcritic_loss\tgen_loss\tpenalty_mean\tgrad_norm_mean\n";

  long long critic_batches = 0;
  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    const double lr = lr_at(epoch, c);
    std::vector<int> order =
        shuffled_indices(data.size(), derive_seed(c.seed, 1, epoch));
    Rng coins(derive_seed(c.seed, 2, epoch));

    double csum = 0, gsum = 0, psum = 0, nsum = 0;
    int csteps = 0, gsteps = 0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(c.batch_size)) {
      std::vector<DyadicPair> batch;
      for (size_t k = start;
           k < std::min(order.size(), start + c.batch_size); ++k)
        batch.push_back(swap_augment(data[order[k]], coins.coin()));

      const int bidx = static_cast<int>(start / c.batch_size);
      CriticStep cs =
          critic_loss(r.critic, r.gen, batch, noise,
                      derive_seed(c.seed, 3, epoch * 1000003ULL + bidx),
                      c.lambda_gp);
      if (!std::isfinite(cs.loss) || !tensors_finite(cs.grads, true))
        abort_non_finite(out_dir, "critic", epoch, bidx, cs.loss);
      adam_step(r.critic.p, cs.grads, critic_opt, lr, c);
      csum += cs.loss;
      psum += cs.penalty;
      nsum += cs.grad_norm;
      ++csteps;

      if (++critic_batches % c.critic_steps_per_gen == 0) {
        GenStep gs = generator_loss(
            r.critic, r.gen, batch, noise,
            derive_seed(c.seed, 4, epoch * 1000003ULL + bidx), c.lambda_sym,
            skeleton, &stats);
        if (!std::isfinite(gs.loss) || !tensors_finite(gs.grads, false))
          abort_non_finite(out_dir, "generator", epoch, bidx, gs.loss);
        adam_step(r.gen.p, gs.grads, gen_opt, lr, c);
        gsum += gs.loss;
        ++gsteps;
      }
    }
    if (gsteps == 0) {
      // datasets smaller than one critic cycle still train the generator
      std::vector<DyadicPair> batch(
          data.begin(),
          data.begin() + std::min<size_t>(data.size(), c.batch_size));
      GenStep gs = generator_loss(r.critic, r.gen, batch, noise,
                                  derive_seed(c.seed, 4, epoch * 1000003ULL),
                                  c.lambda_sym, skeleton, &stats);
      if (!std::isfinite(gs.loss) || !tensors_finite(gs.grads, false))
        abort_non_finite(out_dir, "generator", epoch, 0, gs.loss);
      adam_step(r.gen.p, gs.grads, gen_opt, lr, c);
      gsum += gs.loss;
      ++gsteps;
    }

    log << epoch << '\t' << g17(lr) << '\t' << g17(csum / csteps) << '\t'
        << g17(gsum / gsteps) << '\t' << g17(psum / csteps) << '\t'
        << g17(nsum / csteps) << '\n';
    log.flush();

    if ((epoch + 1) % c.checkpoint_every == 0 && epoch + 1 < c.epochs)
      save_checkpoint(out_dir + "/gen_epoch_" + std::to_string(epoch + 1) +
                          ".uno",
                      r.gen, &stats, &noise);
  }
  save_checkpoint(out_dir + "/gen_final.uno", r.gen, &stats, &noise);
  save_checkpoint(out_dir + "/critic_final.uno", r.critic, &stats, nullptr);
  return r;
}

AeResult train_autoencoder(const TrainConfig& c,
                           const std::vector<DyadicPair>& pairs,
                           const std::string& out_dir) {
  c.validate();
  if (pairs.empty()) throw EmptyDataset("train_autoencoder with no pairs");
  std::filesystem::create_directories(out_dir);
  const int ch = 6 * pairs[0].actor_a.joints;
  const int res =
      c.train_resolution > 0 ? c.train_resolution : pairs[0].actor_a.frames;

  NormStats stats = compute_norm_stats(pairs);
  std::vector<DyadicPair> data = prepare_pairs(pairs, stats, res);

  ArchConfig cfg = ArchConfig::uno7(ch, ch, c.width, c.modes_cap, res, false,
                                    false, c.head_hidden);
  AeResult r;
  r.model = init_params(cfg, derive_seed(c.seed, 103));
  r.stats = stats;
  AdamState opt = adam_init(cfg);

  std::ofstream log(out_dir + "/ae_log.tsv", std::ios::trunc);
  if (!log) throw BadConfig("cannot write to '" + out_dir + "'");
  log << "# epoch\tlr\trecon_loss\n";

  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    const double lr = lr_at(epoch, c);
    std::vector<int> order =
        shuffled_indices(data.size(), derive_seed(c.seed, 5, epoch));
    double lsum = 0;
    int batches = 0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(c.batch_size)) {
      size_t stop = std::min(order.size(), start + c.batch_size);
      UnoGrads acc = zeros_like(cfg);
      double bl = 0;
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (size_t k = start; k < stop; ++k) {
        GridFunction in = pair_grid(data[order[k]]);
        graph::Graph g;
        int inode = g.leaf_grid(in.values);
        UnoBinding b = emit_uno(g, r.model, inode, true);
        int err = g.add2(b.output, inode, 1.0, -1.0);
        int loss = g.scale_c(g.dot_sum(err, err), 1.0 / in.resolution);
        auto grads = g.backward(loss);
        tensors_axpy(acc, collect_grads(g, r.model, b, grads), inv, false);
        bl += inv * g.val(loss).s;
      }
      if (!std::isfinite(bl) || !tensors_finite(acc, false))
        abort_non_finite(out_dir, "autoencoder", epoch, batches, bl);
      adam_step(r.model.p, acc, opt, lr, c);
      lsum += bl;
      ++batches;
    }
    log << epoch << '\t' << g17(lr) << '\t' << g17(lsum / batches) << '\n';
    log.flush();
  }
  save_checkpoint(out_dir + "/ae_final.uno", r.model, &stats, nullptr);
  return r;
}

MotionSequence generate_response(const Checkpoint& gen_checkpoint,
                                 const MotionSequence& condition,
                                 int resolution, std::uint64_t seed) {
  const UnoModel& gen = gen_checkpoint.model;
  if (gen.config.with_head)
    throw CheckpointArchMismatch(
        "checkpoint is a critic (functional head), not a generator");
  const int ch = 3 * condition.joints;
  if (gen.config.out_channels != ch)
    throw CheckpointArchMismatch(
        "generator emits " + std::to_string(gen.config.out_channels) +
        " channels but the condition has " + std::to_string(ch));
  const int res = resolution > 0 ? resolution : condition.frames;

  MotionSequence cond = resample_motion(condition, res);
  if (gen_checkpoint.stats) cond = normalize(cond, *gen_checkpoint.stats);

  GrfSpec noise;
  if (gen_checkpoint.noise) {
    noise = *gen_checkpoint.noise;
  } else {
    noise.kernel = GrfKernel::SquaredExponential;
    noise.length_scale = 0.1;
    noise.variance = 1.0;
    noise.channels = gen.config.in_channels - ch;
  }
  if (noise.channels + ch != gen.config.in_channels)
    throw CheckpointArchMismatch("noise channels inconsistent with model");

  GridFunction out =
      run_generator(gen, to_grid_function(cond), noise, seed);
  MotionSequence resp = from_grid_function(out, condition.duration());
  if (gen_checkpoint.stats) resp = denormalize(resp, *gen_checkpoint.stats);
  return resp;
}

}  // namespace fsgen
