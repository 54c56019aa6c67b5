#include "fsgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "fsgen/rng.hpp"
#include "fsgen/training.hpp"

namespace fsgen {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols())
    throw NotSymmetric("psd_sqrt needs a square matrix");
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw NotSymmetric("psd_sqrt input asymmetric beyond 1e-8");
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * lam.asDiagonal() *
         eig.eigenvectors().transpose();
}

double f2id(const FeatureSet& a, const FeatureSet& b, int grid_size) {
  GaussianProcessEstimate gp_a = fit_gp(a.features, grid_size);
  GaussianProcessEstimate gp_b = fit_gp(b.features, grid_size);
  Eigen::MatrixXd ma = covariance_operator_matrix(gp_a);
  Eigen::MatrixXd mb = covariance_operator_matrix(gp_b);
  Eigen::MatrixXd sa = psd_sqrt(ma);
  Eigen::MatrixXd cross = psd_sqrt(sa * mb * sa);
  Eigen::MatrixXd l = ma + mb - 2.0 * cross;
  double mean_term =
      (gp_a.mean - gp_b.mean).squaredNorm() / static_cast<double>(grid_size);
  double score = mean_term + l.trace();
  return std::max(score, 0.0);
}

FeatureSet extract_features(const Checkpoint& ae,
                            const std::vector<DyadicPair>& pairs,
                            const std::string& source_tag) {
  const ArchConfig& cfg = ae.model.config;
  if (cfg.with_head)
    throw CheckpointArchMismatch("feature extractor must not have a head");
  if (!cfg.skip_links.empty())
    throw CheckpointArchMismatch(
        "feature extractor must be a skip-free autoencoder");
  FeatureSet out;
  out.source = source_tag;
  out.features.reserve(pairs.size());
  for (const auto& p : pairs) {
    DyadicPair q = ae.stats ? normalize(p, *ae.stats) : p;
    GridFunction in = pair_grid(q);
    if (in.channels != cfg.in_channels)
      throw CheckpointArchMismatch(
          "autoencoder expects " + std::to_string(cfg.in_channels) +
          " channels, pairs provide " + std::to_string(in.channels));
    out.features.push_back(bottleneck_forward(ae.model, in));
  }
  return out;
}

double diversity_score(const FeatureSet& features, std::uint64_t seed) {
  const size_t n = features.features.size();
  if (n == 0) throw EmptySet("diversity_score on empty feature set");
  if (n % 2 != 0)
    throw OddCount("diversity_score needs an even feature count, got " +
                   std::to_string(n));
  std::vector<int> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  Rng rng(seed);
  for (size_t i = n; i > 1; --i)
    std::swap(idx[i - 1], idx[rng.below(static_cast<std::uint64_t>(i))]);
  const size_t half = n / 2;
  double acc = 0.0;
  for (size_t i = 0; i < half; ++i) {
    const GridFunction& f = features.features[idx[i]];
    const GridFunction& g = features.features[idx[half + i]];
    int res = std::max(f.resolution, g.resolution);
    GridFunction fa = resample(f, res);
    GridFunction ga = resample(g, res);
    GridFunction diff;
    diff.resolution = res;
    diff.channels = 1;
    diff.values = fa.values - ga.values;
    double d = quadrature_l2_norm(diff);
    acc += d * d;
  }
  return acc / static_cast<double>(half);
}

namespace {

double gauss_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                    double inv_2bw2) {
  return std::exp(-(a - b).squaredNorm() * inv_2bw2);
}

}  // namespace

double mmd_squared(const std::vector<Eigen::VectorXd>& x,
                   const std::vector<Eigen::VectorXd>& y, double bandwidth) {
  if (x.empty() || y.empty()) throw EmptySet("mmd_squared on empty set");
  if (!(bandwidth > 0.0)) throw BadConfig("mmd bandwidth must be positive");
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (const auto& a : x)
    for (const auto& b : x) xx += gauss_kernel(a, b, inv);
  for (const auto& a : y)
    for (const auto& b : y) yy += gauss_kernel(a, b, inv);
  for (const auto& a : x)
    for (const auto& b : y) xy += gauss_kernel(a, b, inv);
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  return xx / (nx * nx) + yy / (ny * ny) - 2.0 * xy / (nx * ny);
}

double median_heuristic_bandwidth(const std::vector<Eigen::VectorXd>& x,
                                  const std::vector<Eigen::VectorXd>& y) {
  std::vector<const Eigen::VectorXd*> pool;
  for (const auto& v : x) pool.push_back(&v);
  for (const auto& v : y) pool.push_back(&v);
  std::vector<double> dists;
  for (size_t i = 0; i < pool.size(); ++i)
    for (size_t j = i + 1; j < pool.size(); ++j)
      dists.push_back((*pool[i] - *pool[j]).norm());
  if (dists.empty()) return 1.0;
  std::sort(dists.begin(), dists.end());
  double med = dists.size() % 2 == 1
                   ? dists[dists.size() / 2]
                   : 0.5 * (dists[dists.size() / 2 - 1] +
                            dists[dists.size() / 2]);
  return med > 0.0 ? med : 1.0;
}

namespace {

struct CommonGrid {
  std::vector<MotionSequence> real, gen;
  int frames = 0;
};

CommonGrid to_common_grid(const std::vector<MotionSequence>& real,
                          const std::vector<MotionSequence>& gen) {
  if (real.empty() || gen.empty()) throw EmptySet("mmd on empty corpus");
  const int joints = real[0].joints;
  int frames = 0;
  for (const auto& m : real) frames = std::max(frames, m.frames);
  for (const auto& m : gen) frames = std::max(frames, m.frames);
  CommonGrid out;
  out.frames = frames;
  auto prep = [joints, frames](const std::vector<MotionSequence>& in,
                               std::vector<MotionSequence>& dst) {
    for (const auto& m : in) {
      if (m.joints != joints)
        throw ChannelMismatch("mmd corpora disagree on joint count");
      dst.push_back(resample_motion(m, frames));
    }
  };
  prep(real, out.real);
  prep(gen, out.gen);
  return out;
}

}  // namespace

double mmd_a(const std::vector<MotionSequence>& real,
             const std::vector<MotionSequence>& gen) {
  CommonGrid c = to_common_grid(real, gen);
  double acc = 0.0;
  for (int t = 0; t < c.frames; ++t) {
    std::vector<Eigen::VectorXd> x, y;
    x.reserve(c.real.size());
    y.reserve(c.gen.size());
    for (const auto& m : c.real) x.push_back(m.positions.row(t).transpose());
    for (const auto& m : c.gen) y.push_back(m.positions.row(t).transpose());
    acc += mmd_squared(x, y, median_heuristic_bandwidth(x, y));
  }
  return acc / static_cast<double>(c.frames);
}

double mmd_s(const std::vector<MotionSequence>& real,
             const std::vector<MotionSequence>& gen) {
  CommonGrid c = to_common_grid(real, gen);
  auto flatten = [](const std::vector<MotionSequence>& in) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(in.size());
    for (const auto& m : in) {
      // frame-major flatten: frame 0's 3J coords, then frame 1's, ...
      Eigen::MatrixXd pt = m.positions.transpose();
      out.push_back(
          Eigen::Map<Eigen::VectorXd>(pt.data(), pt.size()));
    }
    return out;
  };
  std::vector<Eigen::VectorXd> x = flatten(c.real);
  std::vector<Eigen::VectorXd> y = flatten(c.gen);
  return mmd_squared(x, y, median_heuristic_bandwidth(x, y));
}

namespace {

void check_paired(const std::vector<MotionSequence>& gen,
                  const std::vector<MotionSequence>& real, int joint) {
  if (gen.size() != real.size())
    throw LengthMismatch("paired corpora differ in size: " +
                         std::to_string(gen.size()) + " vs " +
                         std::to_string(real.size()));
  if (gen.empty()) throw EmptySet("paired metric on empty corpora");
  for (size_t i = 0; i < gen.size(); ++i) {
    if (gen[i].frames != real[i].frames)
      throw LengthMismatch("pair " + std::to_string(i) +
                           " frame counts differ");
    if (joint < 0 || joint >= gen[i].joints || joint >= real[i].joints)
      throw BadJointIndex("joint " + std::to_string(joint) +
                          " outside skeleton");
  }
}

}  // namespace

double ape(const std::vector<MotionSequence>& gen,
           const std::vector<MotionSequence>& real, int joint) {
  check_paired(gen, real, joint);
  double acc = 0.0;
  for (size_t i = 0; i < gen.size(); ++i) {
    double per = 0.0;
    for (int t = 0; t < gen[i].frames; ++t) {
      double s = 0.0;
      for (int d = 0; d < 3; ++d) {
        double diff = gen[i].positions(t, 3 * joint + d) -
                      real[i].positions(t, 3 * joint + d);
        s += diff * diff;
      }
      per += std::sqrt(s);
    }
    acc += per / gen[i].frames;
  }
  return acc / static_cast<double>(gen.size());
}

namespace {

Eigen::Vector3d temporal_variance(const MotionSequence& m, int joint) {
  Eigen::Vector3d out;
  for (int d = 0; d < 3; ++d) {
    const auto col = m.positions.col(3 * joint + d);
    double mean = col.mean();
    out(d) = (col.array() - mean).square().mean();
  }
  return out;
}

}  // namespace

double ave(const std::vector<MotionSequence>& gen,
           const std::vector<MotionSequence>& real, int joint) {
  check_paired(gen, real, joint);
  double acc = 0.0;
  for (size_t i = 0; i < gen.size(); ++i)
    acc += (temporal_variance(gen[i], joint) -
            temporal_variance(real[i], joint))
               .norm();
  return acc / static_cast<double>(gen.size());
}

// --- the suite ---

namespace {

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

MetricStats finish(std::vector<double> reps) {
  MetricStats s;
  s.reps = std::move(reps);
  for (double v : s.reps) s.mean += v;
  s.mean /= static_cast<double>(s.reps.size());
  double var = 0.0;
  for (double v : s.reps) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(s.reps.size()));
  return s;
}

}  // namespace

std::string EvalReport::to_text() const {
  std::ostringstream os;
  for (const auto& [name, st] : metrics) {
    os << name << ".mean = " << g17(st.mean) << "\n";
    os << name << ".std = " << g17(st.stddev) << "\n";
  }
  os << "# rep";
  for (const auto& [name, st] : metrics) os << '\t' << name;
  os << '\n';
  if (!metrics.empty()) {
    for (size_t r = 0; r < metrics.front().second.reps.size(); ++r) {
      os << r;
      for (const auto& [name, st] : metrics) os << '\t' << g17(st.reps[r]);
      os << '\n';
    }
  }
  return os.str();
}

EvalReport evaluate_suite(const std::vector<DyadicPair>& real,
                          const std::vector<DyadicPair>& gen,
                          const Checkpoint& ae, const EvalConfig& cfg) {
  if (real.empty() || gen.empty())
    throw EmptyDataset("evaluate_suite on empty corpus");
  if (real.size() != gen.size())
    throw LengthMismatch(
        "evaluate_suite needs index-paired corpora of equal size, got " +
        std::to_string(real.size()) + " vs " + std::to_string(gen.size()));
  if (cfg.reps < 1 || cfg.sample < 2 || cfg.grid_size < 2)
    throw BadConfig("evaluate_suite: reps >= 1, sample >= 2, grid >= 2");

  std::vector<double> v_f2id, v_div, v_mmda, v_mmds, v_ape, v_ave;
  for (int rep = 0; rep < cfg.reps; ++rep) {
    Rng rng(derive_seed(cfg.seed, 31, static_cast<std::uint64_t>(rep)));
    const int draws = cfg.sample - cfg.sample % 2;  // keep diversity pairable
    std::vector<DyadicPair> sel_real, sel_gen;
    std::vector<MotionSequence> resp_real, resp_gen;
    sel_real.reserve(draws);
    sel_gen.reserve(draws);
    for (int k = 0; k < draws; ++k) {
      // one shared index stream: identical corpora stay identical samples
      size_t i = static_cast<size_t>(rng.below(real.size()));
      sel_real.push_back(real[i]);
      sel_gen.push_back(gen[i]);
      resp_real.push_back(real[i].actor_b);
      resp_gen.push_back(gen[i].actor_b);
    }
    FeatureSet f_real = extract_features(ae, sel_real, "real");
    FeatureSet f_gen = extract_features(ae, sel_gen, "generated");
    v_f2id.push_back(f2id(f_real, f_gen, cfg.grid_size));
    v_div.push_back(diversity_score(
        f_gen, derive_seed(cfg.seed, 32, static_cast<std::uint64_t>(rep))));
    v_mmda.push_back(mmd_a(resp_real, resp_gen));
    v_mmds.push_back(mmd_s(resp_real, resp_gen));
    v_ape.push_back(ape(resp_gen, resp_real, cfg.root_joint));
    v_ave.push_back(ave(resp_gen, resp_real, cfg.root_joint));
  }

  EvalReport rpt;
  rpt.metrics.emplace_back("f2id", finish(std::move(v_f2id)));
  rpt.metrics.emplace_back("diversity", finish(std::move(v_div)));
  rpt.metrics.emplace_back("mmd_a", finish(std::move(v_mmda)));
  rpt.metrics.emplace_back("mmd_s", finish(std::move(v_mmds)));
  rpt.metrics.emplace_back("ape_root", finish(std::move(v_ape)));
  rpt.metrics.emplace_back("ave_root", finish(std::move(v_ave)));
  return rpt;
}

}  // namespace fsgen
