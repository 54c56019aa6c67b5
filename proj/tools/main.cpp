// fsgen: synthesize, train, generate, evaluate, export.
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fsgen/data.hpp"
#include "fsgen/metrics.hpp"
#include "fsgen/neural_op.hpp"
#include "fsgen/rng.hpp"
#include "fsgen/skeleton.hpp"
#include "fsgen/training.hpp"

namespace fs = std::filesystem;
using namespace fsgen;

namespace {

std::vector<std::string> list_files(const std::string& dir,
                                    const std::string& ext) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir))
    throw BadConfig("'" + dir + "' is not a directory");
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext)
      out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<DyadicPair> load_pairs(const std::string& dir) {
  std::vector<DyadicPair> pairs;
  for (const auto& p : list_files(dir, ".pmo2")) pairs.push_back(read_pair(p));
  if (pairs.empty()) throw EmptyDataset("no .pmo2 files in '" + dir + "'");
  return pairs;
}

SkeletonSpec skeleton_for(const std::string& flag, int joints) {
  if (!flag.empty()) {
    SkeletonSpec s;
    if (fs::exists(flag)) s = load_skeleton(flag);
    else s = skeleton_preset(flag);
    if (s.joints != joints)
      throw BadConfig("skeleton has " + std::to_string(s.joints) +
                      " joints but the data has " + std::to_string(joints));
    return s;
  }
  for (const char* name : {"toy4", "duet15", "ntu23"}) {
    SkeletonSpec s = skeleton_preset(name);
    if (s.joints == joints) return s;
  }
  SkeletonSpec s;  // unknown layout: no mirror pairs, symmetry term is 0
  s.joints = joints;
  return s;
}

std::string pad5(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d", i);
  return buf;
}

int cmd_synth(int n, int joints, int frames, double dt, double delay,
              double noise, std::uint64_t seed, const std::string& out_dir) {
  SynthSpec spec;
  spec.pairs = n;
  spec.joints = joints;
  spec.frames = frames;
  spec.dt = dt;
  spec.delay = delay;
  spec.noise_sigma = noise;
  spec.seed = seed;
  fs::create_directories(out_dir);
  std::vector<DyadicPair> pairs = synth_coupled(spec);
  for (int i = 0; i < n; ++i)
    write_pair(out_dir + "/pair_" + pad5(i) + ".pmo2", pairs[i]);
  std::cerr << "wrote " << n << " pairs to " << out_dir << "\n";
  return 0;
}

int cmd_train(const TrainConfig& cfg, const std::string& data_dir,
              const std::string& out_dir, const std::string& skeleton_flag,
              bool autoencoder) {
  std::vector<DyadicPair> pairs = load_pairs(data_dir);
  auto [train_set, eval_set] = split(pairs, cfg.split_ratio, cfg.seed);
  std::cerr << "loaded " << pairs.size() << " pairs (" << train_set.size()
            << " train / " << eval_set.size() << " held out)\n";
  if (autoencoder) {
    train_autoencoder(cfg, train_set, out_dir);
    std::cerr << "autoencoder checkpoint: " << out_dir << "/ae_final.uno\n";
  } else {
    SkeletonSpec sk = skeleton_for(skeleton_flag, pairs[0].actor_a.joints);
    train(cfg, train_set, out_dir, sk);
    std::cerr << "generator checkpoint: " << out_dir << "/gen_final.uno\n";
  }
  return 0;
}

int cmd_gen(const std::string& ckpt_path, const std::string& condition,
            int resolution, int samples, std::uint64_t seed,
            const std::string& out_dir) {
  Checkpoint ck = load_checkpoint(ckpt_path);
  std::vector<std::pair<std::string, MotionSequence>> conditions;
  auto add_file = [&conditions](const std::string& path) {
    fs::path p(path);
    if (p.extension() == ".pmo2")
      conditions.push_back({p.stem().string(), read_pair(path).actor_a});
    else
      conditions.push_back({p.stem().string(), read_motion(path)});
  };
  if (fs::is_directory(condition)) {
    auto files = list_files(condition, ".pmo2");
    auto singles = list_files(condition, ".pmo1");
    files.insert(files.end(), singles.begin(), singles.end());
    std::sort(files.begin(), files.end());
    if (files.empty())
      throw EmptyDataset("no .pmo1/.pmo2 files in '" + condition + "'");
    for (const auto& f : files) add_file(f);
  } else {
    add_file(condition);
  }
  fs::create_directories(out_dir);
  int written = 0;
  for (size_t i = 0; i < conditions.size(); ++i) {
    const auto& [stem, cond] = conditions[i];
    for (int k = 0; k < samples; ++k) {
      MotionSequence resp = generate_response(
          ck, cond, resolution, derive_seed(seed, i, static_cast<std::uint64_t>(k)));
      DyadicPair out;
      out.actor_a = resample_motion(cond, resp.frames);
      out.actor_b = resp;
      out.label = stem;
      write_pair(out_dir + "/" + stem + "_gen" + std::to_string(k) + ".pmo2",
                 out);
      ++written;
    }
  }
  std::cerr << "wrote " << written << " generated pairs to " << out_dir
            << "\n";
  return 0;
}

int cmd_eval(const std::string& real_dir, const std::string& gen_dir,
             const std::string& ae_path, int grid, int reps, int sample,
             std::uint64_t seed, const std::string& out_path) {
  std::vector<DyadicPair> real = load_pairs(real_dir);
  std::vector<DyadicPair> gen = load_pairs(gen_dir);
  Checkpoint ae = load_checkpoint(ae_path);
  EvalConfig cfg;
  cfg.grid_size = grid;
  cfg.reps = reps;
  cfg.sample = sample;
  cfg.seed = seed;
  EvalReport report = evaluate_suite(real, gen, ae, cfg);
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw BadConfig("cannot write report '" + out_path + "'");
  out << report.to_text();
  std::cerr << "report written to " << out_path << "\n";
  return 0;
}

int cmd_export(const std::string& motion_path, const std::string& format,
               double dt, const std::string& out_path) {
  if (format == "csv") {
    std::vector<MotionSequence> blocks;
    if (fs::path(motion_path).extension() == ".pmo2") {
      DyadicPair p = read_pair(motion_path);
      blocks = {p.actor_a, p.actor_b};
    } else {
      blocks = {read_motion(motion_path)};
    }
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw BadConfig("cannot write '" + out_path + "'");
    char buf[40];
    for (int t = 0; t < blocks[0].frames; ++t) {
      bool first = true;
      for (const auto& b : blocks)
        for (int c = 0; c < 3 * b.joints; ++c) {
          std::snprintf(buf, sizeof(buf), "%.17g", b.positions(t, c));
          out << (first ? "" : ",") << buf;
          first = false;
        }
      out << '\n';
    }
  } else if (format == "pmo1") {
    // ingestion contract: one CSV per motion, T rows, 3J columns
    std::ifstream in(motion_path);
    if (!in) throw TruncatedFile("cannot open '" + motion_path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<double> row;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
      if (!rows.empty() && row.size() != rows[0].size())
        throw TruncatedFile("ragged CSV row in '" + motion_path + "'");
      rows.push_back(std::move(row));
    }
    if (rows.empty() || rows[0].size() % 3 != 0)
      throw TruncatedFile("CSV must have T rows and 3J columns");
    MotionSequence m;
    m.joints = static_cast<int>(rows[0].size()) / 3;
    m.frames = static_cast<int>(rows.size());
    m.dt = dt;
    m.positions.resize(m.frames, 3 * m.joints);
    for (int t = 0; t < m.frames; ++t)
      for (int c = 0; c < 3 * m.joints; ++c)
        m.positions(t, c) = rows[t][c];
    write_motion(out_path, m);
  } else {
    throw BadConfig("unsupported export format '" + format + "'");
  }
  std::cerr << "exported to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"function-space dyadic motion toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::string s_task = "coupled-sines", s_out;
  int s_n = 0, s_joints = 4, s_frames = 64;
  double s_delay = 0.1, s_noise = 0.05, s_dt = 1.0 / 30.0;
  std::uint64_t s_seed = 0;
  synth->add_option("--task", s_task, "task name (coupled-sines)");
  synth->add_option("--n", s_n, "number of pairs")->required();
  synth->add_option("--joints", s_joints, "joint count");
  synth->add_option("--frames", s_frames, "frames per clip");
  synth->add_option("--dt", s_dt, "seconds per frame");
  synth->add_option("--delay", s_delay, "responder delay in seconds");
  synth->add_option("--noise", s_noise, "responder noise scale");
  synth->add_option("--seed", s_seed, "rng seed");
  synth->add_option("--out", s_out, "output directory")->required();

  // train / train-ae
  auto* train_cmd = app.add_subcommand("train", "adversarial training");
  auto* train_ae = app.add_subcommand("train-ae", "autoencoder training");
  std::string t_config, t_data, t_out, t_skel;
  std::uint64_t t_seed = 0;
  int t_epochs = 0, t_res = 0;
  for (auto* cmd : {train_cmd, train_ae}) {
    cmd->add_option("--config", t_config, "train config file");
    cmd->add_option("--data", t_data, "directory of .pmo2 pairs")->required();
    cmd->add_option("--out", t_out, "output directory")->required();
    cmd->add_option("--seed", t_seed, "rng seed");
    cmd->add_option("--epochs", t_epochs, "override epochs");
    cmd->add_option("--resolution", t_res, "override train resolution");
  }
  train_cmd->add_option("--skeleton", t_skel, "skeleton preset or file");

  // gen
  auto* gen_cmd = app.add_subcommand("gen", "generate responses");
  std::string g_ckpt, g_cond, g_out;
  int g_res = 0, g_samples = 1;
  std::uint64_t g_seed = 0;
  gen_cmd->add_option("--checkpoint", g_ckpt, "generator checkpoint")
      ->required();
  gen_cmd->add_option("--condition", g_cond,
                      ".pmo1/.pmo2 file or directory of conditions")
      ->required();
  gen_cmd->add_option("--resolution", g_res,
                      "output frame count (0 = native)");
  gen_cmd->add_option("--samples", g_samples, "samples per condition");
  gen_cmd->add_option("--seed", g_seed, "rng seed");
  gen_cmd->add_option("--out", g_out, "output directory")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "run the metric suite");
  std::string e_real, e_gen, e_ae, e_out = "report.txt";
  int e_grid = 64, e_reps = 5, e_sample = 1000;
  std::uint64_t e_seed = 0;
  eval_cmd->add_option("--real", e_real, "real corpus directory")->required();
  eval_cmd->add_option("--gen", e_gen, "generated corpus directory")
      ->required();
  eval_cmd->add_option("--ae", e_ae, "autoencoder checkpoint")->required();
  eval_cmd->add_option("--grid", e_grid, "f2id moment grid size");
  eval_cmd->add_option("--reps", e_reps, "seeded repetitions");
  eval_cmd->add_option("--sample", e_sample, "draws per repetition");
  eval_cmd->add_option("--seed", e_seed, "rng seed");
  eval_cmd->add_option("--out", e_out, "report path");

  // export
  auto* export_cmd = app.add_subcommand("export", "convert motion files");
  std::string x_motion, x_format = "csv", x_out;
  double x_dt = 1.0 / 30.0;
  export_cmd->add_option("--motion", x_motion, "input file")->required();
  export_cmd->add_option("--format", x_format, "csv (to CSV) or pmo1 (from CSV)");
  export_cmd->add_option("--dt", x_dt, "dt for pmo1 ingestion");
  export_cmd->add_option("--out", x_out, "output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n";
    return 1;
  }

  try {
    if (synth->parsed()) {
      if (s_task != "coupled-sines")
        throw BadConfig("unknown task '" + s_task + "'");
      return cmd_synth(s_n, s_joints, s_frames, s_dt, s_delay, s_noise,
                       s_seed, s_out);
    }
    if (train_cmd->parsed() || train_ae->parsed()) {
      TrainConfig cfg =
          t_config.empty() ? TrainConfig{} : load_train_config(t_config);
      auto* cmd = train_cmd->parsed() ? train_cmd : train_ae;
      if (cmd->count("--seed")) cfg.seed = t_seed;
      if (cmd->count("--epochs")) cfg.epochs = t_epochs;
      if (cmd->count("--resolution")) cfg.train_resolution = t_res;
      cfg.validate();
      return cmd_train(cfg, t_data, t_out, t_skel, train_ae->parsed());
    }
    if (gen_cmd->parsed())
      return cmd_gen(g_ckpt, g_cond, g_res, g_samples, g_seed, g_out);
    if (eval_cmd->parsed())
      return cmd_eval(e_real, e_gen, e_ae, e_grid, e_reps, e_sample, e_seed,
                      e_out);
    if (export_cmd->parsed())
      return cmd_export(x_motion, x_format, x_dt, x_out);
    std::cerr << "no subcommand\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
