#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fsgen/data.hpp"
#include "fsgen/graph.hpp"
#include "fsgen/grid.hpp"
#include "fsgen/random_fields.hpp"

namespace fsgen {

struct LayerConfig {
  int in_channels = 0;
  int out_channels = 0;
  int modes = 0;
  int factor_num = 1;  // output resolution = round(n * num / den)
  int factor_den = 1;
};

// U-shaped stack of exactly seven spectral layers: three encoder layers
// (x1/2 resolution, x2 channels), one bottleneck, three decoder layers
// (x2 resolution) with channel concatenation from the mirrored encoder
// layer (encoder i feeds decoder 6 - i). Lift/project are pointwise.
struct ArchConfig {
  int in_channels = 0;
  int width = 64;
  int out_channels = 0;
  int modes_cap = 16;
  int base_resolution = 64;  // resolution the per-layer mode counts assume
  bool skips = true;
  bool with_head = false;    // scalar functional head (critics)
  int head_hidden = 32;
  bool identity_activations = false;  // test mode: GELU -> identity
  std::vector<LayerConfig> layers;
  std::vector<std::pair<int, int>> skip_links;  // (encoder, decoder)

  static ArchConfig uno7(int in_channels, int out_channels, int width,
                         int modes_cap, int base_resolution, bool skips,
                         bool with_head, int head_hidden);
  void validate() const;  // throws InvalidArchitecture
  std::uint64_t signature() const;
};

struct PointwiseParams {
  Eigen::MatrixXd weight;  // in x out
  Eigen::VectorXd bias;    // out
};

struct SpectralLayerParams {
  std::vector<Eigen::MatrixXcd> kernel;  // per retained mode, in x out
  Eigen::MatrixXd pointwise;             // in x out
  Eigen::VectorXd bias;                  // out
};

// Scalar head r = (1/n) * sum_i kappa(v(t_i)) * sum_ch v_ch(t_i), where
// kappa is a two-layer GELU network (channels -> hidden -> 1) applied to
// the function value at each grid point. Forcing kappa constant (zero
// weights, bias) collapses the head to plain quadrature integration of v.
struct FunctionalHeadParams {
  Eigen::MatrixXd w1;  // channels x hidden
  Eigen::VectorXd b1;  // hidden
  Eigen::MatrixXd w2;  // hidden x 1
  Eigen::VectorXd b2;  // 1
};

struct UnoTensors {
  PointwiseParams lift, project;
  std::vector<SpectralLayerParams> layers;
  FunctionalHeadParams head;
};
using UnoGrads = UnoTensors;

struct UnoModel {
  ArchConfig config;
  UnoTensors p;
};

UnoModel init_params(const ArchConfig& config, std::uint64_t seed);
UnoTensors zeros_like(const ArchConfig& config);

// Visit every parameter tensor in declaration order (the checkpoint and
// flattening order). F must accept Eigen::MatrixXd&, Eigen::VectorXd&, and
// std::vector<Eigen::MatrixXcd>&.
template <class T, class F>
void for_each_tensor(T& t, bool with_head, F&& f) {
  f(t.lift.weight);
  f(t.lift.bias);
  for (auto& l : t.layers) {
    f(l.kernel);
    f(l.pointwise);
    f(l.bias);
  }
  f(t.project.weight);
  f(t.project.bias);
  if (with_head) {
    f(t.head.w1);
    f(t.head.b1);
    f(t.head.w2);
    f(t.head.b2);
  }
}

// --- standalone layer ops ---

GridFunction pointwise_apply(const PointwiseParams& p, const GridFunction& v);
GridFunction spectral_layer_forward(const SpectralLayerParams& p,
                                    const LayerConfig& cfg,
                                    const GridFunction& v,
                                    bool identity_activation = false);
double functional_head_forward(const FunctionalHeadParams& p,
                               const GridFunction& v,
                               bool identity_activation = false);

// --- graph emission (shared by forward, training losses, and the
//     gradient penalty) ---

struct UnoBinding {
  int input = -1;
  int lift_w = -1, lift_b = -1;
  struct LayerNodes {
    int r = -1, w = -1, b = -1;
  };
  std::vector<LayerNodes> layers;
  int proj_w = -1, proj_b = -1;
  int head_w1 = -1, head_b1 = -1, head_w2 = -1, head_b2 = -1;
  int output = -1;      // grid node (no head) or scalar node (head)
  int grid_output = -1; // pre-head grid node
};

UnoBinding emit_uno(graph::Graph& g, const UnoModel& m, int input_node,
                    bool params_need_grad);

// Gather parameter gradients produced by a sweep into model-shaped tensors.
UnoGrads collect_grads(const graph::Graph& g, const UnoModel& m,
                       const UnoBinding& binding,
                       const std::vector<int>& grad_of);

// --- recorded forward / backward API ---

struct Tape {
  std::shared_ptr<graph::Graph> g;
  UnoBinding binding;
  bool recorded = false;
  std::uint64_t arch_sig = 0;
};

struct ForwardOut {
  bool is_scalar = false;
  GridFunction grid;
  double scalar = 0.0;
};

std::pair<ForwardOut, Tape> uno_forward(const UnoModel& m,
                                        const GridFunction& input,
                                        bool record_tape);

// Reverse sweep from the tape's output. The returned input gradient holds
// raw partial derivatives d(loss)/d(value at grid point); callers wanting
// the L2 Riesz representer must scale by the resolution.
std::pair<UnoGrads, GridFunction> backward(const UnoModel& m, Tape& tape,
                                           const GridFunction& cotangent);
std::pair<UnoGrads, GridFunction> backward(const UnoModel& m, Tape& tape,
                                           double cotangent);

// Quadrature norm of the Riesz representer of the head's input derivative.
double input_gradient_norm(const UnoModel& m, const GridFunction& input);

// Forward through lift + the first four layers (through the bottleneck),
// then average channels to a single-channel function.
GridFunction bottleneck_forward(const UnoModel& m, const GridFunction& input);

// --- checkpoints ---

struct Checkpoint {
  UnoModel model;
  std::optional<NormStats> stats;
  std::optional<GrfSpec> noise;
};

void save_checkpoint(const std::string& path, const UnoModel& m,
                     const NormStats* stats = nullptr,
                     const GrfSpec* noise = nullptr);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fsgen
