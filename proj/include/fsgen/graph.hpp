#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "fsgen/grid.hpp"

namespace fsgen {
namespace graph {

// Reverse-mode autodiff over a fixed op vocabulary. Nodes are appended in
// topological order and evaluated eagerly. A backward sweep emits its
// adjoint computations as ordinary graph nodes, so sweeping again from a
// scalar produced by a recorded sweep yields second-order gradients
// (reverse-over-reverse) with no extra machinery.

enum class Kind : std::uint8_t { Grid, Spec, Stack, Vec, Scalar };

// Elementwise functions with the derivatives needed for two sweeps.
enum class EwFn : std::uint8_t {
  Gelu,      // x * Phi(x), exact erf form
  GeluP,     // Phi(x) + x*phi(x)
  GeluPP,    // phi(x) * (2 - x^2)
  SqrtEps,   // sqrt(x + 1e-12)
  SqrtEpsP,  // 0.5 / sqrt(x + 1e-12)
  SqrtEpsPP  // -0.25 * (x + 1e-12)^(-3/2)
};

enum class SFn : std::uint8_t {
  SqrtE,    // sqrt(x + 1e-24)
  DSqrtE,   // 0.5 / sqrt(x + 1e-24)
  D2SqrtE   // -0.25 * (x + 1e-24)^(-3/2)
};

enum class Op : std::uint8_t {
  Leaf,
  Dft,       // Grid -> Spec, per-mode scale
  Idft,      // Spec -> Grid, per-mode scale
  MmN,       // (Spec m x in, Stack) -> Spec m x out ; out_k = c_k * R_k
  MmA,       // (Spec m x out, Stack) -> Spec m x in ; g_k = d_k * conj(R_k)^T
  OuterCa,   // (Spec m x p, Spec m x q) -> Stack ; H_k = conj(a_k)^T * b_k
  Matmul,    // (Grid n x p, Grid p x q) -> Grid n x q
  MatmulT,   // (Grid n x q, Grid p x q) -> Grid n x p ; v * W^T
  Gram,      // (Grid n x p, Grid n x q) -> Grid p x q ; a^T * b
  AddBias,   // (Grid n x c, Vec c) -> Grid
  ColSum,    // Grid n x c -> Vec c
  Broadcast, // Vec c -> Grid n x c
  ChanSum,   // Grid n x c -> Grid n x 1
  RepC,      // Grid n x 1 -> Grid n x c
  Add2,      // alpha*a + beta*b, same kind
  ScaleC,    // alpha*a
  Emul,      // elementwise product of grids
  Ew,        // elementwise function of a grid
  Concat2,   // channel concat
  SliceC,    // channel slice [c0, c0+len)
  PadC,      // embed channels at offset c0 into `total` zero channels
  DotSum,    // (Grid, Grid) -> Scalar ; plain sum of elementwise product
  ScaleByS,  // (Grid, Scalar) -> Grid
  SMul,      // (Scalar, Scalar) -> Scalar
  SFun       // scalar function
};

struct Value {
  Kind kind = Kind::Scalar;
  Eigen::MatrixXd m;                  // Grid (also used for weight matrices)
  Eigen::MatrixXcd c;                 // Spec, modes x channels
  std::vector<Eigen::MatrixXcd> k;    // Stack, one in x out matrix per mode
  Eigen::VectorXd v;                  // Vec
  double s = 0.0;                     // Scalar
};

struct Node {
  Op op = Op::Leaf;
  int a = -1, b = -1;
  int i0 = 0, i1 = 0;        // modes / n_out / slice offset / width
  double x0 = 1.0, x1 = 1.0; // scale coefficients
  Eigen::VectorXd scale;     // per-mode scale for Dft/Idft
  std::uint8_t fn = 0;       // EwFn or SFn
  bool needs_grad = false;
  Value val;
};

class Graph {
 public:
  // leaves
  int leaf_grid(Eigen::MatrixXd m, bool needs_grad = false);
  int leaf_spec(Eigen::MatrixXcd c, bool needs_grad = false);
  int leaf_stack(std::vector<Eigen::MatrixXcd> k, bool needs_grad = false);
  int leaf_vec(Eigen::VectorXd v, bool needs_grad = false);
  int leaf_scalar(double s, bool needs_grad = false);

  // ops
  int dft(int v, int modes, Eigen::VectorXd scale);
  int idft(int c, int n_out, Eigen::VectorXd scale);
  int mm_n(int c, int r);
  int mm_a(int d, int r);
  int outer_ca(int a, int b);
  int matmul(int v, int w);
  int matmul_t(int v, int w);
  int gram(int a, int b);
  int add_bias(int v, int bias);
  int colsum(int v);
  int broadcast(int vec, int n);
  int chan_sum(int v);
  int rep_c(int v, int c);
  int add2(int a, int b, double alpha = 1.0, double beta = 1.0);
  int scale_c(int a, double alpha);
  int emul(int a, int b);
  int ew(int v, EwFn f);
  int concat2(int a, int b);
  int slice_c(int v, int c0, int len);
  int pad_c(int v, int c0, int total);
  int dot_sum(int a, int b);
  int scale_by_s(int v, int s);
  int smul(int a, int b);
  int sfun(int s, SFn f);

  // Reverse sweep from `seed`. Returns, for every node id < size-at-entry,
  // the node id of its gradient (or -1). The sweep appends its adjoint
  // computations to the graph, so its outputs can be swept again.
  std::vector<int> backward(int seed, int seed_cotangent = -1);

  const Value& val(int id) const { return nodes_[id].val; }
  const Node& node(int id) const { return nodes_[id]; }
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  int push(Node n);
  int ones_like(int id);
  void emit_backward(int id, int grad, std::vector<std::vector<int>>& contrib);

  std::vector<Node> nodes_;
};

double ew_eval(EwFn f, double x);
double sfn_eval(SFn f, double x);

}  // namespace graph
}  // namespace fsgen
