#include "fsgen/graph.hpp"

#include <cmath>
#include <string>

namespace fsgen {
namespace graph {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kEwEps = 1e-12;
constexpr double kSEps = 1e-24;

double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }
double norm_cdf(double x) { return 0.5 * (1.0 + std::erf(x * kInvSqrt2)); }

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  throw ShapeMismatch(std::string(op) + ": " + detail);
}

}  // namespace

double ew_eval(EwFn f, double x) {
  switch (f) {
    case EwFn::Gelu: return x * norm_cdf(x);
    case EwFn::GeluP: return norm_cdf(x) + x * norm_pdf(x);
    case EwFn::GeluPP: return norm_pdf(x) * (2.0 - x * x);
    case EwFn::SqrtEps: return std::sqrt(x + kEwEps);
    case EwFn::SqrtEpsP: return 0.5 / std::sqrt(x + kEwEps);
    case EwFn::SqrtEpsPP: {
      double r = x + kEwEps;
      return -0.25 / (r * std::sqrt(r));
    }
  }
  return 0.0;
}

double sfn_eval(SFn f, double x) {
  switch (f) {
    case SFn::SqrtE: return std::sqrt(x + kSEps);
    case SFn::DSqrtE: return 0.5 / std::sqrt(x + kSEps);
    case SFn::D2SqrtE: {
      double r = x + kSEps;
      return -0.25 / (r * std::sqrt(r));
    }
  }
  return 0.0;
}

namespace {

bool ew_derivative(EwFn f, EwFn* d) {
  switch (f) {
    case EwFn::Gelu: *d = EwFn::GeluP; return true;
    case EwFn::GeluP: *d = EwFn::GeluPP; return true;
    case EwFn::SqrtEps: *d = EwFn::SqrtEpsP; return true;
    case EwFn::SqrtEpsP: *d = EwFn::SqrtEpsPP; return true;
    default: return false;
  }
}

bool sfn_derivative(SFn f, SFn* d) {
  switch (f) {
    case SFn::SqrtE: *d = SFn::DSqrtE; return true;
    case SFn::DSqrtE: *d = SFn::D2SqrtE; return true;
    default: return false;
  }
}

}  // namespace

int Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Graph::leaf_grid(Eigen::MatrixXd m, bool needs_grad) {
  Node n;
  n.needs_grad = needs_grad;
  n.val.kind = Kind::Grid;
  n.val.m = std::move(m);
  return push(std::move(n));
}

int Graph::leaf_spec(Eigen::MatrixXcd c, bool needs_grad) {
  Node n;
  n.needs_grad = needs_grad;
  n.val.kind = Kind::Spec;
  n.val.c = std::move(c);
  return push(std::move(n));
}

int Graph::leaf_stack(std::vector<Eigen::MatrixXcd> k, bool needs_grad) {
  Node n;
  n.needs_grad = needs_grad;
  n.val.kind = Kind::Stack;
  n.val.k = std::move(k);
  return push(std::move(n));
}

int Graph::leaf_vec(Eigen::VectorXd v, bool needs_grad) {
  Node n;
  n.needs_grad = needs_grad;
  n.val.kind = Kind::Vec;
  n.val.v = std::move(v);
  return push(std::move(n));
}

int Graph::leaf_scalar(double s, bool needs_grad) {
  Node n;
  n.needs_grad = needs_grad;
  n.val.kind = Kind::Scalar;
  n.val.s = s;
  return push(std::move(n));
}

int Graph::dft(int v, int modes, Eigen::VectorXd scale) {
  const Value& in = nodes_[v].val;
  if (in.kind != Kind::Grid) shape_fail("dft", "input not a grid");
  int n = static_cast<int>(in.m.rows());
  if (modes < 1 || modes > nyquist_modes(n))
    throw ModesExceedNyquist("graph dft: " + std::to_string(modes) +
                             " modes at resolution " + std::to_string(n));
  if (scale.size() != modes) shape_fail("dft", "scale size != modes");
  Node nd;
  nd.op = Op::Dft;
  nd.a = v;
  nd.i0 = modes;
  nd.scale = std::move(scale);
  nd.needs_grad = nodes_[v].needs_grad;
  nd.val.kind = Kind::Spec;
  nd.val.c = detail::dft_apply(in.m, modes, nd.scale);
  return push(std::move(nd));
}

int Graph::idft(int c, int n_out, Eigen::VectorXd scale) {
  const Value& in = nodes_[c].val;
  if (in.kind != Kind::Spec) shape_fail("idft", "input not a spectrum");
  int m = static_cast<int>(in.c.rows());
  if (n_out < 1 || n_out < 2 * (m - 1))
    throw ResolutionBelowModeSupport("graph idft: resolution " +
                                     std::to_string(n_out) + " for " +
                                     std::to_string(m) + " modes");
  if (scale.size() != m) shape_fail("idft", "scale size != modes");
  Node nd;
  nd.op = Op::Idft;
  nd.a = c;
  nd.i0 = n_out;
  nd.scale = std::move(scale);
  nd.needs_grad = nodes_[c].needs_grad;
  nd.val.kind = Kind::Grid;
  nd.val.m = detail::idft_apply(in.c, n_out, nd.scale);
  return push(std::move(nd));
}

int Graph::mm_n(int c, int r) {
  const Value& vc = nodes_[c].val;
  const Value& vr = nodes_[r].val;
  if (vc.kind != Kind::Spec || vr.kind != Kind::Stack)
    shape_fail("mm_n", "expected (spec, stack)");
  int m = static_cast<int>(vc.c.rows());
  if (static_cast<int>(vr.k.size()) != m) shape_fail("mm_n", "mode count");
  if (m > 0 && vc.c.cols() != vr.k[0].rows())
    throw ChannelMismatch("mm_n: spectrum channels " +
                          std::to_string(vc.c.cols()) + " vs kernel rows " +
                          std::to_string(vr.k[0].rows()));
  Node nd;
  nd.op = Op::MmN;
  nd.a = c;
  nd.b = r;
  nd.needs_grad = nodes_[c].needs_grad || nodes_[r].needs_grad;
  nd.val.kind = Kind::Spec;
  int out = m > 0 ? static_cast<int>(vr.k[0].cols()) : 0;
  nd.val.c.resize(m, out);
  for (int k = 0; k < m; ++k) nd.val.c.row(k) = vc.c.row(k) * vr.k[k];
  return push(std::move(nd));
}

int Graph::mm_a(int d, int r) {
  const Value& vd = nodes_[d].val;
  const Value& vr = nodes_[r].val;
  if (vd.kind != Kind::Spec || vr.kind != Kind::Stack)
    shape_fail("mm_a", "expected (spec, stack)");
  int m = static_cast<int>(vd.c.rows());
  if (static_cast<int>(vr.k.size()) != m) shape_fail("mm_a", "mode count");
  if (m > 0 && vd.c.cols() != vr.k[0].cols())
    throw ChannelMismatch("mm_a: spectrum channels vs kernel cols");
  Node nd;
  nd.op = Op::MmA;
  nd.a = d;
  nd.b = r;
  nd.needs_grad = nodes_[d].needs_grad || nodes_[r].needs_grad;
  nd.val.kind = Kind::Spec;
  int in = m > 0 ? static_cast<int>(vr.k[0].rows()) : 0;
  nd.val.c.resize(m, in);
  for (int k = 0; k < m; ++k)
    nd.val.c.row(k) = vd.c.row(k) * vr.k[k].conjugate().transpose();
  return push(std::move(nd));
}

int Graph::outer_ca(int a, int b) {
  const Value& va = nodes_[a].val;
  const Value& vb = nodes_[b].val;
  if (va.kind != Kind::Spec || vb.kind != Kind::Spec)
    shape_fail("outer_ca", "expected (spec, spec)");
  if (va.c.rows() != vb.c.rows()) shape_fail("outer_ca", "mode count");
  int m = static_cast<int>(va.c.rows());
  Node nd;
  nd.op = Op::OuterCa;
  nd.a = a;
  nd.b = b;
  nd.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  nd.val.kind = Kind::Stack;
  nd.val.k.resize(m);
  for (int k = 0; k < m; ++k)
    nd.val.k[k] = va.c.row(k).conjugate().transpose() * vb.c.row(k);
  return push(std::move(nd));
}

int Graph::matmul(int v, int w) {
  const Value& a = nodes_[v].val;
  const Value& b = nodes_[w].val;
  if (a.kind != Kind::Grid || b.kind != Kind::Grid)
    shape_fail("matmul", "expected grids");
  if (a.m.cols() != b.m.rows())
    throw ChannelMismatch("matmul: " + std::to_string(a.m.cols()) + " vs " +
                          std::to_string(b.m.rows()));
  Node nd;
  nd.op = Op::Matmul;
  nd.a = v;
  nd.b = w;
  nd.needs_grad = nodes_[v].needs_grad || nodes_[w].needs_grad;
  nd.val.kind = Kind::Grid;
  nd.val.m = a.m * b.m;
  return push(std::move(nd));
}

int Graph::matmul_t(int v, int w) {
  const Value& a = nodes_[v].val;
  const Value& b = nodes_[w].val;
  if (a.kind != Kind::Grid || b.kind != Kind::Grid)
    shape_fail("matmul_t", "expected grids");
  if (a.m.cols() != b.m.cols()) shape_fail("matmul_t", "inner dims");
  Node nd;
  nd.op = Op::MatmulT;
  nd.a = v;
  nd.b = w;
  nd.needs_grad = nodes_[v].needs_grad || nodes_[w].needs_grad;
  nd.val.kind = Kind::Grid;
  nd.val.m = a.m * b.m.transpose();
  return push(std::move(nd));
}

int Graph::gram(int a, int b) {
  const Value& va = nodes_[a].val;
  const Value& vb = nodes_[b].val;
  if (va.kind != Kind::Grid || vb.kind != Kind::Grid)
    shape_fail("gram", "expected grids");
  if (va.m.rows() != vb.m.rows()) shape_fail("gram", "row count");
  Node nd;
  nd.op = Op::Gram;
  nd.a = a;
  nd.b = b;
  nd.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  nd.val.kind = Kind::Grid;
  nd.val.m = va.m.transpose() * vb.m;
  return push(std::move(nd));
}

int Graph::add_bias(int v, int bias) {
  const Value& a = nodes_[v].val;
  const Value& b = nodes_[bias].val;
  if (a.kind != Kind::Grid || b.kind != Kind::Vec)
    shape_fail("add_bias", "expected (grid, vec)");
  if (a.m.cols() != b.v.size())
    throw ChannelMismatch("add_bias: " + std::to_string(a.m.cols()) + " vs " +
                          std::to_string(b.v.size()));
  Node nd;
  nd.op = Op::AddBias;
  nd.a = v;
  nd.b = bias;
  nd.needs_grad = nodes_[v].needs_grad || nodes_[bias].needs_grad;
  nd.val.kind = Kind::Grid;
  nd.val.m = a.m.rowwise() + b.v.transpose();
  return push(std::move(nd));
}

int Graph::colsum(int v) {
  const Value& a = nodes_[v].val;
  if (a.kind != Kind::Grid) shape_fail("colsum", "expected grid");
  Node nd;
  nd.op = Op::ColSum;
  nd.a = v;
  nd.needs_grad = nodes_[v].needs_grad;
  nd.val.kind = Kind::Vec;
  nd.val.v = a.m.colwise().sum().transpose();
  return push(std::move(nd));
}

int Graph::broadcast(int vec, int n) {
  const Value& a = nodes_[vec].val;
  if (a.kind != Kind::Vec) shape_fail("broadcast", "expected vec");
  Node nd;
  nd.op = Op::Broadcast;
  nd.a = vec;
  nd.i0 = n;
  nd.needs_grad = nodes_[vec].needs_grad;
  nd.val.kind = Kind::Grid;
  nd.val.m = a.v.transpose().replicate(n, 1);
  return push(std::move(nd));
}

int Graph::chan_sum(int v) {
  const Value& a = nodes_[v].val;
  if (a.kind != Kind::Grid) shape_fail("chan_sum", "expected grid");
  Node nd;
  nd.op = Op::ChanSum;
  nd.a = v;
  nd.i0 = static_cast<int>(a.m.cols());
  nd.needs_grad = nodes_[v].needs_grad;
  nd.val.kind = Kind::Grid;
  nd.val.m = a.m.rowwise().sum();
  return push(std::move(nd));
}

int Graph::rep_c(int v, int c) {
  const Value& a = nodes_[v].val;
  if (a.kind != Kind::Grid || a.m.cols() != 1)
    shape_fail("rep_c", "expected single-channel grid");
  Node nd;
  nd.op = Op::RepC;
  nd.a = v;
  nd.i0 = c;
  nd.needs_grad = nodes_[v].needs_grad;
  nd.val.kind = Kind::Grid;
  nd.val.m = a.m.col(0).replicate(1, c);
  return push(std::move(nd));
}

int Graph::add2(int a, int b, double alpha, double beta) {
  const Value& va = nodes_[a].val;
  const Value& vb = nodes_[b].val;
  if (va.kind != vb.kind) shape_fail("add2", "kind mismatch");
  Node nd;
  nd.op = Op::Add2;
  nd.a = a;
  nd.b = b;
  nd.x0 = alpha;
  nd.x1 = beta;
  nd.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  nd.val.kind = va.kind;
  switch (va.kind) {
    case Kind::Grid:
      if (va.m.rows() != vb.m.rows() || va.m.cols() != vb.m.cols())
        shape_fail("add2", "grid shapes");
      nd.val.m = alpha * va.m + beta * vb.m;
      break;
    case Kind::Spec:
      if (va.c.rows() != vb.c.rows() || va.c.cols() != vb.c.cols())
        shape_fail("add2", "spec shapes");
      nd.val.c = alpha * va.c + beta * vb.c;
      break;
    case Kind::Stack: {
      if (va.k.size() != vb.k.size()) shape_fail("add2", "stack depth");
      nd.val.k.resize(va.k.size());
      for (size_t i = 0; i < va.k.size(); ++i)
        nd.val.k[i] = alpha * va.k[i] + beta * vb.k[i];
      break;
    }
    case Kind::Vec:
      if (va.v.size() != vb.v.size()) shape_fail("add2", "vec sizes");
      nd.val.v = alpha * va.v + beta * vb.v;
      break;
    case Kind::Scalar:
      nd.val.s = alpha * va.s + beta * vb.s;
      break;
  }
  return push(std::move(nd));
}

int Graph::scale_c(int a, double alpha) {
  const Value& va = nodes_[a].val;
  Node nd;
  nd.op = Op::ScaleC;
  nd.a = a;
  nd.x0 = alpha;
  nd.needs_grad = nodes_[a].needs_grad;
  nd.val.kind = va.kind;
  switch (va.kind) {
    case Kind::Grid: nd.val.m = alpha * va.m; break;
    case Kind::Spec: nd.val.c = alpha * va.c; break;
    case Kind::Stack: {
      nd.val.k.resize(va.k.size());
      for (size_t i = 0; i < va.k.size(); ++i) nd.val.k[i] = alpha * va.k[i];
      break;
    }
    case Kind::Vec: nd.val.v = alpha * va.v; break;
    case Kind::Scalar: nd.val.s = alpha * va.s; break;
  }
  return push(std::move(nd));
}

int Graph::emul(int a, int b) {
  const Value& va = nodes_[a].val;
  const Value& vb = nodes_[b].val;
  if (va.kind != Kind::Grid || vb.kind != Kind::Grid)
    shape_fail("emul", "expected grids");
  if (va.m.rows() != vb.m.rows() || va.m.cols() != vb.m.cols())
    shape_fail("emul", "shapes");
  Node nd;
  nd.op = Op::Emul;
  nd.a = a;
  nd.b = b;
  nd.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  nd.val.kind = Kind::Grid;
  nd.val.m = va.m.cwiseProduct(vb.m);
  return push(std::move(nd));
}

int Graph::ew(int v, EwFn f) {
  const Value& a = nodes_[v].val;
  if (a.kind != Kind::Grid) shape_fail("ew", "expected grid");
  Node nd;
  nd.op = Op::Ew;
  nd.a = v;
  nd.fn = static_cast<std::uint8_t>(f);
  nd.needs_grad = nodes_[v].needs_grad;
  nd.val.kind = Kind::Grid;
  nd.val.m = a.m.unaryExpr([f](double x) { return ew_eval(f, x); });
  return push(std::move(nd));
}

int Graph::concat2(int a, int b) {
  const Value& va = nodes_[a].val;
  const Value& vb = nodes_[b].val;
  if (va.kind != Kind::Grid || vb.kind != Kind::Grid)
    shape_fail("concat2", "expected grids");
  if (va.m.rows() != vb.m.rows())
    throw ResolutionMismatch("concat2: " + std::to_string(va.m.rows()) +
                             " vs " + std::to_string(vb.m.rows()));
  Node nd;
  nd.op = Op::Concat2;
  nd.a = a;
  nd.b = b;
  nd.i0 = static_cast<int>(va.m.cols());
  nd.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  nd.val.kind = Kind::Grid;
  nd.val.m.resize(va.m.rows(), va.m.cols() + vb.m.cols());
  nd.val.m.leftCols(va.m.cols()) = va.m;
  nd.val.m.rightCols(vb.m.cols()) = vb.m;
  return push(std::move(nd));
}

int Graph::slice_c(int v, int c0, int len) {
  const Value& a = nodes_[v].val;
  if (a.kind != Kind::Grid) shape_fail("slice_c", "expected grid");
  if (c0 < 0 || len < 1 || c0 + len > a.m.cols())
    throw ChannelMismatch("slice_c out of range");
  Node nd;
  nd.op = Op::SliceC;
  nd.a = v;
  nd.i0 = c0;
  nd.i1 = static_cast<int>(a.m.cols());
  nd.needs_grad = nodes_[v].needs_grad;
  nd.val.kind = Kind::Grid;
  nd.val.m = a.m.middleCols(c0, len);
  return push(std::move(nd));
}

int Graph::pad_c(int v, int c0, int total) {
  const Value& a = nodes_[v].val;
  if (a.kind != Kind::Grid) shape_fail("pad_c", "expected grid");
  if (c0 < 0 || c0 + a.m.cols() > total) throw ChannelMismatch("pad_c range");
  Node nd;
  nd.op = Op::PadC;
  nd.a = v;
  nd.i0 = c0;
  nd.needs_grad = nodes_[v].needs_grad;
  nd.val.kind = Kind::Grid;
  nd.val.m = Eigen::MatrixXd::Zero(a.m.rows(), total);
  nd.val.m.middleCols(c0, a.m.cols()) = a.m;
  return push(std::move(nd));
}

int Graph::dot_sum(int a, int b) {
  const Value& va = nodes_[a].val;
  const Value& vb = nodes_[b].val;
  if (va.kind != Kind::Grid || vb.kind != Kind::Grid)
    shape_fail("dot_sum", "expected grids");
  if (va.m.rows() != vb.m.rows() || va.m.cols() != vb.m.cols())
    shape_fail("dot_sum", "shapes");
  Node nd;
  nd.op = Op::DotSum;
  nd.a = a;
  nd.b = b;
  nd.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  nd.val.kind = Kind::Scalar;
  nd.val.s = va.m.cwiseProduct(vb.m).sum();
  return push(std::move(nd));
}

int Graph::scale_by_s(int v, int s) {
  const Value& a = nodes_[v].val;
  const Value& b = nodes_[s].val;
  if (a.kind != Kind::Grid || b.kind != Kind::Scalar)
    shape_fail("scale_by_s", "expected (grid, scalar)");
  Node nd;
  nd.op = Op::ScaleByS;
  nd.a = v;
  nd.b = s;
  nd.needs_grad = nodes_[v].needs_grad || nodes_[s].needs_grad;
  nd.val.kind = Kind::Grid;
  nd.val.m = b.s * a.m;
  return push(std::move(nd));
}

int Graph::smul(int a, int b) {
  const Value& va = nodes_[a].val;
  const Value& vb = nodes_[b].val;
  if (va.kind != Kind::Scalar || vb.kind != Kind::Scalar)
    shape_fail("smul", "expected scalars");
  Node nd;
  nd.op = Op::SMul;
  nd.a = a;
  nd.b = b;
  nd.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  nd.val.kind = Kind::Scalar;
  nd.val.s = va.s * vb.s;
  return push(std::move(nd));
}

int Graph::sfun(int s, SFn f) {
  const Value& a = nodes_[s].val;
  if (a.kind != Kind::Scalar) shape_fail("sfun", "expected scalar");
  Node nd;
  nd.op = Op::SFun;
  nd.a = s;
  nd.fn = static_cast<std::uint8_t>(f);
  nd.needs_grad = nodes_[s].needs_grad;
  nd.val.kind = Kind::Scalar;
  nd.val.s = sfn_eval(f, a.s);
  return push(std::move(nd));
}

int Graph::ones_like(int id) {
  const Value& v = nodes_[id].val;
  switch (v.kind) {
    case Kind::Scalar: return leaf_scalar(1.0);
    case Kind::Grid:
      return leaf_grid(Eigen::MatrixXd::Ones(v.m.rows(), v.m.cols()));
    case Kind::Vec: return leaf_vec(Eigen::VectorXd::Ones(v.v.size()));
    default: break;
  }
  throw ShapeMismatch("backward seed must be scalar, grid, or vec");
}

std::vector<int> Graph::backward(int seed, int seed_cotangent) {
  if (seed < 0 || seed >= size()) throw ShapeMismatch("backward: bad seed id");
  const int n0 = size();
  int cot = seed_cotangent >= 0 ? seed_cotangent : ones_like(seed);
  std::vector<std::vector<int>> contrib(n0);
  std::vector<int> grad_of(n0, -1);
  if (!nodes_[seed].needs_grad) return grad_of;
  contrib[seed].push_back(cot);
  for (int i = seed; i >= 0; --i) {
    if (contrib[i].empty() || !nodes_[i].needs_grad) continue;
    int g = contrib[i][0];
    for (size_t j = 1; j < contrib[i].size(); ++j)
      g = add2(g, contrib[i][j], 1.0, 1.0);
    grad_of[i] = g;
    emit_backward(i, g, contrib);
  }
  return grad_of;
}

void Graph::emit_backward(int id, int grad,
                          std::vector<std::vector<int>>& contrib) {
  // Copy metadata: emitting nodes may reallocate nodes_.
  const Op op = nodes_[id].op;
  const int a = nodes_[id].a;
  const int b = nodes_[id].b;
  const int i0 = nodes_[id].i0;
  const int i1 = nodes_[id].i1;
  const double x0 = nodes_[id].x0;
  const double x1 = nodes_[id].x1;
  const Eigen::VectorXd sc = nodes_[id].scale;
  const std::uint8_t fn = nodes_[id].fn;

  auto want = [&](int arg) { return arg >= 0 && nodes_[arg].needs_grad; };
  auto give = [&](int arg, int node) { contrib[arg].push_back(node); };
  auto scaled = [&](int node, double alpha) {
    return alpha == 1.0 ? node : scale_c(node, alpha);
  };

  switch (op) {
    case Op::Leaf:
      break;
    case Op::Dft: {
      // adjoint of the scaled truncated transform is the matching inverse
      if (want(a)) {
        int n_in = static_cast<int>(nodes_[a].val.m.rows());
        give(a, idft(grad, n_in, sc));
      }
      break;
    }
    case Op::Idft: {
      if (want(a)) {
        int m = static_cast<int>(nodes_[a].val.c.rows());
        give(a, dft(grad, m, sc));
      }
      break;
    }
    case Op::MmN:
      if (want(a)) give(a, mm_a(grad, b));
      if (want(b)) give(b, outer_ca(a, grad));
      break;
    case Op::MmA:
      if (want(a)) give(a, mm_n(grad, b));
      if (want(b)) give(b, outer_ca(grad, a));
      break;
    case Op::OuterCa:
      if (want(a)) give(a, mm_a(b, grad));
      if (want(b)) give(b, mm_n(a, grad));
      break;
    case Op::Matmul:
      if (want(a)) give(a, matmul_t(grad, b));
      if (want(b)) give(b, gram(a, grad));
      break;
    case Op::MatmulT:
      if (want(a)) give(a, matmul(grad, b));
      if (want(b)) give(b, gram(grad, a));
      break;
    case Op::Gram:
      if (want(a)) give(a, matmul_t(b, grad));
      if (want(b)) give(b, matmul(a, grad));
      break;
    case Op::AddBias:
      if (want(a)) give(a, grad);
      if (want(b)) give(b, colsum(grad));
      break;
    case Op::ColSum:
      if (want(a))
        give(a, broadcast(grad, static_cast<int>(nodes_[a].val.m.rows())));
      break;
    case Op::Broadcast:
      if (want(a)) give(a, colsum(grad));
      break;
    case Op::ChanSum:
      if (want(a)) give(a, rep_c(grad, i0));
      break;
    case Op::RepC:
      if (want(a)) give(a, chan_sum(grad));
      break;
    case Op::Add2:
      if (want(a)) give(a, scaled(grad, x0));
      if (want(b)) give(b, scaled(grad, x1));
      break;
    case Op::ScaleC:
      if (want(a)) give(a, scaled(grad, x0));
      break;
    case Op::Emul:
      if (want(a)) give(a, emul(grad, b));
      if (want(b)) give(b, emul(grad, a));
      break;
    case Op::Ew: {
      if (want(a)) {
        EwFn d;
        if (!ew_derivative(static_cast<EwFn>(fn), &d))
          throw TapeMismatch("elementwise function differentiated too deep");
        give(a, emul(grad, ew(a, d)));
      }
      break;
    }
    case Op::Concat2:
      if (want(a)) give(a, slice_c(grad, 0, i0));
      if (want(b))
        give(b, slice_c(grad, i0,
                        static_cast<int>(nodes_[b].val.m.cols())));
      break;
    case Op::SliceC:
      if (want(a))
        give(a, pad_c(grad, i0, i1));
      break;
    case Op::PadC:
      if (want(a))
        give(a, slice_c(grad, i0, static_cast<int>(nodes_[a].val.m.cols())));
      break;
    case Op::DotSum:
      if (want(a)) give(a, scale_by_s(b, grad));
      if (want(b)) give(b, scale_by_s(a, grad));
      break;
    case Op::ScaleByS:
      if (want(a)) give(a, scale_by_s(grad, b));
      if (want(b)) give(b, dot_sum(a, grad));
      break;
    case Op::SMul:
      if (want(a)) give(a, smul(grad, b));
      if (want(b)) give(b, smul(grad, a));
      break;
    case Op::SFun: {
      if (want(a)) {
        SFn d;
        if (!sfn_derivative(static_cast<SFn>(fn), &d))
          throw TapeMismatch("scalar function differentiated too deep");
        give(a, smul(grad, sfun(a, d)));
      }
      break;
    }
  }
}

}  // namespace graph
}  // namespace fsgen
