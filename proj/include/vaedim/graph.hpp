#pragma once
// Reverse-mode automatic differentiation on a define-by-run tape.
//
// Each operation appends a node holding its dense output; backward() runs one
// reverse sweep accumulating adjoints into every node that (transitively)
// depends on a gradient-carrying leaf. Node evaluation is eager and pure:
// recompute() re-evaluates the recorded program and must reproduce every
// value bit for bit.
//
// Every op validates shapes up front (shape_error) and checks its output for
// non-finite entries (numeric_error naming the node). Leaf adjoints sum
// across repeated backward() calls; interior adjoints are reset on each call
// and are only valid for the most recent one.

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vaedim/tensor.hpp"

namespace vaedim {

class shape_error : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
class numeric_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Op : std::uint8_t {
  leaf,
  matmul,      // (m,k) x (k,n) -> (m,n)
  bmatvec,     // (B,m,k) x (B,k) -> (B,m)
  add,         // same shape, or rhs broadcast over leading axis
  sub,         // same shape
  mul,         // same shape, or rhs broadcast over leading axis
  sigmoid,
  tanh_,
  softplus,
  exp_,
  log_,
  square,
  sum,         // all entries -> scalar
  mean,        // all entries -> scalar
  concat,      // along last axis, rank 2
  slice,       // along last axis, rank 2
  tril_strict, // rank 3: zero entries with col >= row
  diag_embed,  // (B,k) -> (B,k,k)
  reshape,
  scale,       // x * constant
  add_const,   // x + constant
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::matmul: return "matmul";
    case Op::bmatvec: return "bmatvec";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::sigmoid: return "sigmoid";
    case Op::tanh_: return "tanh";
    case Op::softplus: return "softplus";
    case Op::exp_: return "exp";
    case Op::log_: return "log";
    case Op::square: return "square";
    case Op::sum: return "sum";
    case Op::mean: return "mean";
    case Op::concat: return "concat";
    case Op::slice: return "slice";
    case Op::tril_strict: return "tril_strict";
    case Op::diag_embed: return "diag_embed";
    case Op::reshape: return "reshape";
    case Op::scale: return "scale";
    case Op::add_const: return "add_const";
  }
  return "?";
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double stable_softplus(double x) {
  if (x > 30.0) return x + std::exp(-x);
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

class Tape {
 public:
  Var input(Tensor value) { return leaf(std::move(value), false); }
  Var param(Tensor value) { return leaf(std::move(value), true); }

  Var leaf(Tensor value, bool requires_grad) {
    Node n;
    n.op = Op::leaf;
    n.val = std::move(value);
    n.req = requires_grad;
    return push(std::move(n));
  }

  const Tensor& value(Var v) const { return node(v).val; }
  std::size_t size() const { return nodes_.size(); }

  // Adjoint of v after backward(); empty tensor if v never received one.
  const Tensor& grad(Var v) const { return node(v).adj; }

  void clear() { nodes_.clear(); }

  // ---- operations ------------------------------------------------------

  Var matmul(Var a, Var b) {
    const Tensor& A = node(a).val;
    const Tensor& B = node(b).val;
    if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0))
      fail_shape("matmul", A.shape(), B.shape());
    Node n = binary(Op::matmul, a, b);
    n.val = Tensor({A.dim(0), B.dim(1)});
    eval_matmul(A, B, n.val);
    return push(std::move(n));
  }

  Var bmatvec(Var a, Var v) {
    const Tensor& A = node(a).val;
    const Tensor& x = node(v).val;
    if (A.rank() != 3 || x.rank() != 2 || A.dim(0) != x.dim(0) ||
        A.dim(2) != x.dim(1))
      fail_shape("bmatvec", A.shape(), x.shape());
    Node n = binary(Op::bmatvec, a, v);
    n.val = Tensor({A.dim(0), A.dim(1)});
    eval_bmatvec(A, x, n.val);
    return push(std::move(n));
  }

  Var add(Var a, Var b) { return broadcast_binary(Op::add, a, b); }
  Var mul(Var a, Var b) { return broadcast_binary(Op::mul, a, b); }

  Var sub(Var a, Var b) {
    const Tensor& A = node(a).val;
    const Tensor& B = node(b).val;
    if (!A.same_shape(B)) fail_shape("sub", A.shape(), B.shape());
    Node n = binary(Op::sub, a, b);
    n.val = Tensor(A.shape());
    for (std::size_t i = 0; i < A.numel(); ++i) n.val[i] = A[i] - B[i];
    return push(std::move(n));
  }

  Var sigmoid(Var a) { return unary(Op::sigmoid, a); }
  Var tanh(Var a) { return unary(Op::tanh_, a); }
  Var softplus(Var a) { return unary(Op::softplus, a); }
  Var exp(Var a) { return unary(Op::exp_, a); }
  Var log(Var a) { return unary(Op::log_, a); }
  Var square(Var a) { return unary(Op::square, a); }

  Var sum(Var a) { return reduce(Op::sum, a); }
  Var mean(Var a) { return reduce(Op::mean, a); }

  Var concat(Var a, Var b) {
    const Tensor& A = node(a).val;
    const Tensor& B = node(b).val;
    if (A.rank() != 2 || B.rank() != 2 || A.dim(0) != B.dim(0))
      fail_shape("concat", A.shape(), B.shape());
    Node n = binary(Op::concat, a, b);
    n.a = A.dim(1);  // split point
    n.val = Tensor({A.dim(0), A.dim(1) + B.dim(1)});
    std::size_t rows = A.dim(0), ca = A.dim(1), cb = B.dim(1);
    for (std::size_t r = 0; r < rows; ++r) {
      double* out = n.val.data() + r * (ca + cb);
      const double* pa = A.data() + r * ca;
      const double* pb = B.data() + r * cb;
      for (std::size_t j = 0; j < ca; ++j) out[j] = pa[j];
      for (std::size_t j = 0; j < cb; ++j) out[ca + j] = pb[j];
    }
    return push(std::move(n));
  }

  Var slice(Var a, std::size_t lo, std::size_t hi) {
    const Tensor& A = node(a).val;
    if (A.rank() != 2 || lo >= hi || hi > A.dim(1))
      throw shape_error(std::string("slice: bounds [") + std::to_string(lo) +
                        "," + std::to_string(hi) + ") on " +
                        shape_str(A.shape()));
    Node n = binary(Op::slice, a, Var{});
    n.a = lo;
    n.b = hi;
    n.val = Tensor({A.dim(0), hi - lo});
    std::size_t rows = A.dim(0), cols = A.dim(1), w = hi - lo;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* src = A.data() + r * cols + lo;
      double* dst = n.val.data() + r * w;
      for (std::size_t j = 0; j < w; ++j) dst[j] = src[j];
    }
    return push(std::move(n));
  }

  Var tril_strict(Var a) {
    const Tensor& A = node(a).val;
    if (A.rank() != 3 || A.dim(1) != A.dim(2))
      fail_shape("tril_strict", A.shape(), Shape{});
    Node n = binary(Op::tril_strict, a, Var{});
    n.val = A;
    std::size_t bs = A.dim(0), k = A.dim(1);
    for (std::size_t b = 0; b < bs; ++b)
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i; j < k; ++j) n.val[(b * k + i) * k + j] = 0.0;
    return push(std::move(n));
  }

  Var diag_embed(Var a) {
    const Tensor& A = node(a).val;
    if (A.rank() != 2) fail_shape("diag_embed", A.shape(), Shape{});
    Node n = binary(Op::diag_embed, a, Var{});
    std::size_t bs = A.dim(0), k = A.dim(1);
    n.val = Tensor({bs, k, k});
    for (std::size_t b = 0; b < bs; ++b)
      for (std::size_t i = 0; i < k; ++i)
        n.val[(b * k + i) * k + i] = A[b * k + i];
    return push(std::move(n));
  }

  Var reshape(Var a, Shape shape) {
    const Tensor& A = node(a).val;
    if (shape_numel(shape) != A.numel())
      fail_shape("reshape", A.shape(), shape);
    Node n = binary(Op::reshape, a, Var{});
    n.val = Tensor(std::move(shape), A.vec());
    return push(std::move(n));
  }

  Var scale(Var a, double c) {
    Node n = binary(Op::scale, a, Var{});
    n.c = c;
    const Tensor& A = node(a).val;
    n.val = Tensor(A.shape());
    for (std::size_t i = 0; i < A.numel(); ++i) n.val[i] = c * A[i];
    return push(std::move(n));
  }

  Var add_const(Var a, double c) {
    Node n = binary(Op::add_const, a, Var{});
    n.c = c;
    const Tensor& A = node(a).val;
    n.val = Tensor(A.shape());
    for (std::size_t i = 0; i < A.numel(); ++i) n.val[i] = A[i] + c;
    return push(std::move(n));
  }

  // ---- differentiation ---------------------------------------------------

  void backward(Var root) {
    Node& rn = node(root);
    if (rn.val.numel() != 1)
      throw shape_error("backward: root must be scalar, got " +
                        shape_str(rn.val.shape()));
    if (!rn.req) return;  // nothing depends on a gradient-carrying leaf
    for (Node& n : nodes_) {
      if (!n.req) continue;
      if (n.adj.numel() == 0)
        n.adj = Tensor(n.val.shape());
      else if (n.op != Op::leaf)
        n.adj.fill(0.0);
    }
    node(root).adj[0] += 1.0;
    for (int id = root.id; id >= 0; --id) accumulate(id);
  }

  // Re-evaluates every recorded node in program order (leaves keep their
  // values). Forward evaluation is pure, so values must not change.
  void recompute() {
    for (std::size_t id = 0; id < nodes_.size(); ++id) reeval(static_cast<int>(id));
  }

 private:
  struct Node {
    Op op = Op::leaf;
    std::array<int, 2> in{-1, -1};
    Tensor val;
    Tensor adj;
    bool req = false;
    double c = 0.0;          // scale / add_const constant
    std::size_t a = 0, b = 0;  // slice bounds, concat split
  };

  std::vector<Node> nodes_;

  Node& node(Var v) { return nodes_.at(static_cast<std::size_t>(v.id)); }
  const Node& node(Var v) const {
    return nodes_.at(static_cast<std::size_t>(v.id));
  }

  Node binary(Op op, Var a, Var b) {
    Node n;
    n.op = op;
    n.in[0] = a.id;
    n.in[1] = b.id;
    n.req = (a.valid() && node(a).req) || (b.valid() && node(b).req);
    return n;
  }

  [[noreturn]] void fail_shape(const char* op, const Shape& a, const Shape& b) {
    std::string msg = std::string(op) + ": incompatible shapes " + shape_str(a);
    if (!b.empty()) msg += " and " + shape_str(b);
    throw shape_error(msg);
  }

  Var push(Node n) {
    check_finite(n);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size() - 1)};
  }

  void check_finite(const Node& n) const {
    for (std::size_t i = 0; i < n.val.numel(); ++i)
      if (!std::isfinite(n.val[i]))
        throw numeric_error(std::string("non-finite output in node #") +
                            std::to_string(nodes_.size()) + " (" +
                            op_name(n.op) + ")");
  }

  // rhs may drop the leading axis: (B,n)+(n), (B,m,n)+(m,n).
  static bool bcast_ok(const Tensor& A, const Tensor& B) {
    if (A.same_shape(B)) return true;
    if (B.rank() + 1 != A.rank()) return false;
    for (std::size_t i = 0; i < B.rank(); ++i)
      if (A.dim(i + 1) != B.dim(i)) return false;
    return true;
  }

  Var broadcast_binary(Op op, Var a, Var b) {
    const Tensor& A = node(a).val;
    const Tensor& B = node(b).val;
    if (!bcast_ok(A, B)) fail_shape(op_name(op), A.shape(), B.shape());
    Node n = binary(op, a, b);
    n.val = Tensor(A.shape());
    std::size_t nb = B.numel();
    if (op == Op::add) {
      for (std::size_t i = 0; i < A.numel(); ++i) n.val[i] = A[i] + B[i % nb];
    } else {
      for (std::size_t i = 0; i < A.numel(); ++i) n.val[i] = A[i] * B[i % nb];
    }
    return push(std::move(n));
  }

  Var unary(Op op, Var a) {
    Node n = binary(op, a, Var{});
    const Tensor& A = node(a).val;
    n.val = Tensor(A.shape());
    eval_unary(op, A, n.val, static_cast<int>(nodes_.size()));
    return push(std::move(n));
  }

  void eval_unary(Op op, const Tensor& A, Tensor& out, int id) const {
    const std::size_t n = A.numel();
    switch (op) {
      case Op::sigmoid:
        for (std::size_t i = 0; i < n; ++i) out[i] = stable_sigmoid(A[i]);
        break;
      case Op::tanh_:
        for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(A[i]);
        break;
      case Op::softplus:
        for (std::size_t i = 0; i < n; ++i) out[i] = stable_softplus(A[i]);
        break;
      case Op::exp_:
        for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(A[i]);
        break;
      case Op::log_:
        for (std::size_t i = 0; i < n; ++i) {
          if (A[i] <= 0.0)
            throw numeric_error("log: non-positive input in node #" +
                                std::to_string(id));
          out[i] = std::log(A[i]);
        }
        break;
      case Op::square:
        for (std::size_t i = 0; i < n; ++i) out[i] = A[i] * A[i];
        break;
      default:
        throw std::logic_error("eval_unary: bad op");
    }
  }

  Var reduce(Op op, Var a) {
    Node n = binary(op, a, Var{});
    const Tensor& A = node(a).val;
    double acc = 0.0;
    for (std::size_t i = 0; i < A.numel(); ++i) acc += A[i];
    if (op == Op::mean) acc /= static_cast<double>(A.numel());
    n.val = Tensor::scalar(acc);
    return push(std::move(n));
  }

  static void eval_matmul(const Tensor& A, const Tensor& B, Tensor& C) {
    const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
    C.fill(0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = A.data() + i * k;
      double* crow = C.data() + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = arow[p];
        const double* brow = B.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }

  static void eval_bmatvec(const Tensor& A, const Tensor& x, Tensor& out) {
    const std::size_t bs = A.dim(0), m = A.dim(1), k = A.dim(2);
    for (std::size_t b = 0; b < bs; ++b) {
      const double* xb = x.data() + b * k;
      for (std::size_t i = 0; i < m; ++i) {
        const double* arow = A.data() + (b * m + i) * k;
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += arow[p] * xb[p];
        out[b * m + i] = acc;
      }
    }
  }

  void reeval(int id) {
    Node& n = nodes_[id];
    if (n.op == Op::leaf) return;
    const Tensor& A = nodes_[n.in[0]].val;
    switch (n.op) {
      case Op::matmul:
        eval_matmul(A, nodes_[n.in[1]].val, n.val);
        break;
      case Op::bmatvec:
        eval_bmatvec(A, nodes_[n.in[1]].val, n.val);
        break;
      case Op::add:
      case Op::mul: {
        const Tensor& B = nodes_[n.in[1]].val;
        std::size_t nb = B.numel();
        if (n.op == Op::add)
          for (std::size_t i = 0; i < A.numel(); ++i) n.val[i] = A[i] + B[i % nb];
        else
          for (std::size_t i = 0; i < A.numel(); ++i) n.val[i] = A[i] * B[i % nb];
        break;
      }
      case Op::sub: {
        const Tensor& B = nodes_[n.in[1]].val;
        for (std::size_t i = 0; i < A.numel(); ++i) n.val[i] = A[i] - B[i];
        break;
      }
      case Op::sum:
      case Op::mean: {
        double acc = 0.0;
        for (std::size_t i = 0; i < A.numel(); ++i) acc += A[i];
        if (n.op == Op::mean) acc /= static_cast<double>(A.numel());
        n.val[0] = acc;
        break;
      }
      case Op::concat: {
        const Tensor& B = nodes_[n.in[1]].val;
        std::size_t rows = A.dim(0), ca = A.dim(1), cb = B.dim(1);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < ca + cb; ++j)
            n.val[r * (ca + cb) + j] =
                j < ca ? A[r * ca + j] : B[r * cb + (j - ca)];
        break;
      }
      case Op::slice: {
        std::size_t cols = A.dim(1), w = n.b - n.a;
        for (std::size_t r = 0; r < A.dim(0); ++r)
          for (std::size_t j = 0; j < w; ++j)
            n.val[r * w + j] = A[r * cols + n.a + j];
        break;
      }
      case Op::tril_strict: {
        std::size_t bs = A.dim(0), k = A.dim(1);
        for (std::size_t b = 0; b < bs; ++b)
          for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j)
              n.val[(b * k + i) * k + j] = j < i ? A[(b * k + i) * k + j] : 0.0;
        break;
      }
      case Op::diag_embed: {
        std::size_t bs = A.dim(0), k = A.dim(1);
        n.val.fill(0.0);
        for (std::size_t b = 0; b < bs; ++b)
          for (std::size_t i = 0; i < k; ++i)
            n.val[(b * k + i) * k + i] = A[b * k + i];
        break;
      }
      case Op::reshape:
        for (std::size_t i = 0; i < A.numel(); ++i) n.val[i] = A[i];
        break;
      case Op::scale:
        for (std::size_t i = 0; i < A.numel(); ++i) n.val[i] = n.c * A[i];
        break;
      case Op::add_const:
        for (std::size_t i = 0; i < A.numel(); ++i) n.val[i] = A[i] + n.c;
        break;
      default:
        eval_unary(n.op, A, n.val, id);
    }
    check_finite(n);
  }

  void accumulate(int id) {
    Node& n = nodes_[id];
    if (!n.req || n.adj.numel() == 0 || n.op == Op::leaf) return;
    Node& x = nodes_[n.in[0]];
    Tensor& g = n.adj;
    switch (n.op) {
      case Op::matmul: {
        Node& y = nodes_[n.in[1]];
        const std::size_t m = x.val.dim(0), k = x.val.dim(1), c = y.val.dim(1);
        if (x.req) {  // dX += G * Y^T
          for (std::size_t i = 0; i < m; ++i) {
            const double* grow = g.data() + i * c;
            double* xrow = x.adj.data() + i * k;
            for (std::size_t p = 0; p < k; ++p) {
              const double* yrow = y.val.data() + p * c;
              double acc = 0.0;
              for (std::size_t j = 0; j < c; ++j) acc += grow[j] * yrow[j];
              xrow[p] += acc;
            }
          }
        }
        if (y.req) {  // dY += X^T * G
          for (std::size_t i = 0; i < m; ++i) {
            const double* xrow = x.val.data() + i * k;
            const double* grow = g.data() + i * c;
            for (std::size_t p = 0; p < k; ++p) {
              const double xv = xrow[p];
              double* yrow = y.adj.data() + p * c;
              for (std::size_t j = 0; j < c; ++j) yrow[j] += xv * grow[j];
            }
          }
        }
        break;
      }
      case Op::bmatvec: {
        Node& y = nodes_[n.in[1]];
        const std::size_t bs = x.val.dim(0), m = x.val.dim(1), k = x.val.dim(2);
        for (std::size_t b = 0; b < bs; ++b) {
          const double* gb = g.data() + b * m;
          const double* vb = y.val.data() + b * k;
          for (std::size_t i = 0; i < m; ++i) {
            if (x.req) {
              double* arow = x.adj.data() + (b * m + i) * k;
              for (std::size_t p = 0; p < k; ++p) arow[p] += gb[i] * vb[p];
            }
            if (y.req) {
              const double* arow = x.val.data() + (b * m + i) * k;
              double* vadj = y.adj.data() + b * k;
              for (std::size_t p = 0; p < k; ++p) vadj[p] += gb[i] * arow[p];
            }
          }
        }
        break;
      }
      case Op::add: {
        Node& y = nodes_[n.in[1]];
        if (x.req)
          for (std::size_t i = 0; i < g.numel(); ++i) x.adj[i] += g[i];
        if (y.req) {  // broadcast operand: sum over the leading axis
          std::size_t nb = y.val.numel();
          for (std::size_t i = 0; i < g.numel(); ++i) y.adj[i % nb] += g[i];
        }
        break;
      }
      case Op::mul: {
        Node& y = nodes_[n.in[1]];
        std::size_t nb = y.val.numel();
        if (x.req)
          for (std::size_t i = 0; i < g.numel(); ++i)
            x.adj[i] += g[i] * y.val[i % nb];
        if (y.req)
          for (std::size_t i = 0; i < g.numel(); ++i)
            y.adj[i % nb] += g[i] * x.val[i];
        break;
      }
      case Op::sub: {
        Node& y = nodes_[n.in[1]];
        if (x.req)
          for (std::size_t i = 0; i < g.numel(); ++i) x.adj[i] += g[i];
        if (y.req)
          for (std::size_t i = 0; i < g.numel(); ++i) y.adj[i] -= g[i];
        break;
      }
      case Op::sigmoid:
        for (std::size_t i = 0; i < g.numel(); ++i)
          x.adj[i] += g[i] * n.val[i] * (1.0 - n.val[i]);
        break;
      case Op::tanh_:
        for (std::size_t i = 0; i < g.numel(); ++i)
          x.adj[i] += g[i] * (1.0 - n.val[i] * n.val[i]);
        break;
      case Op::softplus:
        for (std::size_t i = 0; i < g.numel(); ++i)
          x.adj[i] += g[i] * stable_sigmoid(x.val[i]);
        break;
      case Op::exp_:
        for (std::size_t i = 0; i < g.numel(); ++i) x.adj[i] += g[i] * n.val[i];
        break;
      case Op::log_:
        for (std::size_t i = 0; i < g.numel(); ++i) x.adj[i] += g[i] / x.val[i];
        break;
      case Op::square:
        for (std::size_t i = 0; i < g.numel(); ++i)
          x.adj[i] += 2.0 * g[i] * x.val[i];
        break;
      case Op::sum:
        for (std::size_t i = 0; i < x.adj.numel(); ++i) x.adj[i] += g[0];
        break;
      case Op::mean: {
        double s = g[0] / static_cast<double>(x.val.numel());
        for (std::size_t i = 0; i < x.adj.numel(); ++i) x.adj[i] += s;
        break;
      }
      case Op::concat: {
        Node& y = nodes_[n.in[1]];
        std::size_t rows = x.val.dim(0), ca = n.a, cb = y.val.dim(1);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* grow = g.data() + r * (ca + cb);
          if (x.req)
            for (std::size_t j = 0; j < ca; ++j) x.adj[r * ca + j] += grow[j];
          if (y.req)
            for (std::size_t j = 0; j < cb; ++j)
              y.adj[r * cb + j] += grow[ca + j];
        }
        break;
      }
      case Op::slice: {
        std::size_t cols = x.val.dim(1), w = n.b - n.a;
        for (std::size_t r = 0; r < x.val.dim(0); ++r)
          for (std::size_t j = 0; j < w; ++j)
            x.adj[r * cols + n.a + j] += g[r * w + j];
        break;
      }
      case Op::tril_strict: {
        std::size_t bs = x.val.dim(0), k = x.val.dim(1);
        for (std::size_t b = 0; b < bs; ++b)
          for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < i; ++j)
              x.adj[(b * k + i) * k + j] += g[(b * k + i) * k + j];
        break;
      }
      case Op::diag_embed: {
        std::size_t bs = x.val.dim(0), k = x.val.dim(1);
        for (std::size_t b = 0; b < bs; ++b)
          for (std::size_t i = 0; i < k; ++i)
            x.adj[b * k + i] += g[(b * k + i) * k + i];
        break;
      }
      case Op::reshape:
        for (std::size_t i = 0; i < g.numel(); ++i) x.adj[i] += g[i];
        break;
      case Op::scale:
        for (std::size_t i = 0; i < g.numel(); ++i) x.adj[i] += n.c * g[i];
        break;
      case Op::add_const:
        for (std::size_t i = 0; i < g.numel(); ++i) x.adj[i] += g[i];
        break;
      case Op::leaf:
        break;
      default:
        throw std::logic_error("backward: bad op");
    }
  }
};

// Free-function spellings so formulas read naturally.
inline Var matmul(Var a, Var b) { return a.tape->matmul(a, b); }
inline Var bmatvec(Var a, Var v) { return a.tape->bmatvec(a, v); }
inline Var add(Var a, Var b) { return a.tape->add(a, b); }
inline Var sub(Var a, Var b) { return a.tape->sub(a, b); }
inline Var mul(Var a, Var b) { return a.tape->mul(a, b); }
inline Var sigmoid(Var a) { return a.tape->sigmoid(a); }
inline Var tanh(Var a) { return a.tape->tanh(a); }
inline Var softplus(Var a) { return a.tape->softplus(a); }
inline Var exp(Var a) { return a.tape->exp(a); }
inline Var log(Var a) { return a.tape->log(a); }
inline Var square(Var a) { return a.tape->square(a); }
inline Var sum(Var a) { return a.tape->sum(a); }
inline Var mean(Var a) { return a.tape->mean(a); }
inline Var concat(Var a, Var b) { return a.tape->concat(a, b); }
inline Var slice(Var a, std::size_t lo, std::size_t hi) {
  return a.tape->slice(a, lo, hi);
}
inline Var tril_strict(Var a) { return a.tape->tril_strict(a); }
inline Var diag_embed(Var a) { return a.tape->diag_embed(a); }
inline Var reshape(Var a, Shape s) { return a.tape->reshape(a, std::move(s)); }
inline Var scale(Var a, double c) { return a.tape->scale(a, c); }
inline Var add_const(Var a, double c) { return a.tape->add_const(a, c); }

}  // namespace vaedim
