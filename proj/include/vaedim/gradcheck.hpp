#pragma once
// Central-difference gradient checking for scalar-valued tape programs.
// The program is a callable (Tape&, leaves) -> scalar Var; it is rebuilt for
// every perturbed evaluation, so it must be deterministic in its inputs.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "vaedim/graph.hpp"
#include "vaedim/tensor.hpp"

namespace vaedim {

using TapeProgram =
    std::function<Var(Tape&, const std::vector<Var>&)>;

// Largest relative disagreement between two gradients, entry by entry.
inline double max_rel_diff(const std::vector<Tensor>& a,
                           const std::vector<Tensor>& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < a[k].numel(); ++i) {
      double den = std::max({1.0, std::fabs(a[k][i]), std::fabs(b[k][i])});
      worst = std::max(worst, std::fabs(a[k][i] - b[k][i]) / den);
    }
  return worst;
}

inline double eval_program(const TapeProgram& f, const std::vector<Tensor>& at) {
  Tape t;
  std::vector<Var> leaves;
  leaves.reserve(at.size());
  for (const Tensor& x : at) leaves.push_back(t.input(x));
  Var root = f(t, leaves);
  return t.value(root)[0];
}

inline std::vector<Tensor> tape_gradient(const TapeProgram& f,
                                         const std::vector<Tensor>& at) {
  Tape t;
  std::vector<Var> leaves;
  leaves.reserve(at.size());
  for (const Tensor& x : at) leaves.push_back(t.param(x));
  Var root = f(t, leaves);
  t.backward(root);
  std::vector<Tensor> grads;
  grads.reserve(at.size());
  for (Var v : leaves) grads.push_back(t.grad(v));
  return grads;
}

inline std::vector<Tensor> numeric_gradient(const TapeProgram& f,
                                            std::vector<Tensor> at,
                                            double eps) {
  std::vector<Tensor> grads;
  grads.reserve(at.size());
  for (std::size_t k = 0; k < at.size(); ++k) {
    Tensor g(at[k].shape());
    for (std::size_t i = 0; i < at[k].numel(); ++i) {
      const double keep = at[k][i];
      at[k][i] = keep + eps;
      const double hi = eval_program(f, at);
      at[k][i] = keep - eps;
      const double lo = eval_program(f, at);
      at[k][i] = keep;
      g[i] = (hi - lo) / (2.0 * eps);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

// Max relative error between the tape gradient and central differences.
inline double grad_check(const TapeProgram& f, const std::vector<Tensor>& at,
                         double eps = 1e-5) {
  return max_rel_diff(tape_gradient(f, at), numeric_gradient(f, at, eps));
}

}  // namespace vaedim
