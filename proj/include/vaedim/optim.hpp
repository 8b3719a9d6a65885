#pragma once
// Adam with bias correction. All state is 64-bit and updates follow the
// parameter registration order, so trajectories are reproducible bit for bit.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "vaedim/graph.hpp"
#include "vaedim/tensor.hpp"

namespace vaedim {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  std::size_t step_count() const { return step_; }

  // params[i] must keep its shape across calls; names are used in errors.
  void step(std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
            const std::vector<std::string>& names) {
    if (params.size() != grads.size() || params.size() != names.size())
      throw std::invalid_argument("Adam::step: size mismatch");
    if (m_.empty()) {
      for (const Tensor* p : params) {
        m_.emplace_back(p->shape());
        v_.emplace_back(p->shape());
      }
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Tensor& p = *params[k];
      const Tensor& g = *grads[k];
      if (!p.same_shape(g) || !p.same_shape(m_[k]))
        throw shape_error("Adam::step: shape mismatch for " + names[k]);
      Tensor& m = m_[k];
      Tensor& v = v_[k];
      for (std::size_t i = 0; i < p.numel(); ++i) {
        const double gi = g[i];
        if (!std::isfinite(gi))
          throw numeric_error("Adam::step: non-finite gradient for " +
                              names[k]);
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::size_t step_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace vaedim
