#pragma once
// Training objectives. Every KL is closed form; the reconstruction term is a
// single-draw reparameterized estimate. Scalars are nats per sample (mean
// over the batch); the sequential loss sums per-step terms before the batch
// mean. The reported reconstruction error is the mean squared reconstruction
// gap per sample (summed over coordinates; averaged over steps when
// sequential), which is a metric, not a term of the objective.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "vaedim/graph.hpp"
#include "vaedim/models.hpp"

namespace vaedim {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

struct LossBreakdown {
  Var total;           // differentiable objective on the tape
  double total_v = 0;  // value snapshots at construction time
  double recon_nll_v = 0;
  double kl_v = 0;
  double recon_mse_v = 0;
  double gamma_v = 0;

  void check() const {
    if (!(std::isfinite(total_v)))
      throw numeric_error("loss total is not finite");
  }
};

// mean over batch of d/2 log(2 pi gamma) + ||x - mu_x||^2 / (2 gamma)
inline Var recon_nll(Var x, Var x_mean, Var log_gamma) {
  Tape& t = *x.tape;
  const std::size_t B = t.value(x).dim(0);
  const std::size_t d = t.value(x).numel() / B;
  Var sse = t.sum(t.square(t.sub(x, x_mean)));
  Var quad = t.scale(t.mul(sse, t.exp(t.scale(log_gamma, -1.0))),
                     0.5 / static_cast<double>(B));
  Var logdet = t.scale(t.add_const(log_gamma, kLog2Pi),
                       0.5 * static_cast<double>(d));
  return t.add(logdet, quad);
}

// KL[N(mean, diag exp(logvar)) || N(0, I)], mean over batch
inline Var kl_diag_std(const GaussHeads& q) {
  Tape& t = *q.mean.tape;
  const std::size_t B = t.value(q.mean).dim(0);
  const std::size_t k = t.value(q.mean).numel() / B;
  Var s = t.add(t.add(t.sum(t.square(q.mean)), t.sum(t.exp(q.logvar))),
                t.scale(t.sum(q.logvar), -1.0));
  return t.add_const(t.scale(s, 0.5 / static_cast<double>(B)),
                     -0.5 * static_cast<double>(k));
}

// KL[q || p] for diagonal Gaussians, mean over batch. Log-variance
// differences keep the ratios in exp space; no division happens.
inline Var kl_diag(const GaussHeads& q, const GaussHeads& p) {
  Tape& t = *q.mean.tape;
  const std::size_t B = t.value(q.mean).dim(0);
  const std::size_t k = t.value(q.mean).numel() / B;
  Var dlv = t.sub(p.logvar, q.logvar);
  Var t1 = t.sum(dlv);
  Var t2 = t.sum(t.exp(t.scale(dlv, -1.0)));
  Var t3 = t.sum(t.mul(t.square(t.sub(q.mean, p.mean)),
                       t.exp(t.scale(p.logvar, -1.0))));
  return t.add_const(
      t.scale(t.add(t.add(t1, t2), t3), 0.5 / static_cast<double>(B)),
      -0.5 * static_cast<double>(k));
}

// KL[N(mean, L L^T) || N(0, I)] with L = lower + diag(exp(logdiag)),
// mean over batch. tr(Sigma) = sum of squared factor entries and
// log det Sigma = 2 sum logdiag.
inline Var kl_full_std(const FullHeads& q) {
  Tape& t = *q.mean.tape;
  const std::size_t B = t.value(q.mean).dim(0);
  const std::size_t k = t.value(q.mean).numel() / B;
  Var s = t.add(t.add(t.sum(t.square(q.lower)),
                      t.sum(t.exp(t.scale(q.logdiag, 2.0)))),
                t.sub(t.sum(t.square(q.mean)),
                      t.scale(t.sum(q.logdiag), 2.0)));
  return t.add_const(t.scale(s, 0.5 / static_cast<double>(B)),
                     -0.5 * static_cast<double>(k));
}

namespace detail {
inline double value_of(Tape& t, Var v) { return t.value(v)[0]; }

// per-sample squared reconstruction gap, averaged over the batch
inline double mse_value(Tape& t, Var x, Var x_mean) {
  const Tensor& a = t.value(x);
  const Tensor& b = t.value(x_mean);
  double sse = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = a[i] - b[i];
    sse += d * d;
  }
  return sse / static_cast<double>(a.dim(0));
}

inline LossBreakdown pack(Tape& t, Var rn, Var kl, double mse, Var log_gamma) {
  LossBreakdown out;
  out.total = t.add(rn, kl);
  out.total_v = value_of(t, out.total);
  out.recon_nll_v = value_of(t, rn);
  out.kl_v = value_of(t, kl);
  out.recon_mse_v = mse;
  out.gamma_v = std::exp(value_of(t, log_gamma));
  out.check();
  return out;
}
}  // namespace detail

// Single-draw objective for the unconditional model. eps: (B, kappa).
inline LossBreakdown elbo_vae(const BoundModel& m, Var x, Var eps) {
  Tape& t = m.tape();
  Var kl, z;
  if (m.spec().cov == Cov::diag) {
    GaussHeads q = m.encode_raw(x);
    kl = kl_diag_std(q);
    z = m.reparam(q, eps);
  } else {
    FullHeads q = m.encode_full(x);
    kl = kl_full_std(q);
    z = m.reparam_full(q, eps);
  }
  Var xm = m.decode(z);
  Var rn = recon_nll(x, xm, m.log_gamma());
  return detail::pack(t, rn, kl, detail::mse_value(t, x, xm), m.log_gamma());
}

// Conditional objective; the prior kind picks the KL reference.
inline LossBreakdown elbo_cvae(const BoundModel& m, Var x, Var c, Var eps) {
  Tape& t = m.tape();
  if (m.spec().cond_dim == 0) return elbo_vae(m, x, eps);
  GaussHeads q = m.posterior(x, c);
  Var kl = m.spec().prior == Prior::conditional
               ? kl_diag(q, m.prior_raw(c))
               : kl_diag_std(q);
  Var z = m.reparam(q, eps);
  Var xm = m.decode(z, c);
  Var rn = recon_nll(x, xm, m.log_gamma());
  return detail::pack(t, rn, kl, detail::mse_value(t, x, xm), m.log_gamma());
}

// Sequential objective: sum over steps of per-step reconstruction and
// KL[q_l || p_l], each a batch mean. xseq: (B, len); noise: (B, len*kappa).
inline LossBreakdown elbo_seq(const BoundModel& m, Var xseq, Var noise) {
  Tape& t = m.tape();
  SeqForward sf = m.seq_forward(xseq, noise);
  const std::size_t len = sf.q.size();
  Var rn, kl;
  double mse = 0.0;
  for (std::size_t l = 0; l < len; ++l) {
    Var xl = t.slice(xseq, l, l + 1);
    Var rl = recon_nll(xl, sf.x_mean[l], m.log_gamma());
    Var kv = kl_diag(sf.q[l], sf.p[l]);
    rn = l == 0 ? rl : t.add(rn, rl);
    kl = l == 0 ? kv : t.add(kl, kv);
    mse += detail::mse_value(t, xl, sf.x_mean[l]);
  }
  return detail::pack(t, rn, kl, mse / static_cast<double>(len), m.log_gamma());
}

}  // namespace vaedim
