#pragma once
// A conditional-prior model can be read against the standard normal prior
// without changing the distribution it defines: standardize the posterior by
// the prior, undo the map in front of the decoder. The verification couples
// both readings through shared noise, so agreement is checked per sample at
// float precision rather than statistically.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "vaedim/datagen.hpp"
#include "vaedim/losses.hpp"
#include "vaedim/models.hpp"
#include "vaedim/rng.hpp"

namespace vaedim {

struct ConversionReport {
  double max_elbo_diff = 0.0;   // per-sample objective, both KL terms included
  double max_kl_diff = 0.0;
  double max_recon_diff = 0.0;  // per-sample reconstruction log-likelihood
  double generative_discrepancy = 0.0;  // decoded prior draws, coupled noise
  std::size_t n_evaluated = 0;

  bool equivalent(double tol = 1e-9) const {
    return max_elbo_diff < tol && generative_discrepancy < tol;
  }
};

// Same parameter values, re-read against the standard prior.
inline ModelParams convert_to_standard_prior(const ModelParams& p) {
  ModelParams out = p;
  out.spec = converted_spec(p.spec);
  return out;
}

namespace detail {
constexpr std::uint64_t convert_noise_stream = 0xC0417;

inline bool same_architecture(const ModelSpec& a, const ModelSpec& b) {
  return a.d == b.d && a.cond_dim == b.cond_dim && a.kappa == b.kappa &&
         a.hidden == b.hidden && a.cond_feat == b.cond_feat &&
         a.gate_hidden == b.gate_hidden && a.cov == b.cov && a.gate == b.gate &&
         a.sigmoid_out == b.sigmoid_out && a.recurrent == b.recurrent &&
         a.share_weights == b.share_weights && a.cell == b.cell &&
         a.rnn_hidden == b.rnn_hidden && a.dec_hidden == b.dec_hidden;
}
}  // namespace detail

// Paired evaluation of the original and converted readings. The first
// n_eval rows feed the objective comparison; n_gen prior draws (conditioned
// on rows cycled from the dataset) feed the generative comparison.
inline ConversionReport verify_equivalence(const ModelParams& orig,
                                           const ModelParams& conv,
                                           const ManifoldDataset& data,
                                           std::size_t n_eval,
                                           std::size_t n_gen,
                                           std::uint64_t noise_seed) {
  if (orig.spec.prior != Prior::conditional)
    throw std::invalid_argument("verify_equivalence: original model must use the conditional prior");
  if (conv.spec.prior != Prior::converted)
    throw std::invalid_argument("verify_equivalence: converted model expected on the right");
  if (!detail::same_architecture(orig.spec, conv.spec))
    throw std::invalid_argument("verify_equivalence: architectures differ");
  if (orig.spec.d != data.d() || orig.spec.cond_dim != data.cond_dim())
    throw shape_error("verify_equivalence: dataset does not match the model");
  if (n_eval < 1 || data.n() < 1)
    throw std::invalid_argument("verify_equivalence: nothing to evaluate");

  const std::size_t d = orig.spec.d, k = orig.spec.kappa;
  const std::size_t tc = orig.spec.cond_dim;
  const std::size_t n = std::min(n_eval, data.n());
  Rng noise = Rng::stream(noise_seed, detail::convert_noise_stream);

  ConversionReport rep;
  rep.n_evaluated = n;
  const double lg_a = orig.log_gamma(), lg_b = conv.log_gamma();

  constexpr std::size_t chunk = 256;
  for (std::size_t lo = 0; lo < n; lo += chunk) {
    const std::size_t hi = std::min(n, lo + chunk);
    const std::size_t B = hi - lo;
    Tensor xb({B, d}), cb({B, tc});
    for (std::size_t i = 0; i < B; ++i) {
      for (std::size_t j = 0; j < d; ++j) xb.at(i, j) = data.X.at(lo + i, j);
      for (std::size_t j = 0; j < tc; ++j) cb.at(i, j) = data.C.at(lo + i, j);
    }
    const Tensor epsb = noise.normal_tensor({B, k});

    // original reading
    Tape ta;
    BoundModel a(ta, orig);
    Var xa = ta.input(xb), ca = ta.input(cb), ea = ta.input(epsb);
    GaussHeads qa = a.posterior(xa, ca);
    GaussHeads pa = a.prior_raw(ca);
    Var xma = a.decode(a.reparam(qa, ea), ca);
    const Tensor& mq = ta.value(qa.mean);
    const Tensor& lq = ta.value(qa.logvar);
    const Tensor& mp = ta.value(pa.mean);
    const Tensor& lp = ta.value(pa.logvar);
    const Tensor& ra = ta.value(xma);

    // converted reading, same noise
    Tape tb;
    BoundModel b(tb, conv);
    Var xv = tb.input(xb), cv = tb.input(cb), ev = tb.input(epsb);
    GaussHeads qb = b.posterior(xv, cv);
    Var xmb = b.decode(b.reparam(qb, ev), cv);
    const Tensor& ms = tb.value(qb.mean);
    const Tensor& ls = tb.value(qb.logvar);
    const Tensor& rb = tb.value(xmb);

    for (std::size_t i = 0; i < B; ++i) {
      double kl_a = 0.0, kl_b = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double dm = mq[i * k + j] - mp[i * k + j];
        const double dl = lq[i * k + j] - lp[i * k + j];
        kl_a += 0.5 * (std::exp(dl) + dm * dm * std::exp(-lp[i * k + j]) -
                       1.0 - dl);
        kl_b += 0.5 * (std::exp(ls[i * k + j]) +
                       ms[i * k + j] * ms[i * k + j] - 1.0 - ls[i * k + j]);
      }
      double sse_a = 0.0, sse_b = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double eaj = xb.at(i, j) - ra[i * d + j];
        const double ebj = xb.at(i, j) - rb[i * d + j];
        sse_a += eaj * eaj;
        sse_b += ebj * ebj;
      }
      const double rec_a =
          0.5 * d * (kLog2Pi + lg_a) + 0.5 * std::exp(-lg_a) * sse_a;
      const double rec_b =
          0.5 * d * (kLog2Pi + lg_b) + 0.5 * std::exp(-lg_b) * sse_b;
      rep.max_kl_diff = std::max(rep.max_kl_diff, std::fabs(kl_a - kl_b));
      rep.max_recon_diff = std::max(rep.max_recon_diff, std::fabs(rec_a - rec_b));
      rep.max_elbo_diff = std::max(rep.max_elbo_diff,
                                   std::fabs((rec_a + kl_a) - (rec_b + kl_b)));
    }
  }

  // generative check: a prior draw decoded through either reading
  for (std::size_t lo = 0; lo < n_gen; lo += chunk) {
    const std::size_t hi = std::min(n_gen, lo + chunk);
    const std::size_t B = hi - lo;
    Tensor cb({B, tc});
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < tc; ++j)
        cb.at(i, j) = data.C.at((lo + i) % data.n(), j);
    const Tensor epsb = noise.normal_tensor({B, k});

    Tape ta;
    BoundModel a(ta, orig);
    Var ca = ta.input(cb);
    GaussHeads pa = a.prior_raw(ca);
    Var za = a.reparam(pa, ta.input(epsb));
    const Tensor& ga = ta.value(a.decode(za, ca));

    Tape tb;
    BoundModel b(tb, conv);
    Var cv = tb.input(cb);
    const Tensor& gb = tb.value(b.decode(tb.input(epsb), cv));

    for (std::size_t e = 0; e < B * d; ++e)
      rep.generative_discrepancy =
          std::max(rep.generative_discrepancy, std::fabs(ga[e] - gb[e]));
  }
  return rep;
}

}  // namespace vaedim
