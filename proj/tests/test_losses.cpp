#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "vaedim/losses.hpp"
#include "vaedim/models.hpp"
#include "vaedim/rng.hpp"

using namespace vaedim;

namespace {

double run_scalar(Var v) { return v.tape->value(v)[0]; }

GaussHeads heads_of(Tape& t, const Tensor& mean, const Tensor& logvar) {
  return {t.input(mean), t.input(logvar)};
}

// direct per-sample Gaussian log density, the oracle for recon_nll
double nll_oracle(const Tensor& x, const Tensor& mu, double gamma) {
  const std::size_t B = x.dim(0), d = x.numel() / x.dim(0);
  double acc = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    double logp = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = x[i * d + j] - mu[i * d + j];
      logp += -0.5 * std::log(2.0 * M_PI * gamma) - diff * diff / (2.0 * gamma);
    }
    acc += -logp;
  }
  return acc / static_cast<double>(B);
}

}  // namespace

TEST_CASE("recon_nll closed-form values") {
  Tape t;
  Var lg0 = t.input(Tensor({1}, 0.0));
  SECTION("perfect reconstruction, unit gamma, d = 2") {
    Tensor x({3, 2}, {0.1, 0.9, 0.4, 0.2, 0.7, 0.6});
    Var v = recon_nll(t.input(x), t.input(x), lg0);
    CHECK(run_scalar(v) == kLog2Pi);  // d/2 * log(2 pi), quad term 0
  }
  SECTION("unit error vector, unit gamma, d = 1") {
    Tensor x({1, 1}, {1.0}), mu({1, 1}, {0.0});
    Var v = recon_nll(t.input(x), t.input(mu), lg0);
    CHECK(run_scalar(v) == Catch::Approx(0.5 * (kLog2Pi + 1.0)).epsilon(1e-15));
  }
  SECTION("random batch matches the density oracle") {
    Rng r = Rng::stream(11, 1);
    Tensor x = r.normal_tensor({7, 5});
    Tensor mu = r.normal_tensor({7, 5});
    const double lg = -1.3;
    Var v = recon_nll(t.input(x), t.input(mu), t.input(Tensor({1}, lg)));
    CHECK(run_scalar(v) ==
          Catch::Approx(nll_oracle(x, mu, std::exp(lg))).margin(1e-10));
  }
}

TEST_CASE("kl_diag closed-form values") {
  Tape t;
  SECTION("identical distributions give exactly zero") {
    Rng r = Rng::stream(12, 1);
    Tensor m = r.normal_tensor({4, 3}), lv = r.normal_tensor({4, 3});
    Var v = kl_diag(heads_of(t, m, lv), heads_of(t, m, lv));
    CHECK(run_scalar(v) == 0.0);
  }
  SECTION("mean shift against the standard normal") {
    Tensor m({1, 3}, {1.0, 2.0, 3.0}), lv({1, 3}, 0.0);
    Var v = kl_diag(heads_of(t, m, lv), heads_of(t, Tensor({1, 3}, 0.0),
                                                 Tensor({1, 3}, 0.0)));
    CHECK(run_scalar(v) == 7.0);  // ||mu||^2 / 2
    Var vs = kl_diag_std(heads_of(t, m, lv));
    CHECK(run_scalar(vs) == 7.0);
  }
  SECTION("variance mismatch in one dimension") {
    // KL[N(0,1) || N(0,4)] = (log 4 - 1 + 1/4) / 2
    Var v = kl_diag(heads_of(t, Tensor({1, 1}, 0.0), Tensor({1, 1}, 0.0)),
                    heads_of(t, Tensor({1, 1}, 0.0),
                             Tensor({1, 1}, std::log(4.0))));
    CHECK(run_scalar(v) == Catch::Approx(0.3181471805599453).epsilon(1e-14));
  }
  SECTION("unit prior reduces to the standard form") {
    Rng r = Rng::stream(12, 2);
    Tensor m = r.normal_tensor({5, 4}), lv = r.normal_tensor({5, 4});
    Var a = kl_diag(heads_of(t, m, lv),
                    heads_of(t, Tensor({5, 4}, 0.0), Tensor({5, 4}, 0.0)));
    Var b = kl_diag_std(heads_of(t, m, lv));
    CHECK(run_scalar(a) == Catch::Approx(run_scalar(b)).margin(1e-12));
  }
  SECTION("Monte-Carlo cross-check in one dimension") {
    const double mq = 0.3, vq = 0.8, mp = -0.5, vp = 2.5;
    Var v = kl_diag(heads_of(t, Tensor({1, 1}, mq), Tensor({1, 1}, std::log(vq))),
                    heads_of(t, Tensor({1, 1}, mp), Tensor({1, 1}, std::log(vp))));
    const double closed = run_scalar(v);

    Rng r = Rng::stream(12, 3);
    const std::size_t n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = mq + std::sqrt(vq) * r.normal();
      const double lq = -0.5 * std::log(2.0 * M_PI * vq) -
                        (z - mq) * (z - mq) / (2.0 * vq);
      const double lp = -0.5 * std::log(2.0 * M_PI * vp) -
                        (z - mp) * (z - mp) / (2.0 * vp);
      sum += lq - lp;
      sumsq += (lq - lp) * (lq - lp);
    }
    const double est = sum / n;
    const double se = std::sqrt((sumsq / n - est * est) / n);
    CHECK(std::fabs(est - closed) < 3.0 * se);
  }
}

TEST_CASE("kl_full closed-form values") {
  Tape t;
  const std::size_t k = 4;
  SECTION("identity covariance, zero mean") {
    FullHeads q{t.input(Tensor({2, k}, 0.0)), t.input(Tensor({2, k, k}, 0.0)),
                t.input(Tensor({2, k}, 0.0)), Var{}};
    CHECK(run_scalar(kl_full_std(q)) == 0.0);
  }
  SECTION("diagonal factor equals the diagonal form") {
    Rng r = Rng::stream(13, 1);
    Tensor m = r.normal_tensor({3, k}), ld = r.normal_tensor({3, k}, 0.5);
    Tensor lv = ld;
    for (std::size_t i = 0; i < lv.numel(); ++i) lv[i] *= 2.0;
    FullHeads q{t.input(m), t.input(Tensor({3, k, k}, 0.0)), t.input(ld), Var{}};
    Var a = kl_full_std(q);
    Var b = kl_diag_std(heads_of(t, m, lv));
    CHECK(run_scalar(a) == Catch::Approx(run_scalar(b)).margin(1e-12));
  }
  SECTION("random factor matches Monte-Carlo") {
    Rng r = Rng::stream(13, 2);
    Tensor m = r.normal_tensor({1, k});
    Tensor ld = r.normal_tensor({1, k}, 0.4);
    Tensor lower({1, k, k}, 0.0);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < i; ++j) lower[i * k + j] = r.normal() * 0.6;
    FullHeads q{t.input(m), t.input(lower), t.input(ld), Var{}};
    const double closed = run_scalar(kl_full_std(q));

    // L = lower + diag(exp(ld)); z = m + L eps; the quad form of q at z is
    // |eps|^2 so log q is available without solves.
    double logdet = 0.0;
    for (std::size_t i = 0; i < k; ++i) logdet += ld[i];
    const std::size_t n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      std::vector<double> eps(k), z(k);
      for (std::size_t i = 0; i < k; ++i) eps[i] = r.normal();
      for (std::size_t i = 0; i < k; ++i) {
        double acc = m[i] + std::exp(ld[i]) * eps[i];
        for (std::size_t j = 0; j < i; ++j) acc += lower[i * k + j] * eps[j];
        z[i] = acc;
      }
      double eps2 = 0.0, z2 = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        eps2 += eps[i] * eps[i];
        z2 += z[i] * z[i];
      }
      const double lq = -0.5 * k * std::log(2.0 * M_PI) - logdet - 0.5 * eps2;
      const double lp = -0.5 * k * std::log(2.0 * M_PI) - 0.5 * z2;
      sum += lq - lp;
      sumsq += (lq - lp) * (lq - lp);
    }
    const double est = sum / n;
    const double se = std::sqrt((sumsq / n - est * est) / n);
    CHECK(std::fabs(est - closed) < 3.0 * se);
  }
}

TEST_CASE("KL forms are non-negative on random inputs") {
  Rng r = Rng::stream(14, 1);
  Tape t;
  for (int trial = 0; trial < 1000; ++trial) {
    Tensor mq = r.normal_tensor({1, 3}), lq = r.normal_tensor({1, 3});
    Tensor mp = r.normal_tensor({1, 3}), lp = r.normal_tensor({1, 3});
    CHECK(run_scalar(kl_diag(heads_of(t, mq, lq), heads_of(t, mp, lp))) >=
          -1e-12);
    if (trial % 10 == 0) {
      Tensor lower({1, 3, 3}, 0.0);
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < i; ++j) lower[i * 3 + j] = r.normal();
      FullHeads q{t.input(mq), t.input(lower), t.input(lq), Var{}};
      CHECK(run_scalar(kl_full_std(q)) >= -1e-12);
    }
    if (t.size() > 60000) t.clear();
  }
}

TEST_CASE("objective at the symmetric start point") {
  // Data pinned at 0.5: the fresh decoder reproduces it exactly, the fresh
  // encoder equals the prior, gamma = 1, so the objective is d/2 log(2 pi).
  ModelSpec spec;
  spec.d = 4;
  spec.kappa = 2;
  spec.hidden = 8;
  ModelParams p = init_model(spec, 15);
  Tape t;
  BoundModel m(t, p);
  Rng r = Rng::stream(15, 1);
  LossBreakdown lb = elbo_vae(m, t.input(Tensor({4, 4}, 0.5)),
                              t.input(r.normal_tensor({4, 2})));
  CHECK(lb.kl_v == 0.0);
  CHECK(lb.recon_mse_v == 0.0);
  CHECK(lb.total_v == 2.0 * kLog2Pi);
  CHECK(lb.total_v == lb.recon_nll_v + lb.kl_v);
  CHECK(lb.gamma_v == 1.0);
}

TEST_CASE("breakdown identity holds on random models") {
  ModelSpec spec;
  spec.d = 3;
  spec.kappa = 2;
  spec.hidden = 4;
  spec.cond_dim = 2;
  spec.cond_feat = 3;
  spec.prior = Prior::conditional;
  ModelParams p = init_model(spec, 16);
  Rng r = Rng::stream(16, 1);
  for (Tensor& v : p.values)
    for (std::size_t i = 0; i < v.numel(); ++i) v[i] = r.normal() * 0.4;
  p.set_log_gamma(-0.7);
  Tape t;
  BoundModel m(t, p);
  LossBreakdown lb = elbo_cvae(m, t.input(r.normal_tensor({5, 3})),
                               t.input(r.normal_tensor({5, 2})),
                               t.input(r.normal_tensor({5, 2})));
  CHECK(lb.total_v == lb.recon_nll_v + lb.kl_v);
  CHECK(lb.kl_v >= 0.0);
  CHECK(lb.gamma_v == std::exp(-0.7));
}

TEST_CASE("reconstruction term is unbiased in the noise") {
  // One datum, kappa = 1: average the single-draw estimate over many noise
  // draws and compare with deterministic quadrature over the noise density.
  ModelSpec spec;
  spec.d = 2;
  spec.kappa = 1;
  spec.hidden = 4;
  ModelParams p = init_model(spec, 17);
  Rng r = Rng::stream(17, 1);
  for (Tensor& v : p.values)
    for (std::size_t i = 0; i < v.numel(); ++i) v[i] = r.normal() * 0.5;
  p.set_log_gamma(-0.4);
  Tensor x = r.normal_tensor({1, 2}, 0.3);
  for (std::size_t i = 0; i < x.numel(); ++i)
    x[i] = 0.5 + 0.3 * std::tanh(x[i]);  // keep targets in (0,1)

  auto recon_at = [&](double eps) {
    Tape t;
    BoundModel m(t, p);
    GaussHeads q = m.encode_raw(t.input(x));
    Var z = m.reparam(q, t.input(Tensor({1, 1}, eps)));
    Var nll = recon_nll(t.input(x), m.decode(z), m.log_gamma());
    return run_scalar(nll);
  };

  // trapezoid over the standard normal noise density
  const double lo = -10.0, hi = 10.0;
  const std::size_t steps = 4000;
  const double h = (hi - lo) / steps;
  double quad = 0.0;
  for (std::size_t i = 0; i <= steps; ++i) {
    const double e = lo + h * static_cast<double>(i);
    const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
    quad += w * recon_at(e) * std::exp(-0.5 * e * e) / std::sqrt(2.0 * M_PI);
  }
  quad *= h;

  const std::size_t n = 10000;
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = recon_at(r.normal());
    sum += v;
    sumsq += v * v;
  }
  const double est = sum / n;
  const double se = std::sqrt((sumsq / n - est * est) / n);
  CHECK(std::fabs(est - quad) < 3.0 * se);

  // the KL term carries no noise
  Tape t1, t2;
  BoundModel m1(t1, p), m2(t2, p);
  LossBreakdown a = elbo_vae(m1, t1.input(x), t1.input(Tensor({1, 1}, 0.3)));
  LossBreakdown b = elbo_vae(m2, t2.input(x), t2.input(Tensor({1, 1}, -1.7)));
  CHECK(a.kl_v == b.kl_v);
}

TEST_CASE("gamma gradient changes sign at mse/d") {
  ModelSpec spec;
  spec.d = 3;
  spec.kappa = 2;
  spec.hidden = 4;
  ModelParams p = init_model(spec, 18);
  Rng rr = Rng::stream(18, 1);
  for (Tensor& v : p.values)
    for (std::size_t i = 0; i < v.numel(); ++i) v[i] = rr.normal() * 0.5;
  Tensor x = rr.normal_tensor({4, 3});
  for (std::size_t i = 0; i < x.numel(); ++i)
    x[i] = 0.5 + 0.4 * std::tanh(x[i]);
  Tensor eps = rr.normal_tensor({4, 2});

  auto grad_lg_at = [&](double lg) {
    p.set_log_gamma(lg);
    Tape t;
    BoundModel m(t, p);
    LossBreakdown lb = elbo_vae(m, t.input(x), t.input(eps));
    t.backward(lb.total);
    return std::pair<double, double>(t.grad(m.leaf("log_gamma"))[0],
                                     lb.recon_mse_v);
  };

  const double mse = grad_lg_at(0.0).second;  // gamma-independent
  const double crit = std::log(mse / 3.0);
  CHECK(grad_lg_at(crit - 0.5).first < 0.0);
  CHECK(grad_lg_at(crit + 0.5).first > 0.0);
  CHECK(std::fabs(grad_lg_at(crit).first) < 1e-10);
  // analytic value away from the stationary point: d/2 - mse/(2 gamma)
  const double g = grad_lg_at(crit - 1.0).first;
  CHECK(g == Catch::Approx(1.5 - mse / (2.0 * std::exp(crit - 1.0)))
                 .epsilon(1e-10));
}

TEST_CASE("sequential objective") {
  SECTION("deterministic repeat with a frozen trunk has zero kl") {
    ModelSpec spec;
    spec.d = 1;
    spec.kappa = 2;
    spec.recurrent = true;
    spec.prior = Prior::conditional;
    spec.rnn_hidden = 3;
    spec.dec_hidden = 3;
    spec.sigmoid_out = false;
    spec.share_weights = true;
    ModelParams p = init_model(spec, 19);
    // freeze the recurrent state so the encoder ignores every input;
    // heads get nonzero biases so the distributions are not trivially N(0,1)
    p.get("rnn_x_w").fill(0.0);
    p.get("rnn_x_b").fill(0.0);
    p.get("rnn_hw").fill(0.0);
    p.get("enc_mean_b").fill(0.7);
    p.get("enc_logvar_b").fill(-0.3);

    Tape t;
    BoundModel m(t, p);
    Rng r = Rng::stream(19, 1);
    Tensor xs({2, 2}, {0.4, 0.4, -1.1, -1.1});  // x2 = x1 per sequence
    LossBreakdown lb = elbo_seq(m, t.input(xs), t.input(r.normal_tensor({2, 4})));
    CHECK(lb.kl_v == 0.0);
    CHECK(lb.total_v == lb.recon_nll_v);

    // unshared with a different prior bias: the kl cost appears
    ModelSpec us = spec;
    us.share_weights = false;
    ModelParams q = init_model(us, 19);
    q.get("rnn_x_w").fill(0.0);
    q.get("rnn_x_b").fill(0.0);
    q.get("rnn_hw").fill(0.0);
    q.get("enc_mean_b").fill(0.7);
    q.get("enc_logvar_b").fill(-0.3);
    Tape t2;
    BoundModel m2(t2, q);
    LossBreakdown lb2 =
        elbo_seq(m2, t2.input(xs), t2.input(Rng::stream(19, 1).normal_tensor({2, 4})));
    CHECK(lb2.kl_v > 0.1);
  }
  SECTION("per-step mean reconstruction metric") {
    ModelSpec spec;
    spec.d = 1;
    spec.kappa = 1;
    spec.recurrent = true;
    spec.prior = Prior::conditional;
    spec.rnn_hidden = 2;
    spec.dec_hidden = 2;
    spec.sigmoid_out = false;
    ModelParams p = init_model(spec, 20);  // decoder head zero: outputs 0
    Tape t;
    BoundModel m(t, p);
    Tensor xs({1, 3}, {1.0, 2.0, 3.0});
    LossBreakdown lb = elbo_seq(m, t.input(xs), t.input(Tensor({1, 3}, 0.0)));
    // squared gaps 1, 4, 9 averaged over steps
    CHECK(lb.recon_mse_v == Catch::Approx((1.0 + 4.0 + 9.0) / 3.0).epsilon(1e-14));
  }
}

TEST_CASE("non-finite objective surfaces as a structured error") {
  ModelSpec spec;
  spec.d = 2;
  spec.kappa = 1;
  spec.hidden = 2;
  spec.init_log_gamma = -800.0;  // exp(-lg) overflows in the quad term
  ModelParams p = init_model(spec, 21);
  Tape t;
  BoundModel m(t, p);
  Tensor x({1, 2}, {0.2, 0.9});  // nonzero gap so the quad term is hit
  CHECK_THROWS_AS(elbo_vae(m, t.input(x), t.input(Tensor({1, 1}, 0.1))),
                  numeric_error);
}
