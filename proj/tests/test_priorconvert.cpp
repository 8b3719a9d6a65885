#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "vaedim/datagen.hpp"
#include "vaedim/losses.hpp"
#include "vaedim/optim.hpp"
#include "vaedim/priorconvert.hpp"

using namespace vaedim;

namespace {

ModelSpec cond_spec() {
  ModelSpec s;
  s.d = 8;
  s.cond_dim = 2;
  s.kappa = 4;
  s.hidden = 16;
  s.cond_feat = 8;
  s.prior = Prior::conditional;
  return s;
}

// give every head weight so the prior, gate, and decoder all do real work
ModelParams random_model(const ModelSpec& spec, std::uint64_t seed) {
  ModelParams p = init_model(spec, seed);
  Rng rng = Rng::stream(seed, 0xF111);
  for (Tensor& t : p.values)
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = 0.3 * rng.normal();
  p.set_log_gamma(-1.2);
  return p;
}

double train_step(ModelParams& p, Adam& opt, const Tensor& xb,
                  const Tensor& cb, const Tensor& eps) {
  Tape t;
  BoundModel m(t, p);
  Var x = t.input(xb), c = t.input(cb), e = t.input(eps);
  LossBreakdown lb = elbo_cvae(m, x, c, e);
  t.backward(lb.total);
  std::vector<Tensor*> ps;
  std::vector<const Tensor*> gs;
  for (const std::string& name : p.names) {
    ps.push_back(&p.get(name));
    gs.push_back(&t.grad(m.leaf(name)));
  }
  opt.step(ps, gs, p.names);
  return lb.total_v;
}

}  // namespace

TEST_CASE("conversion changes only the evaluation mode") {
  ModelParams p = random_model(cond_spec(), 3);
  ModelParams c = convert_to_standard_prior(p);
  CHECK(c.spec.prior == Prior::converted);
  CHECK(c.names == p.names);
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t e = 0; e < p.values[i].numel(); ++e)
      REQUIRE(c.values[i][e] == p.values[i][e]);

  ModelSpec plain = cond_spec();
  plain.prior = Prior::standard;
  CHECK_THROWS_AS(convert_to_standard_prior(init_model(plain, 1)),
                  std::invalid_argument);
}

TEST_CASE("converted reading matches the original at float precision") {
  ModelSpec spec = cond_spec();
  spec.gate = Gate::affine;  // the gate must ride inside the conversion
  ModelParams orig = random_model(spec, 7);
  ModelParams conv = convert_to_standard_prior(orig);
  ManifoldDataset data = gen_conditioned(64, 8, 4, 2, 17);

  ConversionReport rep = verify_equivalence(orig, conv, data, 64, 64, 5);
  CHECK(rep.n_evaluated == 64);
  CHECK(rep.max_elbo_diff < 1e-9);
  CHECK(rep.max_kl_diff < 1e-9);
  CHECK(rep.max_recon_diff < 1e-9);
  CHECK(rep.generative_discrepancy < 1e-9);
  CHECK(rep.equivalent());
}

TEST_CASE("a unit conditional prior converts to the identity") {
  // zeroed prior heads mean N(0, I); the standardization must then be exact
  ModelSpec spec = cond_spec();
  ModelParams orig = init_model(spec, 11);
  Rng rng = Rng::stream(11, 0xF222);
  for (const char* name : {"enc_h_w", "enc_mean_w", "enc_logvar_w", "dec_h_w",
                           "dec_out_w"}) {
    Tensor& t = orig.get(name);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = 0.3 * rng.normal();
  }
  ModelParams conv = convert_to_standard_prior(orig);
  ManifoldDataset data = gen_conditioned(32, 8, 4, 2, 23);
  ConversionReport rep = verify_equivalence(orig, conv, data, 32, 32, 9);
  CHECK(rep.max_elbo_diff == 0.0);
  CHECK(rep.max_kl_diff == 0.0);
  CHECK(rep.max_recon_diff == 0.0);
  CHECK(rep.generative_discrepancy == 0.0);
}

TEST_CASE("verification detects a mutated converted model") {
  ModelParams orig = random_model(cond_spec(), 13);
  ModelParams conv = convert_to_standard_prior(orig);
  conv.get("prior_mean_b")[0] += 1.0;
  ManifoldDataset data = gen_conditioned(64, 8, 4, 2, 29);
  ConversionReport rep = verify_equivalence(orig, conv, data, 64, 64, 5);
  CHECK(rep.max_elbo_diff > 0.1);
  CHECK_FALSE(rep.equivalent());
}

TEST_CASE("verification input validation") {
  ModelParams orig = random_model(cond_spec(), 19);
  ModelParams conv = convert_to_standard_prior(orig);
  ManifoldDataset data = gen_conditioned(16, 8, 4, 2, 31);

  // sides swapped
  CHECK_THROWS_AS(verify_equivalence(conv, orig, data, 16, 0, 1),
                  std::invalid_argument);
  // architecture mismatch
  ModelSpec wide = cond_spec();
  wide.hidden = 32;
  ModelParams other = convert_to_standard_prior(random_model(wide, 19));
  CHECK_THROWS_AS(verify_equivalence(orig, other, data, 16, 0, 1),
                  std::invalid_argument);
  // dataset mismatch
  CHECK_THROWS_AS(verify_equivalence(orig, conv, gen_conditioned(16, 7, 4, 2, 31),
                                     16, 0, 1),
                  shape_error);
  CHECK_THROWS_AS(verify_equivalence(orig, conv, data, 0, 0, 1),
                  std::invalid_argument);
}

TEST_CASE("both readings follow the same optimization trajectory") {
  // the two readings define the same loss surface over the shared parameter
  // store, so coupled optimizers must stay together
  ModelSpec spec = cond_spec();
  ModelParams a = random_model(spec, 23);
  ModelParams b = convert_to_standard_prior(a);
  ManifoldDataset data = gen_conditioned(128, 8, 4, 2, 33);

  Tensor xb = data.X, cb = data.C;
  Adam opt_a, opt_b;
  Rng noise = Rng::stream(41, 0xF333);
  for (int step = 0; step < 10; ++step) {
    Tensor eps = noise.normal_tensor({128, spec.kappa});
    const double la = train_step(a, opt_a, xb, cb, eps);
    const double lb = train_step(b, opt_b, xb, cb, eps);
    CHECK(std::fabs(la - lb) < 1e-6);
  }
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t e = 0; e < a.values[i].numel(); ++e)
      REQUIRE(std::fabs(a.values[i][e] - b.values[i][e]) < 1e-8);

  // conversion of the trained weights still verifies
  ModelParams fresh = convert_to_standard_prior(a);
  ConversionReport rep = verify_equivalence(a, fresh, data, 64, 64, 7);
  CHECK(rep.equivalent());
}
