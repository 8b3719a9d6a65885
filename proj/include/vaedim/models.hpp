#pragma once
// Model families built on the tape.
//
// All variants share one parameter container (ModelParams) whose entries are
// registered in a fixed order; binding to a tape turns each entry into a leaf
// so a single backward pass yields every gradient. Initialization contract:
// hidden-layer weights are normal with scale 1/sqrt(fan_in), every final head
// (means, log-variances, Cholesky factors, decoder output, gate maps) starts
// at exactly zero, and the global gate vector starts at one. Consequences at
// init: encoder and prior emit N(0, I) for every input, a full-covariance
// encoder emits the identity Cholesky factor, the decoder emits 0.5 after the
// sigmoid (0 without it), and conditional gates emit 0.5.
//
// The "converted" prior kind evaluates the same parameters through the
// standard-prior wrapping: encoder means/variances are standardized by the
// conditional prior and the decoder input is mapped back, so a converted
// model references the original networks rather than copying them.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "vaedim/graph.hpp"
#include "vaedim/rng.hpp"
#include "vaedim/tensor.hpp"

namespace vaedim {

enum class Cov { diag, full };
enum class Prior { standard, conditional, converted };
enum class Gate { none, vector, affine, mlp };
enum class Cell { gru, lstm };

inline const char* to_string(Cov c) { return c == Cov::diag ? "diag" : "full"; }
inline const char* to_string(Prior p) {
  switch (p) {
    case Prior::standard: return "standard";
    case Prior::conditional: return "conditional";
    default: return "converted";
  }
}
inline const char* to_string(Gate g) {
  switch (g) {
    case Gate::none: return "none";
    case Gate::vector: return "vector";
    case Gate::affine: return "affine";
    default: return "mlp";
  }
}
inline const char* to_string(Cell c) { return c == Cell::gru ? "gru" : "lstm"; }

template <typename E>
E enum_from_string(const std::string& s);
template <>
inline Cov enum_from_string<Cov>(const std::string& s) {
  if (s == "diag") return Cov::diag;
  if (s == "full") return Cov::full;
  throw std::invalid_argument("unknown covariance kind: " + s);
}
template <>
inline Prior enum_from_string<Prior>(const std::string& s) {
  if (s == "standard") return Prior::standard;
  if (s == "conditional") return Prior::conditional;
  if (s == "converted") return Prior::converted;
  throw std::invalid_argument("unknown prior kind: " + s);
}
template <>
inline Gate enum_from_string<Gate>(const std::string& s) {
  if (s == "none") return Gate::none;
  if (s == "vector") return Gate::vector;
  if (s == "affine") return Gate::affine;
  if (s == "mlp") return Gate::mlp;
  throw std::invalid_argument("unknown gate kind: " + s);
}
template <>
inline Cell enum_from_string<Cell>(const std::string& s) {
  if (s == "gru") return Cell::gru;
  if (s == "lstm") return Cell::lstm;
  throw std::invalid_argument("unknown cell kind: " + s);
}

struct ModelSpec {
  std::size_t d = 0;         // data dimension (per step when recurrent)
  std::size_t cond_dim = 0;  // conditioning width, 0 = unconditional
  std::size_t kappa = 0;     // latent dimension

  std::size_t hidden = 128;     // encoder/decoder hidden width
  std::size_t cond_feat = 64;   // width of the processed-c branch
  std::size_t gate_hidden = 32; // hidden width of the mlp gate

  Cov cov = Cov::diag;
  Prior prior = Prior::standard;
  Gate gate = Gate::none;
  bool sigmoid_out = true;  // data in (0,1); off for sequences

  bool recurrent = false;
  bool share_weights = false;  // prior head aliases the encoder head
  Cell cell = Cell::gru;
  std::size_t rnn_hidden = 64;
  std::size_t dec_hidden = 64;  // decoder hidden width when recurrent

  double init_log_gamma = 0.0;

  void validate() const {
    if (d < 1 || kappa < 1 || hidden < 1)
      throw std::invalid_argument("model spec: d, kappa, hidden must be >= 1");
    if (recurrent) {
      // the recurrent state is the conditioning; no explicit c pathway
      if (d != 1)
        throw std::invalid_argument("model spec: recurrent models read scalar steps (d = 1)");
      if (cov != Cov::diag || gate != Gate::none || prior != Prior::conditional)
        throw std::invalid_argument(
            "model spec: recurrent models use a diagonal encoder, no gate, "
            "and the recurrent prior head (prior kind conditional)");
      if (cond_dim != 0)
        throw std::invalid_argument(
            "model spec: recurrent models take no explicit conditioning");
      if (rnn_hidden < 1 || dec_hidden < 1)
        throw std::invalid_argument("model spec: recurrent widths must be >= 1");
      return;
    }
    if (share_weights)
      throw std::invalid_argument("model spec: share_weights requires recurrent");
    if (cond_dim == 0 && (prior != Prior::standard))
      throw std::invalid_argument(
          "model spec: conditional/converted prior requires cond_dim > 0");
    if (cond_dim == 0 && (gate == Gate::affine || gate == Gate::mlp))
      throw std::invalid_argument(
          "model spec: conditional gate requires cond_dim > 0");
    if (cov == Cov::full && prior != Prior::standard)
      throw std::invalid_argument(
          "model spec: full covariance is defined against the standard prior");
  }
};

// Ordered parameter store. Registration order is the gradient/optimizer
// order and the checkpoint block order.
struct ModelParams {
  ModelSpec spec;
  std::vector<std::string> names;
  std::vector<Tensor> values;
  std::unordered_map<std::string, std::size_t> index;

  std::size_t size() const { return values.size(); }
  bool has(const std::string& name) const { return index.count(name) != 0; }
  Tensor& get(const std::string& name) {
    auto it = index.find(name);
    if (it == index.end())
      throw std::invalid_argument("no parameter named " + name);
    return values[it->second];
  }
  const Tensor& get(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end())
      throw std::invalid_argument("no parameter named " + name);
    return values[it->second];
  }
  void add(const std::string& name, Tensor t) {
    if (has(name)) throw std::invalid_argument("duplicate parameter " + name);
    index.emplace(name, values.size());
    names.push_back(name);
    values.push_back(std::move(t));
  }

  double log_gamma() const { return get("log_gamma")[0]; }
  void set_log_gamma(double v) { get("log_gamma")[0] = v; }
  double gamma() const { return std::exp(log_gamma()); }
};

namespace detail {
inline void add_linear(ModelParams& p, Rng& rng, const std::string& prefix,
                       std::size_t in, std::size_t out, bool zero_init) {
  if (zero_init)
    p.add(prefix + "_w", Tensor({in, out}, 0.0));
  else
    p.add(prefix + "_w",
          rng.normal_tensor({in, out}, 1.0 / std::sqrt(static_cast<double>(in))));
  p.add(prefix + "_b", Tensor({out}, 0.0));
}
constexpr std::uint64_t model_stream = 0xA11CE5;
}  // namespace detail

inline ModelParams init_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ModelParams p;
  p.spec = spec;
  Rng rng = Rng::stream(seed, detail::model_stream);
  using detail::add_linear;

  if (!spec.recurrent) {
    const std::size_t cf = spec.cond_dim > 0 ? spec.cond_feat : 0;
    if (spec.cond_dim > 0)
      add_linear(p, rng, "enc_cond", spec.cond_dim, spec.cond_feat, false);
    add_linear(p, rng, "enc_h", spec.d + cf, spec.hidden, false);
    add_linear(p, rng, "enc_mean", spec.hidden, spec.kappa, true);
    if (spec.cov == Cov::diag) {
      add_linear(p, rng, "enc_logvar", spec.hidden, spec.kappa, true);
    } else {
      add_linear(p, rng, "enc_lower", spec.hidden, spec.kappa * spec.kappa, true);
      add_linear(p, rng, "enc_logdiag", spec.hidden, spec.kappa, true);
    }
    if (spec.prior != Prior::standard) {
      add_linear(p, rng, "prior_h", spec.cond_dim, spec.cond_feat, false);
      add_linear(p, rng, "prior_mean", spec.cond_feat, spec.kappa, true);
      add_linear(p, rng, "prior_logvar", spec.cond_feat, spec.kappa, true);
    }
    switch (spec.gate) {
      case Gate::none: break;
      case Gate::vector: p.add("gate_g", Tensor({spec.kappa}, 1.0)); break;
      case Gate::affine:
        add_linear(p, rng, "gate", spec.cond_dim, spec.kappa, true);
        break;
      case Gate::mlp:
        add_linear(p, rng, "gate_h", spec.cond_dim, spec.gate_hidden, false);
        add_linear(p, rng, "gate_out", spec.gate_hidden, spec.kappa, true);
        break;
    }
    if (spec.cond_dim > 0)
      add_linear(p, rng, "dec_cond", spec.cond_dim, spec.cond_feat, false);
    add_linear(p, rng, "dec_h", spec.kappa + cf, spec.hidden, false);
    add_linear(p, rng, "dec_out", spec.hidden, spec.d, true);
  } else {
    const std::size_t g = spec.cell == Cell::gru ? 3 : 4;
    const std::size_t H = spec.rnn_hidden;
    add_linear(p, rng, "rnn_x", 1, g * H, false);
    p.add("rnn_hw", rng.normal_tensor({H, g * H}, 1.0 / std::sqrt(static_cast<double>(H))));
    add_linear(p, rng, "enc_mean", H, spec.kappa, true);
    add_linear(p, rng, "enc_logvar", H, spec.kappa, true);
    if (!spec.share_weights) {
      add_linear(p, rng, "prior_mean", H, spec.kappa, true);
      add_linear(p, rng, "prior_logvar", H, spec.kappa, true);
    }
    add_linear(p, rng, "dec_h", spec.kappa + H, spec.dec_hidden, false);
    add_linear(p, rng, "dec_out", spec.dec_hidden, 1, true);
  }
  p.add("log_gamma", Tensor({1}, spec.init_log_gamma));
  return p;
}

struct GaussHeads {
  Var mean;
  Var logvar;
};

struct FullHeads {
  Var mean;
  Var lower;    // (B, kappa, kappa) strictly lower triangular
  Var logdiag;  // (B, kappa)
  Var chol;     // lower + diag_embed(exp(logdiag))
};

struct SeqForward {
  std::vector<GaussHeads> q;  // one per step, conditioned on x up to and including the step
  std::vector<GaussHeads> p;  // conditioned on the strict past
  std::vector<Var> x_mean;    // per-step decoder means (B, 1)
};

// Parameters bound to a tape as leaves; evaluation methods build graph nodes.
class BoundModel {
 public:
  // spec_override lets a converted model bind the original parameter store
  // under its own evaluation mode (parameters referenced, not copied).
  BoundModel(Tape& tape, const ModelParams& params,
             const ModelSpec* spec_override = nullptr)
      : tape_(&tape), spec_(spec_override ? *spec_override : params.spec) {
    spec_.validate();
    leaves_.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      Var v = tape.param(params.values[i]);
      leaves_.push_back(v);
      by_name_.emplace(params.names[i], v);
    }
  }

  // Rebind over existing tape leaves (gradient checking rebuilds the loss
  // from perturbed parameter values). vars must follow registration order.
  BoundModel(Tape& tape, const ModelSpec& spec,
             const std::vector<std::string>& names,
             const std::vector<Var>& vars)
      : tape_(&tape), spec_(spec) {
    spec_.validate();
    if (names.size() != vars.size())
      throw std::invalid_argument("name/leaf count mismatch");
    leaves_ = vars;
    for (std::size_t i = 0; i < names.size(); ++i)
      by_name_.emplace(names[i], vars[i]);
  }

  const ModelSpec& spec() const { return spec_; }
  Tape& tape() const { return *tape_; }
  const std::vector<Var>& leaves() const { return leaves_; }
  Var leaf(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end())
      throw std::invalid_argument("model has no parameter " + name);
    return it->second;
  }
  Var log_gamma() const { return leaf("log_gamma"); }

  // ---- manifold pathway -------------------------------------------------

  GaussHeads encode_raw(Var x, Var c = Var{}) const {
    Var h = trunk(x, c, "enc");
    return {head(h, "enc_mean"), head(h, "enc_logvar")};
  }

  FullHeads encode_full(Var x, Var c = Var{}) const {
    if (spec_.cov != Cov::full)
      throw std::invalid_argument("encode_full on a diagonal model");
    Var h = trunk(x, c, "enc");
    Var mean = head(h, "enc_mean");
    const std::size_t B = tape_->value(mean).dim(0), k = spec_.kappa;
    Var lower = tape_->tril_strict(
        tape_->reshape(head(h, "enc_lower"), Shape{B, k, k}));
    Var logdiag = head(h, "enc_logdiag");
    Var chol = tape_->add(lower, tape_->diag_embed(tape_->exp(logdiag)));
    return {mean, lower, logdiag, chol};
  }

  GaussHeads prior_raw(Var c) const {
    require(spec_.prior != Prior::standard, "prior_raw on a standard-prior model");
    Var h = tape_->tanh(affine(c, "prior_h"));
    return {head(h, "prior_mean"), head(h, "prior_logvar")};
  }

  // Converted mode standardizes the posterior by the conditional prior.
  GaussHeads posterior(Var x, Var c = Var{}) const {
    GaussHeads q = encode_raw(x, c);
    if (spec_.prior != Prior::converted) return q;
    GaussHeads p = prior_raw(c);
    Var mean = tape_->mul(tape_->sub(q.mean, p.mean),
                          tape_->exp(tape_->scale(p.logvar, -0.5)));
    Var logvar = tape_->sub(q.logvar, p.logvar);
    return {mean, logvar};
  }

  Var reparam(const GaussHeads& q, Var eps) const {
    return tape_->add(q.mean,
                      tape_->mul(tape_->exp(tape_->scale(q.logvar, 0.5)), eps));
  }
  Var reparam_full(const FullHeads& q, Var eps) const {
    return tape_->add(q.mean, tape_->bmatvec(q.chol, eps));
  }

  Var apply_gate(Var z, Var c = Var{}) const {
    switch (spec_.gate) {
      case Gate::none: return z;
      case Gate::vector: return tape_->mul(z, leaf("gate_g"));
      case Gate::affine:
        return tape_->mul(z, tape_->sigmoid(affine(c, "gate")));
      case Gate::mlp: {
        Var h = tape_->tanh(affine(c, "gate_h"));
        return tape_->mul(z, tape_->sigmoid(affine(h, "gate_out")));
      }
    }
    throw std::logic_error("unreachable gate kind");
  }

  // Decoder of the stored networks: gate, then MLP on (gated z, processed c).
  Var decode_raw(Var z, Var c = Var{}) const {
    Var h = trunk(apply_gate(z, c), c, "dec");
    Var out = head(h, "dec_out");
    return spec_.sigmoid_out ? tape_->sigmoid(out) : out;
  }

  // Converted mode maps the standardized latent back before decoding.
  Var decode(Var z, Var c = Var{}) const {
    if (spec_.prior != Prior::converted) return decode_raw(z, c);
    GaussHeads p = prior_raw(c);
    Var zc = tape_->add(tape_->mul(z, tape_->exp(tape_->scale(p.logvar, 0.5))),
                        p.mean);
    return decode_raw(zc, c);
  }

  // ---- recurrent pathway ------------------------------------------------

  // xseq: (B, len); noise: (B, len * kappa), one slice per step.
  SeqForward seq_forward(Var xseq, Var noise) const {
    require(spec_.recurrent, "seq_forward on a non-recurrent model");
    const std::size_t B = tape_->value(xseq).dim(0);
    const std::size_t len = tape_->value(xseq).dim(1);
    if (len < 2) throw std::invalid_argument("seq_forward needs length > 1");
    const std::size_t k = spec_.kappa, H = spec_.rnn_hidden;
    if (tape_->value(noise).dim(1) != len * k)
      throw shape_error("seq_forward noise must be (B, len*kappa), got " +
                        shape_str(tape_->value(noise).shape()));

    const std::string pm = spec_.share_weights ? "enc_mean" : "prior_mean";
    const std::string pv = spec_.share_weights ? "enc_logvar" : "prior_logvar";

    Var h = tape_->input(Tensor({B, H}, 0.0));
    Var cmem = spec_.cell == Cell::lstm ? tape_->input(Tensor({B, H}, 0.0)) : Var{};

    SeqForward out;
    out.q.reserve(len);
    out.p.reserve(len);
    out.x_mean.reserve(len);
    for (std::size_t l = 0; l < len; ++l) {
      Var h_prev = h;
      out.p.push_back({head(h_prev, pm), head(h_prev, pv)});

      Var xl = tape_->slice(xseq, l, l + 1);
      if (spec_.cell == Cell::gru) {
        Var hx = affine(xl, "rnn_x");          // (B, 3H), bias folded in
        Var hh = tape_->matmul(h, leaf("rnn_hw"));
        Var r = tape_->sigmoid(tape_->add(tape_->slice(hx, 0, H),
                                          tape_->slice(hh, 0, H)));
        Var u = tape_->sigmoid(tape_->add(tape_->slice(hx, H, 2 * H),
                                          tape_->slice(hh, H, 2 * H)));
        Var n = tape_->tanh(tape_->add(
            tape_->slice(hx, 2 * H, 3 * H),
            tape_->mul(r, tape_->slice(hh, 2 * H, 3 * H))));
        Var one_minus_u = tape_->add_const(tape_->scale(u, -1.0), 1.0);
        h = tape_->add(tape_->mul(u, h), tape_->mul(one_minus_u, n));
      } else {
        Var g4 = tape_->add(affine(xl, "rnn_x"), tape_->matmul(h, leaf("rnn_hw")));
        Var i = tape_->sigmoid(tape_->slice(g4, 0, H));
        Var f = tape_->sigmoid(tape_->slice(g4, H, 2 * H));
        Var g = tape_->tanh(tape_->slice(g4, 2 * H, 3 * H));
        Var o = tape_->sigmoid(tape_->slice(g4, 3 * H, 4 * H));
        cmem = tape_->add(tape_->mul(f, cmem), tape_->mul(i, g));
        h = tape_->mul(o, tape_->tanh(cmem));
      }
      GaussHeads q{head(h, "enc_mean"), head(h, "enc_logvar")};
      out.q.push_back(q);

      Var eps = tape_->slice(noise, l * k, (l + 1) * k);
      Var z = reparam(q, eps);
      Var dh = tape_->tanh(affine(tape_->concat(z, h_prev), "dec_h"));
      Var xm = head(dh, "dec_out");
      out.x_mean.push_back(spec_.sigmoid_out ? tape_->sigmoid(xm) : xm);
    }
    return out;
  }

 private:
  static void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  }
  Var affine(Var x, const std::string& prefix) const {
    return tape_->add(tape_->matmul(x, leaf(prefix + "_w")),
                      leaf(prefix + "_b"));
  }
  Var head(Var h, const std::string& prefix) const { return affine(h, prefix); }
  // Shared encoder/decoder trunk: optional processed-c branch, concat, tanh.
  Var trunk(Var x, Var c, const std::string& which) const {
    Var in = x;
    if (spec_.cond_dim > 0) {
      if (c.tape == nullptr)
        throw std::invalid_argument("conditional model evaluated without c");
      Var cf = tape_->tanh(affine(c, which + "_cond"));
      in = tape_->concat(x, cf);
    } else if (c.tape != nullptr) {
      throw std::invalid_argument("unconditional model evaluated with c");
    }
    return tape_->tanh(affine(in, which + "_h"));
  }

  Tape* tape_;
  ModelSpec spec_;
  std::vector<Var> leaves_;
  std::unordered_map<std::string, Var> by_name_;
};

// Convert a conditional-prior model to its standard-prior equivalent.
// The parameters are shared; only the evaluation mode changes.
inline ModelSpec converted_spec(const ModelSpec& spec) {
  if (spec.prior != Prior::conditional)
    throw std::invalid_argument("conversion requires a diagonal conditional prior");
  if (spec.cov != Cov::diag || spec.recurrent)
    throw std::invalid_argument("conversion requires a diagonal conditional prior");
  ModelSpec out = spec;
  out.prior = Prior::converted;
  return out;
}

}  // namespace vaedim
