#pragma once
// Synthetic low-dimensional-manifold data.
//
// A Gaussian mixture draws latent coordinates u in R^r; data are
// x = sigmoid(G_x u) with G_x entries i.i.d. standard normal, so the data
// live on an r-dimensional manifold embedded in (0,1)^d. Conditioning
// variables expose a prefix of u (optionally mixed by an invertible G_c),
// a one-hot class id, or a zero-padded variable-length prefix. Sequences
// come from a stable ARMA(2,1) process.
//
// Determinism: every generator draws from fixed substreams of its seed
// (see the stream tags below), so outputs are reproducible bit for bit and
// independent of evaluation order. Sigmoid outputs are clamped away from the
// hard bounds by 1e-12 so every entry is strictly inside (0,1) even after
// rounding.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vaedim/graph.hpp"
#include "vaedim/linalg.hpp"
#include "vaedim/rng.hpp"
#include "vaedim/tensor.hpp"

namespace vaedim {

namespace stream_tag {
constexpr std::uint64_t gmm = 1;     // mixture parameters
constexpr std::uint64_t gx = 2;      // projection G_x
constexpr std::uint64_t draws = 3;   // latent draws u
constexpr std::uint64_t gc = 4;      // conditioning map G_c
constexpr std::uint64_t assign = 5;  // per-sample t assignment
constexpr std::uint64_t innov = 6;   // ARMA innovations
}  // namespace stream_tag

// Equiprobable Gaussian mixture with diagonal components; means and log
// standard deviations are i.i.d. standard normal given the seed.
struct GmmSpec {
  std::size_t r = 0;
  std::size_t components = 5;
  Tensor means;      // (components, r)
  Tensor log_sigma;  // (components, r)

  static GmmSpec draw(std::size_t r, std::size_t components,
                      std::uint64_t seed) {
    if (r < 1 || components < 1)
      throw std::invalid_argument("GmmSpec::draw: need r >= 1, components >= 1");
    Rng rng(seed);
    GmmSpec g;
    g.r = r;
    g.components = components;
    g.means = rng.normal_tensor({components, r});
    g.log_sigma = rng.normal_tensor({components, r});
    return g;
  }

  Tensor sample(Rng& rng, std::size_t n,
                std::vector<int>* component_out = nullptr) const {
    Tensor u({n, r});
    if (component_out) component_out->resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = rng.index(components);
      if (component_out) (*component_out)[i] = static_cast<int>(k);
      for (std::size_t j = 0; j < r; ++j)
        u.at(i, j) = means.at(k, j) +
                     std::exp(log_sigma.at(k, j)) * rng.normal();
    }
    return u;
  }

  // Mixture mean and per-coordinate variance, for moment oracles.
  std::vector<double> mean_vector() const {
    std::vector<double> m(r, 0.0);
    for (std::size_t k = 0; k < components; ++k)
      for (std::size_t j = 0; j < r; ++j) m[j] += means.at(k, j);
    for (double& v : m) v /= static_cast<double>(components);
    return m;
  }
  std::vector<double> var_vector() const {
    std::vector<double> m = mean_vector();
    std::vector<double> v(r, 0.0);
    for (std::size_t k = 0; k < components; ++k)
      for (std::size_t j = 0; j < r; ++j) {
        const double s = std::exp(log_sigma.at(k, j));
        const double d = means.at(k, j) - m[j];
        v[j] += s * s + d * d;
      }
    for (double& x : v) x /= static_cast<double>(components);
    return v;
  }
};

struct DataMeta {
  std::string kind;  // manifold | conditioned | union | varying_t
  std::size_t n = 0, d = 0, r = 0, t = 0;
  std::uint64_t seed = 0;
  std::string cond_mode;  // identity | random | onehot | prefix | (empty)
  std::vector<std::size_t> class_dims;  // union: per-class latent dims
  std::vector<std::size_t> t_choices;   // varying_t
  std::size_t pad_to = 0;               // varying_t: width of C
  Tensor gx;                            // (d, r); empty for union
  std::vector<Tensor> gx_class;         // union: per-class maps
  Tensor gc;                            // (t, t); empty unless mode=random
};

struct ManifoldDataset {
  Tensor X;  // (n, d), strictly inside (0,1)
  Tensor U;  // (n, r); union: zero-padded to max class dim
  Tensor C;  // (n, t_c); zero columns when unconditioned
  std::vector<int> labels;    // union: class per row
  std::vector<int> t_assign;  // varying_t: t per row
  DataMeta meta;

  std::size_t n() const { return X.dim(0); }
  std::size_t d() const { return X.dim(1); }
  std::size_t cond_dim() const { return C.rank() == 2 ? C.dim(1) : 0; }
};

inline double clamp_unit(double x) {
  if (x < 1e-12) return 1e-12;
  if (x > 1.0 - 1e-12) return 1.0 - 1e-12;
  return x;
}

// x_i = sigmoid(G_x u_i) row by row.
inline Tensor manifold_embed(const Tensor& u, const Tensor& gx) {
  const std::size_t n = u.dim(0), r = u.dim(1), d = gx.dim(0);
  if (gx.dim(1) != r)
    throw std::invalid_argument("manifold_embed: G_x is " +
                                shape_str(gx.shape()) + ", U is " +
                                shape_str(u.shape()));
  Tensor x({n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a) {
      double acc = 0.0;
      for (std::size_t j = 0; j < r; ++j) acc += gx.at(a, j) * u.at(i, j);
      x.at(i, a) = clamp_unit(stable_sigmoid(acc));
    }
  return x;
}

inline ManifoldDataset gen_manifold(std::size_t n, std::size_t d,
                                    std::size_t r, std::uint64_t seed,
                                    const Tensor* gx_override = nullptr) {
  if (n < 1) throw std::invalid_argument("gen_manifold: n >= 1 required");
  if (r < 1 || r > d)
    throw std::invalid_argument("gen_manifold: need 1 <= r <= d, got r=" +
                                std::to_string(r) + " d=" + std::to_string(d));
  if (gx_override &&
      (gx_override->rank() != 2 || gx_override->dim(0) != d ||
       gx_override->dim(1) != r))
    throw std::invalid_argument("gen_manifold: G_x override has shape " +
                                shape_str(gx_override->shape()));
  ManifoldDataset ds;
  GmmSpec gmm = GmmSpec::draw(r, 5, Rng::stream(seed, stream_tag::gmm).next_u64());
  Rng gxr = Rng::stream(seed, stream_tag::gx);
  ds.meta.gx = gx_override ? *gx_override : gxr.normal_tensor({d, r});
  Rng ur = Rng::stream(seed, stream_tag::draws);
  ds.U = gmm.sample(ur, n);
  ds.X = manifold_embed(ds.U, ds.meta.gx);
  ds.C = Tensor({n, 0});
  ds.meta.kind = "manifold";
  ds.meta.n = n;
  ds.meta.d = d;
  ds.meta.r = r;
  ds.meta.seed = seed;
  return ds;
}

enum class CondMode { identity, random };

// Derives C from the first t latent coordinates: c = G_c u_{1:t}, with
// G_c = I (identity mode) or a random invertible t x t map (random mode,
// resampled until the 2-norm condition number is below 1e6).
inline void gen_condition(ManifoldDataset& ds, std::size_t t, CondMode mode,
                          std::uint64_t seed) {
  if (t > ds.meta.r)
    throw std::invalid_argument("gen_condition: t=" + std::to_string(t) +
                                " exceeds r=" + std::to_string(ds.meta.r));
  const std::size_t n = ds.n();
  ds.meta.t = t;
  ds.meta.kind = "conditioned";
  ds.meta.cond_mode = mode == CondMode::identity ? "identity" : "random";
  if (t == 0) {
    ds.C = Tensor({n, 0});
    return;
  }
  if (mode == CondMode::identity) {
    ds.C = Tensor({n, t});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < t; ++j) ds.C.at(i, j) = ds.U.at(i, j);
    return;
  }
  Rng gcr = Rng::stream(seed, stream_tag::gc);
  Tensor gc;
  for (int tries = 0; tries < 64; ++tries) {
    gc = gcr.normal_tensor({t, t});
    if (cond2(gc) < 1e6) break;
    if (tries == 63)
      throw std::runtime_error("gen_condition: no well-conditioned G_c found");
  }
  ds.meta.gc = gc;
  ds.C = Tensor({n, t});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < t; ++a) {
      double acc = 0.0;
      for (std::size_t j = 0; j < t; ++j) acc += gc.at(a, j) * ds.U.at(i, j);
      ds.C.at(i, a) = acc;
    }
}

inline ManifoldDataset gen_conditioned(std::size_t n, std::size_t d,
                                       std::size_t r, std::size_t t,
                                       std::uint64_t seed,
                                       CondMode mode = CondMode::identity) {
  ManifoldDataset ds = gen_manifold(n, d, r, seed);
  gen_condition(ds, t, mode, seed);
  return ds;
}

// Class k keeps the master seed when k = 0 so a single-class union matches
// gen_manifold draw for draw.
inline std::uint64_t union_class_seed(std::uint64_t seed, std::size_t k) {
  return k == 0 ? seed : mix64(seed ^ mix64(0x8f1bbcdcull + k));
}

// Union of per-class manifolds with one-hot conditioning; class k has its own
// G_x and latent dimension class_dims[k]. Rows are grouped by class.
inline ManifoldDataset gen_union(std::size_t n, std::size_t d,
                                 const std::vector<std::size_t>& class_dims,
                                 std::uint64_t seed) {
  if (class_dims.empty())
    throw std::invalid_argument("gen_union: need at least one class");
  const std::size_t K = class_dims.size();
  if (n < K) throw std::invalid_argument("gen_union: fewer rows than classes");
  std::size_t max_r = 0;
  for (std::size_t rk : class_dims) {
    if (rk < 1 || rk > d)
      throw std::invalid_argument("gen_union: class dim out of range");
    max_r = std::max(max_r, rk);
  }
  ManifoldDataset out;
  out.X = Tensor({n, d});
  out.U = Tensor({n, max_r});
  out.C = Tensor({n, K});
  out.labels.resize(n);
  out.meta.kind = "union";
  out.meta.n = n;
  out.meta.d = d;
  out.meta.r = max_r;
  out.meta.seed = seed;
  out.meta.cond_mode = "onehot";
  out.meta.class_dims = class_dims;
  std::size_t row = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t nk = n / K + (k < n % K ? 1 : 0);
    ManifoldDataset part =
        gen_manifold(nk, d, class_dims[k], union_class_seed(seed, k));
    out.meta.gx_class.push_back(part.meta.gx);
    for (std::size_t i = 0; i < nk; ++i, ++row) {
      for (std::size_t a = 0; a < d; ++a) out.X.at(row, a) = part.X.at(i, a);
      for (std::size_t j = 0; j < class_dims[k]; ++j)
        out.U.at(row, j) = part.U.at(i, j);
      out.C.at(row, k) = 1.0;
      out.labels[row] = static_cast<int>(k);
    }
  }
  return out;
}

// One manifold; each row exposes a uniformly drawn prefix length t from
// t_choices, zero-padded to pad_to columns.
inline ManifoldDataset gen_varying_t(std::size_t n, std::size_t d,
                                     std::size_t r,
                                     const std::vector<std::size_t>& t_choices,
                                     std::size_t pad_to, std::uint64_t seed) {
  if (t_choices.empty())
    throw std::invalid_argument("gen_varying_t: empty t_choices");
  std::size_t max_t = 0;
  for (std::size_t t : t_choices) max_t = std::max(max_t, t);
  if (max_t > r)
    throw std::invalid_argument("gen_varying_t: max t exceeds r");
  if (pad_to < max_t)
    throw std::invalid_argument("gen_varying_t: pad_to below max t");
  ManifoldDataset ds = gen_manifold(n, d, r, seed);
  ds.meta.kind = "varying_t";
  ds.meta.cond_mode = "prefix";
  ds.meta.t_choices = t_choices;
  ds.meta.pad_to = pad_to;
  ds.C = Tensor({n, pad_to});
  ds.t_assign.resize(n);
  Rng ar = Rng::stream(seed, stream_tag::assign);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t = t_choices[ar.index(t_choices.size())];
    ds.t_assign[i] = static_cast<int>(t);
    for (std::size_t j = 0; j < t; ++j) ds.C.at(i, j) = ds.U.at(i, j);
  }
  return ds;
}

// ---- sequences -----------------------------------------------------------

struct SeqMeta {
  std::size_t n = 0, len = 0;
  std::uint64_t seed = 0;
  std::vector<double> ar, ma;
};

struct SeqDataset {
  Tensor sequences;  // (n, len)
  std::size_t window = 5;
  SeqMeta meta;
  std::size_t n() const { return sequences.dim(0); }
  std::size_t len() const { return sequences.dim(1); }

  // c_l: the `window` values before step l (0-based), chronological order,
  // zero-padded at the sequence start.
  std::vector<double> condition(std::size_t i, std::size_t l) const {
    std::vector<double> c(window, 0.0);
    for (std::size_t j = 0; j < window; ++j) {
      const std::ptrdiff_t src =
          static_cast<std::ptrdiff_t>(l) - static_cast<std::ptrdiff_t>(window) +
          static_cast<std::ptrdiff_t>(j);
      if (src >= 0) c[j] = sequences.at(i, static_cast<std::size_t>(src));
    }
    return c;
  }
};

inline void check_arma_stable(const std::vector<double>& ar) {
  const double a1 = ar.size() > 0 ? ar[0] : 0.0;
  const double a2 = ar.size() > 1 ? ar[1] : 0.0;
  if (ar.size() > 2)
    throw std::invalid_argument("arma: AR order above 2 unsupported");
  // stationarity triangle for AR(2)
  if (!(std::fabs(a2) < 1.0 && a2 + a1 < 1.0 && a2 - a1 < 1.0))
    throw std::invalid_argument("arma: unstable AR coefficients");
}

// x_t = a1 x_{t-1} + a2 x_{t-2} + e_t + b1 e_{t-1}, applied row by row.
// The first `burn` columns of innovations are discarded output.
inline Tensor arma_filter(const Tensor& innovations, std::size_t burn,
                          const std::vector<double>& ar,
                          const std::vector<double>& ma) {
  check_arma_stable(ar);
  if (ma.size() > 1)
    throw std::invalid_argument("arma: MA order above 1 unsupported");
  const double a1 = ar.size() > 0 ? ar[0] : 0.0;
  const double a2 = ar.size() > 1 ? ar[1] : 0.0;
  const double b1 = ma.size() > 0 ? ma[0] : 0.0;
  const std::size_t n = innovations.dim(0), total = innovations.dim(1);
  if (burn >= total)
    throw std::invalid_argument("arma_filter: burn-in exceeds innovation span");
  const std::size_t len = total - burn;
  Tensor out({n, len});
  for (std::size_t i = 0; i < n; ++i) {
    double x1 = 0.0, x2 = 0.0, e1 = 0.0;
    for (std::size_t tix = 0; tix < total; ++tix) {
      const double e = innovations.at(i, tix);
      const double x = a1 * x1 + a2 * x2 + e + b1 * e1;
      x2 = x1;
      x1 = x;
      e1 = e;
      if (tix >= burn) out.at(i, tix - burn) = x;
    }
  }
  return out;
}

inline SeqDataset gen_arma(std::size_t n, std::size_t len, std::uint64_t seed,
                           std::vector<double> ar = {0.6, -0.2},
                           std::vector<double> ma = {0.3},
                           std::size_t window = 5) {
  if (n < 1 || len < 2) throw std::invalid_argument("gen_arma: need n>=1, len>=2");
  if (len <= window)
    throw std::invalid_argument("gen_arma: length must exceed window");
  check_arma_stable(ar);
  const std::size_t burn = 512;
  Rng er = Rng::stream(seed, stream_tag::innov);
  Tensor innov = er.normal_tensor({n, burn + len});
  SeqDataset ds;
  ds.sequences = arma_filter(innov, burn, ar, ma);
  ds.window = window;
  ds.meta = SeqMeta{n, len, seed, std::move(ar), std::move(ma)};
  return ds;
}

// Theoretical lag-0 autocovariance of the ARMA(2,1) process, from the
// Yule-Walker system (oracle for variance checks).
inline double arma21_variance(double a1, double a2, double b1,
                              double innov_var = 1.0) {
  // cross-covariances g_k = E[x_t e_{t-k}]
  const double g0 = innov_var;
  const double g1 = (a1 + b1) * innov_var;
  // gamma_0 = a1 g^x_1 + a2 g^x_2 + (1 + b1 (a1 + b1)) s2  with the
  // autocovariance recursions substituted; solve the 3x3 system directly.
  // unknowns: c0, c1, c2
  // c0 - a1 c1 - a2 c2 = s2 (1 + b1 a1 + b1^2) ... derived below
  // Standard form:
  //   c0 = a1 c1 + a2 c2 + s2 + b1 g1
  //   c1 = a1 c0 + a2 c1 + b1 s2
  //   c2 = a1 c1 + a2 c0
  (void)g0;
  const double s2 = innov_var;
  // Solve the linear system with substitution.
  // From (2): c1 (1 - a2) = a1 c0 + b1 s2  ->  c1 = (a1 c0 + b1 s2)/(1-a2)
  // From (3): c2 = a1 c1 + a2 c0
  // Plug into (1).
  const double denom1 = 1.0 - a2;
  auto c1_of = [&](double c0) { return (a1 * c0 + b1 * s2) / denom1; };
  // c0 = a1 c1 + a2 (a1 c1 + a2 c0) + s2 + b1 g1
  //    = (a1 + a2 a1) c1 + a2^2 c0 + s2 + b1 g1
  // c0 (1 - a2^2) = a1 (1 + a2) c1 + s2 + b1 g1
  // substitute c1:
  // c0 (1 - a2^2) = a1 (1 + a2) (a1 c0 + b1 s2)/(1 - a2) + s2 + b1 g1
  const double k = a1 * (1.0 + a2) / denom1;
  const double lhs = (1.0 - a2 * a2) - k * a1;
  const double rhs = k * b1 * s2 + s2 + b1 * g1;
  return rhs / lhs;
}

}  // namespace vaedim
