#pragma once
// Post-training analysis. A latent dimension is "active" when the median
// over evaluation samples of its encoder variance (plain models) or of its
// encoder/prior variance ratio (conditional models) falls strictly below the
// threshold, 0.05 by default. Full-covariance models rank per-sample
// eigenvalues and take medians per rank. Medians make the count robust to
// the near-0-or-1 clustering that converged models exhibit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vaedim/datagen.hpp"
#include "vaedim/linalg.hpp"
#include "vaedim/losses.hpp"
#include "vaedim/models.hpp"
#include "vaedim/rng.hpp"

namespace vaedim {

constexpr double kAdThreshold = 0.05;

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
  return 0.5 * (v[mid - 1] + hi);
}

struct AdResult {
  std::size_t ad = 0;
  std::vector<double> per_dim_median;    // the statistic the rule thresholds
  std::vector<double> per_dim_fraction;  // fraction of samples below threshold
};

// variances: (n, kappa), sigma_z^2 per sample and dimension
inline AdResult active_dims_vae(const Tensor& variances,
                                double threshold = kAdThreshold) {
  if (threshold <= 0.0 || threshold >= 1.0)
    throw std::invalid_argument("active-dimension threshold must be in (0,1)");
  const std::size_t n = variances.dim(0), k = variances.numel() / n;
  AdResult out;
  out.per_dim_median.resize(k);
  out.per_dim_fraction.resize(k);
  std::vector<double> col(n);
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t below = 0;
    for (std::size_t i = 0; i < n; ++i) {
      col[i] = variances[i * k + j];
      if (col[i] < threshold) ++below;
    }
    out.per_dim_median[j] = median(col);
    out.per_dim_fraction[j] =
        static_cast<double>(below) / static_cast<double>(n);
    if (out.per_dim_median[j] < threshold) ++out.ad;  // strict
  }
  return out;
}

// dimension active iff median of sigma_q^2 / sigma_p^2 is below threshold
inline AdResult active_dims_cvae(const Tensor& enc_var, const Tensor& prior_var,
                                 double threshold = kAdThreshold) {
  if (!(enc_var.shape() == prior_var.shape()))
    throw shape_error("active_dims_cvae: variance shapes differ");
  Tensor ratio(enc_var.shape());
  for (std::size_t i = 0; i < ratio.numel(); ++i) {
    if (enc_var[i] <= 0.0 || prior_var[i] <= 0.0)
      throw std::invalid_argument("active_dims_cvae: variances must be positive");
    ratio[i] = enc_var[i] / prior_var[i];
  }
  return active_dims_vae(ratio, threshold);
}

// covs: (n, kappa, kappa) SPD; medians are taken per sorted-eigenvalue rank
inline AdResult active_dims_full(const Tensor& covs,
                                 double threshold = kAdThreshold) {
  const std::size_t n = covs.dim(0), k = covs.dim(1);
  Tensor spectra({n, k});
  Tensor cov({k, k});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t e = 0; e < k * k; ++e) cov[e] = covs[i * k * k + e];
    std::vector<double> eig = sym_eig(cov);  // ascending
    if (eig.front() <= 0.0)
      throw std::invalid_argument("active_dims_full: covariance not positive definite");
    for (std::size_t j = 0; j < k; ++j) spectra[i * k + j] = eig[j];
  }
  return active_dims_vae(spectra, threshold);
}

struct MetricsRecord {
  double neg_elbo = 0.0;
  double recon = 0.0;  // mean squared reconstruction gap per sample
  double kl = 0.0;
  double gamma = 0.0;
  std::size_t ad = 0;
  std::map<std::string, std::size_t> ad_per_group;
  std::vector<double> variance_profile;  // per-dim medians behind `ad`
  std::size_t n_samples = 0;
};

enum class GroupBy { none, label, t_assign };

namespace detail {
constexpr std::uint64_t eval_noise_stream = 0xE7A1;

inline std::string group_key(GroupBy g, const ManifoldDataset& data,
                             std::size_t row) {
  if (g == GroupBy::label) return std::to_string(data.labels.at(row));
  return "t=" + std::to_string(data.t_assign.at(row));
}
}  // namespace detail

// Deterministic held-out evaluation: fixed noise stream, one reparameterized
// draw per sample for the loss, closed-form variances for the AD rule.
inline MetricsRecord evaluate(const ModelParams& params,
                              const ManifoldDataset& data, GroupBy group_by,
                              std::uint64_t noise_seed,
                              double threshold = kAdThreshold,
                              std::size_t batch = 512) {
  const ModelSpec& spec = params.spec;
  if (spec.recurrent)
    throw std::invalid_argument("evaluate: recurrent model on manifold data");
  if (spec.d != data.d())
    throw shape_error("evaluate: model d does not match dataset");
  // cond_dim 0 reads only X, so conditioned datasets are fine to reuse
  if (spec.cond_dim > 0 && spec.cond_dim != data.cond_dim())
    throw shape_error("evaluate: model cond_dim does not match dataset");
  if (group_by == GroupBy::label && data.labels.empty())
    throw std::invalid_argument("evaluate: dataset has no labels");
  if (group_by == GroupBy::t_assign && data.t_assign.empty())
    throw std::invalid_argument("evaluate: dataset has no t assignments");

  const std::size_t n = data.n(), d = spec.d, k = spec.kappa;
  Rng noise = Rng::stream(noise_seed, detail::eval_noise_stream);

  // per-sample activity statistic: variance, ratio, or eigenvalue spectrum
  Tensor stats({n, k});
  double nll_sum = 0.0, kl_sum = 0.0, mse_sum = 0.0;

  for (std::size_t lo = 0; lo < n; lo += batch) {
    const std::size_t hi = std::min(n, lo + batch);
    const std::size_t B = hi - lo;
    Tensor xb({B, d});
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < d; ++j) xb.at(i, j) = data.X.at(lo + i, j);
    Tensor cb({B, data.cond_dim()});
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < data.cond_dim(); ++j)
        cb.at(i, j) = data.C.at(lo + i, j);

    Tape t;
    BoundModel m(t, params);
    Var x = t.input(xb);
    Var c = spec.cond_dim > 0 ? t.input(cb) : Var{};
    Var eps = t.input(noise.normal_tensor({B, k}));

    LossBreakdown lb = spec.cond_dim > 0 ? elbo_cvae(m, x, c, eps)
                                         : elbo_vae(m, x, eps);
    nll_sum += lb.recon_nll_v * static_cast<double>(B);
    kl_sum += lb.kl_v * static_cast<double>(B);
    mse_sum += lb.recon_mse_v * static_cast<double>(B);

    if (spec.cov == Cov::full) {
      FullHeads q = m.encode_full(x, c);
      const Tensor& chol = t.value(q.chol);
      Tensor cov({k, k});
      for (std::size_t i = 0; i < B; ++i) {
        // cov = L L^T per sample
        for (std::size_t a = 0; a < k; ++a)
          for (std::size_t b2 = 0; b2 < k; ++b2) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p)
              acc += chol[(i * k + a) * k + p] * chol[(i * k + b2) * k + p];
            cov.at(a, b2) = acc;
          }
        std::vector<double> eig = sym_eig(cov);
        if (eig.front() <= 0.0)
          throw std::invalid_argument("evaluate: encoder covariance not SPD");
        for (std::size_t j = 0; j < k; ++j) stats[(lo + i) * k + j] = eig[j];
      }
    } else {
      GaussHeads q = m.posterior(x, c);
      const Tensor& lv = t.value(q.logvar);
      if (spec.prior == Prior::conditional) {
        GaussHeads pr = m.prior_raw(c);
        const Tensor& plv = t.value(pr.logvar);
        for (std::size_t e = 0; e < B * k; ++e)
          stats[lo * k + e] = std::exp(lv[e] - plv[e]);
      } else {
        // standard or converted prior: the variance is the statistic
        for (std::size_t e = 0; e < B * k; ++e)
          stats[lo * k + e] = std::exp(lv[e]);
      }
    }
  }

  MetricsRecord rec;
  rec.n_samples = n;
  rec.gamma = params.gamma();
  rec.neg_elbo = (nll_sum + kl_sum) / static_cast<double>(n);
  rec.kl = kl_sum / static_cast<double>(n);
  rec.recon = mse_sum / static_cast<double>(n);

  AdResult global = active_dims_vae(stats, threshold);
  rec.ad = global.ad;
  rec.variance_profile = global.per_dim_median;

  if (group_by != GroupBy::none) {
    std::map<std::string, std::vector<std::size_t>> rows;
    for (std::size_t i = 0; i < n; ++i)
      rows[detail::group_key(group_by, data, i)].push_back(i);
    for (const auto& [key, idx] : rows) {
      Tensor sub({idx.size(), k});
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < k; ++j)
          sub.at(i, j) = stats[idx[i] * k + j];
      rec.ad_per_group[key] = active_dims_vae(sub, threshold).ad;
    }
  }
  return rec;
}

// Sequential evaluation pools the per-step encoder/prior variance ratios
// over samples and steps; the loss fields follow the sequential objective.
inline MetricsRecord evaluate_seq(const ModelParams& params,
                                  const SeqDataset& data,
                                  std::uint64_t noise_seed,
                                  double threshold = kAdThreshold,
                                  std::size_t batch = 64) {
  const ModelSpec& spec = params.spec;
  if (!spec.recurrent)
    throw std::invalid_argument("evaluate_seq: model is not recurrent");
  const std::size_t n = data.n(), len = data.len(), k = spec.kappa;
  Rng noise = Rng::stream(noise_seed, detail::eval_noise_stream);

  Tensor stats({n * len, k});
  double nll_sum = 0.0, kl_sum = 0.0, mse_sum = 0.0;
  for (std::size_t lo = 0; lo < n; lo += batch) {
    const std::size_t hi = std::min(n, lo + batch);
    const std::size_t B = hi - lo;
    Tensor xb({B, len});
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t l = 0; l < len; ++l)
        xb.at(i, l) = data.sequences.at(lo + i, l);
    Tape t;
    BoundModel m(t, params);
    Var x = t.input(xb);
    Var eps = t.input(noise.normal_tensor({B, len * k}));
    LossBreakdown lb = elbo_seq(m, x, eps);
    nll_sum += lb.recon_nll_v * static_cast<double>(B);
    kl_sum += lb.kl_v * static_cast<double>(B);
    mse_sum += lb.recon_mse_v * static_cast<double>(B);

    SeqForward sf = m.seq_forward(x, eps);
    for (std::size_t l = 0; l < len; ++l) {
      const Tensor& qv = t.value(sf.q[l].logvar);
      const Tensor& pv = t.value(sf.p[l].logvar);
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < k; ++j)
          stats[((lo + i) * len + l) * k + j] =
              std::exp(qv[i * k + j] - pv[i * k + j]);
    }
  }

  MetricsRecord rec;
  rec.n_samples = n;
  rec.gamma = params.gamma();
  rec.neg_elbo = (nll_sum + kl_sum) / static_cast<double>(n);
  rec.kl = kl_sum / static_cast<double>(n);
  rec.recon = mse_sum / static_cast<double>(n);
  AdResult global = active_dims_vae(stats, threshold);
  rec.ad = global.ad;
  rec.variance_profile = global.per_dim_median;
  return rec;
}

// ---- reporting ----------------------------------------------------------

struct RunContext {
  std::string run_id;
  std::size_t d = 0, r = 0, t = 0, kappa = 0;
  std::uint64_t seed = 0;
};

inline std::string csv_header() {
  return "run_id,d,r,t,kappa,seed,neg_elbo,recon,kl,gamma,ad,group";
}

namespace detail {
inline std::string fmt_g(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}
}  // namespace detail

// One row per record plus one per group; fixed column order.
inline void append_csv_rows(std::string& out, const RunContext& ctx,
                            const MetricsRecord& rec) {
  auto row = [&](std::size_t ad, const std::string& group) {
    out += ctx.run_id + "," + std::to_string(ctx.d) + "," +
           std::to_string(ctx.r) + "," + std::to_string(ctx.t) + "," +
           std::to_string(ctx.kappa) + "," + std::to_string(ctx.seed) + "," +
           detail::fmt_g(rec.neg_elbo) + "," + detail::fmt_g(rec.recon) + "," +
           detail::fmt_g(rec.kl) + "," + detail::fmt_g(rec.gamma) + "," +
           std::to_string(ad) + "," + group + "\n";
  };
  row(rec.ad, "all");
  for (const auto& [key, ad] : rec.ad_per_group) row(ad, key);
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // max absolute deviation from the fit
};

inline SlopeFit slope_fit(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 3)
    throw std::invalid_argument("slope_fit needs at least 3 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(pts.size());
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double det = n * sxx - sx * sx;
  if (std::fabs(det) < 1e-12 * std::max(1.0, n * sxx))
    throw std::invalid_argument("slope_fit: degenerate design (all x equal)");
  SlopeFit f;
  f.slope = (n * sxy - sx * sy) / det;
  f.intercept = (sy - f.slope * sx) / n;
  for (const auto& [x, y] : pts)
    f.residual = std::max(f.residual,
                          std::fabs(y - (f.intercept + f.slope * x)));
  return f;
}

// Minimal pipe-table renderer for reports.
inline std::string markdown_table(const std::vector<std::string>& header,
                                  const std::vector<std::vector<std::string>>& rows) {
  std::string out = "|";
  for (const auto& h : header) out += " " + h + " |";
  out += "\n|";
  for (std::size_t i = 0; i < header.size(); ++i) out += " --- |";
  out += "\n";
  for (const auto& r : rows) {
    if (r.size() != header.size())
      throw std::invalid_argument("markdown_table: ragged row");
    out += "|";
    for (const auto& cell : r) out += " " + cell + " |";
    out += "\n";
  }
  return out;
}

}  // namespace vaedim
