#pragma once
// Experiment orchestration: JSON-configured runs, seeded training, preset
// grids for each reference table, parallel sweeps, artifact directories,
// and report rendering. Every run is a pure function of its config: data,
// initialization, batch order, and noise all derive from the stored seeds,
// so rerunning a config reproduces each emitted byte except timing fields.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "vaedim/checkpoint.hpp"
#include "vaedim/datagen.hpp"
#include "vaedim/diagnostics.hpp"
#include "vaedim/losses.hpp"
#include "vaedim/models.hpp"
#include "vaedim/optim.hpp"
#include "vaedim/rng.hpp"

namespace vaedim {

constexpr const char* kCodeVersion = "1";
constexpr double kLogGammaFloor = -20.723265836946411;  // log(1e-9)

// ---- configuration -------------------------------------------------------

struct GeneratorConfig {
  std::string family = "manifold";  // manifold|conditioned|union|varying_t|arma
  std::size_t n = 10000;
  std::size_t d = 20;
  std::size_t r = 4;
  std::size_t t = 0;                   // conditioned: width of c
  std::string cond_mode = "identity";  // conditioned: identity|random
  std::vector<std::size_t> class_dims; // union: per-class manifold dims
  std::vector<std::size_t> t_choices;  // varying_t: prefix lengths
  std::size_t pad_to = 0;              // varying_t: fixed width of c
  std::size_t len = 16;                // arma: sequence length
  std::uint64_t seed = 1;

  void validate() const {
    if (n < 2) throw std::invalid_argument("generator: n must be at least 2");
    if (family == "manifold" || family == "conditioned") {
      if (d < 1 || r < 1) throw std::invalid_argument("generator: d, r >= 1");
      if (family == "conditioned") {
        if (t < 1 || t > r)
          throw std::invalid_argument("generator: conditioned needs 1 <= t <= r");
        if (cond_mode != "identity" && cond_mode != "random")
          throw std::invalid_argument("generator: cond_mode must be identity or random");
      }
    } else if (family == "union") {
      if (class_dims.empty())
        throw std::invalid_argument("generator: union needs class_dims");
    } else if (family == "varying_t") {
      if (t_choices.empty() || pad_to == 0)
        throw std::invalid_argument("generator: varying_t needs t_choices and pad_to");
    } else if (family == "arma") {
      if (len < 2) throw std::invalid_argument("generator: arma needs len >= 2");
    } else {
      throw std::invalid_argument("generator: unknown family " + family);
    }
  }

  // width of the conditioning block this generator emits
  std::size_t emitted_cond() const {
    if (family == "conditioned") return t;
    if (family == "union") return class_dims.size();
    if (family == "varying_t") return pad_to;
    return 0;
  }
};

struct TrainConfig {
  std::size_t steps = 40000;
  std::size_t batch = 256;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  std::size_t eval_interval = 0;  // 0: evaluate at the end only
  bool fixed_gamma = false;       // log_gamma stays at its initialization
  double held_out = 0.1;          // evaluation split fraction

  void validate() const {
    if (steps < 1 || batch < 1)
      throw std::invalid_argument("training: steps and batch must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("training: lr must be positive");
    if (!(held_out > 0.0) || !(held_out < 1.0))
      throw std::invalid_argument("training: held_out must be in (0,1)");
  }
};

struct ExperimentConfig {
  std::string run_id;
  GeneratorConfig gen;
  ModelSpec model;
  TrainConfig train;
  std::string group_by = "none";  // none|label|t_assign

  void validate() const {
    if (run_id.empty()) throw std::invalid_argument("config: run_id required");
    if (run_id.find(',') != std::string::npos ||
        run_id.find('\n') != std::string::npos)
      throw std::invalid_argument("config: run_id must be CSV-safe");
    gen.validate();
    model.validate();
    train.validate();
    if (group_by != "none" && group_by != "label" && group_by != "t_assign")
      throw std::invalid_argument("config: unknown group_by " + group_by);
    if (group_by == "label" && gen.family != "union")
      throw std::invalid_argument("config: label grouping needs the union family");
    if (group_by == "t_assign" && gen.family != "varying_t")
      throw std::invalid_argument("config: t grouping needs the varying_t family");
    if (gen.family == "arma") {
      if (!model.recurrent)
        throw std::invalid_argument("config: arma data needs a recurrent model");
      if (group_by != "none")
        throw std::invalid_argument("config: sequences do not support grouping");
    } else {
      if (model.recurrent)
        throw std::invalid_argument("config: recurrent model needs arma data");
      if (model.d != gen.d)
        throw std::invalid_argument("config: model d does not match the generator");
      // an unconditional model on conditioned data just ignores c
      if (model.cond_dim > 0 && model.cond_dim != gen.emitted_cond())
        throw std::invalid_argument(
            "config: model cond_dim does not match the generator");
    }
  }
};

inline GroupBy group_by_from_string(const std::string& s) {
  if (s == "none") return GroupBy::none;
  if (s == "label") return GroupBy::label;
  if (s == "t_assign") return GroupBy::t_assign;
  throw std::invalid_argument("unknown group_by " + s);
}

// ---- JSON schema ----------------------------------------------------------

inline json config_to_json(const ExperimentConfig& c) {
  json g{{"family", c.gen.family}, {"n", c.gen.n},       {"d", c.gen.d},
         {"r", c.gen.r},           {"t", c.gen.t},       {"cond_mode", c.gen.cond_mode},
         {"class_dims", c.gen.class_dims},               {"t_choices", c.gen.t_choices},
         {"pad_to", c.gen.pad_to}, {"len", c.gen.len},   {"seed", c.gen.seed}};
  json t{{"steps", c.train.steps},
         {"batch", c.train.batch},
         {"lr", c.train.lr},
         {"seed", c.train.seed},
         {"eval_interval", c.train.eval_interval},
         {"fixed_gamma", c.train.fixed_gamma},
         {"held_out", c.train.held_out}};
  return json{{"run_id", c.run_id},
              {"generator", g},
              {"model", spec_to_json(c.model)},
              {"training", t},
              {"group_by", c.group_by}};
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  c.run_id = j.at("run_id").get<std::string>();
  const json& g = j.at("generator");
  c.gen.family = g.at("family").get<std::string>();
  c.gen.n = g.at("n").get<std::size_t>();
  c.gen.d = g.at("d").get<std::size_t>();
  c.gen.r = g.at("r").get<std::size_t>();
  c.gen.t = g.at("t").get<std::size_t>();
  c.gen.cond_mode = g.at("cond_mode").get<std::string>();
  c.gen.class_dims = g.at("class_dims").get<std::vector<std::size_t>>();
  c.gen.t_choices = g.at("t_choices").get<std::vector<std::size_t>>();
  c.gen.pad_to = g.at("pad_to").get<std::size_t>();
  c.gen.len = g.at("len").get<std::size_t>();
  c.gen.seed = g.at("seed").get<std::uint64_t>();
  c.model = spec_from_json(j.at("model"));
  const json& t = j.at("training");
  c.train.steps = t.at("steps").get<std::size_t>();
  c.train.batch = t.at("batch").get<std::size_t>();
  c.train.lr = t.at("lr").get<double>();
  c.train.seed = t.at("seed").get<std::uint64_t>();
  c.train.eval_interval = t.at("eval_interval").get<std::size_t>();
  c.train.fixed_gamma = t.at("fixed_gamma").get<bool>();
  c.train.held_out = t.at("held_out").get<double>();
  c.group_by = j.at("group_by").get<std::string>();
  c.validate();
  return c;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

// Hash of the canonical config dump plus the code version; identifies a run.
inline std::string config_hash(const ExperimentConfig& c) {
  const std::uint64_t h =
      fnv1a(std::string(kCodeVersion) + "|" + config_to_json(c).dump());
  std::ostringstream os;
  os << std::hex << h;
  std::string s = os.str();
  return std::string(16 - s.size(), '0') + s;
}

// ---- data plumbing ---------------------------------------------------------

inline ManifoldDataset generate_manifold_data(const GeneratorConfig& g) {
  if (g.family == "manifold") return gen_manifold(g.n, g.d, g.r, g.seed);
  if (g.family == "conditioned")
    return gen_conditioned(g.n, g.d, g.r, g.t, g.seed,
                           g.cond_mode == "identity" ? CondMode::identity
                                                     : CondMode::random);
  if (g.family == "union") return gen_union(g.n, g.d, g.class_dims, g.seed);
  if (g.family == "varying_t")
    return gen_varying_t(g.n, g.d, g.r, g.t_choices, g.pad_to, g.seed);
  throw std::invalid_argument("not a manifold family: " + g.family);
}

inline SeqDataset generate_seq_data(const GeneratorConfig& g) {
  if (g.family != "arma")
    throw std::invalid_argument("not a sequence family: " + g.family);
  return gen_arma(g.n, g.len, g.seed);
}

struct Split {
  std::vector<std::size_t> train, eval;
};

// Shuffled by seed; the first held-out block evaluates, the rest trains.
inline Split split_indices(std::size_t n, double held_out, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("split: n must be at least 2");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng = Rng::stream(seed, 0x5B117);
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.index(i + 1)]);
  std::size_t h = static_cast<std::size_t>(std::lround(held_out * n));
  h = std::min(std::max<std::size_t>(h, 1), n - 1);
  Split s;
  s.eval.assign(idx.begin(), idx.begin() + h);
  s.train.assign(idx.begin() + h, idx.end());
  return s;
}

inline ManifoldDataset subset(const ManifoldDataset& d,
                              const std::vector<std::size_t>& rows) {
  ManifoldDataset out;
  out.meta = d.meta;
  out.X = Tensor({rows.size(), d.d()});
  out.U = Tensor({rows.size(), d.U.dim(1)});
  out.C = Tensor({rows.size(), d.cond_dim()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d.d(); ++j) out.X.at(i, j) = d.X.at(rows[i], j);
    for (std::size_t j = 0; j < d.U.dim(1); ++j)
      out.U.at(i, j) = d.U.at(rows[i], j);
    for (std::size_t j = 0; j < d.cond_dim(); ++j)
      out.C.at(i, j) = d.C.at(rows[i], j);
  }
  if (!d.labels.empty())
    for (std::size_t i : rows) out.labels.push_back(d.labels[i]);
  if (!d.t_assign.empty())
    for (std::size_t i : rows) out.t_assign.push_back(d.t_assign[i]);
  return out;
}

inline SeqDataset subset(const SeqDataset& d,
                         const std::vector<std::size_t>& rows) {
  SeqDataset out;
  out.meta = d.meta;
  out.window = d.window;
  out.sequences = Tensor({rows.size(), d.len()});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t l = 0; l < d.len(); ++l)
      out.sequences.at(i, l) = d.sequences.at(rows[i], l);
  return out;
}

// ---- training --------------------------------------------------------------

struct EvalPoint {
  std::size_t step = 0;
  MetricsRecord metrics;
};

struct RunResult {
  ExperimentConfig config;
  std::string hash;
  MetricsRecord final_metrics;
  std::vector<EvalPoint> history;  // periodic evaluations, final included
  std::size_t steps_done = 0;
  bool aborted = false;
  std::string abort_reason;
  double seconds = 0.0;  // wall clock, excluded from artifacts
  bool from_cache = false;
  ModelParams params;
};

namespace detail {
constexpr std::uint64_t batch_stream = 0xBA7C4;
constexpr std::uint64_t train_noise_stream = 0x7A19;
constexpr std::uint64_t eval_seed_salt = 0xE5EED;

// endless shuffled walk over the training indices
class BatchSampler {
 public:
  BatchSampler(std::vector<std::size_t> idx, std::uint64_t seed)
      : idx_(std::move(idx)), rng_(Rng::stream(seed, batch_stream)) {
    reshuffle();
  }
  std::size_t next() {
    if (pos_ == idx_.size()) reshuffle();
    return idx_[pos_++];
  }

 private:
  void reshuffle() {
    for (std::size_t i = idx_.size() - 1; i > 0; --i)
      std::swap(idx_[i], idx_[rng_.index(i + 1)]);
    pos_ = 0;
  }
  std::vector<std::size_t> idx_;
  Rng rng_;
  std::size_t pos_ = 0;
};
}  // namespace detail

inline RunResult train_run(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  RunResult res;
  res.config = cfg;
  res.hash = config_hash(cfg);

  const bool seq = cfg.gen.family == "arma";
  ManifoldDataset mdata;
  SeqDataset sdata;
  std::size_t total = 0;
  if (seq) {
    sdata = generate_seq_data(cfg.gen);
    total = sdata.n();
  } else {
    mdata = generate_manifold_data(cfg.gen);
    total = mdata.n();
  }
  Split split = split_indices(total, cfg.train.held_out, cfg.train.seed);
  ManifoldDataset meval;
  SeqDataset seval;
  if (seq)
    seval = subset(sdata, split.eval);
  else
    meval = subset(mdata, split.eval);

  ModelParams params = init_model(cfg.model, cfg.train.seed);
  Adam opt(AdamConfig{cfg.train.lr, 0.9, 0.999, 1e-8});
  detail::BatchSampler sampler(split.train, cfg.train.seed);
  Rng noise = Rng::stream(cfg.train.seed, detail::train_noise_stream);
  const std::uint64_t eval_seed = cfg.train.seed ^ detail::eval_seed_salt;
  const GroupBy gb = group_by_from_string(cfg.group_by);

  const std::size_t B = cfg.train.batch;
  const std::size_t d = seq ? sdata.len() : mdata.d();
  const std::size_t k = cfg.model.kappa;
  const std::size_t tc = cfg.model.cond_dim;
  const std::size_t noise_cols = seq ? sdata.len() * k : k;

  std::vector<std::string> trainable;
  for (const std::string& name : params.names)
    if (!(cfg.train.fixed_gamma && name == "log_gamma"))
      trainable.push_back(name);

  auto run_eval = [&](std::size_t step) {
    MetricsRecord rec = seq ? evaluate_seq(params, seval, eval_seed)
                            : evaluate(params, meval, gb, eval_seed);
    res.history.push_back({step, std::move(rec)});
  };

  Tensor xb({B, d}), cb({B, tc});
  for (std::size_t step = 1; step <= cfg.train.steps; ++step) {
    for (std::size_t i = 0; i < B; ++i) {
      const std::size_t row = sampler.next();
      if (seq)
        for (std::size_t j = 0; j < d; ++j)
          xb.at(i, j) = sdata.sequences.at(row, j);
      else
        for (std::size_t j = 0; j < d; ++j) xb.at(i, j) = mdata.X.at(row, j);
      for (std::size_t j = 0; j < tc; ++j) cb.at(i, j) = mdata.C.at(row, j);
    }

    Tape t;
    BoundModel m(t, params);
    Var x = t.input(xb);
    Var eps = t.input(noise.normal_tensor({B, noise_cols}));
    LossBreakdown lb;
    try {
      if (seq)
        lb = elbo_seq(m, x, eps);
      else if (tc > 0)
        lb = elbo_cvae(m, x, t.input(cb), eps);
      else
        lb = elbo_vae(m, x, eps);
    } catch (const numeric_error& e) {
      res.aborted = true;
      res.abort_reason =
          std::string(e.what()) + " at step " + std::to_string(step);
      res.steps_done = step - 1;
      break;
    }

    t.backward(lb.total);
    std::vector<Tensor*> ps;
    std::vector<const Tensor*> gs;
    ps.reserve(trainable.size());
    gs.reserve(trainable.size());
    for (const std::string& name : trainable) {
      ps.push_back(&params.get(name));
      gs.push_back(&t.grad(m.leaf(name)));
    }
    opt.step(ps, gs, trainable);
    if (!cfg.train.fixed_gamma && params.log_gamma() < kLogGammaFloor)
      params.set_log_gamma(kLogGammaFloor);
    res.steps_done = step;

    if (cfg.train.eval_interval > 0 && step % cfg.train.eval_interval == 0 &&
        step != cfg.train.steps)
      run_eval(step);
  }

  if (!res.aborted) run_eval(res.steps_done);
  if (!res.history.empty())
    res.final_metrics = res.history.back().metrics;
  res.params = std::move(params);
  res.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

// ---- artifacts --------------------------------------------------------------

inline std::string run_dir() {
  if (const char* env = std::getenv("RUN_DIR")) return env;
  return "runs";
}

inline json metrics_to_json(const MetricsRecord& m) {
  return json{{"neg_elbo", m.neg_elbo},
              {"recon", m.recon},
              {"kl", m.kl},
              {"gamma", m.gamma},
              {"ad", m.ad},
              {"ad_per_group", m.ad_per_group},
              {"variance_profile", m.variance_profile},
              {"n_samples", m.n_samples}};
}

inline MetricsRecord metrics_from_json(const json& j) {
  MetricsRecord m;
  m.neg_elbo = j.at("neg_elbo").get<double>();
  m.recon = j.at("recon").get<double>();
  m.kl = j.at("kl").get<double>();
  m.gamma = j.at("gamma").get<double>();
  m.ad = j.at("ad").get<std::size_t>();
  m.ad_per_group = j.at("ad_per_group").get<std::map<std::string, std::size_t>>();
  m.variance_profile = j.at("variance_profile").get<std::vector<double>>();
  m.n_samples = j.at("n_samples").get<std::size_t>();
  return m;
}

inline RunContext run_context(const ExperimentConfig& cfg) {
  RunContext ctx;
  ctx.run_id = cfg.run_id;
  ctx.d = cfg.gen.family == "arma" ? 1 : cfg.gen.d;
  ctx.r = cfg.gen.family == "arma" ? 0 : cfg.gen.r;
  ctx.t = cfg.gen.t;
  ctx.kappa = cfg.model.kappa;
  ctx.seed = cfg.train.seed;
  return ctx;
}

struct RunArtifact {
  std::string hash;
  std::string dir;
  std::string checkpoint_path;  // empty for aborted runs
  std::string csv_path;
  std::vector<EvalPoint> history;
};

namespace detail {
inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("cannot open " + path + " for writing");
  f << text;
  if (!f.good()) throw io_error("short write to " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

// run_id may contain '/', which nests directories under the root
inline std::string artifact_dir(const std::string& root,
                                const ExperimentConfig& cfg) {
  return root + "/" + cfg.run_id + "-" + config_hash(cfg);
}
}  // namespace detail

inline RunArtifact write_artifact(const RunResult& res,
                                  const std::string& root = run_dir()) {
  RunArtifact art;
  art.hash = res.hash;
  art.dir = detail::artifact_dir(root, res.config);
  std::filesystem::create_directories(art.dir);

  detail::write_text(art.dir + "/config.json",
                     config_to_json(res.config).dump(2) + "\n");

  json hist = json::array();
  for (const EvalPoint& p : res.history)
    hist.push_back(json{{"step", p.step}, {"metrics", metrics_to_json(p.metrics)}});
  json run{{"hash", res.hash},
           {"steps_done", res.steps_done},
           {"aborted", res.aborted},
           {"abort_reason", res.abort_reason},
           {"history", hist}};
  detail::write_text(art.dir + "/run.json", run.dump(2) + "\n");

  std::string csv = csv_header() + "\n";
  append_csv_rows(csv, run_context(res.config), res.final_metrics);
  art.csv_path = art.dir + "/metrics.csv";
  detail::write_text(art.csv_path, csv);

  if (!res.aborted) {
    art.checkpoint_path = art.dir + "/checkpoint.bin";
    save_checkpoint(art.checkpoint_path, res.params);
  }
  art.history = res.history;
  return art;
}

inline bool artifact_exists(const ExperimentConfig& cfg,
                            const std::string& root = run_dir()) {
  const std::string dir = detail::artifact_dir(root, cfg);
  return std::filesystem::exists(dir + "/config.json") &&
         std::filesystem::exists(dir + "/run.json") &&
         std::filesystem::exists(dir + "/metrics.csv");
}

inline RunResult load_artifact(const ExperimentConfig& cfg,
                               const std::string& root = run_dir()) {
  const std::string dir = detail::artifact_dir(root, cfg);
  RunResult res;
  res.config = config_from_json(json::parse(detail::read_text(dir + "/config.json")));
  res.hash = config_hash(res.config);
  if (res.hash != config_hash(cfg))
    throw io_error("artifact at " + dir + " does not match the config");
  json run = json::parse(detail::read_text(dir + "/run.json"));
  res.steps_done = run.at("steps_done").get<std::size_t>();
  res.aborted = run.at("aborted").get<bool>();
  res.abort_reason = run.at("abort_reason").get<std::string>();
  for (const json& p : run.at("history"))
    res.history.push_back(
        {p.at("step").get<std::size_t>(), metrics_from_json(p.at("metrics"))});
  if (!res.history.empty()) res.final_metrics = res.history.back().metrics;
  if (!res.aborted) res.params = load_checkpoint(dir + "/checkpoint.bin");
  res.from_cache = true;
  return res;
}

// Train once per config: later calls with the same config reload the artifact.
inline RunResult run_or_load(const ExperimentConfig& cfg,
                             const std::string& root = run_dir()) {
  if (artifact_exists(cfg, root)) return load_artifact(cfg, root);
  RunResult res = train_run(cfg);
  write_artifact(res, root);
  return res;
}

// ---- presets ----------------------------------------------------------------

namespace detail {
inline ExperimentConfig base_config(const std::string& run_id) {
  ExperimentConfig c;
  c.run_id = run_id;
  c.gen.seed = fnv1a(run_id + "/data") | 1;
  c.train.seed = fnv1a(run_id + "/train") | 1;
  return c;
}
}  // namespace detail

// Config grids mirroring the reference tables. quick scales n down tenfold
// (10000 instead of 100000); conclusions are expected to survive that.
inline std::vector<ExperimentConfig> preset(const std::string& name,
                                            bool quick = false) {
  const std::size_t n = quick ? 10000 : 100000;
  std::vector<ExperimentConfig> out;

  if (name == "table1") {
    auto add = [&](std::size_t kappa, std::size_t d, std::size_t r) {
      ExperimentConfig c = detail::base_config(
          "table1/k" + std::to_string(kappa) + "_d" + std::to_string(d) +
          "_r" + std::to_string(r));
      c.gen.family = "manifold";
      c.gen.n = n;
      c.gen.d = d;
      c.gen.r = r;
      c.model.d = d;
      c.model.kappa = kappa;
      out.push_back(std::move(c));
    };
    for (std::size_t d : {10, 20, 30})
      for (std::size_t r : {2, 4, 6, 8, 10}) add(20, d, r);
    for (std::size_t r : {6, 8, 10}) add(5, 20, r);
  } else if (name == "table3") {
    for (std::size_t t : {1, 3, 5, 7, 9}) {
      ExperimentConfig c = detail::base_config("table3/t" + std::to_string(t));
      c.gen.family = "conditioned";
      c.gen.n = n;
      c.gen.d = 20;
      c.gen.r = 10;
      c.gen.t = t;
      c.model.d = 20;
      c.model.kappa = 20;
      c.model.cond_dim = t;
      c.model.prior = Prior::conditional;
      out.push_back(std::move(c));
    }
  } else if (name == "table5") {
    for (bool gate : {true, false}) {
      ExperimentConfig c =
          detail::base_config(std::string("table5/gate_") + (gate ? "on" : "off"));
      c.gen.family = "union";
      c.gen.n = n;
      c.gen.d = 20;
      c.gen.class_dims = {1, 2, 3, 4, 5};
      c.model.d = 20;
      c.model.kappa = 40;
      c.model.cond_dim = 5;
      c.model.prior = Prior::conditional;
      c.model.gate = gate ? Gate::affine : Gate::none;
      c.group_by = "label";
      out.push_back(std::move(c));
    }
  } else if (name == "table6") {
    for (bool gate : {true, false}) {
      ExperimentConfig c =
          detail::base_config(std::string("table6/gate_") + (gate ? "on" : "off"));
      c.gen.family = "varying_t";
      c.gen.n = n;
      c.gen.d = 20;
      c.gen.r = 12;
      c.gen.t_choices = {2, 4, 6, 8, 10};
      c.gen.pad_to = 10;
      c.model.d = 20;
      c.model.kappa = 20;
      c.model.cond_dim = 10;
      c.model.prior = Prior::conditional;
      c.model.gate = gate ? Gate::mlp : Gate::none;
      c.group_by = "t_assign";
      out.push_back(std::move(c));
    }
  } else if (name == "table7") {
    for (double lg : {-20.0, -10.0, 0.0, 10.0, 20.0}) {
      for (const char* kind : {"vae", "cvae_std", "cvae_cond"}) {
        ExperimentConfig c = detail::base_config(
            "table7/" + std::string(kind) + "_lg" + std::to_string(int(lg)));
        c.gen.family = "conditioned";
        c.gen.n = n;
        c.gen.d = 20;
        c.gen.r = 10;
        c.gen.t = 5;
        c.model.d = 20;
        c.model.kappa = 20;
        c.model.init_log_gamma = lg;
        if (std::string(kind) != "vae") {
          c.model.cond_dim = 5;
          c.model.prior = std::string(kind) == "cvae_cond" ? Prior::conditional
                                                           : Prior::standard;
        }
        out.push_back(std::move(c));
      }
    }
  } else if (name == "table8") {
    for (bool shared : {true, false}) {
      ExperimentConfig c = detail::base_config(
          std::string("table8/shared_") + (shared ? "true" : "false"));
      c.gen.family = "arma";
      c.gen.n = n;
      c.gen.len = 16;
      c.model.d = 1;
      c.model.kappa = 10;
      c.model.cond_dim = 0;
      c.model.prior = Prior::conditional;
      c.model.recurrent = true;
      c.model.share_weights = shared;
      c.model.sigmoid_out = false;
      c.train.steps = 20000;
      c.train.batch = 64;
      out.push_back(std::move(c));
    }
  } else if (name == "fullcov") {
    for (bool full : {true, false}) {
      ExperimentConfig c = detail::base_config(
          std::string("fullcov/") + (full ? "full" : "diag"));
      c.gen.family = "manifold";
      c.gen.n = n;
      c.gen.d = 20;
      c.gen.r = 6;
      c.model.d = 20;
      c.model.kappa = 20;
      c.model.cov = full ? Cov::full : Cov::diag;
      out.push_back(std::move(c));
    }
  } else if (name == "slopes") {
    for (std::size_t r : {2, 6}) {
      for (double gamma : {1e-2, 1e-3, 1e-4}) {
        ExperimentConfig c = detail::base_config(
            "slopes/r" + std::to_string(r) + "_g" + std::to_string(int(-std::log10(gamma))));
        c.gen.family = "manifold";
        c.gen.n = n;
        c.gen.d = 10;
        c.gen.r = r;
        c.model.d = 10;
        c.model.kappa = 20;
        c.model.init_log_gamma = std::log(gamma);
        c.train.fixed_gamma = true;
        out.push_back(std::move(c));
      }
    }
  } else {
    throw std::invalid_argument(
        "unknown preset " + name +
        "; valid: table1 table3 table5 table6 table7 table8 fullcov slopes");
  }
  for (ExperimentConfig& c : out) c.validate();
  return out;
}

// ---- sweep -------------------------------------------------------------------

struct SweepResult {
  std::vector<RunResult> results;          // config order
  std::vector<std::string> failures;       // run_id: reason
  std::string merged_csv;                  // order-normalized rows
  bool ok() const { return failures.empty(); }
};

inline SweepResult sweep(const std::vector<ExperimentConfig>& configs,
                         std::size_t parallelism = 1,
                         const std::string& root = run_dir()) {
  if (configs.empty()) throw std::invalid_argument("sweep: no configs");
  for (const ExperimentConfig& c : configs) c.validate();
  parallelism = std::max<std::size_t>(1, std::min(parallelism, configs.size()));

  SweepResult out;
  out.results.resize(configs.size());
  std::vector<std::string> errors(configs.size());
  std::atomic<std::size_t> cursor{0};

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= configs.size()) return;
      try {
        out.results[i] = run_or_load(configs[i], root);
        if (out.results[i].aborted)
          errors[i] = configs[i].run_id + ": " + out.results[i].abort_reason;
      } catch (const std::exception& e) {
        errors[i] = configs[i].run_id + ": " + e.what();
      }
    }
  };
  if (parallelism == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < parallelism; ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  for (const std::string& e : errors)
    if (!e.empty()) out.failures.push_back(e);

  // merge: one header, rows sorted so worker scheduling cannot reorder them
  std::vector<std::string> rows;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (!errors[i].empty() && out.results[i].history.empty()) continue;
    std::string block;
    append_csv_rows(block, run_context(configs[i]),
                    out.results[i].final_metrics);
    std::istringstream is(block);
    std::string line;
    while (std::getline(is, line))
      if (!line.empty()) rows.push_back(line);
  }
  std::sort(rows.begin(), rows.end());
  out.merged_csv = csv_header() + "\n";
  for (const std::string& r : rows) out.merged_csv += r + "\n";
  return out;
}

}  // namespace vaedim
