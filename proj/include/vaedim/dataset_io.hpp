#pragma once
// Dataset serialization on the shared container format. Tensors round-trip
// bit for bit; generator metadata (including the projection matrices) lives
// in the JSON header.

#include <cstdint>
#include <string>
#include <vector>

#include "vaedim/container.hpp"
#include "vaedim/datagen.hpp"

namespace vaedim {

constexpr const char* kDatasetMagic = "VDDATA1\n";

namespace detail {

inline json tensor_to_json(const Tensor& t) {
  json j;
  j["shape"] = t.shape();
  j["data"] = t.vec();
  return j;
}

inline Tensor tensor_from_json(const json& j) {
  return Tensor(j.at("shape").get<Shape>(),
                j.at("data").get<std::vector<double>>());
}

}  // namespace detail

inline void save_dataset(const std::string& path, const ManifoldDataset& ds) {
  ContainerWriter w(path, kDatasetMagic);
  json meta;
  meta["family"] = "manifold";
  meta["kind"] = ds.meta.kind;
  meta["n"] = ds.meta.n;
  meta["d"] = ds.meta.d;
  meta["r"] = ds.meta.r;
  meta["t"] = ds.meta.t;
  meta["seed"] = ds.meta.seed;
  meta["cond_mode"] = ds.meta.cond_mode;
  meta["class_dims"] = ds.meta.class_dims;
  meta["t_choices"] = ds.meta.t_choices;
  meta["pad_to"] = ds.meta.pad_to;
  if (ds.meta.gx.numel()) meta["gx"] = detail::tensor_to_json(ds.meta.gx);
  if (ds.meta.gc.numel()) meta["gc"] = detail::tensor_to_json(ds.meta.gc);
  if (!ds.meta.gx_class.empty()) {
    meta["gx_class"] = json::array();
    for (const Tensor& g : ds.meta.gx_class)
      meta["gx_class"].push_back(detail::tensor_to_json(g));
  }
  w.set_meta(meta);
  w.add_f64("X", ds.X);
  w.add_f64("U", ds.U);
  w.add_f64("C", ds.C);
  std::vector<std::int64_t> labels(ds.labels.begin(), ds.labels.end());
  std::vector<std::int64_t> tassign(ds.t_assign.begin(), ds.t_assign.end());
  if (!labels.empty()) w.add_i64("labels", labels);
  if (!tassign.empty()) w.add_i64("t_assign", tassign);
  w.finish();
}

inline void save_dataset(const std::string& path, const SeqDataset& ds) {
  ContainerWriter w(path, kDatasetMagic);
  json meta;
  meta["family"] = "seq";
  meta["kind"] = "arma";
  meta["n"] = ds.meta.n;
  meta["len"] = ds.meta.len;
  meta["seed"] = ds.meta.seed;
  meta["window"] = ds.window;
  meta["ar"] = ds.meta.ar;
  meta["ma"] = ds.meta.ma;
  w.set_meta(meta);
  w.add_f64("sequences", ds.sequences);
  w.finish();
}

inline std::string dataset_family(const std::string& path) {
  Container c = Container::read(path, kDatasetMagic);
  return c.meta.at("family").get<std::string>();
}

inline ManifoldDataset load_manifold(const std::string& path) {
  Container c = Container::read(path, kDatasetMagic);
  if (c.meta.at("family") != "manifold")
    throw io_error("load_manifold: " + path + " holds a " +
                   c.meta.at("family").get<std::string>() + " dataset");
  ManifoldDataset ds;
  ds.X = std::move(c.f64.at("X"));
  ds.U = std::move(c.f64.at("U"));
  ds.C = std::move(c.f64.at("C"));
  if (c.i64.count("labels")) {
    const auto& l = c.i64.at("labels");
    ds.labels.assign(l.begin(), l.end());
  }
  if (c.i64.count("t_assign")) {
    const auto& l = c.i64.at("t_assign");
    ds.t_assign.assign(l.begin(), l.end());
  }
  ds.meta.kind = c.meta.at("kind").get<std::string>();
  ds.meta.n = c.meta.at("n").get<std::size_t>();
  ds.meta.d = c.meta.at("d").get<std::size_t>();
  ds.meta.r = c.meta.at("r").get<std::size_t>();
  ds.meta.t = c.meta.at("t").get<std::size_t>();
  ds.meta.seed = c.meta.at("seed").get<std::uint64_t>();
  ds.meta.cond_mode = c.meta.at("cond_mode").get<std::string>();
  ds.meta.class_dims = c.meta.at("class_dims").get<std::vector<std::size_t>>();
  ds.meta.t_choices = c.meta.at("t_choices").get<std::vector<std::size_t>>();
  ds.meta.pad_to = c.meta.at("pad_to").get<std::size_t>();
  if (c.meta.count("gx")) ds.meta.gx = detail::tensor_from_json(c.meta["gx"]);
  if (c.meta.count("gc")) ds.meta.gc = detail::tensor_from_json(c.meta["gc"]);
  if (c.meta.count("gx_class"))
    for (const auto& jg : c.meta["gx_class"])
      ds.meta.gx_class.push_back(detail::tensor_from_json(jg));
  return ds;
}

inline SeqDataset load_seq(const std::string& path) {
  Container c = Container::read(path, kDatasetMagic);
  if (c.meta.at("family") != "seq")
    throw io_error("load_seq: " + path + " holds a " +
                   c.meta.at("family").get<std::string>() + " dataset");
  SeqDataset ds;
  ds.sequences = std::move(c.f64.at("sequences"));
  ds.window = c.meta.at("window").get<std::size_t>();
  ds.meta.n = c.meta.at("n").get<std::size_t>();
  ds.meta.len = c.meta.at("len").get<std::size_t>();
  ds.meta.seed = c.meta.at("seed").get<std::uint64_t>();
  ds.meta.ar = c.meta.at("ar").get<std::vector<double>>();
  ds.meta.ma = c.meta.at("ma").get<std::vector<double>>();
  return ds;
}

}  // namespace vaedim
