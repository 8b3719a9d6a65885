#pragma once
// Model checkpoints: the architecture descriptor as the JSON header plus one
// f64 block per parameter in registration order. Loading reconstructs the
// registration from the descriptor and refuses any mismatch in names or
// shapes, so a checkpoint cannot be read into the wrong architecture.

#include <string>

#include "vaedim/container.hpp"
#include "vaedim/models.hpp"

namespace vaedim {

inline constexpr const char* kCheckpointMagic = "VDCKPT1\n";

inline json spec_to_json(const ModelSpec& s) {
  return json{{"d", s.d},
              {"cond_dim", s.cond_dim},
              {"kappa", s.kappa},
              {"hidden", s.hidden},
              {"cond_feat", s.cond_feat},
              {"gate_hidden", s.gate_hidden},
              {"cov", to_string(s.cov)},
              {"prior", to_string(s.prior)},
              {"gate", to_string(s.gate)},
              {"sigmoid_out", s.sigmoid_out},
              {"recurrent", s.recurrent},
              {"share_weights", s.share_weights},
              {"cell", to_string(s.cell)},
              {"rnn_hidden", s.rnn_hidden},
              {"dec_hidden", s.dec_hidden},
              {"init_log_gamma", s.init_log_gamma}};
}

inline ModelSpec spec_from_json(const json& j) {
  ModelSpec s;
  s.d = j.at("d").get<std::size_t>();
  s.cond_dim = j.at("cond_dim").get<std::size_t>();
  s.kappa = j.at("kappa").get<std::size_t>();
  s.hidden = j.at("hidden").get<std::size_t>();
  s.cond_feat = j.at("cond_feat").get<std::size_t>();
  s.gate_hidden = j.at("gate_hidden").get<std::size_t>();
  s.cov = enum_from_string<Cov>(j.at("cov").get<std::string>());
  s.prior = enum_from_string<Prior>(j.at("prior").get<std::string>());
  s.gate = enum_from_string<Gate>(j.at("gate").get<std::string>());
  s.sigmoid_out = j.at("sigmoid_out").get<bool>();
  s.recurrent = j.at("recurrent").get<bool>();
  s.share_weights = j.at("share_weights").get<bool>();
  s.cell = enum_from_string<Cell>(j.at("cell").get<std::string>());
  s.rnn_hidden = j.at("rnn_hidden").get<std::size_t>();
  s.dec_hidden = j.at("dec_hidden").get<std::size_t>();
  s.init_log_gamma = j.at("init_log_gamma").get<double>();
  s.validate();
  return s;
}

inline void save_checkpoint(const std::string& path, const ModelParams& p) {
  ContainerWriter w(path, kCheckpointMagic);
  w.set_meta(json{{"spec", spec_to_json(p.spec)}, {"format", 1}});
  for (std::size_t i = 0; i < p.size(); ++i) w.add_f64(p.names[i], p.values[i]);
  w.finish();
}

inline ModelParams load_checkpoint(const std::string& path) {
  Container c = Container::read(path, kCheckpointMagic);
  ModelSpec spec = spec_from_json(c.meta.at("spec"));
  ModelParams p = init_model(spec, 0);  // registration template for the spec
  if (c.f64.size() != p.size())
    throw io_error("checkpoint: parameter count does not match the descriptor");
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto it = c.f64.find(p.names[i]);
    if (it == c.f64.end())
      throw io_error("checkpoint: missing parameter " + p.names[i]);
    if (!(it->second.shape() == p.values[i].shape()))
      throw io_error("checkpoint: shape mismatch for " + p.names[i]);
    p.values[i] = it->second;
  }
  return p;
}

}  // namespace vaedim
