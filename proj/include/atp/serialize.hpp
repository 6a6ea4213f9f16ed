#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "atp/model.hpp"

namespace atp {

struct TrainingMeta {
  std::uint64_t seed = 0;
  int epochs_run = 0;
  double final_nll = 0.0;
};

/// A fitted model as persisted on disk: spec, parameters, and training
/// metadata. Parameter round-trips are bit-faithful (shortest-round-trip
/// double formatting).
struct SavedModel {
  ModelSpec spec;
  ParamVector params;
  TrainingMeta meta;
};

inline nlohmann::json model_to_json(const SavedModel& model) {
  nlohmann::json j;
  j["spec"] = {{"M", model.spec.bsp_order},
               {"p", model.spec.lag_order},
               {"base", base_name(model.spec.base)},
               {"n_series", model.spec.n_series},
               {"n_exog", model.spec.n_exog}};
  j["gamma"] = model.params.gamma;
  j["phi"] = model.params.phi;
  j["beta_series"] = model.params.beta_series;
  j["beta_exog"] = model.params.beta_exog;
  j["bounds"] = {{"lower", model.spec.bounds.lower},
                 {"upper", model.spec.bounds.upper}};
  j["training_meta"] = {{"seed", model.meta.seed},
                        {"epochs_run", model.meta.epochs_run},
                        {"final_nll", model.meta.final_nll}};
  return j;
}

inline SavedModel model_from_json(const nlohmann::json& j) {
  SavedModel model;
  const auto& spec = j.at("spec");
  model.spec.bsp_order = spec.at("M").get<int>();
  model.spec.lag_order = spec.at("p").get<int>();
  model.spec.base = base_from_name(spec.at("base").get<std::string>());
  model.spec.n_series = spec.at("n_series").get<int>();
  model.spec.n_exog = spec.at("n_exog").get<int>();
  model.spec.bounds.lower = j.at("bounds").at("lower").get<double>();
  model.spec.bounds.upper = j.at("bounds").at("upper").get<double>();
  model.params.gamma = j.at("gamma").get<std::vector<double>>();
  model.params.phi = j.at("phi").get<std::vector<double>>();
  model.params.beta_series = j.at("beta_series").get<std::vector<double>>();
  model.params.beta_exog = j.at("beta_exog").get<std::vector<double>>();
  model.meta.seed = j.at("training_meta").at("seed").get<std::uint64_t>();
  model.meta.epochs_run = j.at("training_meta").at("epochs_run").get<int>();
  model.meta.final_nll = j.at("training_meta").at("final_nll").get<double>();
  model.spec.validate();
  model.params.validate(model.spec);
  return model;
}

inline void save_model(const std::string& path, const SavedModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << model_to_json(model).dump(2) << '\n';
}

inline SavedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return model_from_json(j);
}

}  // namespace atp
