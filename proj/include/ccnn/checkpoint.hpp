#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "ccnn/io.hpp"
#include "ccnn/layers.hpp"

namespace ccnn {

// Checkpoint layout under `dir`: manifest.json listing every parameter buffer
// (name, shape, file) plus one tensor dump per buffer.

template <typename T>
void save_checkpoint(const std::string& dir, Model<T>& model) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["dtype"] = sizeof(T) == 4 ? "f32" : "f64";
  manifest["params"] = nlohmann::json::array();
  auto params = model.params();
  for (size_t i = 0; i < params.size(); ++i) {
    char fname[64];
    std::snprintf(fname, sizeof(fname), "p%03zu_%s.t4d", i, params[i]->name.c_str());
    const Dims4 d = params[i]->value.dims;
    manifest["params"].push_back({{"name", params[i]->name},
                                  {"shape", {d.n, d.c, d.h, d.w}},
                                  {"file", fname}});
    write_t4d(dir + "/" + fname, params[i]->value);
  }
  write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

template <typename T>
void load_checkpoint(const std::string& dir, Model<T>& model) {
  nlohmann::json manifest = nlohmann::json::parse(read_text_file(dir + "/manifest.json"));
  const std::string dtype = manifest.at("dtype").get<std::string>();
  if ((sizeof(T) == 4) != (dtype == "f32"))
    throw ConfigError("checkpoint dtype " + dtype + " does not match the run dtype");
  auto params = model.params();
  const auto& list = manifest.at("params");
  if (list.size() != params.size())
    throw ConfigError("checkpoint has " + std::to_string(list.size()) + " buffers, model has " +
                      std::to_string(params.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& entry = list[i];
    if (entry.at("name").get<std::string>() != params[i]->name)
      throw ConfigError("checkpoint buffer " + std::to_string(i) + " is '" +
                        entry.at("name").get<std::string>() + "', model expects '" +
                        params[i]->name + "'");
    Tensor4<T> t = read_t4d_as<T>(dir + "/" + entry.at("file").get<std::string>());
    if (!(t.dims == params[i]->value.dims))
      throw ConfigError("checkpoint buffer '" + params[i]->name + "' has shape " + t.dims.str() +
                        ", model expects " + params[i]->value.dims.str());
    params[i]->value = std::move(t);
  }
}

}  // namespace ccnn
