#include "ccnn/config.hpp"

#include <set>

#include <json.hpp>

#include "ccnn/io.hpp"

namespace ccnn {

using json = nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "' in " + where);
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError("missing key '" + key + "' in " + where);
  return *it;
}

LayerSpec parse_layer(const json& j, size_t index) {
  const std::string where = "model.layers[" + std::to_string(index) + "]";
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  const std::string kind = require(j, "kind", where).get<std::string>();
  LayerSpec l;
  if (kind == "conv") {
    check_keys(j, {"kind", "filters", "kernel", "padding"}, where);
    l.kind = LayerKind::Conv;
    l.filters = require(j, "filters", where).get<int64_t>();
    l.kernel = require(j, "kernel", where).get<int64_t>();
    l.padding = parse_padding(j.value("padding", "same"));
  } else if (kind == "dense") {
    check_keys(j, {"kind", "units"}, where);
    l.kind = LayerKind::Dense;
    l.units = require(j, "units", where).get<int64_t>();
  } else if (kind == "relu") {
    check_keys(j, {"kind"}, where);
    l.kind = LayerKind::Relu;
  } else if (kind == "maxpool") {
    check_keys(j, {"kind", "window", "stride"}, where);
    l.kind = LayerKind::Maxpool;
    l.window = require(j, "window", where).get<int64_t>();
    l.stride = j.value("stride", int64_t{2});
  } else if (kind == "flatten") {
    check_keys(j, {"kind"}, where);
    l.kind = LayerKind::Flatten;
  } else if (kind == "slice") {
    check_keys(j, {"kind"}, where);
    l.kind = LayerKind::Slice;
  } else if (kind == "pool") {
    check_keys(j, {"kind", "function", "realign", "pre_relu"}, where);
    l.kind = LayerKind::Pool;
    l.pool.kind = parse_pool_kind(require(j, "function", where).get<std::string>());
    l.pool.pre_relu = j.value("pre_relu", false);
    l.realign = require(j, "realign", where).get<bool>();
  } else if (kind == "stack") {
    check_keys(j, {"kind"}, where);
    l.kind = LayerKind::Stack;
  } else if (kind == "roll") {
    check_keys(j, {"kind"}, where);
    l.kind = LayerKind::Roll;
  } else {
    throw ConfigError(where + ": unknown layer kind '" + kind + "'");
  }
  return l;
}

ModelSpec parse_model_section(const json& j) {
  check_keys(j, {"dtype", "group", "loss", "layers"}, "model");
  ModelSpec spec;
  const std::string dtype = j.value("dtype", "f64");
  if (dtype == "f32")
    spec.dtype = Dtype::F32;
  else if (dtype == "f64")
    spec.dtype = Dtype::F64;
  else
    throw ConfigError("model.dtype must be f32 or f64, got '" + dtype + "'");
  spec.group = parse_group_kind(j.value("group", "c4"));
  const std::string loss = j.value("loss", "ce");
  if (loss == "ce")
    spec.loss = LossKind::CrossEntropy;
  else if (loss == "rmse")
    spec.loss = LossKind::Rmse;
  else
    throw ConfigError("model.loss must be ce or rmse, got '" + loss + "'");
  const json& layers = require(j, "layers", "model");
  if (!layers.is_array()) throw ConfigError("model.layers must be an array");
  for (size_t i = 0; i < layers.size(); ++i) spec.layers.push_back(parse_layer(layers[i], i));
  return spec;
}

SyntheticTaskSpec parse_data_section(const json& j) {
  check_keys(j,
             {"image_size", "classes", "train", "val", "test", "noise", "orientation_bias",
              "motif_size", "seed"},
             "data");
  SyntheticTaskSpec d;
  d.image_size = require(j, "image_size", "data").get<int64_t>();
  d.classes = require(j, "classes", "data").get<int64_t>();
  d.train_count = require(j, "train", "data").get<int64_t>();
  d.val_count = require(j, "val", "data").get<int64_t>();
  d.test_count = require(j, "test", "data").get<int64_t>();
  d.noise = j.value("noise", 0.3);
  d.orientation_bias = j.value("orientation_bias", 0.0);
  d.motif_size = j.value("motif_size", int64_t{5});
  d.seed = j.value("seed", uint64_t{1});
  if (d.orientation_bias < 0.0 || d.orientation_bias > 1.0)
    throw ConfigError("data.orientation_bias must be in [0, 1]");
  return d;
}

TrainConfig parse_train_section(const json& j) {
  check_keys(j,
             {"batch", "epochs", "base_lr", "beta1", "beta2", "eps", "lr_milestones", "augment",
              "seed"},
             "train");
  TrainConfig t;
  t.batch = require(j, "batch", "train").get<int64_t>();
  t.epochs = require(j, "epochs", "train").get<int64_t>();
  t.base_lr = j.value("base_lr", 1e-3);
  t.beta1 = j.value("beta1", 0.9);
  t.beta2 = j.value("beta2", 0.999);
  t.eps = j.value("eps", 1e-8);
  if (j.contains("lr_milestones")) t.lr_milestones = j["lr_milestones"].get<std::vector<int64_t>>();
  for (size_t i = 1; i < t.lr_milestones.size(); ++i)
    if (t.lr_milestones[i] < t.lr_milestones[i - 1])
      throw ConfigError("train.lr_milestones must be sorted");
  t.augment = j.value("augment", false);
  t.seed = j.value("seed", uint64_t{1});
  if (t.batch <= 0 || t.epochs <= 0) throw ConfigError("train.batch and train.epochs must be positive");
  return t;
}

json parse_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON");
  return j;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  const json j = parse_json(text);
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  check_keys(j, {"model", "data", "train"}, "config");
  RunConfig cfg;
  cfg.model = parse_model_section(require(j, "model", "config"));
  cfg.data = parse_data_section(require(j, "data", "config"));
  if (j.contains("train")) {
    cfg.train = parse_train_section(j["train"]);
    cfg.has_train = true;
  }
  validate_model(cfg.model, input_shape_of(cfg.data));
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  return parse_config_text(read_text_file(path));
}

SyntheticTaskSpec parse_task_spec_text(const std::string& text) {
  const json j = parse_json(text);
  if (j.is_object() && j.contains("data")) return parse_data_section(j["data"]);
  return parse_data_section(j);
}

InputShape input_shape_of(const SyntheticTaskSpec& data) {
  return InputShape{1, data.image_size, data.image_size, data.classes};
}

std::string config_to_text(const RunConfig& cfg) {
  json layers = json::array();
  for (const auto& l : cfg.model.layers) {
    json j{{"kind", layer_kind_name(l.kind)}};
    switch (l.kind) {
      case LayerKind::Conv:
        j["filters"] = l.filters;
        j["kernel"] = l.kernel;
        j["padding"] = l.padding == Padding::Same ? "same" : "valid";
        break;
      case LayerKind::Dense:
        j["units"] = l.units;
        break;
      case LayerKind::Maxpool:
        j["window"] = l.window;
        j["stride"] = l.stride;
        break;
      case LayerKind::Pool:
        j["function"] = pool_kind_name(l.pool.kind);
        j["pre_relu"] = l.pool.pre_relu;
        j["realign"] = l.realign;
        break;
      default:
        break;
    }
    layers.push_back(j);
  }
  json out{{"model",
            {{"dtype", dtype_name(cfg.model.dtype)},
             {"group", group_name(cfg.model.group)},
             {"loss", cfg.model.loss == LossKind::CrossEntropy ? "ce" : "rmse"},
             {"layers", layers}}},
           {"data",
            {{"image_size", cfg.data.image_size},
             {"classes", cfg.data.classes},
             {"train", cfg.data.train_count},
             {"val", cfg.data.val_count},
             {"test", cfg.data.test_count},
             {"noise", cfg.data.noise},
             {"orientation_bias", cfg.data.orientation_bias},
             {"motif_size", cfg.data.motif_size},
             {"seed", cfg.data.seed}}}};
  if (cfg.has_train) {
    out["train"] = {{"batch", cfg.train.batch},
                    {"epochs", cfg.train.epochs},
                    {"base_lr", cfg.train.base_lr},
                    {"beta1", cfg.train.beta1},
                    {"beta2", cfg.train.beta2},
                    {"eps", cfg.train.eps},
                    {"lr_milestones", cfg.train.lr_milestones},
                    {"augment", cfg.train.augment},
                    {"seed", cfg.train.seed}};
  }
  return out.dump(2) + "\n";
}

}  // namespace ccnn
