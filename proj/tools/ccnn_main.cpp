// Command-line harness: train/eval/verify/params/gen-data plus golden-tensor
// dump/compare utilities.
//
// Exit codes: 0 success, 1 validation error, 2 numerical failure,
// 3 verification/comparison failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ccnn/checkpoint.hpp"
#include "ccnn/config.hpp"
#include "ccnn/dataset.hpp"
#include "ccnn/io.hpp"
#include "ccnn/oracle.hpp"
#include "ccnn/train.hpp"

namespace {

using namespace ccnn;
using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitVerification = 3;

json report_to_json(const oracle::EquivarianceReport& rep) {
  json per = json::array();
  for (size_t i = 0; i < rep.max_deviation.size(); ++i)
    per.push_back({{"element", rep.element_names[i]}, {"max_abs_deviation", rep.max_deviation[i]}});
  return json{{"group", rep.group},      {"mode", rep.mode},
              {"trials", rep.trials},    {"tolerance", rep.tolerance},
              {"per_element", per},      {"max_deviation", rep.worst()},
              {"pass", rep.pass}};
}

template <typename T>
int run_train(const RunConfig& cfg, const std::string& out_dir) {
  const auto out_shape = layer_input_shapes(cfg.model, input_shape_of(cfg.data)).back();
  if (out_shape.h != 1 || out_shape.w != 1)
    throw ConfigError("training needs a classifier head: model output is spatial " +
                      std::to_string(out_shape.h) + "x" + std::to_string(out_shape.w));
  const DataBundle data = generate_dataset(cfg.data);
  Model<T> model(cfg.model, input_shape_of(cfg.data), cfg.train.seed);
  const auto history = train_model(model, data, cfg.train, cfg.model.loss, out_dir);
  save_checkpoint(out_dir + "/checkpoint", model);
  write_text_file(out_dir + "/config.json", config_to_text(cfg));
  if (!history.empty()) {
    const auto& last = history.back();
    std::printf("epoch %lld: train loss %.6f acc %.4f | val loss %.6f acc %.4f\n",
                static_cast<long long>(last.epoch), last.train_loss, last.train_acc, last.val_loss,
                last.val_acc);
  }
  std::printf("checkpoint written to %s/checkpoint\n", out_dir.c_str());
  return kExitOk;
}

template <typename T>
int run_eval(const RunConfig& cfg, const std::string& checkpoint_dir, const std::string& data_dir,
             bool tta) {
  Model<T> model(cfg.model, input_shape_of(cfg.data), /*seed=*/0);
  load_checkpoint(checkpoint_dir + "/checkpoint", model);
  const DataBundle data = load_dataset(data_dir);

  json out;
  out["tta"] = tta;
  const Tensor4<T> test = cast_tensor<T>(data.test.images);
  const EvalMetrics tm =
      evaluate_split(model, test, data.test.labels, cfg.model.loss, cfg.train.batch, tta);
  out["test"] = {{"loss", tm.loss}, {"accuracy", tm.accuracy}};
  for (int k = 1; k < 4; ++k) {
    const Tensor4<T> rot = cast_tensor<T>(data.test_rotations[static_cast<size_t>(k)]);
    const EvalMetrics rm =
        evaluate_split(model, rot, data.test.labels, cfg.model.loss, cfg.train.batch, tta);
    out["test_rot" + std::to_string(k)] = {{"loss", rm.loss}, {"accuracy", rm.accuracy}};
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

template <typename T>
int run_verify(const RunConfig& cfg, const std::string& mode_flag, int trials, double tol,
               uint64_t seed) {
  Model<T> model(cfg.model, input_shape_of(cfg.data), seed);
  oracle::EquivarianceMode mode;
  if (mode_flag == "invariant") {
    mode = oracle::EquivarianceMode::Invariant;
  } else if (mode_flag == "same-equivariant") {
    mode = oracle::EquivarianceMode::SameEquivariant;
  } else {
    // default by model structure: a realigning pool keeps spatial structure
    mode = oracle::EquivarianceMode::Invariant;
    for (const auto& l : cfg.model.layers)
      if (l.kind == LayerKind::Pool && l.realign) mode = oracle::EquivarianceMode::SameEquivariant;
  }
  const auto rep = oracle::check_model_equivariance(model, mode, trials, tol, seed);
  std::cout << report_to_json(rep).dump(2) << "\n";
  return rep.pass ? kExitOk : kExitVerification;
}

Tensor4<double> synth_tensor(const std::string& shape_arg, uint64_t seed, const std::string& fill) {
  Dims4 d;
  if (std::sscanf(shape_arg.c_str(), "%ld,%ld,%ld,%ld", &d.n, &d.c, &d.h, &d.w) != 4)
    throw ConfigError("--shape expects N,C,H,W");
  Tensor4<double> t(d);
  if (fill == "index") {
    for (size_t i = 0; i < t.data.size(); ++i) t.data[i] = static_cast<double>(i);
  } else if (fill == "uniform") {
    Rng rng(seed);
    for (auto& v : t.data) v = rng.uniform(-1.0, 1.0);
  } else {
    throw ConfigError("--fill must be index or uniform");
  }
  return t;
}

Tensor4<double> apply_transform(const Tensor4<double>& t, const std::string& name) {
  if (name.empty()) return t;
  if (name == "rot1") return rotate90(t, 1);
  if (name == "rot2") return rotate90(t, 2);
  if (name == "rot3") return rotate90(t, 3);
  if (name == "fliph") return fliph(t);
  throw ConfigError("unknown transform '" + name + "' (rot1|rot2|rot3|fliph)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"C4/D4 rotation-equivariant CNN harness"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint_dir, data_dir, spec_path;
  std::string group_flag, mode_flag, transform, fill = "uniform";
  std::string in_path, out_path, shape_arg, a_path, b_path, dtype_flag = "f64";
  bool tta = false;
  int trials = 20;
  double tol = 1e-5;
  double cmp_tol = 0.0;
  uint64_t seed = 1;

  auto* train_cmd = app.add_subcommand("train", "train a model from a config file");
  train_cmd->add_option("--config", config_path, "config JSON")->required();
  train_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset directory");
  eval_cmd->add_option("--checkpoint", checkpoint_dir, "training output directory")->required();
  eval_cmd->add_option("--data", data_dir, "dataset directory from gen-data")->required();
  eval_cmd->add_flag("--tta", tta, "average predictions over the four rotations");

  auto* verify_cmd = app.add_subcommand("verify", "check model equivariance against brute force");
  verify_cmd->add_option("--config", config_path, "config JSON")->required();
  verify_cmd->add_option("--group", group_flag, "override group kind (c4|d4)");
  verify_cmd->add_option("--mode", mode_flag, "invariant|same-equivariant");
  verify_cmd->add_option("--trials", trials, "random inputs per group element");
  verify_cmd->add_option("--tol", tol, "max allowed deviation");
  verify_cmd->add_option("--seed", seed, "seed for weights and inputs");

  auto* params_cmd = app.add_subcommand("params", "per-layer parameter counts as CSV");
  params_cmd->add_option("--config", config_path, "config JSON")->required();

  auto* gen_cmd = app.add_subcommand("gen-data", "materialize a synthetic dataset");
  gen_cmd->add_option("--spec", spec_path, "task spec JSON (or full config)")->required();
  gen_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* dump_cmd = app.add_subcommand("dump", "write a golden tensor file");
  dump_cmd->add_option("--out", out_path, "output .t4d path")->required();
  dump_cmd->add_option("--in", in_path, "input .t4d (otherwise synthesized)");
  dump_cmd->add_option("--shape", shape_arg, "N,C,H,W for synthesis");
  dump_cmd->add_option("--seed", seed, "seed for uniform fill");
  dump_cmd->add_option("--fill", fill, "index|uniform");
  dump_cmd->add_option("--dtype", dtype_flag, "f32|f64");
  dump_cmd->add_option("--transform", transform, "rot1|rot2|rot3|fliph");

  auto* cmp_cmd = app.add_subcommand("compare", "compare two tensor files");
  cmp_cmd->add_option("a", a_path, "first .t4d")->required();
  cmp_cmd->add_option("b", b_path, "second .t4d")->required();
  cmp_cmd->add_option("--tol", cmp_tol, "max allowed |a-b| (default exact)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      RunConfig cfg = parse_config_file(config_path);
      if (!cfg.has_train) throw ConfigError("train command needs a train section in the config");
      return cfg.model.dtype == Dtype::F32 ? run_train<float>(cfg, out_dir)
                                           : run_train<double>(cfg, out_dir);
    }
    if (eval_cmd->parsed()) {
      RunConfig cfg = parse_config_file(checkpoint_dir + "/config.json");
      return cfg.model.dtype == Dtype::F32 ? run_eval<float>(cfg, checkpoint_dir, data_dir, tta)
                                           : run_eval<double>(cfg, checkpoint_dir, data_dir, tta);
    }
    if (verify_cmd->parsed()) {
      RunConfig cfg = parse_config_file(config_path);
      if (!group_flag.empty()) {
        cfg.model.group = parse_group_kind(group_flag);
        validate_model(cfg.model, input_shape_of(cfg.data));
      }
      return cfg.model.dtype == Dtype::F32 ? run_verify<float>(cfg, mode_flag, trials, tol, seed)
                                           : run_verify<double>(cfg, mode_flag, trials, tol, seed);
    }
    if (params_cmd->parsed()) {
      RunConfig cfg = parse_config_file(config_path);
      std::cout << params_csv(count_params(cfg.model, input_shape_of(cfg.data)));
      return kExitOk;
    }
    if (gen_cmd->parsed()) {
      const SyntheticTaskSpec spec = parse_task_spec_text(read_text_file(spec_path));
      write_dataset(out_dir, spec, generate_dataset(spec));
      std::printf("dataset written to %s\n", out_dir.c_str());
      return kExitOk;
    }
    if (dump_cmd->parsed()) {
      Tensor4<double> t;
      if (!in_path.empty()) {
        t = read_t4d(in_path).as_f64();
      } else if (!shape_arg.empty()) {
        t = synth_tensor(shape_arg, seed, fill);
      } else {
        throw ConfigError("dump needs --in or --shape");
      }
      t = apply_transform(t, transform);
      if (dtype_flag == "f32") {
        Tensor4<float> f(t.dims);
        for (size_t i = 0; i < t.data.size(); ++i) f.data[i] = static_cast<float>(t.data[i]);
        write_t4d(out_path, f);
      } else {
        write_t4d(out_path, t);
      }
      return kExitOk;
    }
    if (cmp_cmd->parsed()) {
      const Tensor4<double> a = read_t4d(a_path).as_f64();
      const Tensor4<double> b = read_t4d(b_path).as_f64();
      if (!(a.dims == b.dims)) {
        std::printf("FAIL: shapes differ %s vs %s\n", a.dims.str().c_str(), b.dims.str().c_str());
        return kExitVerification;
      }
      double dev = 0.0;
      for (size_t i = 0; i < a.data.size(); ++i)
        dev = std::max(dev, std::abs(a.data[i] - b.data[i]));
      std::printf("max |a-b| = %.3e (tol %.3e)\n", dev, cmp_tol);
      return dev <= cmp_tol ? kExitOk : kExitVerification;
    }
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
