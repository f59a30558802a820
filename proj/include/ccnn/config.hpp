#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccnn/dataset.hpp"
#include "ccnn/model_spec.hpp"

namespace ccnn {

struct TrainConfig {
  int64_t batch = 40;  // pre-slice batch; the effective size is x|G| after slicing
  int64_t epochs = 10;
  double base_lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<int64_t> lr_milestones;  // epoch indices
  bool augment = false;                // random k*90-degree rotation per sample
  uint64_t seed = 1;
};

struct RunConfig {
  ModelSpec model;
  SyntheticTaskSpec data;
  TrainConfig train;
  bool has_train = false;
};

// Parses the full config document. Unknown keys anywhere are a hard error.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

// The data section alone (either a bare task spec document or one wrapped in
// a {"data": ...} object).
SyntheticTaskSpec parse_task_spec_text(const std::string& text);

InputShape input_shape_of(const SyntheticTaskSpec& data);

std::string config_to_text(const RunConfig& cfg);

}  // namespace ccnn
