#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccnn/common.hpp"
#include "ccnn/group.hpp"
#include "ccnn/nn.hpp"
#include "ccnn/pathway.hpp"

namespace ccnn {

enum class LayerKind { Conv, Dense, Relu, Maxpool, Flatten, Slice, Pool, Stack, Roll };

const char* layer_kind_name(LayerKind k);

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  // conv
  int64_t filters = 0;
  int64_t kernel = 0;
  Padding padding = Padding::Same;
  // dense
  int64_t units = 0;
  // maxpool
  int64_t window = 0;
  int64_t stride = 2;
  // pool
  PoolFunction pool;
  bool realign = false;
};

enum class LossKind { CrossEntropy, Rmse };

struct ModelSpec {
  std::vector<LayerSpec> layers;
  LossKind loss = LossKind::CrossEntropy;
  Dtype dtype = Dtype::F64;
  GroupKind group = GroupKind::C4;
};

// Input description the spec is validated against (from the data section).
struct InputShape {
  int64_t channels = 1;
  int64_t height = 0;
  int64_t width = 0;
  int64_t classes = 0;  // 0 = unchecked
};

// Shape of the value flowing between layers during validation.
struct FlowShape {
  int64_t c = 0, h = 0, w = 0;
  int pathways = 1;
};

// Walks the layer stack, enforcing ordering and shape rules. Returns the
// output shape; throws ConfigError listing every violation otherwise.
FlowShape validate_model(const ModelSpec& spec, const InputShape& input);

// Collects violations instead of throwing; empty result means valid.
std::vector<std::string> model_violations(const ModelSpec& spec, const InputShape& input);

// Shape flowing INTO each layer (validates first). Size = layers + 1; the
// last entry is the output shape.
std::vector<FlowShape> layer_input_shapes(const ModelSpec& spec, const InputShape& input);

struct ParamCount {
  std::string layer;   // e.g. "conv0"
  std::string kind;
  int64_t weights = 0;
  int64_t biases = 0;
  int64_t total() const { return weights + biases; }
};

// Per-layer parameter counts plus shape bookkeeping (channel growth through
// roll/stack is what makes the totals interesting).
std::vector<ParamCount> count_params(const ModelSpec& spec, const InputShape& input);

int64_t total_params(const std::vector<ParamCount>& counts);

std::string params_csv(const std::vector<ParamCount>& counts);

}  // namespace ccnn
