#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ccnn/model_spec.hpp"
#include "ccnn/nn.hpp"
#include "ccnn/pathway.hpp"
#include "ccnn/rng.hpp"

namespace ccnn {

template <typename T>
struct ParamBuffer {
  std::string name;  // "conv0.weight"
  Tensor4<T> value;
  Tensor4<T> grad;

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), T(0)); }
};

// Record of one forward step: the saved input plus whatever the op needs to
// replay its adjoint. Layers that only need the input shape or group store
// just that.
template <typename T>
struct TapeNode {
  PathwayBatch<T> input;
  Dims4 in_dims;
  std::vector<int32_t> argmax;  // maxpool
  PoolContext<T> pool;          // cyclic pool
};

template <typename T>
struct Tape {
  std::vector<TapeNode<T>> nodes;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual const std::string& name() const = 0;
  virtual LayerKind kind() const = 0;
  // Training forward; saves what backward needs into `node`.
  virtual PathwayBatch<T> forward(const PathwayBatch<T>& x, TapeNode<T>& node) = 0;
  // Inference forward; no tape.
  virtual PathwayBatch<T> infer(const PathwayBatch<T>& x) {
    TapeNode<T> scratch;
    return forward(x, scratch);
  }
  // Adjoint replay; accumulates parameter gradients, returns grad wrt input.
  virtual Tensor4<T> backward(const TapeNode<T>& node, const Tensor4<T>& grad) = 0;
  virtual std::vector<ParamBuffer<T>*> params() { return {}; }
};

namespace layers {

template <typename T>
class Conv : public Layer<T> {
 public:
  Conv(std::string name, int64_t in_channels, int64_t filters, int64_t kernel, Padding padding,
       Rng& rng)
      : name_(std::move(name)), padding_(padding) {
    weight_.name = name_ + ".weight";
    weight_.value = Tensor4<T>(Dims4{filters, in_channels, kernel, kernel});
    weight_.grad = Tensor4<T>(weight_.value.dims);
    bias_.name = name_ + ".bias";
    bias_.value = Tensor4<T>(Dims4{1, filters, 1, 1});
    bias_.grad = Tensor4<T>(bias_.value.dims);
    init_uniform_fanin(weight_.value.data.data(), weight_.value.numel(),
                       in_channels * kernel * kernel, rng);
  }

  const std::string& name() const override { return name_; }
  LayerKind kind() const override { return LayerKind::Conv; }

  PathwayBatch<T> forward(const PathwayBatch<T>& x, TapeNode<T>& node) override {
    node.input = x;
    Tensor4<T> y = conv2d_forward(x.tensor, weight_.value, bias_.value.data, padding_);
    return PathwayBatch<T>(std::move(y), x.group, x.pathways);
  }

  PathwayBatch<T> infer(const PathwayBatch<T>& x) override {
    Tensor4<T> y = conv2d_forward(x.tensor, weight_.value, bias_.value.data, padding_);
    return PathwayBatch<T>(std::move(y), x.group, x.pathways);
  }

  Tensor4<T> backward(const TapeNode<T>& node, const Tensor4<T>& grad) override {
    ConvGrads<T> g = conv2d_backward(node.input.tensor, weight_.value, padding_, grad);
    for (size_t i = 0; i < weight_.grad.data.size(); ++i)
      weight_.grad.data[i] += g.weights.data[i];
    for (size_t i = 0; i < bias_.grad.data.size(); ++i) bias_.grad.data[i] += g.bias[i];
    return std::move(g.x);
  }

  std::vector<ParamBuffer<T>*> params() override { return {&weight_, &bias_}; }

 private:
  std::string name_;
  Padding padding_;
  ParamBuffer<T> weight_, bias_;
};

template <typename T>
class Dense : public Layer<T> {
 public:
  Dense(std::string name, int64_t in_features, int64_t units, Rng& rng)
      : name_(std::move(name)) {
    weight_.name = name_ + ".weight";
    weight_.value = Tensor4<T>(Dims4{units, in_features, 1, 1});
    weight_.grad = Tensor4<T>(weight_.value.dims);
    bias_.name = name_ + ".bias";
    bias_.value = Tensor4<T>(Dims4{1, units, 1, 1});
    bias_.grad = Tensor4<T>(bias_.value.dims);
    init_uniform_fanin(weight_.value.data.data(), weight_.value.numel(), in_features, rng);
  }

  const std::string& name() const override { return name_; }
  LayerKind kind() const override { return LayerKind::Dense; }

  PathwayBatch<T> forward(const PathwayBatch<T>& x, TapeNode<T>& node) override {
    node.input = x;
    return PathwayBatch<T>(dense_forward(x.tensor, weight_.value, bias_.value.data), x.group,
                           x.pathways);
  }

  PathwayBatch<T> infer(const PathwayBatch<T>& x) override {
    return PathwayBatch<T>(dense_forward(x.tensor, weight_.value, bias_.value.data), x.group,
                           x.pathways);
  }

  Tensor4<T> backward(const TapeNode<T>& node, const Tensor4<T>& grad) override {
    DenseGrads<T> g = dense_backward(node.input.tensor, weight_.value, grad);
    for (size_t i = 0; i < weight_.grad.data.size(); ++i)
      weight_.grad.data[i] += g.weights.data[i];
    for (size_t i = 0; i < bias_.grad.data.size(); ++i) bias_.grad.data[i] += g.bias[i];
    return std::move(g.x);
  }

  std::vector<ParamBuffer<T>*> params() override { return {&weight_, &bias_}; }

 private:
  std::string name_;
  ParamBuffer<T> weight_, bias_;
};

template <typename T>
class Relu : public Layer<T> {
 public:
  explicit Relu(std::string name) : name_(std::move(name)) {}
  const std::string& name() const override { return name_; }
  LayerKind kind() const override { return LayerKind::Relu; }

  PathwayBatch<T> forward(const PathwayBatch<T>& x, TapeNode<T>& node) override {
    node.input = x;
    return PathwayBatch<T>(relu_forward(x.tensor), x.group, x.pathways);
  }
  PathwayBatch<T> infer(const PathwayBatch<T>& x) override {
    return PathwayBatch<T>(relu_forward(x.tensor), x.group, x.pathways);
  }
  Tensor4<T> backward(const TapeNode<T>& node, const Tensor4<T>& grad) override {
    return relu_backward(node.input.tensor, grad);
  }

 private:
  std::string name_;
};

template <typename T>
class Maxpool : public Layer<T> {
 public:
  Maxpool(std::string name, int64_t window, int64_t stride)
      : name_(std::move(name)), window_(window), stride_(stride) {}
  const std::string& name() const override { return name_; }
  LayerKind kind() const override { return LayerKind::Maxpool; }

  PathwayBatch<T> forward(const PathwayBatch<T>& x, TapeNode<T>& node) override {
    node.in_dims = x.tensor.dims;
    Tensor4<T> y = maxpool2d_forward(x.tensor, window_, stride_, &node.argmax);
    return PathwayBatch<T>(std::move(y), x.group, x.pathways);
  }
  PathwayBatch<T> infer(const PathwayBatch<T>& x) override {
    Tensor4<T> y = maxpool2d_forward(x.tensor, window_, stride_, nullptr);
    return PathwayBatch<T>(std::move(y), x.group, x.pathways);
  }
  Tensor4<T> backward(const TapeNode<T>& node, const Tensor4<T>& grad) override {
    return maxpool2d_backward(node.in_dims, grad, node.argmax);
  }

 private:
  std::string name_;
  int64_t window_, stride_;
};

template <typename T>
class Flatten : public Layer<T> {
 public:
  explicit Flatten(std::string name) : name_(std::move(name)) {}
  const std::string& name() const override { return name_; }
  LayerKind kind() const override { return LayerKind::Flatten; }

  PathwayBatch<T> forward(const PathwayBatch<T>& x, TapeNode<T>& node) override {
    node.in_dims = x.tensor.dims;
    return PathwayBatch<T>(flatten_forward(x.tensor), x.group, x.pathways);
  }
  PathwayBatch<T> infer(const PathwayBatch<T>& x) override {
    return PathwayBatch<T>(flatten_forward(x.tensor), x.group, x.pathways);
  }
  Tensor4<T> backward(const TapeNode<T>& node, const Tensor4<T>& grad) override {
    return flatten_backward(node.in_dims, grad);
  }

 private:
  std::string name_;
};

template <typename T>
class Slice : public Layer<T> {
 public:
  explicit Slice(std::string name) : name_(std::move(name)) {}
  const std::string& name() const override { return name_; }
  LayerKind kind() const override { return LayerKind::Slice; }

  PathwayBatch<T> forward(const PathwayBatch<T>& x, TapeNode<T>& node) override {
    node.input.group = x.group;
    node.input.pathways = x.pathways;
    return cyclic_slice(x);
  }
  PathwayBatch<T> infer(const PathwayBatch<T>& x) override { return cyclic_slice(x); }
  Tensor4<T> backward(const TapeNode<T>& node, const Tensor4<T>& grad) override {
    return cyclic_slice_adjoint(grad, node.input.group);
  }

 private:
  std::string name_;
};

template <typename T>
class CyclicPool : public Layer<T> {
 public:
  CyclicPool(std::string name, PoolFunction f, bool realign)
      : name_(std::move(name)), f_(f), realign_(realign) {}
  const std::string& name() const override { return name_; }
  LayerKind kind() const override { return LayerKind::Pool; }

  PathwayBatch<T> forward(const PathwayBatch<T>& x, TapeNode<T>& node) override {
    node.input.group = x.group;
    node.input.pathways = x.pathways;
    return cyclic_pool(x, f_, realign_, &node.pool);
  }
  PathwayBatch<T> infer(const PathwayBatch<T>& x) override {
    return cyclic_pool(x, f_, realign_, nullptr);
  }
  Tensor4<T> backward(const TapeNode<T>& node, const Tensor4<T>& grad) override {
    return cyclic_pool_adjoint(grad, f_, realign_, node.input.group, node.pool);
  }

 private:
  std::string name_;
  PoolFunction f_;
  bool realign_;
};

template <typename T>
class Stack : public Layer<T> {
 public:
  explicit Stack(std::string name) : name_(std::move(name)) {}
  const std::string& name() const override { return name_; }
  LayerKind kind() const override { return LayerKind::Stack; }

  PathwayBatch<T> forward(const PathwayBatch<T>& x, TapeNode<T>& node) override {
    node.input.group = x.group;
    node.input.pathways = x.pathways;
    return cyclic_stack(x);
  }
  PathwayBatch<T> infer(const PathwayBatch<T>& x) override { return cyclic_stack(x); }
  Tensor4<T> backward(const TapeNode<T>& node, const Tensor4<T>& grad) override {
    return cyclic_stack_adjoint(grad, node.input.group);
  }

 private:
  std::string name_;
};

template <typename T>
class Roll : public Layer<T> {
 public:
  explicit Roll(std::string name) : name_(std::move(name)) {}
  const std::string& name() const override { return name_; }
  LayerKind kind() const override { return LayerKind::Roll; }

  PathwayBatch<T> forward(const PathwayBatch<T>& x, TapeNode<T>& node) override {
    node.input.group = x.group;
    node.input.pathways = x.pathways;
    return cyclic_roll(x);
  }
  PathwayBatch<T> infer(const PathwayBatch<T>& x) override { return cyclic_roll(x); }
  Tensor4<T> backward(const TapeNode<T>& node, const Tensor4<T>& grad) override {
    return cyclic_roll_adjoint(grad, node.input.group);
  }

 private:
  std::string name_;
};

}  // namespace layers

// A sequential model instantiated from a validated spec. Weight init order is
// the layer order, drawn from a single seeded stream, so identical
// (spec, seed) pairs give bitwise-identical parameters.
template <typename T>
class Model {
 public:
  Model(const ModelSpec& spec, const InputShape& input, uint64_t seed)
      : spec_(spec), input_(input) {
    const auto shapes = layer_input_shapes(spec, input);
    Rng rng(seed);
    std::vector<int> kind_index(16, 0);
    for (size_t i = 0; i < spec.layers.size(); ++i) {
      const LayerSpec& l = spec.layers[i];
      const FlowShape& in = shapes[i];
      std::string name =
          std::string(layer_kind_name(l.kind)) + std::to_string(kind_index[static_cast<int>(l.kind)]++);
      switch (l.kind) {
        case LayerKind::Conv:
          layers_.push_back(std::make_unique<layers::Conv<T>>(name, in.c, l.filters, l.kernel,
                                                              l.padding, rng));
          break;
        case LayerKind::Dense:
          layers_.push_back(std::make_unique<layers::Dense<T>>(name, in.c, l.units, rng));
          break;
        case LayerKind::Relu:
          layers_.push_back(std::make_unique<layers::Relu<T>>(name));
          break;
        case LayerKind::Maxpool:
          layers_.push_back(std::make_unique<layers::Maxpool<T>>(name, l.window, l.stride));
          break;
        case LayerKind::Flatten:
          layers_.push_back(std::make_unique<layers::Flatten<T>>(name));
          break;
        case LayerKind::Slice:
          layers_.push_back(std::make_unique<layers::Slice<T>>(name));
          break;
        case LayerKind::Pool:
          layers_.push_back(std::make_unique<layers::CyclicPool<T>>(name, l.pool, l.realign));
          break;
        case LayerKind::Stack:
          layers_.push_back(std::make_unique<layers::Stack<T>>(name));
          break;
        case LayerKind::Roll:
          layers_.push_back(std::make_unique<layers::Roll<T>>(name));
          break;
      }
    }
  }

  const ModelSpec& spec() const { return spec_; }
  const InputShape& input_shape() const { return input_; }
  size_t layer_count() const { return layers_.size(); }

  PathwayBatch<T> forward(const Tensor4<T>& x, Tape<T>& tape) {
    tape.nodes.assign(layers_.size(), TapeNode<T>{});
    PathwayBatch<T> v(x, spec_.group, 1);
    for (size_t i = 0; i < layers_.size(); ++i) v = layers_[i]->forward(v, tape.nodes[i]);
    return v;
  }

  PathwayBatch<T> infer(const Tensor4<T>& x) {
    PathwayBatch<T> v(x, spec_.group, 1);
    for (auto& l : layers_) v = l->infer(v);
    return v;
  }

  // Reverse replay; visits each tape node exactly once, newest first.
  Tensor4<T> backward(const Tape<T>& tape, const Tensor4<T>& loss_grad) {
    Tensor4<T> g = loss_grad;
    for (size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(tape.nodes[i], g);
    return g;
  }

  std::vector<ParamBuffer<T>*> params() {
    std::vector<ParamBuffer<T>*> out;
    for (auto& l : layers_)
      for (auto* p : l->params()) out.push_back(p);
    return out;
  }

  void zero_grads() {
    for (auto* p : params()) p->zero_grad();
  }

 private:
  ModelSpec spec_;
  InputShape input_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace ccnn
