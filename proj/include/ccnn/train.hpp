#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "ccnn/config.hpp"
#include "ccnn/dataset.hpp"
#include "ccnn/layers.hpp"

namespace ccnn {

template <typename T>
Tensor4<T> cast_tensor(const Tensor4<double>& x) {
  if constexpr (std::is_same_v<T, double>) return x;
  Tensor4<T> out(x.dims);
  for (size_t i = 0; i < x.data.size(); ++i) out.data[i] = static_cast<T>(x.data[i]);
  return out;
}

struct EpochMetrics {
  int64_t epoch = 0;
  double train_loss = 0.0, train_acc = 0.0;
  double val_loss = 0.0, val_acc = 0.0;
};

struct EvalMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

namespace detail {

template <typename T>
Tensor4<T> gather_batch(const Tensor4<T>& images, const std::vector<int64_t>& idx, int64_t begin,
                        int64_t count) {
  const int64_t sample = images.dims.c * images.dims.h * images.dims.w;
  Tensor4<T> out(Dims4{count, images.dims.c, images.dims.h, images.dims.w});
  for (int64_t b = 0; b < count; ++b)
    std::memcpy(out.data.data() + b * sample, images.data.data() + idx[static_cast<size_t>(begin + b)] * sample,
                static_cast<size_t>(sample) * sizeof(T));
  return out;
}

template <typename T>
void rotate_sample_inplace(Tensor4<T>& batch, int64_t n, int k) {
  if (k % 4 == 0) return;
  Tensor4<T> one(Dims4{1, batch.dims.c, batch.dims.h, batch.dims.w});
  const int64_t sample = one.numel();
  std::memcpy(one.data.data(), batch.data.data() + n * sample, static_cast<size_t>(sample) * sizeof(T));
  one = rotate90(one, k);  // square images: dims unchanged
  std::memcpy(batch.data.data() + n * sample, one.data.data(), static_cast<size_t>(sample) * sizeof(T));
}

template <typename T>
Tensor4<T> one_hot(const std::vector<int32_t>& labels, int64_t offset, int64_t count, int64_t classes) {
  Tensor4<T> out(Dims4{count, classes, 1, 1});
  for (int64_t b = 0; b < count; ++b) out.at(b, labels[static_cast<size_t>(offset + b)], 0, 0) = T(1);
  return out;
}

inline std::string format_metric(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace detail

// Loss and accuracy over one split, in chunks of `batch` (last chunk may be
// short). With tta, class probabilities (ce) or raw outputs (rmse) are
// averaged over the four rotations of each input.
template <typename T>
EvalMetrics evaluate_split(Model<T>& model, const Tensor4<T>& images,
                           const std::vector<int32_t>& labels, LossKind loss, int64_t batch,
                           bool tta = false) {
  const int64_t n = images.dims.n;
  double loss_sum = 0.0;
  int64_t correct = 0;
  std::vector<int64_t> idx(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;

  int64_t classes = 0;
  for (int64_t begin = 0; begin < n; begin += batch) {
    const int64_t count = std::min(batch, n - begin);
    Tensor4<T> x = detail::gather_batch(images, idx, begin, count);
    Tensor4<T> pred;
    if (!tta) {
      Tensor4<T> out = model.infer(x).tensor;
      pred = loss == LossKind::CrossEntropy ? softmax(out) : out;
    } else {
      for (int k = 0; k < 4; ++k) {
        Tensor4<T> out = model.infer(rotate90(x, k)).tensor;
        Tensor4<T> p = loss == LossKind::CrossEntropy ? softmax(out) : out;
        if (k == 0) {
          pred = std::move(p);
        } else {
          for (size_t i = 0; i < pred.data.size(); ++i) pred.data[i] += p.data[i];
        }
      }
      for (auto& v : pred.data) v /= T(4);
    }
    classes = pred.dims.c;
    for (int64_t b = 0; b < count; ++b) {
      const T* row = pred.data.data() + b * classes;
      int64_t best = 0;
      for (int64_t k = 1; k < classes; ++k)
        if (row[k] > row[best]) best = k;
      const int32_t y = labels[static_cast<size_t>(begin + b)];
      if (best == y) ++correct;
      if (loss == LossKind::CrossEntropy) {
        loss_sum -= std::log(std::max(static_cast<double>(row[y]), 1e-300));
      } else {
        for (int64_t k = 0; k < classes; ++k) {
          const double d = static_cast<double>(row[k]) - (k == y ? 1.0 : 0.0);
          loss_sum += d * d;
        }
      }
    }
  }
  EvalMetrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  m.loss = loss == LossKind::CrossEntropy
               ? loss_sum / static_cast<double>(n)
               : std::sqrt(loss_sum / static_cast<double>(n * classes));
  return m;
}

// One deterministic training run. Writes metrics.csv under out_dir (pass ""
// to skip) while running; the caller persists the checkpoint afterwards.
// Throws NumericError if the loss stops being finite.
template <typename T>
std::vector<EpochMetrics> train_model(Model<T>& model, const DataBundle& data,
                                      const TrainConfig& cfg, LossKind loss,
                                      const std::string& out_dir = "") {
  const Tensor4<T> train_images = cast_tensor<T>(data.train.images);
  const Tensor4<T> val_images = cast_tensor<T>(data.val.images);
  const int64_t n = train_images.dims.n;
  if (n % cfg.batch != 0)
    throw ConfigError("train count " + std::to_string(n) + " is not divisible by batch " +
                      std::to_string(cfg.batch));
  const int64_t classes = model.input_shape().classes;

  // Streams: the model was seeded by the caller; the loop draws (shuffle,
  // augmentation) come from their own stream so eval passes never disturb them.
  Rng loop_rng(cfg.seed ^ 0xD1B54A32D192ED03ull);

  AdamConfig adam{cfg.base_lr, cfg.beta1, cfg.beta2, cfg.eps};
  auto params = model.params();
  std::vector<AdamState<T>> states(params.size());

  std::ofstream metrics;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    metrics.open(out_dir + "/metrics.csv", std::ios::trunc);
    metrics << "epoch,split,loss,accuracy\n";
    metrics.flush();
  }

  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

  std::vector<EpochMetrics> history;
  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    loop_rng.shuffle(order);
    const double lr = lr_schedule(epoch, cfg.base_lr, cfg.lr_milestones);

    double loss_sum = 0.0;
    int64_t correct = 0;
    for (int64_t begin = 0; begin < n; begin += cfg.batch) {
      Tensor4<T> x = detail::gather_batch(train_images, order, begin, cfg.batch);
      std::vector<int32_t> labels(static_cast<size_t>(cfg.batch));
      for (int64_t b = 0; b < cfg.batch; ++b)
        labels[static_cast<size_t>(b)] =
            data.train.labels[static_cast<size_t>(order[static_cast<size_t>(begin + b)])];
      if (cfg.augment)
        for (int64_t b = 0; b < cfg.batch; ++b)
          detail::rotate_sample_inplace(x, b, static_cast<int>(loop_rng.uniform_int(4)));

      Tape<T> tape;
      Tensor4<T> out = model.forward(x, tape).tensor;
      LossResult<T> lr_res;
      if (loss == LossKind::CrossEntropy) {
        lr_res = softmax_cross_entropy(out, labels);
      } else {
        lr_res = rmse(out, detail::one_hot<T>(labels, 0, cfg.batch, classes));
      }
      if (!std::isfinite(lr_res.loss))
        throw NumericError("training diverged: loss is not finite at epoch " +
                           std::to_string(epoch) + ", sample offset " + std::to_string(begin));
      loss_sum += lr_res.loss * static_cast<double>(cfg.batch);
      for (int64_t b = 0; b < cfg.batch; ++b) {
        const T* row = out.data.data() + b * classes;
        int64_t best = 0;
        for (int64_t k = 1; k < classes; ++k)
          if (row[k] > row[best]) best = k;
        if (best == labels[static_cast<size_t>(b)]) ++correct;
      }

      model.zero_grads();
      model.backward(tape, lr_res.grad);
      for (size_t p = 0; p < params.size(); ++p)
        adam_step(params[p]->value.data.data(), params[p]->grad.data.data(),
                  params[p]->value.numel(), states[p], adam, lr);
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = loss_sum / static_cast<double>(n);
    em.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    const EvalMetrics vm = evaluate_split(model, val_images, data.val.labels, loss, cfg.batch);
    em.val_loss = vm.loss;
    em.val_acc = vm.accuracy;
    history.push_back(em);

    if (metrics.is_open()) {
      metrics << epoch << ",train," << detail::format_metric(em.train_loss) << ","
              << detail::format_metric(em.train_acc) << "\n";
      metrics << epoch << ",val," << detail::format_metric(em.val_loss) << ","
              << detail::format_metric(em.val_acc) << "\n";
      metrics.flush();
    }
  }
  return history;
}

}  // namespace ccnn
