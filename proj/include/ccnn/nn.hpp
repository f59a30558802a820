#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ccnn/common.hpp"
#include "ccnn/rng.hpp"
#include "ccnn/tensor.hpp"

namespace ccnn {

enum class Padding { Same, Valid };

inline Padding parse_padding(const std::string& s) {
  if (s == "same") return Padding::Same;
  if (s == "valid") return Padding::Valid;
  throw ConfigError("unknown padding '" + s + "' (expected same or valid)");
}

// All OpenMP loops in this header partition over output elements (or over
// batch items for scatter ops), so results are bit-identical for any thread
// count: every accumulation chain runs sequentially inside one thread.

namespace conv {

inline int64_t out_dim(int64_t in, int64_t k, int64_t pad) { return in + 2 * pad - k + 1; }

inline int64_t pad_of(Padding p, int64_t k) {
  if (p == Padding::Valid) return 0;
  if (k % 2 == 0) throw ShapeError("same padding requires odd kernel size, got " + std::to_string(k));
  return (k - 1) / 2;
}

// Column layout: row q = (c*k + u)*k + v, one column per output pixel.
template <typename T>
void im2col(const T* x, int64_t C, int64_t H, int64_t W, int64_t k, int64_t pad, int64_t OH,
            int64_t OW, T* col) {
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t u = 0; u < k; ++u) {
      for (int64_t v = 0; v < k; ++v) {
        T* row = col + ((c * k + u) * k + v) * OH * OW;
        for (int64_t oy = 0; oy < OH; ++oy) {
          const int64_t iy = oy + u - pad;
          if (iy < 0 || iy >= H) {
            for (int64_t ox = 0; ox < OW; ++ox) row[oy * OW + ox] = T(0);
            continue;
          }
          for (int64_t ox = 0; ox < OW; ++ox) {
            const int64_t ix = ox + v - pad;
            row[oy * OW + ox] = (ix < 0 || ix >= W) ? T(0) : x[(c * H + iy) * W + ix];
          }
        }
      }
    }
  }
}

// Scatter-add the column matrix back onto a (C, H, W) image.
template <typename T>
void col2im(const T* col, int64_t C, int64_t H, int64_t W, int64_t k, int64_t pad, int64_t OH,
            int64_t OW, T* x) {
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t u = 0; u < k; ++u) {
      for (int64_t v = 0; v < k; ++v) {
        const T* row = col + ((c * k + u) * k + v) * OH * OW;
        for (int64_t oy = 0; oy < OH; ++oy) {
          const int64_t iy = oy + u - pad;
          if (iy < 0 || iy >= H) continue;
          for (int64_t ox = 0; ox < OW; ++ox) {
            const int64_t ix = ox + v - pad;
            if (ix >= 0 && ix < W) x[(c * H + iy) * W + ix] += row[oy * OW + ox];
          }
        }
      }
    }
  }
}

}  // namespace conv

// Cross-correlation with zero padding (same) or none (valid), stride 1.
// weights: (F, C, k, k); bias: length F.
template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const Tensor4<T>& weights,
                          const std::vector<T>& bias, Padding padding) {
  const int64_t N = x.dims.n, C = x.dims.c, H = x.dims.h, W = x.dims.w;
  const int64_t F = weights.dims.n, k = weights.dims.h;
  if (weights.dims.c != C)
    throw ShapeError("conv2d: input has " + std::to_string(C) + " channels, weights expect " +
                     std::to_string(weights.dims.c));
  if (weights.dims.h != weights.dims.w) throw ShapeError("conv2d: kernels must be square");
  if (static_cast<int64_t>(bias.size()) != F) throw ShapeError("conv2d: bias length mismatch");
  const int64_t pad = conv::pad_of(padding, k);
  const int64_t OH = conv::out_dim(H, k, pad), OW = conv::out_dim(W, k, pad);
  if (OH <= 0 || OW <= 0)
    throw ShapeError("conv2d: kernel " + std::to_string(k) + " exceeds input " + x.dims.str());

  Tensor4<T> out(Dims4{N, F, OH, OW});
  const int64_t Q = C * k * k, P = OH * OW;
  const T* wm = weights.data.data();

#pragma omp parallel
  {
    std::vector<T> col(static_cast<size_t>(Q * P));
#pragma omp for
    for (int64_t n = 0; n < N; ++n) {
      conv::im2col(x.plane(n, 0), C, H, W, k, pad, OH, OW, col.data());
      for (int64_t f = 0; f < F; ++f) {
        T* o = out.plane(n, f);
        for (int64_t e = 0; e < P; ++e) o[e] = bias[static_cast<size_t>(f)];
        for (int64_t q = 0; q < Q; ++q) {
          const T w = wm[f * Q + q];
          const T* c = col.data() + q * P;
          for (int64_t e = 0; e < P; ++e) o[e] += w * c[e];
        }
      }
    }
  }
  return out;
}

template <typename T>
struct ConvGrads {
  Tensor4<T> x;
  Tensor4<T> weights;
  std::vector<T> bias;
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& x, const Tensor4<T>& weights, Padding padding,
                             const Tensor4<T>& grad) {
  const int64_t N = x.dims.n, C = x.dims.c, H = x.dims.h, W = x.dims.w;
  const int64_t F = weights.dims.n, k = weights.dims.h;
  const int64_t pad = conv::pad_of(padding, k);
  const int64_t OH = grad.dims.h, OW = grad.dims.w;
  const int64_t Q = C * k * k, P = OH * OW;

  ConvGrads<T> g;
  g.x = Tensor4<T>(x.dims);
  g.weights = Tensor4<T>(weights.dims);
  g.bias.assign(static_cast<size_t>(F), T(0));
  const T* wm = weights.data.data();

  // One shared column buffer over the whole batch keeps grad_w accumulation
  // a per-element sequential sum over (n, pixel).
  std::vector<T> cols(static_cast<size_t>(N * Q * P));
#pragma omp parallel for
  for (int64_t n = 0; n < N; ++n)
    conv::im2col(x.plane(n, 0), C, H, W, k, pad, OH, OW, cols.data() + n * Q * P);

#pragma omp parallel for collapse(2)
  for (int64_t f = 0; f < F; ++f) {
    for (int64_t q = 0; q < Q; ++q) {
      T acc = 0;
      for (int64_t n = 0; n < N; ++n) {
        const T* go = grad.plane(n, f);
        const T* c = cols.data() + (n * Q + q) * P;
        for (int64_t e = 0; e < P; ++e) acc += go[e] * c[e];
      }
      g.weights.data[static_cast<size_t>(f * Q + q)] = acc;
    }
  }

#pragma omp parallel for
  for (int64_t f = 0; f < F; ++f) {
    T acc = 0;
    for (int64_t n = 0; n < N; ++n) {
      const T* go = grad.plane(n, f);
      for (int64_t e = 0; e < P; ++e) acc += go[e];
    }
    g.bias[static_cast<size_t>(f)] = acc;
  }

#pragma omp parallel
  {
    std::vector<T> colgrad(static_cast<size_t>(Q * P));
#pragma omp for
    for (int64_t n = 0; n < N; ++n) {
      // colgrad = W^T * grad_out(n)
      for (int64_t q = 0; q < Q; ++q) {
        T* cg = colgrad.data() + q * P;
        for (int64_t e = 0; e < P; ++e) cg[e] = T(0);
        for (int64_t f = 0; f < F; ++f) {
          const T w = wm[f * Q + q];
          const T* go = grad.plane(n, f);
          for (int64_t e = 0; e < P; ++e) cg[e] += w * go[e];
        }
      }
      conv::col2im(colgrad.data(), C, H, W, k, pad, OH, OW, g.x.plane(n, 0));
    }
  }
  return g;
}

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x) {
  Tensor4<T> out(x.dims);
  const int64_t m = x.numel();
#pragma omp parallel for
  for (int64_t i = 0; i < m; ++i) out.data[i] = std::max(x.data[i], T(0));
  return out;
}

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& x, const Tensor4<T>& grad) {
  Tensor4<T> out(x.dims);
  const int64_t m = x.numel();
#pragma omp parallel for
  for (int64_t i = 0; i < m; ++i) out.data[i] = x.data[i] > T(0) ? grad.data[i] : T(0);
  return out;
}

// Dense layer over flattened features: x (N, In, 1, 1) -> (N, Out, 1, 1).
// weights: (Out, In, 1, 1).
template <typename T>
Tensor4<T> dense_forward(const Tensor4<T>& x, const Tensor4<T>& weights,
                         const std::vector<T>& bias) {
  if (x.dims.h != 1 || x.dims.w != 1)
    throw ShapeError("dense: input must be flattened, got " + x.dims.str());
  const int64_t N = x.dims.n, In = x.dims.c, Out = weights.dims.n;
  if (weights.dims.c != In)
    throw ShapeError("dense: input has " + std::to_string(In) + " features, weights expect " +
                     std::to_string(weights.dims.c));
  Tensor4<T> out(Dims4{N, Out, 1, 1});
#pragma omp parallel for collapse(2)
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t o = 0; o < Out; ++o) {
      T acc = bias[static_cast<size_t>(o)];
      const T* xi = x.data.data() + n * In;
      const T* wr = weights.data.data() + o * In;
      for (int64_t i = 0; i < In; ++i) acc += wr[i] * xi[i];
      out.data[static_cast<size_t>(n * Out + o)] = acc;
    }
  }
  return out;
}

template <typename T>
struct DenseGrads {
  Tensor4<T> x;
  Tensor4<T> weights;
  std::vector<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const Tensor4<T>& x, const Tensor4<T>& weights,
                             const Tensor4<T>& grad) {
  const int64_t N = x.dims.n, In = x.dims.c, Out = weights.dims.n;
  DenseGrads<T> g;
  g.x = Tensor4<T>(x.dims);
  g.weights = Tensor4<T>(weights.dims);
  g.bias.assign(static_cast<size_t>(Out), T(0));
#pragma omp parallel for collapse(2)
  for (int64_t o = 0; o < Out; ++o) {
    for (int64_t i = 0; i < In; ++i) {
      T acc = 0;
      for (int64_t n = 0; n < N; ++n)
        acc += grad.data[static_cast<size_t>(n * Out + o)] * x.data[static_cast<size_t>(n * In + i)];
      g.weights.data[static_cast<size_t>(o * In + i)] = acc;
    }
  }
  for (int64_t o = 0; o < Out; ++o) {
    T acc = 0;
    for (int64_t n = 0; n < N; ++n) acc += grad.data[static_cast<size_t>(n * Out + o)];
    g.bias[static_cast<size_t>(o)] = acc;
  }
#pragma omp parallel for collapse(2)
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t i = 0; i < In; ++i) {
      T acc = 0;
      for (int64_t o = 0; o < Out; ++o)
        acc += grad.data[static_cast<size_t>(n * Out + o)] * weights.data[static_cast<size_t>(o * In + i)];
      g.x.data[static_cast<size_t>(n * In + i)] = acc;
    }
  }
  return g;
}

// Spatial max pooling, stride 2, window 2 or 3 (window 3 overlaps).
// Ties resolve to the first element in row-major window scan.
template <typename T>
Tensor4<T> maxpool2d_forward(const Tensor4<T>& x, int64_t window, int64_t stride,
                             std::vector<int32_t>* argmax = nullptr) {
  const int64_t N = x.dims.n, C = x.dims.c, H = x.dims.h, W = x.dims.w;
  if (window > H || window > W)
    throw ShapeError("maxpool: window " + std::to_string(window) + " exceeds input " + x.dims.str());
  const int64_t OH = (H - window) / stride + 1, OW = (W - window) / stride + 1;
  Tensor4<T> out(Dims4{N, C, OH, OW});
  if (argmax) argmax->assign(static_cast<size_t>(out.numel()), 0);
#pragma omp parallel for collapse(2)
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const T* src = x.plane(n, c);
      T* dst = out.plane(n, c);
      for (int64_t oy = 0; oy < OH; ++oy) {
        for (int64_t ox = 0; ox < OW; ++ox) {
          int64_t best = (oy * stride) * W + ox * stride;
          T bv = src[best];
          for (int64_t u = 0; u < window; ++u)
            for (int64_t v = 0; v < window; ++v) {
              const int64_t idx = (oy * stride + u) * W + ox * stride + v;
              if (src[idx] > bv) {
                bv = src[idx];
                best = idx;
              }
            }
          dst[oy * OW + ox] = bv;
          if (argmax)
            (*argmax)[static_cast<size_t>(out.offset(n, c, oy, ox))] = static_cast<int32_t>(best);
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor4<T> maxpool2d_backward(const Dims4& in_dims, const Tensor4<T>& grad,
                              const std::vector<int32_t>& argmax) {
  Tensor4<T> out(in_dims);
  const int64_t N = grad.dims.n, C = grad.dims.c, P = grad.dims.h * grad.dims.w;
  // Overlapping windows can hit the same input cell, so the scatter loop over
  // output pixels stays sequential inside each (n, c) plane.
#pragma omp parallel for collapse(2)
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      T* dst = out.plane(n, c);
      const T* g = grad.plane(n, c);
      const int32_t* am = argmax.data() + (n * C + c) * P;
      for (int64_t e = 0; e < P; ++e) dst[am[e]] += g[e];
    }
  }
  return out;
}

// (N, C, H, W) -> (N, C*H*W, 1, 1); the buffer is already row-major.
template <typename T>
Tensor4<T> flatten_forward(const Tensor4<T>& x) {
  return Tensor4<T>(Dims4{x.dims.n, x.dims.c * x.dims.h * x.dims.w, 1, 1}, x.data);
}

template <typename T>
Tensor4<T> flatten_backward(const Dims4& in_dims, const Tensor4<T>& grad) {
  return Tensor4<T>(in_dims, grad.data);
}

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor4<T> grad;
};

// Row-stabilized softmax over (N, K, 1, 1) logits.
template <typename T>
Tensor4<T> softmax(const Tensor4<T>& logits) {
  const int64_t N = logits.dims.n, K = logits.dims.c;
  if (logits.dims.h != 1 || logits.dims.w != 1)
    throw ShapeError("softmax: expected (N,K,1,1) logits, got " + logits.dims.str());
  Tensor4<T> p(logits.dims);
  for (int64_t n = 0; n < N; ++n) {
    const T* z = logits.data.data() + n * K;
    T* q = p.data.data() + n * K;
    T zmax = z[0];
    for (int64_t k = 1; k < K; ++k) zmax = std::max(zmax, z[k]);
    T sum = 0;
    for (int64_t k = 0; k < K; ++k) {
      q[k] = std::exp(z[k] - zmax);
      sum += q[k];
    }
    for (int64_t k = 0; k < K; ++k) q[k] /= sum;
  }
  return p;
}

// Mean cross-entropy over the batch, labels as class indices.
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor4<T>& logits, const std::vector<int32_t>& labels) {
  const int64_t N = logits.dims.n, K = logits.dims.c;
  if (static_cast<int64_t>(labels.size()) != N)
    throw ShapeError("cross entropy: " + std::to_string(labels.size()) + " labels for batch " +
                     std::to_string(N));
  Tensor4<T> p = softmax(logits);
  LossResult<T> res;
  res.grad = Tensor4<T>(logits.dims);
  double loss = 0.0;
  for (int64_t n = 0; n < N; ++n) {
    const int32_t y = labels[static_cast<size_t>(n)];
    if (y < 0 || y >= K) throw ShapeError("cross entropy: label out of range");
    const T* q = p.data.data() + n * K;
    loss -= std::log(std::max(static_cast<double>(q[y]), 1e-300));
    T* g = res.grad.data.data() + n * K;
    for (int64_t k = 0; k < K; ++k) g[k] = q[k] / T(N);
    g[y] -= T(1) / T(N);
  }
  res.loss = loss / static_cast<double>(N);
  return res;
}

// Root-mean-square error over all elements; grad is d rmse / d pred.
template <typename T>
LossResult<T> rmse(const Tensor4<T>& pred, const Tensor4<T>& target) {
  if (!pred.same_shape(target))
    throw ShapeError("rmse: shape mismatch " + pred.dims.str() + " vs " + target.dims.str());
  const int64_t m = pred.numel();
  double ss = 0.0;
  for (int64_t i = 0; i < m; ++i) {
    const double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
    ss += d * d;
  }
  LossResult<T> res;
  res.loss = std::sqrt(ss / static_cast<double>(m));
  res.grad = Tensor4<T>(pred.dims);
  if (res.loss > 0.0) {
    const double scale = 1.0 / (static_cast<double>(m) * res.loss);
    for (int64_t i = 0; i < m; ++i)
      res.grad.data[i] =
          static_cast<T>((static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i])) * scale);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<T> m, v;
  int64_t step = 0;
};

// Standard Adam update with bias correction; params and grads are flat spans
// over one parameter buffer.
template <typename T>
void adam_step(T* params, const T* grads, int64_t count, AdamState<T>& state,
               const AdamConfig& cfg, double lr) {
  if (state.m.empty()) {
    state.m.assign(static_cast<size_t>(count), T(0));
    state.v.assign(static_cast<size_t>(count), T(0));
  }
  state.step += 1;
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(state.step)));
  const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(state.step)));
  const T a = static_cast<T>(lr), eps = static_cast<T>(cfg.eps);
#pragma omp parallel for
  for (int64_t i = 0; i < count; ++i) {
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * grads[i];
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * grads[i] * grads[i];
    const T mhat = state.m[i] / c1;
    const T vhat = state.v[i] / c2;
    params[i] -= a * mhat / (std::sqrt(vhat) + eps);
  }
}

// base_lr * 10^-(number of milestones at or before step).
inline double lr_schedule(int64_t step, double base_lr, const std::vector<int64_t>& milestones) {
  int passed = 0;
  for (int64_t m : milestones)
    if (step >= m) ++passed;
  return base_lr * std::pow(10.0, -passed);
}

// Centered uniform init scaled by 1/sqrt(fan_in).
template <typename T>
void init_uniform_fanin(T* data, int64_t count, int64_t fan_in, Rng& rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (int64_t i = 0; i < count; ++i) data[i] = static_cast<T>(rng.uniform(-a, a));
}

}  // namespace ccnn
