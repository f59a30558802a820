#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ccnn/group.hpp"
#include "ccnn/layers.hpp"
#include "ccnn/tensor.hpp"

namespace ccnn::oracle {

// Serial direct convolution, kept deliberately independent of the im2col path
// in nn.hpp: indices are derived from the output coordinate with explicit
// bounds checks, nothing is shared with the production kernel.
template <typename T>
Tensor4<T> naive_conv2d(const Tensor4<T>& x, const Tensor4<T>& weights, const std::vector<T>& bias,
                        Padding padding) {
  const int64_t N = x.dims.n, C = x.dims.c, H = x.dims.h, W = x.dims.w;
  const int64_t F = weights.dims.n, k = weights.dims.h;
  if (weights.dims.c != C) throw ShapeError("naive_conv2d: channel mismatch");
  const int64_t pad = padding == Padding::Same ? (k - 1) / 2 : 0;
  if (padding == Padding::Same && k % 2 == 0)
    throw ShapeError("naive_conv2d: same padding requires odd kernel");
  const int64_t OH = H + 2 * pad - k + 1, OW = W + 2 * pad - k + 1;
  if (OH <= 0 || OW <= 0) throw ShapeError("naive_conv2d: kernel exceeds input");

  Tensor4<T> out(Dims4{N, F, OH, OW});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t f = 0; f < F; ++f)
      for (int64_t oy = 0; oy < OH; ++oy)
        for (int64_t ox = 0; ox < OW; ++ox) {
          T acc = bias[static_cast<size_t>(f)];
          for (int64_t c = 0; c < C; ++c)
            for (int64_t u = 0; u < k; ++u)
              for (int64_t v = 0; v < k; ++v) {
                const int64_t iy = oy - pad + u;
                const int64_t ix = ox - pad + v;
                if (iy >= 0 && iy < H && ix >= 0 && ix < W)
                  acc += x.at(n, c, iy, ix) * weights.at(f, c, u, v);
              }
          out.at(n, f, oy, ox) = acc;
        }
  return out;
}

// Central finite differences of a scalar function of a flat buffer.
inline std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Relative error with the usual guarded denominator.
inline double rel_err(double a, double b) {
  const double den = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / den;
}

struct EquivarianceReport {
  std::string group;
  std::string mode;  // "invariant" | "same-equivariant" | the check's name
  int trials = 0;
  double tolerance = 0.0;
  std::vector<std::string> element_names;
  std::vector<double> max_deviation;  // per group element
  bool pass = false;

  double worst() const {
    double m = 0.0;
    for (double d : max_deviation) m = std::max(m, d);
    return m;
  }
};

// Verifies that rotation distributes over (same-padding) convolution:
//   r^-1(x * r(w)) == (r^-1 x) * w       for r, r^2, r^3,
// and the four-slice form: realigning conv outputs of the slice pathways
// equals convolving with the four inversely rotated filter copies.
template <typename T>
EquivarianceReport check_filter_rotation_equivalence(const Tensor4<T>& x, const Tensor4<T>& w,
                                                     double tolerance = 1e-12) {
  if (x.dims.h != x.dims.w) throw ShapeError("filter rotation check needs square input");
  if (w.dims.h != w.dims.w) throw ShapeError("filter rotation check needs square filters");
  const std::vector<T> bias(static_cast<size_t>(w.dims.n), T(0));

  EquivarianceReport rep;
  rep.group = "c4";
  rep.mode = "filter-rotation-distributivity";
  rep.trials = 1;
  rep.tolerance = tolerance;
  for (int k = 0; k < 4; ++k) {
    const GroupElement r{GroupKind::C4, 0, k};
    // lhs: r^-k (x * r^k w); rhs: (r^-k x) * w
    Tensor4<T> lhs = apply_group(inverse(r), naive_conv2d(x, rotate90(w, k), bias, Padding::Same));
    Tensor4<T> rhs = naive_conv2d(apply_group(inverse(r), x), w, bias, Padding::Same);
    double dev = 0.0;
    for (size_t i = 0; i < lhs.data.size(); ++i)
      dev = std::max(dev, std::abs(static_cast<double>(lhs.data[i]) - static_cast<double>(rhs.data[i])));
    // four-slice form for the same k: realign(conv(slice path k)) vs x * r^-k w
    Tensor4<T> path = naive_conv2d(apply_group(r, x), w, bias, Padding::Same);
    Tensor4<T> realigned = apply_group(inverse(r), path);
    Tensor4<T> rotated_filter = naive_conv2d(x, rotate90(w, -k), bias, Padding::Same);
    for (size_t i = 0; i < realigned.data.size(); ++i)
      dev = std::max(dev, std::abs(static_cast<double>(realigned.data[i]) -
                                   static_cast<double>(rotated_filter.data[i])));
    rep.element_names.push_back(r.str());
    rep.max_deviation.push_back(dev);
  }
  rep.pass = rep.worst() <= tolerance;
  return rep;
}

enum class EquivarianceMode { Invariant, SameEquivariant };

// For every group element g and `trials` random inputs, measures
//   invariant:        max |f(gx) - f(x)|
//   same-equivariant: max |f(gx) - g f(x)|
// over the model's output tensor.
template <typename T>
EquivarianceReport check_model_equivariance(Model<T>& model, EquivarianceMode mode, int trials,
                                            double tolerance, uint64_t seed) {
  const GroupKind kind = model.spec().group;
  const int n = group_order(kind);
  EquivarianceReport rep;
  rep.group = group_name(kind);
  rep.mode = mode == EquivarianceMode::Invariant ? "invariant" : "same-equivariant";
  rep.trials = trials;
  rep.tolerance = tolerance;
  rep.element_names.resize(static_cast<size_t>(n));
  rep.max_deviation.assign(static_cast<size_t>(n), 0.0);

  Rng rng(seed);
  const InputShape& in = model.input_shape();
  for (int t = 0; t < trials; ++t) {
    Tensor4<T> x(Dims4{1, in.channels, in.height, in.width});
    for (auto& v : x.data) v = static_cast<T>(rng.uniform(-1.0, 1.0));
    const Tensor4<T> fx = model.infer(x).tensor;
    for (int e = 0; e < n; ++e) {
      const GroupElement g = group_element(kind, e);
      rep.element_names[static_cast<size_t>(e)] = g.str();
      const Tensor4<T> fgx = model.infer(apply_group(g, x)).tensor;
      const Tensor4<T> ref = mode == EquivarianceMode::Invariant ? fx : apply_group(g, fx);
      if (!fgx.same_shape(ref))
        throw ShapeError("equivariance check: output shapes differ (" + fgx.dims.str() + " vs " +
                         ref.dims.str() + ")");
      double dev = 0.0;
      for (size_t i = 0; i < ref.data.size(); ++i)
        dev = std::max(dev, std::abs(static_cast<double>(fgx.data[i]) - static_cast<double>(ref.data[i])));
      rep.max_deviation[static_cast<size_t>(e)] =
          std::max(rep.max_deviation[static_cast<size_t>(e)], dev);
    }
  }
  rep.pass = rep.worst() <= tolerance;
  return rep;
}

}  // namespace ccnn::oracle
