#pragma once

#include <algorithm>
#include <type_traits>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ccnn/group.hpp"
#include "ccnn/tensor.hpp"

namespace ccnn {

// A batch whose leading axis is partitioned into `pathways` contiguous blocks
// in group enumeration order. pathways == 1 before slicing and after
// pooling/stacking; block p of a sliced batch holds g_p-transformed data.
template <typename T>
struct PathwayBatch {
  Tensor4<T> tensor;
  GroupKind group = GroupKind::C4;
  int pathways = 1;

  PathwayBatch() = default;
  PathwayBatch(Tensor4<T> t, GroupKind g, int p) : tensor(std::move(t)), group(g), pathways(p) {
    if (pathways <= 0 || tensor.dims.n % pathways != 0)
      throw ShapeError("pathway batch: batch " + std::to_string(tensor.dims.n) +
                       " not divisible into " + std::to_string(pathways) + " pathways");
  }

  int64_t base_batch() const { return tensor.dims.n / pathways; }
  bool sliced() const { return pathways > 1; }
};

enum class PoolKind { Mean, Max, Rms };

// Permutation-invariant reduction over the |G| realigned pathway blocks,
// applied elementwise. pre_relu clamps each realigned block at zero first.
struct PoolFunction {
  PoolKind kind = PoolKind::Mean;
  bool pre_relu = false;
};

inline PoolKind parse_pool_kind(const std::string& s) {
  if (s == "mean") return PoolKind::Mean;
  if (s == "max") return PoolKind::Max;
  if (s == "rms") return PoolKind::Rms;
  throw ConfigError("unknown pool function '" + s + "' (expected mean, max or rms)");
}

inline const char* pool_kind_name(PoolKind k) {
  switch (k) {
    case PoolKind::Mean: return "mean";
    case PoolKind::Max: return "max";
    default: return "rms";
  }
}

namespace detail {

inline void require_sliced(const char* op, int pathways, GroupKind g) {
  if (pathways != group_order(g))
    throw ShapeError(std::string(op) + ": expected " + std::to_string(group_order(g)) +
                     " pathways, got " + std::to_string(pathways));
}

inline void require_square(const char* op, const Dims4& d) {
  if (d.h != d.w)
    throw ShapeError(std::string(op) + ": pathway realignment needs square spatial dims, got " +
                     d.str());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Slice: stack the |G| transformed copies of the input along the batch axis.
// Block p = g_p(x). Batch size x|G|.
// ---------------------------------------------------------------------------

template <typename T>
PathwayBatch<T> cyclic_slice(const PathwayBatch<T>& x) {
  if (x.sliced()) throw ShapeError("slice: input is already sliced");
  detail::require_square("slice", x.tensor.dims);
  const int n = group_order(x.group);
  std::vector<Tensor4<T>> blocks;
  blocks.reserve(n);
  for (int p = 0; p < n; ++p)
    blocks.push_back(apply_group(group_element(x.group, p), x.tensor));
  return PathwayBatch<T>(concat_batch(blocks), x.group, n);
}

// Adjoint of slice: grad_x = sum_p g_p^{-1}(grad block p). The adjoint of the
// orthogonal permutation "apply g" is "apply g^{-1}".
template <typename T>
Tensor4<T> cyclic_slice_adjoint(const Tensor4<T>& grad, GroupKind group) {
  const int n = group_order(group);
  auto blocks = split_batch(grad, static_cast<int64_t>(n));
  Tensor4<T> out(blocks[0].dims);
  for (int p = 0; p < n; ++p) {
    Tensor4<T> b = apply_group(inverse(group_element(group, p)), blocks[p]);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  }
  return out;
}

// Permute pathway blocks: out block p = in block perm[p]. Pure block copy.
template <typename T>
PathwayBatch<T> permute_pathways(const PathwayBatch<T>& x, const PathwayPermutation& perm) {
  detail::require_sliced("permute_pathways", x.pathways, x.group);
  if (perm.size() != x.pathways) throw ShapeError("permute_pathways: permutation size mismatch");
  auto blocks = split_batch(x.tensor, static_cast<int64_t>(x.pathways));
  std::vector<Tensor4<T>> out(blocks.size());
  for (int p = 0; p < x.pathways; ++p) out[p] = std::move(blocks[perm.perm[p]]);
  return PathwayBatch<T>(concat_batch(out), x.group, x.pathways);
}

// ---------------------------------------------------------------------------
// Pool: realign pathway blocks with the inverse group action (realign=true)
// or take them raw (realign=false, for flattened features), then reduce with
// a permutation-invariant function. Batch size /|G|.
// ---------------------------------------------------------------------------

// Saved forward state for the pool adjoint.
template <typename T>
struct PoolContext {
  std::vector<Tensor4<T>> realigned;  // post-realign, post-relu blocks
  std::vector<uint8_t> argmax;        // winning pathway per element (max pool)
  Tensor4<T> output;                  // needed for the rms adjoint
};

template <typename T>
PathwayBatch<T> cyclic_pool(const PathwayBatch<T>& x, const PoolFunction& f, bool realign,
                            std::type_identity_t<PoolContext<T>*> ctx = nullptr) {
  detail::require_sliced("pool", x.pathways, x.group);
  if (realign) detail::require_square("pool", x.tensor.dims);
  const int n = x.pathways;
  auto blocks = split_batch(x.tensor, static_cast<int64_t>(n));
  for (int p = 0; p < n; ++p) {
    if (realign) blocks[p] = apply_group(inverse(group_element(x.group, p)), blocks[p]);
    if (f.pre_relu)
      for (T& v : blocks[p].data) v = std::max(v, T(0));
  }

  const size_t m = blocks[0].data.size();
  Tensor4<T> out(blocks[0].dims);
  std::vector<uint8_t> argmax;
  switch (f.kind) {
    case PoolKind::Mean:
      for (int p = 0; p < n; ++p)
        for (size_t i = 0; i < m; ++i) out.data[i] += blocks[p].data[i];
      for (size_t i = 0; i < m; ++i) out.data[i] /= T(n);
      break;
    case PoolKind::Max:
      argmax.assign(m, 0);
      out.data = blocks[0].data;
      for (int p = 1; p < n; ++p)
        for (size_t i = 0; i < m; ++i)
          if (blocks[p].data[i] > out.data[i]) {  // ties keep the lowest pathway
            out.data[i] = blocks[p].data[i];
            argmax[i] = static_cast<uint8_t>(p);
          }
      break;
    case PoolKind::Rms:
      for (int p = 0; p < n; ++p)
        for (size_t i = 0; i < m; ++i) out.data[i] += blocks[p].data[i] * blocks[p].data[i];
      for (size_t i = 0; i < m; ++i) out.data[i] = std::sqrt(out.data[i] / T(n));
      break;
  }

  if (ctx) {
    ctx->realigned = std::move(blocks);
    ctx->argmax = std::move(argmax);
    ctx->output = out;
  }
  return PathwayBatch<T>(std::move(out), x.group, 1);
}

template <typename T>
Tensor4<T> cyclic_pool_adjoint(const Tensor4<T>& grad, const PoolFunction& f, bool realign,
                               GroupKind group, const PoolContext<T>& ctx) {
  const int n = group_order(group);
  const size_t m = grad.data.size();
  std::vector<Tensor4<T>> block_grads(static_cast<size_t>(n));
  for (int p = 0; p < n; ++p) {
    Tensor4<T> g(grad.dims);
    switch (f.kind) {
      case PoolKind::Mean:
        for (size_t i = 0; i < m; ++i) g.data[i] = grad.data[i] / T(n);
        break;
      case PoolKind::Max:
        for (size_t i = 0; i < m; ++i)
          g.data[i] = ctx.argmax[i] == p ? grad.data[i] : T(0);
        break;
      case PoolKind::Rms:
        // d rms / d y_p = y_p / (n * rms); zero subgradient where rms == 0.
        for (size_t i = 0; i < m; ++i) {
          const T r = ctx.output.data[i];
          g.data[i] = r == T(0) ? T(0) : grad.data[i] * ctx.realigned[p].data[i] / (T(n) * r);
        }
        break;
    }
    if (f.pre_relu)
      for (size_t i = 0; i < m; ++i)
        if (ctx.realigned[p].data[i] <= T(0)) g.data[i] = T(0);
    if (realign) g = apply_group(group_element(group, p), g);
    block_grads[p] = std::move(g);
  }
  return concat_batch(block_grads);
}

// ---------------------------------------------------------------------------
// Stack: realign pathway blocks and concatenate along the channel axis.
// Batch size /|G|, channels x|G|. Channel block q = g_q^{-1}(batch block q).
// ---------------------------------------------------------------------------

template <typename T>
PathwayBatch<T> cyclic_stack(const PathwayBatch<T>& x) {
  detail::require_sliced("stack", x.pathways, x.group);
  detail::require_square("stack", x.tensor.dims);
  auto blocks = split_batch(x.tensor, static_cast<int64_t>(x.pathways));
  for (int q = 0; q < x.pathways; ++q)
    blocks[q] = apply_group(inverse(group_element(x.group, q)), blocks[q]);
  return PathwayBatch<T>(concat_channel(blocks), x.group, 1);
}

template <typename T>
Tensor4<T> cyclic_stack_adjoint(const Tensor4<T>& grad, GroupKind group) {
  const int n = group_order(group);
  auto blocks = split_channel(grad, static_cast<int64_t>(n));
  for (int q = 0; q < n; ++q) blocks[q] = apply_group(group_element(group, q), blocks[q]);
  return concat_batch(blocks);
}

// ---------------------------------------------------------------------------
// Roll: apply Stack to every pathway-permuted copy of the input and stack the
// results along the batch axis. Batch unchanged, channels x|G|.
//
// Output pathway i, channel block q = g_q^{-1}(input block index(g_q * g_i)),
// i.e. roll(x)[pathway i] = stack(P_{g_i} x). With this indexing roll
// commutes bitwise with every pathway permutation P_g, which is what keeps
// sliced networks equivariant through rolled layers (cyclic and dihedral).
// ---------------------------------------------------------------------------

template <typename T>
PathwayBatch<T> cyclic_roll(const PathwayBatch<T>& x) {
  detail::require_sliced("roll", x.pathways, x.group);
  detail::require_square("roll", x.tensor.dims);
  const int n = x.pathways;
  const int64_t n0 = x.base_batch();
  const Dims4 d = x.tensor.dims;
  Tensor4<T> out(Dims4{d.n, d.c * n, d.h, d.w});
  auto blocks = split_batch(x.tensor, static_cast<int64_t>(n));

  // realigned[q][p] = g_q^{-1}(block p), computed once per (q, p) pair.
  for (int q = 0; q < n; ++q) {
    const GroupElement gq_inv = inverse(group_element(x.group, q));
    for (int i = 0; i < n; ++i) {
      const int src = element_index(compose(group_element(x.group, q), group_element(x.group, i)));
      Tensor4<T> b = apply_group(gq_inv, blocks[src]);
      // write b into batch rows [i*n0, (i+1)*n0), channel rows [q*C, (q+1)*C)
      for (int64_t r = 0; r < n0; ++r)
        std::memcpy(out.plane(i * n0 + r, q * d.c), b.plane(r, 0),
                    static_cast<size_t>(d.c * d.h * d.w) * sizeof(T));
    }
  }
  return PathwayBatch<T>(std::move(out), x.group, n);
}

// Adjoint of roll: input block p receives the sum over q of
// g_q(grad[pathway index(g_q^{-1} * g_p)][channel block q]).
template <typename T>
Tensor4<T> cyclic_roll_adjoint(const Tensor4<T>& grad, GroupKind group) {
  const int n = group_order(group);
  if (grad.dims.c % n != 0 || grad.dims.n % n != 0)
    throw ShapeError("roll adjoint: dims " + grad.dims.str() + " not divisible by group order");
  const int64_t n0 = grad.dims.n / n;
  const int64_t c = grad.dims.c / n;
  Tensor4<T> out(Dims4{grad.dims.n, c, grad.dims.h, grad.dims.w});
  const int64_t plane = c * grad.dims.h * grad.dims.w;

  for (int p = 0; p < n; ++p) {
    for (int q = 0; q < n; ++q) {
      const GroupElement gq = group_element(group, q);
      const int i = element_index(compose(inverse(gq), group_element(group, p)));
      // extract grad[pathway i][channel block q]
      Tensor4<T> g(Dims4{n0, c, grad.dims.h, grad.dims.w});
      for (int64_t r = 0; r < n0; ++r)
        std::memcpy(g.plane(r, 0), grad.plane(i * n0 + r, q * c),
                    static_cast<size_t>(plane) * sizeof(T));
      g = apply_group(gq, g);
      for (int64_t r = 0; r < n0; ++r) {
        T* dst = out.plane(p * n0 + r, 0);
        const T* src = g.plane(r, 0);
        for (int64_t e = 0; e < plane; ++e) dst[e] += src[e];
      }
    }
  }
  return out;
}

}  // namespace ccnn
