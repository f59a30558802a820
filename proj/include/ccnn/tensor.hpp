#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>
#include <vector>

#include "ccnn/common.hpp"

namespace ccnn {

struct Dims4 {
  int64_t n = 0, c = 0, h = 0, w = 0;

  int64_t numel() const { return n * c * h * w; }
  bool operator==(const Dims4& o) const = default;

  std::string str() const {
    std::ostringstream os;
    os << "(" << n << "," << c << "," << h << "," << w << ")";
    return os.str();
  }
};

// Dense 4-D tensor, row-major (N, C, H, W). Immutable by convention once an
// operation has produced it; all framework ops return fresh tensors.
template <typename T>
struct Tensor4 {
  Dims4 dims;
  std::vector<T> data;

  Tensor4() = default;
  explicit Tensor4(Dims4 d) : dims(d), data(static_cast<size_t>(d.numel()), T(0)) {}
  Tensor4(int64_t n, int64_t c, int64_t h, int64_t w) : Tensor4(Dims4{n, c, h, w}) {}
  Tensor4(Dims4 d, std::vector<T> buf) : dims(d), data(std::move(buf)) {
    if (static_cast<int64_t>(data.size()) != dims.numel())
      throw ShapeError("tensor buffer length " + std::to_string(data.size()) +
                       " does not match dims " + dims.str());
  }

  int64_t numel() const { return dims.numel(); }

  int64_t offset(int64_t n, int64_t c, int64_t i, int64_t j) const {
    return ((n * dims.c + c) * dims.h + i) * dims.w + j;
  }

  T& at(int64_t n, int64_t c, int64_t i, int64_t j) { return data[offset(n, c, i, j)]; }
  T at(int64_t n, int64_t c, int64_t i, int64_t j) const { return data[offset(n, c, i, j)]; }

  // Pointer to the start of one (n, c) spatial plane.
  T* plane(int64_t n, int64_t c) { return data.data() + offset(n, c, 0, 0); }
  const T* plane(int64_t n, int64_t c) const { return data.data() + offset(n, c, 0, 0); }

  bool same_shape(const Tensor4& o) const { return dims == o.dims; }
};

// Clockwise 90-degree rotation of the spatial axes, applied k times (k mod 4).
// (r x)[n,c,i,j] = x[n,c,H-1-j,i]; odd k swaps H and W.
template <typename T>
Tensor4<T> rotate90(const Tensor4<T>& x, int k) {
  k = ((k % 4) + 4) % 4;
  if (k == 0) return x;
  const int64_t N = x.dims.n, C = x.dims.c, H = x.dims.h, W = x.dims.w;
  Tensor4<T> out(k % 2 == 1 ? Dims4{N, C, W, H} : Dims4{N, C, H, W});
  const int64_t OH = out.dims.h, OW = out.dims.w;
#pragma omp parallel for collapse(2)
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const T* src = x.plane(n, c);
      T* dst = out.plane(n, c);
      switch (k) {
        case 1:
          for (int64_t i = 0; i < OH; ++i)
            for (int64_t j = 0; j < OW; ++j) dst[i * OW + j] = src[(H - 1 - j) * W + i];
          break;
        case 2:
          for (int64_t i = 0; i < OH; ++i)
            for (int64_t j = 0; j < OW; ++j) dst[i * OW + j] = src[(H - 1 - i) * W + (W - 1 - j)];
          break;
        default:  // k == 3
          for (int64_t i = 0; i < OH; ++i)
            for (int64_t j = 0; j < OW; ++j) dst[i * OW + j] = src[j * W + (W - 1 - i)];
          break;
      }
    }
  }
  return out;
}

// Horizontal flip: (f x)[n,c,i,j] = x[n,c,i,W-1-j].
template <typename T>
Tensor4<T> fliph(const Tensor4<T>& x) {
  const int64_t N = x.dims.n, C = x.dims.c, H = x.dims.h, W = x.dims.w;
  Tensor4<T> out(x.dims);
#pragma omp parallel for collapse(2)
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const T* src = x.plane(n, c);
      T* dst = out.plane(n, c);
      for (int64_t i = 0; i < H; ++i)
        for (int64_t j = 0; j < W; ++j) dst[i * W + j] = src[i * W + (W - 1 - j)];
    }
  }
  return out;
}

template <typename T>
Tensor4<T> concat_batch(const std::vector<Tensor4<T>>& xs) {
  if (xs.empty()) throw ShapeError("concat_batch: empty input list");
  Dims4 d = xs[0].dims;
  int64_t total = 0;
  for (const auto& x : xs) {
    if (x.dims.c != d.c || x.dims.h != d.h || x.dims.w != d.w)
      throw ShapeError("concat_batch: mismatched dims " + x.dims.str() + " vs " + d.str());
    total += x.dims.n;
  }
  Tensor4<T> out(Dims4{total, d.c, d.h, d.w});
  T* dst = out.data.data();
  for (const auto& x : xs) {
    std::memcpy(dst, x.data.data(), x.data.size() * sizeof(T));
    dst += x.data.size();
  }
  return out;
}

template <typename T>
Tensor4<T> concat_channel(const std::vector<Tensor4<T>>& xs) {
  if (xs.empty()) throw ShapeError("concat_channel: empty input list");
  Dims4 d = xs[0].dims;
  int64_t total_c = 0;
  for (const auto& x : xs) {
    if (x.dims.n != d.n || x.dims.h != d.h || x.dims.w != d.w)
      throw ShapeError("concat_channel: mismatched dims " + x.dims.str() + " vs " + d.str());
    total_c += x.dims.c;
  }
  Tensor4<T> out(Dims4{d.n, total_c, d.h, d.w});
  const int64_t plane = d.h * d.w;
  for (int64_t n = 0; n < d.n; ++n) {
    T* dst = out.plane(n, 0);
    for (const auto& x : xs) {
      std::memcpy(dst, x.plane(n, 0), static_cast<size_t>(x.dims.c * plane) * sizeof(T));
      dst += x.dims.c * plane;
    }
  }
  return out;
}

template <typename T>
std::vector<Tensor4<T>> split_batch(const Tensor4<T>& x, const std::vector<int64_t>& sizes) {
  int64_t total = 0;
  for (int64_t s : sizes) total += s;
  if (total != x.dims.n)
    throw ShapeError("split_batch: block sizes sum to " + std::to_string(total) +
                     ", batch is " + std::to_string(x.dims.n));
  std::vector<Tensor4<T>> out;
  out.reserve(sizes.size());
  const T* src = x.data.data();
  for (int64_t s : sizes) {
    Tensor4<T> b(Dims4{s, x.dims.c, x.dims.h, x.dims.w});
    std::memcpy(b.data.data(), src, b.data.size() * sizeof(T));
    src += b.data.size();
    out.push_back(std::move(b));
  }
  return out;
}

// Split into `parts` equal batch blocks.
template <typename T>
std::vector<Tensor4<T>> split_batch(const Tensor4<T>& x, int64_t parts) {
  if (parts <= 0 || x.dims.n % parts != 0)
    throw ShapeError("split_batch: batch " + std::to_string(x.dims.n) +
                     " not divisible into " + std::to_string(parts) + " blocks");
  return split_batch(x, std::vector<int64_t>(static_cast<size_t>(parts), x.dims.n / parts));
}

template <typename T>
std::vector<Tensor4<T>> split_channel(const Tensor4<T>& x, const std::vector<int64_t>& sizes) {
  int64_t total = 0;
  for (int64_t s : sizes) total += s;
  if (total != x.dims.c)
    throw ShapeError("split_channel: block sizes sum to " + std::to_string(total) +
                     ", channels are " + std::to_string(x.dims.c));
  std::vector<Tensor4<T>> out;
  out.reserve(sizes.size());
  const int64_t plane = x.dims.h * x.dims.w;
  int64_t c0 = 0;
  for (int64_t s : sizes) {
    Tensor4<T> b(Dims4{x.dims.n, s, x.dims.h, x.dims.w});
    for (int64_t n = 0; n < x.dims.n; ++n)
      std::memcpy(b.plane(n, 0), x.plane(n, c0), static_cast<size_t>(s * plane) * sizeof(T));
    c0 += s;
    out.push_back(std::move(b));
  }
  return out;
}

template <typename T>
std::vector<Tensor4<T>> split_channel(const Tensor4<T>& x, int64_t parts) {
  if (parts <= 0 || x.dims.c % parts != 0)
    throw ShapeError("split_channel: channels " + std::to_string(x.dims.c) +
                     " not divisible into " + std::to_string(parts) + " blocks");
  return split_channel(x, std::vector<int64_t>(static_cast<size_t>(parts), x.dims.c / parts));
}

template <typename T>
bool all_finite(const Tensor4<T>& x) {
  for (T v : x.data)
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

}  // namespace ccnn
