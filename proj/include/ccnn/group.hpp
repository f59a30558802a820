#pragma once

#include <string>
#include <vector>

#include "ccnn/common.hpp"
#include "ccnn/tensor.hpp"

namespace ccnn {

enum class GroupKind { C4, D4 };

inline int group_order(GroupKind k) { return k == GroupKind::C4 ? 4 : 8; }

inline const char* group_name(GroupKind k) { return k == GroupKind::C4 ? "c4" : "d4"; }

// An element r^rot f^flip of C4 (flip forced 0) or D4. Acting on a tensor
// means flip first, then rotate.
struct GroupElement {
  GroupKind kind = GroupKind::C4;
  int flip = 0;  // 0 or 1
  int rot = 0;   // 0..3

  bool operator==(const GroupElement& o) const = default;

  bool is_identity() const { return flip == 0 && rot == 0; }

  std::string str() const {
    std::string s = flip ? "f" : "";
    return "r" + std::to_string(rot) + s;
  }
};

inline GroupElement group_identity(GroupKind k) { return GroupElement{k, 0, 0}; }

// Enumeration order: C4 is r^0..r^3; D4 is flip-major, rotations within.
inline GroupElement group_element(GroupKind k, int index) {
  if (index < 0 || index >= group_order(k))
    throw ConfigError("group element index " + std::to_string(index) + " out of range");
  return GroupElement{k, index / 4, index % 4};
}

inline int element_index(const GroupElement& g) { return g.flip * 4 + g.rot; }

// Group product a*b, where (a*b)(x) = a(b(x)). With the flip-then-rotate
// action, r^k f = f r^{-k}, which gives the non-commutative law below.
inline GroupElement compose(const GroupElement& a, const GroupElement& b) {
  if (a.kind != b.kind) throw ConfigError("compose: mixed group kinds");
  const int sign = a.flip ? -1 : 1;
  int rot = ((a.rot + sign * b.rot) % 4 + 4) % 4;
  return GroupElement{a.kind, a.flip ^ b.flip, rot};
}

inline GroupElement inverse(const GroupElement& g) {
  // Flipped elements are involutions; pure rotations invert by negating rot.
  int rot = g.flip ? g.rot : (4 - g.rot) % 4;
  return GroupElement{g.kind, g.flip, rot};
}

// g(x) = r^rot(f^flip(x)). Odd rotations require square spatial dims.
template <typename T>
Tensor4<T> apply_group(const GroupElement& g, const Tensor4<T>& x) {
  if (g.rot % 2 == 1 && x.dims.h != x.dims.w)
    throw ShapeError("group action with odd rotation needs square spatial dims, got " +
                     x.dims.str());
  Tensor4<T> y = g.flip ? fliph(x) : x;
  return rotate90(y, g.rot);
}

// Permutation of pathway slots: out[p] = in[perm[p]].
struct PathwayPermutation {
  std::vector<int> perm;

  int size() const { return static_cast<int>(perm.size()); }
  bool is_identity() const {
    for (int p = 0; p < size(); ++p)
      if (perm[p] != p) return false;
    return true;
  }
};

// The block permutation induced on a sliced batch when the underlying input
// is transformed by g: slot p of Slice(g x) holds (g_p * g)(x), so it reads
// from slot index(g_p * g) of Slice(x). For C4 and g = r this is the backward
// shift [1,2,3,0].
inline PathwayPermutation slice_permutation(const GroupElement& g) {
  const int n = group_order(g.kind);
  PathwayPermutation p;
  p.perm.resize(n);
  for (int i = 0; i < n; ++i) p.perm[i] = element_index(compose(group_element(g.kind, i), g));
  return p;
}

// table[i][j] = index of g_i * g_j.
inline std::vector<std::vector<int>> cayley_table(GroupKind kind) {
  const int n = group_order(kind);
  std::vector<std::vector<int>> t(n, std::vector<int>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      t[i][j] = element_index(compose(group_element(kind, i), group_element(kind, j)));
  return t;
}

inline GroupKind parse_group_kind(const std::string& s) {
  if (s == "c4" || s == "C4") return GroupKind::C4;
  if (s == "d4" || s == "D4") return GroupKind::D4;
  throw ConfigError("unknown group kind '" + s + "' (expected c4 or d4)");
}

}  // namespace ccnn
