#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wbn/common.hpp"

namespace wbn {

// Complete quad-tree bookkeeping. The grid side is n = 2^L * s; level l cells
// are the 4^l Morton-ordered blocks of side 2^(L-l)*s pixels.
struct GridSpec {
  int levels = 4;  // L, even and >= 2
  int leaf = 5;    // s

  int side() const { return int(ipow(2, levels)) * leaf; }
  int64_t cells(int level) const { return ipow(4, level); }
  void validate() const {
    WBN_REQUIRE(levels >= 2 && levels % 2 == 0, "GridSpec: levels must be even and >= 2");
    WBN_REQUIRE(leaf >= 1, "GridSpec: leaf size must be positive");
  }
};

// Morton-flattened multi-channel field at one quad-tree level:
// data[k * channels + j] is channel j of Morton cell k.
template <class T>
struct MortonTensorT {
  int level = 0;
  int channels = 0;
  std::vector<T> data;

  MortonTensorT() = default;
  MortonTensorT(int lvl, int ch)
      : level(lvl), channels(ch), data(size_t(ipow(4, lvl)) * ch, T{}) {}
  int64_t cells() const { return ipow(4, level); }
  T* cell(int64_t k) { return data.data() + k * channels; }
  const T* cell(int64_t k) const { return data.data() + k * channels; }
};

using MortonTensor = MortonTensorT<float>;
using MortonTensorD = MortonTensorT<double>;

struct PermIndex {
  int level = 0;
  std::vector<int64_t> indices;  // out[t] = in[indices[t]]

  int64_t size() const { return int64_t(indices.size()); }
};

// Bit-interleaved Z-order index of cell (row i, col j) at the given level.
// The column bit sits in the less-significant position of each pair, so the
// children of any parent appear in the order (0,0),(0,1),(1,0),(1,1).
int64_t morton_index(int i, int j, int level);

// Inverse of morton_index; round-trips exactly.
void morton_coords(int64_t k, int level, int& i, int& j);

// n x n image -> level-L tensor with s^2 channels. Channel j of cell k is
// pixel j (row-major within the leaf block) of the leaf at Morton position k.
template <class T>
MortonTensorT<T> morton_flatten(const Grid<T>& image, const GridSpec& spec);

template <class T>
Grid<T> morton_unflatten(const MortonTensorT<T>& t, const GridSpec& spec);

// Permutation on 4^L * block_rank entries that groups, for every parent cell
// at level `level`, the four Morton siblings' rank blocks contiguously per
// complementary channel block. This is the reordering under which a strict
// butterfly transfer becomes block diagonal.
//
// Input layout:  [4^(level+1) cells][4^(L-level-1) blocks][block_rank]
// Output layout: [4^level parents][4^(L-level-1) blocks][4 children][block_rank]
PermIndex perm_indices(const GridSpec& spec, int level, int block_rank);

// Patch/block transposition at the middle level: with the input viewed as
// [4^(L/2) patches][4^(L/2) blocks][rho], out[p][q][c] = in[q][p][c].
// Applying it twice is the identity.
PermIndex switch_indices(const GridSpec& spec, int rho);

PermIndex invert_permutation(const PermIndex& p);

template <class T>
std::vector<T> apply_permutation(std::span<const T> x, const PermIndex& p) {
  WBN_REQUIRE(int64_t(x.size()) == p.size(), "apply_permutation: length mismatch");
  std::vector<T> out(x.size());
  for (int64_t t = 0; t < p.size(); t++) out[t] = x[p.indices[t]];
  return out;
}

template <class T>
std::vector<T> apply_permutation(const std::vector<T>& x, const PermIndex& p) {
  return apply_permutation(std::span<const T>(x.data(), x.size()), p);
}

}  // namespace wbn
