#include "wbn/geometry.hpp"

namespace wbn {

int64_t morton_index(int i, int j, int level) {
  WBN_REQUIRE(level >= 0 && level <= 16, "morton_index: level out of range");
  int side = 1 << level;
  WBN_REQUIRE(i >= 0 && i < side && j >= 0 && j < side, "morton_index: coords out of range");
  int64_t k = 0;
  for (int b = 0; b < level; b++) {
    k |= int64_t((j >> b) & 1) << (2 * b);      // column bit: low position
    k |= int64_t((i >> b) & 1) << (2 * b + 1);  // row bit: high position
  }
  return k;
}

void morton_coords(int64_t k, int level, int& i, int& j) {
  WBN_REQUIRE(level >= 0 && level <= 16, "morton_coords: level out of range");
  WBN_REQUIRE(k >= 0 && k < ipow(4, level), "morton_coords: index out of range");
  i = 0;
  j = 0;
  for (int b = 0; b < level; b++) {
    j |= int((k >> (2 * b)) & 1) << b;
    i |= int((k >> (2 * b + 1)) & 1) << b;
  }
}

template <class T>
MortonTensorT<T> morton_flatten(const Grid<T>& image, const GridSpec& spec) {
  spec.validate();
  int n = spec.side();
  WBN_REQUIRE(image.rows == n && image.cols == n, "morton_flatten: image side must be 2^L * s");
  int s = spec.leaf;
  MortonTensorT<T> t(spec.levels, s * s);
  int64_t nleaf = t.cells();
  for (int64_t k = 0; k < nleaf; k++) {
    int bi, bj;
    morton_coords(k, spec.levels, bi, bj);
    T* dst = t.cell(k);
    for (int r = 0; r < s; r++)
      for (int c = 0; c < s; c++) dst[r * s + c] = image(bi * s + r, bj * s + c);
  }
  return t;
}

template <class T>
Grid<T> morton_unflatten(const MortonTensorT<T>& t, const GridSpec& spec) {
  spec.validate();
  WBN_REQUIRE(t.level == spec.levels, "morton_unflatten: tensor level must equal L");
  WBN_REQUIRE(t.channels == spec.leaf * spec.leaf, "morton_unflatten: channels must equal s^2");
  int n = spec.side(), s = spec.leaf;
  Grid<T> image(n, n);
  int64_t nleaf = t.cells();
  for (int64_t k = 0; k < nleaf; k++) {
    int bi, bj;
    morton_coords(k, spec.levels, bi, bj);
    const T* src = t.cell(k);
    for (int r = 0; r < s; r++)
      for (int c = 0; c < s; c++) image(bi * s + r, bj * s + c) = src[r * s + c];
  }
  return image;
}

template MortonTensorT<float> morton_flatten(const Grid<float>&, const GridSpec&);
template MortonTensorT<double> morton_flatten(const Grid<double>&, const GridSpec&);
template Grid<float> morton_unflatten(const MortonTensorT<float>&, const GridSpec&);
template Grid<double> morton_unflatten(const MortonTensorT<double>&, const GridSpec&);

PermIndex perm_indices(const GridSpec& spec, int level, int block_rank) {
  spec.validate();
  WBN_REQUIRE(level >= spec.levels / 2 && level < spec.levels,
              "perm_indices: level must lie in [L/2, L)");
  WBN_REQUIRE(block_rank >= 1, "perm_indices: block rank must be positive");
  int64_t parents = ipow(4, level);
  int64_t blocks = ipow(4, spec.levels - level - 1);
  int64_t r = block_rank;
  PermIndex p;
  p.level = level;
  p.indices.resize(size_t(parents * blocks * 4 * r));
  int64_t t = 0;
  for (int64_t par = 0; par < parents; par++)
    for (int64_t b = 0; b < blocks; b++)
      for (int64_t ch = 0; ch < 4; ch++)
        for (int64_t k = 0; k < r; k++)
          p.indices[t++] = ((par * 4 + ch) * blocks + b) * r + k;
  return p;
}

PermIndex switch_indices(const GridSpec& spec, int rho) {
  spec.validate();
  WBN_REQUIRE(rho >= 1, "switch_indices: rho must be positive");
  int64_t m = ipow(2, spec.levels);  // 4^(L/2)
  PermIndex p;
  p.level = spec.levels / 2;
  p.indices.resize(size_t(m * m * rho));
  int64_t t = 0;
  for (int64_t i = 0; i < m; i++)
    for (int64_t j = 0; j < m; j++)
      for (int64_t c = 0; c < rho; c++) p.indices[t++] = (j * m + i) * rho + c;
  return p;
}

PermIndex invert_permutation(const PermIndex& p) {
  PermIndex inv;
  inv.level = p.level;
  inv.indices.assign(p.indices.size(), -1);
  for (int64_t t = 0; t < p.size(); t++) {
    int64_t src = p.indices[t];
    WBN_REQUIRE(src >= 0 && src < p.size() && inv.indices[src] == -1,
                "invert_permutation: input is not a bijection");
    inv.indices[src] = t;
  }
  return inv;
}

}  // namespace wbn
