#pragma once

#include <complex>
#include <string>
#include <vector>

#include "wbn/geometry.hpp"
#include "wbn/tensornet.hpp"

namespace wbn {

// Architecture hyper-parameters. The channel schedule is
//   c_l = 4^(L-l) * rank * nu_l * 2,   nu_l = sum_{i>=l} band_sizes[i],
// so every trunk stage carries one rank-r slot per (cell, complementary
// block) pair with real and imaginary parts as separate channels.
struct WideBNetConfig {
  GridSpec grid;
  int rank = 3;
  std::vector<int> band_sizes;  // n_omega per level, index l - L/2, size L/2+1
  int n_cnn = 3;
  int n_rnn = 3;
  int cnn_kernel = 5;
  int cnn_hidden = 16;
  bool strict_butterfly = false;
  bool use_switch = true;  // false swaps the switch permutation for identity

  void validate() const;
  int levels() const { return grid.levels; }
  int half() const { return grid.levels / 2; }
  int band_count() const { return int(band_sizes.size()); }
  int n_omega(int level) const { return band_sizes.at(size_t(level - half())); }
  int nu(int level) const {
    int acc = 0;
    for (int l = level; l <= levels(); l++) acc += n_omega(l);
    return acc;
  }
  int channels(int level) const {
    return int(ipow(4, levels() - level)) * rank * nu(level) * 2;
  }
  int rho() const { return 2 * rank * nu(half()); }
  // Per-cell channel count of the Morton-flattened input handed to V at
  // level l: n_omega complex planes split into re/im, s^2 pixels each.
  int leaf_channels(int level) const { return 2 * n_omega(level) * grid.leaf * grid.leaf; }
};

// All trainable arrays, addressable per (layer kind, level).
template <class T>
struct WideBNetParams {
  WideBNetConfig cfg;
  std::vector<PatchAffine<T>> v;       // index l - L/2, levels L/2..L
  std::vector<PatchAffine<T>> h;       // index t = L-1-l, applied l = L-1 .. L/2
  PatchAffine<T> switch_mix;           // channel-preserving, at level L/2
  std::vector<PatchAffine<T>> resnet;  // n_rnn units at level L/2
  std::vector<PatchAffine<T>> g;       // index l - L/2, applied l = L/2 .. L-1
  PatchAffine<T> u;                    // per-leaf map to s^2 pixels
  std::vector<ConvParams<T>> cnn;

  struct View {
    T* data;
    int64_t n;
    std::string name;
  };
  std::vector<View> views();
  int64_t count() const;
  void set_zero();
};

WideBNetConfig make_config(const GridSpec& grid, const std::vector<int>& band_sizes, int rank);

template <class T>
WideBNetParams<T> init_params(const WideBNetConfig& cfg, Rng& rng);

// Exact scalar count, computed from shapes alone.
int64_t param_count(const WideBNetConfig& cfg);

// Banded input for a batch: leaf[idx] is the level-L Morton flattening of
// the band-(L/2+idx) data with channels [freq][re|im][leaf pixel].
template <class T>
struct BandedBatch {
  std::vector<TrunkBatch<T>> leaf;
};

// Builds the banded batch from per-sample complex data matrices.
// bands[idx] points at n*n*n_omega complex values (src-major, then rcv,
// then frequency) for each sample.
template <class T>
BandedBatch<T> format_banded_batch(const WideBNetConfig& cfg,
                                   const std::vector<std::vector<const std::complex<float>*>>& bands);

// Forward-pass cache; holds every array the backward pass needs.
template <class T>
struct Tape {
  BandedBatch<T> input;
  std::vector<TrunkBatch<T>> v_out;       // per band
  std::vector<TrunkBatch<T>> h_in;        // concatenated (+permuted) inputs per H layer
  TrunkBatch<T> switch_in;                // trunk after permutation, before mix
  TrunkBatch<T> switch_out;
  std::vector<TrunkBatch<T>> resnet_in;   // input of each unit
  std::vector<TrunkBatch<T>> resnet_z;    // pre-activation of each unit
  std::vector<TrunkBatch<T>> g_in;        // input of each G affine (post-perm view)
  TrunkBatch<T> u_in;
  std::vector<ImageBatch<T>> cnn_in;      // input of each conv layer
  std::vector<ImageBatch<T>> cnn_pre;     // pre-activation outputs
};

template <class T>
ImageBatch<T> widebnet_forward(const WideBNetParams<T>& params, const BandedBatch<T>& data,
                               Tape<T>* tape);

// Accumulates parameter gradients into *grad (which must be zeroed by the
// caller when starting a batch). d_input is optional.
template <class T>
void widebnet_backward(const WideBNetParams<T>& params, const Tape<T>& tape,
                       const ImageBatch<T>& d_out, WideBNetParams<T>* grad,
                       BandedBatch<T>* d_input);

}  // namespace wbn
