#pragma once

#include <string>
#include <vector>

#include "wbn/common.hpp"

namespace wbn {

// Independent affine map per patch: no weight sharing across groups.
template <class T>
struct PatchAffine {
  int groups = 0;
  int in_dim = 0;   // k * c_in flattened per patch
  int out_dim = 0;  // c_out per patch
  std::vector<T> w;  // [groups][out_dim][in_dim], row-major per group
  std::vector<T> b;  // [groups][out_dim]

  PatchAffine() = default;
  PatchAffine(int g, int in, int out)
      : groups(g), in_dim(in), out_dim(out),
        w(size_t(g) * out * in, T(0)), b(size_t(g) * out, T(0)) {}

  T* wg(int g) { return w.data() + size_t(g) * out_dim * in_dim; }
  const T* wg(int g) const { return w.data() + size_t(g) * out_dim * in_dim; }
  T* bg(int g) { return b.data() + size_t(g) * out_dim; }
  const T* bg(int g) const { return b.data() + size_t(g) * out_dim; }
  int64_t count() const { return int64_t(groups) * (int64_t(out_dim) * in_dim + out_dim); }
  void set_zero() {
    std::fill(w.begin(), w.end(), T(0));
    std::fill(b.begin(), b.end(), T(0));
  }
};

// Same-padded cross-correlation kernel.
template <class T>
struct ConvParams {
  int kh = 0, kw = 0, c_in = 0, c_out = 0;
  std::vector<T> w;  // [kh][kw][c_in][c_out]
  std::vector<T> b;  // [c_out]

  ConvParams() = default;
  ConvParams(int kh_, int kw_, int cin, int cout)
      : kh(kh_), kw(kw_), c_in(cin), c_out(cout),
        w(size_t(kh_) * kw_ * cin * cout, T(0)), b(size_t(cout), T(0)) {}
  int64_t count() const { return int64_t(kh) * kw * c_in * c_out + c_out; }
  void set_zero() {
    std::fill(w.begin(), w.end(), T(0));
    std::fill(b.begin(), b.end(), T(0));
  }
};

// Batch of Morton-axis tensors: data[b][cell][channel], contiguous.
template <class T>
struct TrunkBatch {
  int batch = 0;
  int64_t cells = 0;
  int channels = 0;
  std::vector<T> data;

  TrunkBatch() = default;
  TrunkBatch(int nb, int64_t nc, int ch)
      : batch(nb), cells(nc), channels(ch), data(size_t(nb) * nc * ch, T(0)) {}
  int64_t sample_stride() const { return cells * channels; }
  T* at(int b) { return data.data() + size_t(b) * sample_stride(); }
  const T* at(int b) const { return data.data() + size_t(b) * sample_stride(); }
};

// Batch of images: data[b][row][col][channel].
template <class T>
struct ImageBatch {
  int batch = 0, h = 0, w = 0, channels = 0;
  std::vector<T> data;

  ImageBatch() = default;
  ImageBatch(int nb, int hh, int ww, int ch)
      : batch(nb), h(hh), w(ww), channels(ch), data(size_t(nb) * hh * ww * ch, T(0)) {}
  int64_t sample_stride() const { return int64_t(h) * w * channels; }
  T* at(int b) { return data.data() + size_t(b) * sample_stride(); }
  const T* at(int b) const { return data.data() + size_t(b) * sample_stride(); }
};

// Partitions the Morton axis into contiguous patches of `kernel` cells and
// applies each patch's own affine map. Output has cells/kernel cells with
// out_dim channels. Requires in_dim == kernel * x.channels.
template <class T>
void patch_affine_forward(const PatchAffine<T>& p, int kernel,
                          const TrunkBatch<T>& x, TrunkBatch<T>& y);

// Exact reverse-mode gradients. dx may be null; grad accumulates (+=).
template <class T>
void patch_affine_backward(const PatchAffine<T>& p, int kernel,
                           const TrunkBatch<T>& x, const TrunkBatch<T>& dy,
                           TrunkBatch<T>* dx, PatchAffine<T>* grad);

template <class T>
void conv2d_forward(const ConvParams<T>& p, const ImageBatch<T>& x, ImageBatch<T>& y);

template <class T>
void conv2d_backward(const ConvParams<T>& p, const ImageBatch<T>& x,
                     const ImageBatch<T>& dy, ImageBatch<T>* dx, ConvParams<T>* grad);

// y = x + relu(Wx + b) with a channel-preserving per-cell map (kernel 1).
// z_cache receives the pre-activation, needed for the backward pass.
template <class T>
void resnet_forward(const PatchAffine<T>& p, const TrunkBatch<T>& x,
                    TrunkBatch<T>& z_cache, TrunkBatch<T>& y);

template <class T>
void resnet_backward(const PatchAffine<T>& p, const TrunkBatch<T>& x,
                     const TrunkBatch<T>& z_cache, const TrunkBatch<T>& dy,
                     TrunkBatch<T>* dx, PatchAffine<T>* grad);

template <class T>
void relu_forward(const std::vector<T>& x, std::vector<T>& y);

// Uniform on +-sqrt(6 / (fan_in + fan_out)).
template <class T>
void glorot_init(std::vector<T>& a, int64_t fan_in, int64_t fan_out, Rng& rng);

double glorot_limit(int64_t fan_in, int64_t fan_out);

// Straightforward single-threaded kernels kept as the correctness reference
// for the OpenMP versions above.
namespace ref {

template <class T>
void patch_affine_forward(const PatchAffine<T>& p, int kernel,
                          const TrunkBatch<T>& x, TrunkBatch<T>& y);

template <class T>
void patch_affine_backward(const PatchAffine<T>& p, int kernel,
                           const TrunkBatch<T>& x, const TrunkBatch<T>& dy,
                           TrunkBatch<T>* dx, PatchAffine<T>* grad);

template <class T>
void conv2d_forward(const ConvParams<T>& p, const ImageBatch<T>& x, ImageBatch<T>& y);

template <class T>
void conv2d_backward(const ConvParams<T>& p, const ImageBatch<T>& x,
                     const ImageBatch<T>& dy, ImageBatch<T>* dx, ConvParams<T>* grad);

}  // namespace ref

}  // namespace wbn
