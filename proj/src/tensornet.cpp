#include "wbn/tensornet.hpp"

#include <Eigen/Dense>

namespace wbn {

namespace {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatCM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using StridedMap =
    Eigen::Map<MatCM<T>, Eigen::Unaligned, Eigen::OuterStride<Eigen::Dynamic>>;
template <class T>
using ConstStridedMap = Eigen::Map<const MatCM<T>, Eigen::Unaligned,
                                   Eigen::OuterStride<Eigen::Dynamic>>;

template <class T>
void check_patch_shapes(const PatchAffine<T>& p, int kernel, const TrunkBatch<T>& x,
                        const TrunkBatch<T>& y) {
  WBN_REQUIRE(kernel >= 1 && x.cells % kernel == 0,
              "patch_affine: cell count not divisible by kernel");
  WBN_REQUIRE(x.cells / kernel == p.groups, "patch_affine: group count mismatch");
  WBN_REQUIRE(p.in_dim == kernel * x.channels, "patch_affine: in_dim mismatch");
  WBN_REQUIRE(y.batch == x.batch && y.cells == p.groups && y.channels == p.out_dim,
              "patch_affine: output shape mismatch");
}

}  // namespace

template <class T>
void patch_affine_forward(const PatchAffine<T>& p, int kernel,
                          const TrunkBatch<T>& x, TrunkBatch<T>& y) {
  check_patch_shapes(p, kernel, x, y);
  const int nb = x.batch;
  const int64_t xs = x.sample_stride(), ys = y.sample_stride();
  // One GEMM per group across the whole batch; group inputs are contiguous
  // because the Morton axis is cell-major.
#pragma omp parallel for schedule(static)
  for (int g = 0; g < p.groups; g++) {
    Eigen::Map<const MatCM<T>> W(p.wg(g), p.in_dim, p.out_dim);  // col-major view of W^T
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(p.bg(g), p.out_dim);
    ConstStridedMap<T> X(x.at(0) + int64_t(g) * p.in_dim, p.in_dim, nb,
                         Eigen::OuterStride<>(xs));
    StridedMap<T> Y(const_cast<T*>(y.at(0)) + int64_t(g) * p.out_dim, p.out_dim, nb,
                    Eigen::OuterStride<>(ys));
    Y.noalias() = W.transpose() * X;
    Y.colwise() += bias;
  }
}

template <class T>
void patch_affine_backward(const PatchAffine<T>& p, int kernel,
                           const TrunkBatch<T>& x, const TrunkBatch<T>& dy,
                           TrunkBatch<T>* dx, PatchAffine<T>* grad) {
  check_patch_shapes(p, kernel, x, dy);
  const int nb = x.batch;
  const int64_t xs = x.sample_stride(), ys = dy.sample_stride();
  if (dx) {
    WBN_REQUIRE(dx->batch == nb && dx->cells == x.cells && dx->channels == x.channels,
                "patch_affine_backward: dx shape mismatch");
  }
  if (grad) {
    WBN_REQUIRE(grad->groups == p.groups && grad->in_dim == p.in_dim &&
                    grad->out_dim == p.out_dim,
                "patch_affine_backward: grad shape mismatch");
  }
#pragma omp parallel for schedule(static)
  for (int g = 0; g < p.groups; g++) {
    Eigen::Map<const MatCM<T>> W(p.wg(g), p.in_dim, p.out_dim);
    ConstStridedMap<T> X(x.at(0) + int64_t(g) * p.in_dim, p.in_dim, nb,
                         Eigen::OuterStride<>(xs));
    ConstStridedMap<T> dY(dy.at(0) + int64_t(g) * p.out_dim, p.out_dim, nb,
                          Eigen::OuterStride<>(ys));
    if (dx) {
      StridedMap<T> dX(dx->at(0) + int64_t(g) * p.in_dim, p.in_dim, nb,
                       Eigen::OuterStride<>(xs));
      dX.noalias() = W * dY;
    }
    if (grad) {
      // Each group's weight gradient is owned by exactly one thread, so the
      // accumulation order is fixed no matter the schedule.
      Eigen::Map<MatCM<T>> dW(grad->wg(g), p.in_dim, p.out_dim);
      dW.noalias() += X * dY.transpose();
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(grad->bg(g), p.out_dim);
      db.noalias() += dY.rowwise().sum();
    }
  }
}

namespace {

// Gather the same-padded receptive field of every pixel: out is
// (h*w) x (kh*kw*c) row-major.
template <class T>
void im2col(const T* img, int h, int w, int c, int kh, int kw, T* col) {
  const int ph = kh / 2, pw = kw / 2;
  for (int i = 0; i < h; i++)
    for (int j = 0; j < w; j++) {
      T* row = col + (int64_t(i) * w + j) * kh * kw * c;
      for (int di = 0; di < kh; di++) {
        const int si = i + di - ph;
        for (int dj = 0; dj < kw; dj++) {
          const int sj = j + dj - pw;
          T* dst = row + (int64_t(di) * kw + dj) * c;
          if (si < 0 || si >= h || sj < 0 || sj >= w)
            std::fill(dst, dst + c, T(0));
          else
            std::copy(img + (int64_t(si) * w + sj) * c, img + (int64_t(si) * w + sj) * c + c, dst);
        }
      }
    }
}

template <class T>
void col2im_add(const T* col, int h, int w, int c, int kh, int kw, T* img) {
  const int ph = kh / 2, pw = kw / 2;
  for (int i = 0; i < h; i++)
    for (int j = 0; j < w; j++) {
      const T* row = col + (int64_t(i) * w + j) * kh * kw * c;
      for (int di = 0; di < kh; di++) {
        const int si = i + di - ph;
        if (si < 0 || si >= h) continue;
        for (int dj = 0; dj < kw; dj++) {
          const int sj = j + dj - pw;
          if (sj < 0 || sj >= w) continue;
          const T* src = row + (int64_t(di) * kw + dj) * c;
          T* dst = img + (int64_t(si) * w + sj) * c;
          for (int q = 0; q < c; q++) dst[q] += src[q];
        }
      }
    }
}

template <class T>
void check_conv_shapes(const ConvParams<T>& p, const ImageBatch<T>& x,
                       const ImageBatch<T>& y) {
  WBN_REQUIRE(p.kh % 2 == 1 && p.kw % 2 == 1, "conv2d: kernel must be odd for same padding");
  WBN_REQUIRE(x.channels == p.c_in, "conv2d: input channel mismatch");
  WBN_REQUIRE(y.batch == x.batch && y.h == x.h && y.w == x.w && y.channels == p.c_out,
              "conv2d: output shape mismatch");
}

}  // namespace

template <class T>
void conv2d_forward(const ConvParams<T>& p, const ImageBatch<T>& x, ImageBatch<T>& y) {
  check_conv_shapes(p, x, y);
  const int64_t pix = int64_t(x.h) * x.w, kdim = int64_t(p.kh) * p.kw * p.c_in;
  Eigen::Map<const Mat<T>> W(p.w.data(), kdim, p.c_out);  // [kdim][c_out] row-major
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(p.b.data(), p.c_out);
#pragma omp parallel
  {
    std::vector<T> col(size_t(pix) * kdim);
#pragma omp for schedule(static)
    for (int bidx = 0; bidx < x.batch; bidx++) {
      im2col(x.at(bidx), x.h, x.w, x.channels, p.kh, p.kw, col.data());
      Eigen::Map<const Mat<T>> C(col.data(), pix, kdim);
      Eigen::Map<Mat<T>> Y(y.at(bidx), pix, p.c_out);
      Y.noalias() = C * W;
      Y.rowwise() += bias.transpose();
    }
  }
}

template <class T>
void conv2d_backward(const ConvParams<T>& p, const ImageBatch<T>& x,
                     const ImageBatch<T>& dy, ImageBatch<T>* dx, ConvParams<T>* grad) {
  check_conv_shapes(p, x, dy);
  const int nb = x.batch;
  const int64_t pix = int64_t(x.h) * x.w, kdim = int64_t(p.kh) * p.kw * p.c_in;
  // Per-sample weight gradients land in their own slots and are reduced in
  // sample order afterwards, keeping results independent of thread count.
  std::vector<std::vector<T>> dw_parts, db_parts;
  if (grad) {
    dw_parts.assign(size_t(nb), std::vector<T>(p.w.size(), T(0)));
    db_parts.assign(size_t(nb), std::vector<T>(p.b.size(), T(0)));
  }
#pragma omp parallel
  {
    std::vector<T> col(size_t(pix) * kdim), dcol(size_t(pix) * kdim);
#pragma omp for schedule(static)
    for (int bidx = 0; bidx < nb; bidx++) {
      Eigen::Map<const Mat<T>> dY(dy.at(bidx), pix, p.c_out);
      if (grad) {
        im2col(x.at(bidx), x.h, x.w, x.channels, p.kh, p.kw, col.data());
        Eigen::Map<const Mat<T>> C(col.data(), pix, kdim);
        Eigen::Map<Mat<T>> dW(dw_parts[size_t(bidx)].data(), kdim, p.c_out);
        dW.noalias() = C.transpose() * dY;
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(db_parts[size_t(bidx)].data(),
                                                           p.c_out);
        db.noalias() = dY.colwise().sum().transpose();
      }
      if (dx) {
        Eigen::Map<Mat<T>> dC(dcol.data(), pix, kdim);
        dC.noalias() = dY * Eigen::Map<const Mat<T>>(p.w.data(), kdim, p.c_out).transpose();
        T* dst = dx->at(bidx);
        std::fill(dst, dst + dx->sample_stride(), T(0));
        col2im_add(dcol.data(), x.h, x.w, x.channels, p.kh, p.kw, dst);
      }
    }
  }
  if (grad) {
    for (int bidx = 0; bidx < nb; bidx++) {
      for (size_t q = 0; q < p.w.size(); q++) grad->w[q] += dw_parts[size_t(bidx)][q];
      for (size_t q = 0; q < p.b.size(); q++) grad->b[q] += db_parts[size_t(bidx)][q];
    }
  }
}

template <class T>
void resnet_forward(const PatchAffine<T>& p, const TrunkBatch<T>& x,
                    TrunkBatch<T>& z_cache, TrunkBatch<T>& y) {
  WBN_REQUIRE(p.in_dim == p.out_dim && p.in_dim == x.channels,
              "resnet_forward: unit must preserve channels");
  patch_affine_forward(p, 1, x, z_cache);
  WBN_REQUIRE(y.data.size() == x.data.size(), "resnet_forward: output shape mismatch");
#pragma omp parallel for schedule(static)
  for (int64_t q = 0; q < int64_t(x.data.size()); q++)
    y.data[size_t(q)] = x.data[size_t(q)] + std::max(z_cache.data[size_t(q)], T(0));
}

template <class T>
void resnet_backward(const PatchAffine<T>& p, const TrunkBatch<T>& x,
                     const TrunkBatch<T>& z_cache, const TrunkBatch<T>& dy,
                     TrunkBatch<T>* dx, PatchAffine<T>* grad) {
  TrunkBatch<T> dz(dy.batch, dy.cells, dy.channels);
#pragma omp parallel for schedule(static)
  for (int64_t q = 0; q < int64_t(dy.data.size()); q++)
    dz.data[size_t(q)] = z_cache.data[size_t(q)] > T(0) ? dy.data[size_t(q)] : T(0);
  patch_affine_backward(p, 1, x, dz, dx, grad);
  if (dx) {
#pragma omp parallel for schedule(static)
    for (int64_t q = 0; q < int64_t(dy.data.size()); q++)
      dx->data[size_t(q)] += dy.data[size_t(q)];
  }
}

template <class T>
void relu_forward(const std::vector<T>& x, std::vector<T>& y) {
  y.resize(x.size());
#pragma omp parallel for schedule(static)
  for (int64_t q = 0; q < int64_t(x.size()); q++)
    y[size_t(q)] = std::max(x[size_t(q)], T(0));
}

double glorot_limit(int64_t fan_in, int64_t fan_out) {
  return std::sqrt(6.0 / double(fan_in + fan_out));
}

template <class T>
void glorot_init(std::vector<T>& a, int64_t fan_in, int64_t fan_out, Rng& rng) {
  const double lim = glorot_limit(fan_in, fan_out);
  for (auto& v : a) v = T(rng.uniform(-lim, lim));
}

#define WBN_INSTANTIATE(T)                                                          \
  template void patch_affine_forward<T>(const PatchAffine<T>&, int,                 \
                                        const TrunkBatch<T>&, TrunkBatch<T>&);      \
  template void patch_affine_backward<T>(const PatchAffine<T>&, int,                \
                                         const TrunkBatch<T>&, const TrunkBatch<T>&,\
                                         TrunkBatch<T>*, PatchAffine<T>*);          \
  template void conv2d_forward<T>(const ConvParams<T>&, const ImageBatch<T>&,       \
                                  ImageBatch<T>&);                                  \
  template void conv2d_backward<T>(const ConvParams<T>&, const ImageBatch<T>&,      \
                                   const ImageBatch<T>&, ImageBatch<T>*,            \
                                   ConvParams<T>*);                                 \
  template void resnet_forward<T>(const PatchAffine<T>&, const TrunkBatch<T>&,      \
                                  TrunkBatch<T>&, TrunkBatch<T>&);                  \
  template void resnet_backward<T>(const PatchAffine<T>&, const TrunkBatch<T>&,     \
                                   const TrunkBatch<T>&, const TrunkBatch<T>&,      \
                                   TrunkBatch<T>*, PatchAffine<T>*);                \
  template void relu_forward<T>(const std::vector<T>&, std::vector<T>&);            \
  template void glorot_init<T>(std::vector<T>&, int64_t, int64_t, Rng&);

WBN_INSTANTIATE(float)
WBN_INSTANTIATE(double)
#undef WBN_INSTANTIATE

}  // namespace wbn
