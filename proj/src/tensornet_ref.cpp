#include "wbn/tensornet.hpp"

// Plain loop implementations used to validate the OpenMP kernels. No tiling,
// no vectorization intent; keep these boring.

namespace wbn::ref {

template <class T>
void patch_affine_forward(const PatchAffine<T>& p, int kernel,
                          const TrunkBatch<T>& x, TrunkBatch<T>& y) {
  WBN_REQUIRE(kernel >= 1 && x.cells % kernel == 0 && x.cells / kernel == p.groups &&
                  p.in_dim == kernel * x.channels,
              "ref::patch_affine_forward: shape mismatch");
  WBN_REQUIRE(y.batch == x.batch && y.cells == p.groups && y.channels == p.out_dim,
              "ref::patch_affine_forward: output shape mismatch");
  for (int b = 0; b < x.batch; b++) {
    const T* xs = x.at(b);
    T* ys = y.at(b);
    for (int g = 0; g < p.groups; g++) {
      const T* xg = xs + int64_t(g) * p.in_dim;
      const T* wg = p.wg(g);
      T* yg = ys + int64_t(g) * p.out_dim;
      for (int o = 0; o < p.out_dim; o++) {
        double acc = double(p.bg(g)[o]);
        for (int i = 0; i < p.in_dim; i++) acc += double(wg[int64_t(o) * p.in_dim + i]) * double(xg[i]);
        yg[o] = T(acc);
      }
    }
  }
}

template <class T>
void patch_affine_backward(const PatchAffine<T>& p, int kernel,
                           const TrunkBatch<T>& x, const TrunkBatch<T>& dy,
                           TrunkBatch<T>* dx, PatchAffine<T>* grad) {
  WBN_REQUIRE(kernel >= 1 && x.cells % kernel == 0 && x.cells / kernel == p.groups,
              "ref::patch_affine_backward: shape mismatch");
  for (int b = 0; b < x.batch; b++) {
    const T* xs = x.at(b);
    const T* dys = dy.at(b);
    for (int g = 0; g < p.groups; g++) {
      const T* xg = xs + int64_t(g) * p.in_dim;
      const T* dyg = dys + int64_t(g) * p.out_dim;
      const T* wg = p.wg(g);
      if (dx) {
        T* dxg = dx->at(b) + int64_t(g) * p.in_dim;
        for (int i = 0; i < p.in_dim; i++) {
          double acc = 0;
          for (int o = 0; o < p.out_dim; o++)
            acc += double(wg[int64_t(o) * p.in_dim + i]) * double(dyg[o]);
          dxg[i] = T(acc);
        }
      }
      if (grad) {
        T* gw = grad->wg(g);
        T* gb = grad->bg(g);
        for (int o = 0; o < p.out_dim; o++) {
          gb[o] += dyg[o];
          for (int i = 0; i < p.in_dim; i++)
            gw[int64_t(o) * p.in_dim + i] += dyg[o] * xg[i];
        }
      }
    }
  }
}

template <class T>
void conv2d_forward(const ConvParams<T>& p, const ImageBatch<T>& x, ImageBatch<T>& y) {
  WBN_REQUIRE(x.channels == p.c_in && y.h == x.h && y.w == x.w && y.channels == p.c_out,
              "ref::conv2d_forward: shape mismatch");
  const int ph = p.kh / 2, pw = p.kw / 2;
  for (int b = 0; b < x.batch; b++) {
    const T* xs = x.at(b);
    T* ys = y.at(b);
    for (int i = 0; i < x.h; i++)
      for (int j = 0; j < x.w; j++)
        for (int co = 0; co < p.c_out; co++) {
          double acc = double(p.b[size_t(co)]);
          for (int di = 0; di < p.kh; di++) {
            const int si = i + di - ph;
            if (si < 0 || si >= x.h) continue;
            for (int dj = 0; dj < p.kw; dj++) {
              const int sj = j + dj - pw;
              if (sj < 0 || sj >= x.w) continue;
              for (int ci = 0; ci < p.c_in; ci++)
                acc += double(p.w[((size_t(di) * p.kw + dj) * p.c_in + ci) * p.c_out + co]) *
                       double(xs[(int64_t(si) * x.w + sj) * x.channels + ci]);
            }
          }
          ys[(int64_t(i) * x.w + j) * p.c_out + co] = T(acc);
        }
  }
}

template <class T>
void conv2d_backward(const ConvParams<T>& p, const ImageBatch<T>& x,
                     const ImageBatch<T>& dy, ImageBatch<T>* dx, ConvParams<T>* grad) {
  const int ph = p.kh / 2, pw = p.kw / 2;
  if (dx) std::fill(dx->data.begin(), dx->data.end(), T(0));
  for (int b = 0; b < x.batch; b++) {
    const T* xs = x.at(b);
    const T* dys = dy.at(b);
    for (int i = 0; i < x.h; i++)
      for (int j = 0; j < x.w; j++)
        for (int co = 0; co < p.c_out; co++) {
          const T g = dys[(int64_t(i) * x.w + j) * p.c_out + co];
          if (grad) grad->b[size_t(co)] += g;
          for (int di = 0; di < p.kh; di++) {
            const int si = i + di - ph;
            if (si < 0 || si >= x.h) continue;
            for (int dj = 0; dj < p.kw; dj++) {
              const int sj = j + dj - pw;
              if (sj < 0 || sj >= x.w) continue;
              for (int ci = 0; ci < p.c_in; ci++) {
                const size_t widx = ((size_t(di) * p.kw + dj) * p.c_in + ci) * p.c_out + co;
                if (grad) grad->w[widx] += g * xs[(int64_t(si) * x.w + sj) * x.channels + ci];
                if (dx)
                  dx->at(b)[(int64_t(si) * x.w + sj) * x.channels + ci] += g * p.w[widx];
              }
            }
          }
        }
  }
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
                                   ConvParams<T>*);

WBN_INSTANTIATE(float)
WBN_INSTANTIATE(double)
#undef WBN_INSTANTIATE

}  // namespace wbn::ref
