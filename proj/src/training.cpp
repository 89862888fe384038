#include "wbn/training.hpp"

#include <cmath>
#include <sstream>

namespace wbn {

std::vector<double> gaussian_taps(const LossSpec& spec) {
  WBN_REQUIRE(spec.kernel_width > 0, "LossSpec: width must be positive");
  const int rad = spec.radius();
  std::vector<double> taps(size_t(2 * rad + 1));
  double sum = 0;
  for (int t = -rad; t <= rad; t++) {
    taps[size_t(t + rad)] = std::exp(-0.5 * (t * t) / (spec.kernel_width * spec.kernel_width));
    sum += taps[size_t(t + rad)];
  }
  for (auto& v : taps) v /= sum;
  return taps;
}

template <class T>
Grid<T> smooth_target(const Grid<T>& eta, const LossSpec& spec) {
  const std::vector<double> taps = gaussian_taps(spec);
  const int rad = spec.radius();
  const int rows = eta.rows, cols = eta.cols;
  Grid<double> tmp(rows, cols, 0.0);
  // Separable passes, zero padding outside.
  for (int i = 0; i < rows; i++)
    for (int j = 0; j < cols; j++) {
      double acc = 0;
      for (int t = -rad; t <= rad; t++) {
        const int jj = j + t;
        if (jj >= 0 && jj < cols) acc += taps[size_t(t + rad)] * double(eta(i, jj));
      }
      tmp(i, j) = acc;
    }
  Grid<T> out(rows, cols);
  for (int i = 0; i < rows; i++)
    for (int j = 0; j < cols; j++) {
      double acc = 0;
      for (int t = -rad; t <= rad; t++) {
        const int ii = i + t;
        if (ii >= 0 && ii < rows) acc += taps[size_t(t + rad)] * tmp(ii, j);
      }
      out(i, j) = T(acc);
    }
  return out;
}

template <class T>
double pixel_loss_pre(const T* pred, const T* target, int64_t count) {
  double acc = 0;
  for (int64_t q = 0; q < count; q++) {
    const double d = double(target[q]) - double(pred[q]);
    acc += d * d;
  }
  return acc;
}

template <class T>
double relative_loss_pre(const T* pred, const T* target, int64_t count) {
  double num = 0, den = 0;
  for (int64_t q = 0; q < count; q++) {
    const double d = double(target[q]) - double(pred[q]);
    num += d * d;
    den += double(target[q]) * double(target[q]);
  }
  WBN_REQUIRE(den > 0, "relative_loss: smoothed target is identically zero");
  return num / den;
}

template <class T>
double pixel_loss(const Grid<T>& pred, const Grid<T>& eta, const LossSpec& spec) {
  WBN_REQUIRE(pred.rows == eta.rows && pred.cols == eta.cols, "pixel_loss: shape mismatch");
  Grid<T> target = smooth_target(eta, spec);
  return pixel_loss_pre(pred.v.data(), target.v.data(), int64_t(pred.v.size()));
}

template <class T>
double relative_loss(const Grid<T>& pred, const Grid<T>& eta, const LossSpec& spec) {
  WBN_REQUIRE(pred.rows == eta.rows && pred.cols == eta.cols, "relative_loss: shape mismatch");
  Grid<T> target = smooth_target(eta, spec);
  return relative_loss_pre(pred.v.data(), target.v.data(), int64_t(pred.v.size()));
}

template <class T>
void adam_step(AdamState<T>& state, WideBNetParams<T>& params, WideBNetParams<T>& grads,
               double lr, const AdamOptions& opt) {
  auto pviews = params.views();
  auto gviews = grads.views();
  WBN_REQUIRE(pviews.size() == gviews.size() && pviews.size() == state.m.size(),
              "adam_step: state/parameter mismatch");
  state.step++;
  const double b1t = 1.0 - std::pow(opt.beta1, double(state.step));
  const double b2t = 1.0 - std::pow(opt.beta2, double(state.step));
  for (size_t vi = 0; vi < pviews.size(); vi++) {
    T* p = pviews[vi].data;
    const T* g = gviews[vi].data;
    T* m = state.m[vi].data();
    T* v = state.v[vi].data();
    const int64_t n = pviews[vi].n;
    for (int64_t q = 0; q < n; q++) {
      if (!std::isfinite(double(g[q])))
        fail_runtime("adam_step: non-finite gradient in " + pviews[vi].name);
      m[q] = T(opt.beta1) * m[q] + T(1 - opt.beta1) * g[q];
      v[q] = T(opt.beta2) * v[q] + T(1 - opt.beta2) * g[q] * g[q];
      const double mh = double(m[q]) / b1t;
      const double vh = double(v[q]) / b2t;
      p[q] = T(double(p[q]) - lr * mh / (std::sqrt(vh) + opt.eps));
    }
  }
}

std::string metrics_csv_header() {
  return "epoch,step,lr,train_pixel_loss,train_rel_loss,val_pixel_loss,val_rel_loss,wall_time_s";
}

std::string metrics_csv_row(const EpochMetrics& m) {
  std::ostringstream os;
  os.precision(10);
  os << m.epoch << ',' << m.step << ',' << m.lr << ',' << m.train_pixel_loss << ','
     << m.train_rel_loss << ',' << m.val_pixel_loss << ',' << m.val_rel_loss << ','
     << m.wall_time_s;
  return os.str();
}

#define WBN_INSTANTIATE(T)                                                        \
  template Grid<T> smooth_target<T>(const Grid<T>&, const LossSpec&);             \
  template double pixel_loss<T>(const Grid<T>&, const Grid<T>&, const LossSpec&); \
  template double relative_loss<T>(const Grid<T>&, const Grid<T>&, const LossSpec&); \
  template double pixel_loss_pre<T>(const T*, const T*, int64_t);                 \
  template double relative_loss_pre<T>(const T*, const T*, int64_t);              \
  template void adam_step<T>(AdamState<T>&, WideBNetParams<T>&, WideBNetParams<T>&, \
                             double, const AdamOptions&);

WBN_INSTANTIATE(float)
WBN_INSTANTIATE(double)
#undef WBN_INSTANTIATE

}  // namespace wbn
