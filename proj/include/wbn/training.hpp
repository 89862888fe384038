#pragma once

#include <functional>
#include <string>
#include <vector>

#include "wbn/common.hpp"
#include "wbn/widebnet.hpp"

namespace wbn {

// Gaussian target smoothing: characteristic width in grid points.
struct LossSpec {
  double kernel_width = 0.75;
  int kernel_radius = 0;  // 0 = ceil(4 * width)

  int radius() const {
    return kernel_radius > 0 ? kernel_radius : int(std::ceil(4.0 * kernel_width));
  }
};

// Normalized 1D Gaussian taps; the 2D kernel is the separable product.
std::vector<double> gaussian_taps(const LossSpec& spec);

// 2D convolution with the normalized Gaussian, zero-padded boundary.
template <class T>
Grid<T> smooth_target(const Grid<T>& eta, const LossSpec& spec);

// Sum over pixels of (smooth_target(eta) - pred)^2; no grid-spacing
// normalization.
template <class T>
double pixel_loss(const Grid<T>& pred, const Grid<T>& eta, const LossSpec& spec);

// || smooth(eta) - pred ||^2 / || smooth(eta) ||^2.
template <class T>
double relative_loss(const Grid<T>& pred, const Grid<T>& eta, const LossSpec& spec);

// Losses against an already-smoothed target (training fast path).
template <class T>
double pixel_loss_pre(const T* pred, const T* target, int64_t count);
template <class T>
double relative_loss_pre(const T* pred, const T* target, int64_t count);

struct LrSchedule {
  double base = 5e-3;
  double decay = 0.95;
  int64_t interval = 2000;
  bool staircase = true;

  double rate(int64_t step) const {
    const double t = staircase ? double(step / interval) : double(step) / double(interval);
    return base * std::pow(decay, t);
  }
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
struct AdamState {
  int64_t step = 0;
  std::vector<std::vector<T>> m, v;  // shaped like the parameter views

  template <class P>
  void init(WideBNetParams<P>& params) {
    auto views = params.views();
    m.clear();
    v.clear();
    for (auto& vw : views) {
      m.emplace_back(size_t(vw.n), T(0));
      v.emplace_back(size_t(vw.n), T(0));
    }
    step = 0;
  }
};

// One bias-corrected Adam update over all parameter views. Throws (naming the
// layer) on non-finite gradients.
template <class T>
void adam_step(AdamState<T>& state, WideBNetParams<T>& params, WideBNetParams<T>& grads,
               double lr, const AdamOptions& opt);

struct EpochMetrics {
  int epoch = 0;
  int64_t step = 0;
  double lr = 0;
  double train_pixel_loss = 0;
  double train_rel_loss = 0;
  double val_pixel_loss = 0;
  double val_rel_loss = 0;
  double wall_time_s = 0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& m);

// Layer-kind finite-difference gradient report.
struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0;
  bool pass = false;
};
struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool all_pass = true;
};

// Central finite differences against the analytic gradients, double
// precision, tiny configuration. Threshold 1e-5 (1e-6 for single layers).
GradCheckReport grad_check(uint64_t seed);

}  // namespace wbn
