// Timing comparison between the OpenMP kernels and the serial reference
// implementations. Not a test; run manually.

#include <chrono>
#include <cstdio>

#include <omp.h>

#include "wbn/tensornet.hpp"

using namespace wbn;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; r++) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void bench_patch_affine() {
  Rng rng(1);
  const int groups = 64, k = 4, cin = 54, cout = 48, nb = 32;
  PatchAffine<float> p(groups, k * cin, cout);
  glorot_init(p.w, p.in_dim, p.out_dim, rng);
  TrunkBatch<float> x(nb, int64_t(groups) * k, cin), y(nb, groups, cout), dx = x;
  for (auto& v : x.data) v = float(rng.uniform(-1, 1));
  TrunkBatch<float> dy(nb, groups, cout);
  for (auto& v : dy.data) v = float(rng.uniform(-1, 1));
  PatchAffine<float> grad(groups, k * cin, cout);

  const double fwd_omp = time_ms([&] { patch_affine_forward(p, k, x, y); }, 50);
  const double fwd_ref = time_ms([&] { ref::patch_affine_forward(p, k, x, y); }, 10);
  const double bwd_omp =
      time_ms([&] { grad.set_zero(); patch_affine_backward(p, k, x, dy, &dx, &grad); }, 50);
  const double bwd_ref =
      time_ms([&] { grad.set_zero(); ref::patch_affine_backward(p, k, x, dy, &dx, &grad); }, 10);
  std::printf("patch_affine  fwd %8.3f ms (ref %8.3f, x%.1f)   bwd %8.3f ms (ref %8.3f, x%.1f)\n",
              fwd_omp, fwd_ref, fwd_ref / fwd_omp, bwd_omp, bwd_ref, bwd_ref / bwd_omp);
}

void bench_conv2d() {
  Rng rng(2);
  const int nb = 32, n = 80, cin = 16, cout = 16, k = 5;
  ConvParams<float> p(k, k, cin, cout);
  glorot_init(p.w, int64_t(k) * k * cin, int64_t(k) * k * cout, rng);
  ImageBatch<float> x(nb, n, n, cin), y(nb, n, n, cout), dx = x;
  for (auto& v : x.data) v = float(rng.uniform(-1, 1));
  ImageBatch<float> dy(nb, n, n, cout);
  for (auto& v : dy.data) v = float(rng.uniform(-1, 1));
  ConvParams<float> grad(k, k, cin, cout);

  const double fwd_omp = time_ms([&] { conv2d_forward(p, x, y); }, 5);
  const double fwd_ref = time_ms([&] { ref::conv2d_forward(p, x, y); }, 1);
  const double bwd_omp =
      time_ms([&] { grad.set_zero(); conv2d_backward(p, x, dy, &dx, &grad); }, 5);
  const double bwd_ref =
      time_ms([&] { grad.set_zero(); ref::conv2d_backward(p, x, dy, &dx, &grad); }, 1);
  std::printf("conv2d        fwd %8.3f ms (ref %8.3f, x%.1f)   bwd %8.3f ms (ref %8.3f, x%.1f)\n",
              fwd_omp, fwd_ref, fwd_ref / fwd_omp, bwd_omp, bwd_ref, bwd_ref / bwd_omp);
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  bench_patch_affine();
  bench_conv2d();
  return 0;
}
