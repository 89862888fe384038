#include "wbn/training.hpp"

namespace wbn {

namespace {

// Norm-wise relative discrepancy: ||a - n||_inf / max(||a||_inf, ||n||_inf).
double rel_err(const std::vector<double>& a, const std::vector<double>& n) {
  double diff = 0, scale = 1e-300;
  for (size_t q = 0; q < a.size(); q++) {
    diff = std::max(diff, std::abs(a[q] - n[q]));
    scale = std::max({scale, std::abs(a[q]), std::abs(n[q])});
  }
  return diff / scale;
}

void fill_uniform(std::vector<double>& v, Rng& rng, double lo = -1, double hi = 1) {
  for (auto& x : v) x = rng.uniform(lo, hi);
}

GradCheckEntry check_patch_affine(int kernel, uint64_t seed) {
  Rng rng(seed);
  const int groups = 3, cin = 4, cout = 5, nb = 2;
  const int64_t cells = int64_t(groups) * kernel;
  PatchAffine<double> p(groups, kernel * cin, cout);
  fill_uniform(p.w, rng);
  fill_uniform(p.b, rng);
  TrunkBatch<double> x(nb, cells, cin);
  fill_uniform(x.data, rng);
  std::vector<double> proj(size_t(nb) * groups * cout);
  fill_uniform(proj, rng);

  auto loss = [&](const PatchAffine<double>& pp, const TrunkBatch<double>& xx) {
    TrunkBatch<double> y(nb, groups, cout);
    patch_affine_forward(pp, kernel, xx, y);
    double acc = 0;
    for (size_t q = 0; q < y.data.size(); q++) acc += proj[q] * y.data[q];
    return acc;
  };

  TrunkBatch<double> dy(nb, groups, cout);
  std::copy(proj.begin(), proj.end(), dy.data.begin());
  TrunkBatch<double> dx(nb, cells, cin);
  PatchAffine<double> grad(groups, kernel * cin, cout);
  patch_affine_backward(p, kernel, x, dy, &dx, &grad);

  const double h = 1e-6;
  std::vector<double> ana, num;
  auto fd = [&](double& slot, double base_scale) {
    const double step = h * std::max(1.0, std::abs(base_scale));
    const double keep = slot;
    slot = keep + step;
    const double lp = loss(p, x);
    slot = keep - step;
    const double lm = loss(p, x);
    slot = keep;
    return (lp - lm) / (2 * step);
  };
  for (size_t q = 0; q < p.w.size(); q++) {
    ana.push_back(grad.w[q]);
    num.push_back(fd(p.w[q], p.w[q]));
  }
  for (size_t q = 0; q < p.b.size(); q++) {
    ana.push_back(grad.b[q]);
    num.push_back(fd(p.b[q], p.b[q]));
  }
  for (size_t q = 0; q < x.data.size(); q++) {
    ana.push_back(dx.data[q]);
    num.push_back(fd(x.data[q], x.data[q]));
  }
  GradCheckEntry e;
  e.name = "patch_affine_k" + std::to_string(kernel);
  e.max_rel_err = rel_err(ana, num);
  e.pass = e.max_rel_err < 1e-6;
  return e;
}

GradCheckEntry check_conv2d(uint64_t seed) {
  Rng rng(seed);
  const int nb = 2, hgt = 6, wid = 5, cin = 3, cout = 4, k = 3;
  ConvParams<double> p(k, k, cin, cout);
  fill_uniform(p.w, rng);
  fill_uniform(p.b, rng);
  ImageBatch<double> x(nb, hgt, wid, cin);
  fill_uniform(x.data, rng);
  std::vector<double> proj(size_t(nb) * hgt * wid * cout);
  fill_uniform(proj, rng);

  auto loss = [&]() {
    ImageBatch<double> y(nb, hgt, wid, cout);
    conv2d_forward(p, x, y);
    double acc = 0;
    for (size_t q = 0; q < y.data.size(); q++) acc += proj[q] * y.data[q];
    return acc;
  };

  ImageBatch<double> dy(nb, hgt, wid, cout);
  std::copy(proj.begin(), proj.end(), dy.data.begin());
  ImageBatch<double> dx(nb, hgt, wid, cin);
  ConvParams<double> grad(k, k, cin, cout);
  conv2d_backward(p, x, dy, &dx, &grad);

  const double h = 1e-6;
  std::vector<double> ana, num;
  auto fd = [&](double& slot) {
    const double step = h * std::max(1.0, std::abs(slot));
    const double keep = slot;
    slot = keep + step;
    const double lp = loss();
    slot = keep - step;
    const double lm = loss();
    slot = keep;
    return (lp - lm) / (2 * step);
  };
  for (size_t q = 0; q < p.w.size(); q++) { ana.push_back(grad.w[q]); num.push_back(fd(p.w[q])); }
  for (size_t q = 0; q < p.b.size(); q++) { ana.push_back(grad.b[q]); num.push_back(fd(p.b[q])); }
  for (size_t q = 0; q < x.data.size(); q++) { ana.push_back(dx.data[q]); num.push_back(fd(x.data[q])); }
  GradCheckEntry e;
  e.name = "conv2d";
  e.max_rel_err = rel_err(ana, num);
  e.pass = e.max_rel_err < 1e-6;
  return e;
}

GradCheckEntry check_resnet(uint64_t seed) {
  Rng rng(seed);
  const int nb = 2, groups = 4, ch = 5;
  PatchAffine<double> p(groups, ch, ch);
  fill_uniform(p.w, rng);
  fill_uniform(p.b, rng);
  TrunkBatch<double> x(nb, groups, ch);
  fill_uniform(x.data, rng);
  std::vector<double> proj(x.data.size());
  fill_uniform(proj, rng);

  auto loss = [&]() {
    TrunkBatch<double> z(nb, groups, ch), y(nb, groups, ch);
    resnet_forward(p, x, z, y);
    double acc = 0;
    for (size_t q = 0; q < y.data.size(); q++) acc += proj[q] * y.data[q];
    return acc;
  };

  TrunkBatch<double> dy(nb, groups, ch);
  std::copy(proj.begin(), proj.end(), dy.data.begin());
  TrunkBatch<double> z(nb, groups, ch), y(nb, groups, ch);
  resnet_forward(p, x, z, y);
  TrunkBatch<double> dx(nb, groups, ch);
  PatchAffine<double> grad(groups, ch, ch);
  resnet_backward(p, x, z, dy, &dx, &grad);

  const double h = 1e-6;
  std::vector<double> ana, num;
  auto fd = [&](double& slot) {
    const double keep = slot;
    slot = keep + h;
    const double lp = loss();
    slot = keep - h;
    const double lm = loss();
    slot = keep;
    return (lp - lm) / (2 * h);
  };
  for (size_t q = 0; q < p.w.size(); q++) { ana.push_back(grad.w[q]); num.push_back(fd(p.w[q])); }
  for (size_t q = 0; q < p.b.size(); q++) { ana.push_back(grad.b[q]); num.push_back(fd(p.b[q])); }
  for (size_t q = 0; q < x.data.size(); q++) { ana.push_back(dx.data[q]); num.push_back(fd(x.data[q])); }
  GradCheckEntry e;
  e.name = "resnet_unit";
  e.max_rel_err = rel_err(ana, num);
  e.pass = e.max_rel_err < 1e-6;
  return e;
}

GradCheckEntry check_full_model(uint64_t seed) {
  Rng rng(seed);
  GridSpec grid{2, 2};
  WideBNetConfig cfg = make_config(grid, {1, 1}, 2);
  cfg.n_cnn = 2;
  cfg.n_rnn = 2;
  cfg.cnn_hidden = 6;
  cfg.cnn_kernel = 3;
  Rng init_rng = rng.fork(1);
  WideBNetParams<double> params = init_params<double>(cfg, init_rng);

  BandedBatch<double> input;
  const int nb = 2;
  for (int l = cfg.half(); l <= cfg.levels(); l++) {
    TrunkBatch<double> leaf(nb, ipow(4, cfg.levels()), cfg.leaf_channels(l));
    fill_uniform(leaf.data, rng, -0.5, 0.5);
    input.leaf.push_back(std::move(leaf));
  }
  const int n = cfg.grid.side();
  std::vector<double> proj(size_t(nb) * n * n);
  fill_uniform(proj, rng);

  auto loss = [&]() {
    ImageBatch<double> out = widebnet_forward(params, input, nullptr);
    double acc = 0;
    for (size_t q = 0; q < out.data.size(); q++) acc += proj[q] * out.data[q];
    return acc;
  };

  Tape<double> tape;
  ImageBatch<double> out = widebnet_forward(params, input, &tape);
  ImageBatch<double> dout(nb, n, n, 1);
  std::copy(proj.begin(), proj.end(), dout.data.begin());
  WideBNetParams<double> grads = params;
  grads.set_zero();
  widebnet_backward(params, tape, dout, &grads, nullptr);

  const double h = 1e-6;
  std::vector<double> ana, num;
  auto pviews = params.views();
  auto gviews = grads.views();
  for (size_t vi = 0; vi < pviews.size(); vi++) {
    for (int64_t q = 0; q < pviews[vi].n; q++) {
      double& slot = pviews[vi].data[q];
      const double keep = slot;
      slot = keep + h;
      const double lp = loss();
      slot = keep - h;
      const double lm = loss();
      slot = keep;
      ana.push_back(gviews[vi].data[q]);
      num.push_back((lp - lm) / (2 * h));
    }
  }
  GradCheckEntry e;
  e.name = "widebnet_full";
  e.max_rel_err = rel_err(ana, num);
  e.pass = e.max_rel_err < 1e-5;
  return e;
}

}  // namespace

GradCheckReport grad_check(uint64_t seed) {
  GradCheckReport rep;
  rep.entries.push_back(check_patch_affine(1, seed + 11));
  rep.entries.push_back(check_patch_affine(4, seed + 12));
  rep.entries.push_back(check_conv2d(seed + 13));
  rep.entries.push_back(check_resnet(seed + 14));
  rep.entries.push_back(check_full_model(seed + 15));
  for (const auto& e : rep.entries) rep.all_pass = rep.all_pass && e.pass;
  return rep;
}

}  // namespace wbn
