#include "wbn/widebnet.hpp"

namespace wbn {

void WideBNetConfig::validate() const {
  grid.validate();
  WBN_REQUIRE(rank >= 1, "WideBNetConfig: rank must be positive");
  WBN_REQUIRE(int(band_sizes.size()) == half() + 1,
              "WideBNetConfig: band_sizes must have L/2 + 1 entries");
  for (int b : band_sizes) WBN_REQUIRE(b >= 0, "WideBNetConfig: negative band size");
  WBN_REQUIRE(band_sizes.back() >= 1, "WideBNetConfig: the level-L band must be non-empty");
  WBN_REQUIRE(n_cnn >= 0 && n_rnn >= 0, "WideBNetConfig: negative layer count");
  WBN_REQUIRE(cnn_kernel % 2 == 1, "WideBNetConfig: cnn kernel must be odd");
}

WideBNetConfig make_config(const GridSpec& grid, const std::vector<int>& band_sizes, int rank) {
  WideBNetConfig cfg;
  cfg.grid = grid;
  cfg.band_sizes = band_sizes;
  cfg.rank = rank;
  cfg.validate();
  return cfg;
}

namespace {

struct LayerShapes {
  // Mirrors the constructors in init_params; param_count and the builder all
  // derive from this one place.
  static PatchAffine<float> shape_only;  // unused; silences -Wunused warnings

  static int64_t v_count(const WideBNetConfig& c, int level) {
    if (c.n_omega(level) == 0) return 0;
    const int64_t groups = ipow(4, level);
    const int64_t in = ipow(4, c.levels() - level) * c.leaf_channels(level);
    const int64_t out = 2 * c.rank * c.n_omega(level);
    return groups * (out * in + out);
  }
  static int64_t h_count(const WideBNetConfig& c, int level) {
    const int64_t groups = ipow(4, level);
    const int64_t in = 4 * (int64_t(c.channels(level + 1)) + 2 * c.rank * c.n_omega(level));
    const int64_t out = c.channels(level);
    return groups * (out * in + out);
  }
  static int64_t square_count(const WideBNetConfig& c) {
    const int64_t groups = ipow(4, c.half());
    const int64_t ch = c.channels(c.half());
    return groups * (ch * ch + ch);
  }
  static int64_t g_count(const WideBNetConfig& c, int level) {
    const int64_t groups = ipow(4, level);
    const int64_t in = c.channels(level);
    const int64_t out = 4 * int64_t(c.channels(level + 1));
    return groups * (out * in + out);
  }
  static int64_t u_count(const WideBNetConfig& c) {
    const int64_t groups = ipow(4, c.levels());
    const int64_t in = c.channels(c.levels());
    const int64_t out = int64_t(c.grid.leaf) * c.grid.leaf;
    return groups * (out * in + out);
  }
  static int64_t cnn_count(const WideBNetConfig& c, int i) {
    const int cin = i == 0 ? 1 : c.cnn_hidden;
    const int cout = i == c.n_cnn - 1 ? 1 : c.cnn_hidden;
    return int64_t(c.cnn_kernel) * c.cnn_kernel * cin * cout + cout;
  }
};

PatchAffine<float> LayerShapes::shape_only;

}  // namespace

int64_t param_count(const WideBNetConfig& cfg) {
  cfg.validate();
  const int L = cfg.levels(), h = cfg.half();
  int64_t total = 0;
  for (int l = h; l <= L; l++) total += LayerShapes::v_count(cfg, l);
  for (int l = L - 1; l >= h; l--) total += LayerShapes::h_count(cfg, l);
  total += LayerShapes::square_count(cfg);             // switch mix
  total += cfg.n_rnn * LayerShapes::square_count(cfg); // resnet units
  for (int l = h; l < L; l++) total += LayerShapes::g_count(cfg, l);
  total += LayerShapes::u_count(cfg);
  for (int i = 0; i < cfg.n_cnn; i++) total += LayerShapes::cnn_count(cfg, i);
  return total;
}

template <class T>
std::vector<typename WideBNetParams<T>::View> WideBNetParams<T>::views() {
  std::vector<View> out;
  auto add_pa = [&](PatchAffine<T>& p, const std::string& name) {
    if (p.groups == 0) return;
    out.push_back({p.w.data(), int64_t(p.w.size()), name + ".w"});
    out.push_back({p.b.data(), int64_t(p.b.size()), name + ".b"});
  };
  const int L = cfg.levels(), h = cfg.half();
  for (int l = h; l <= L; l++) add_pa(v[size_t(l - h)], "v" + std::to_string(l));
  for (int l = L - 1; l >= h; l--) add_pa(this->h[size_t(L - 1 - l)], "h" + std::to_string(l));
  add_pa(switch_mix, "switch");
  for (int i = 0; i < cfg.n_rnn; i++) add_pa(resnet[size_t(i)], "resnet" + std::to_string(i));
  for (int l = h; l < L; l++) add_pa(g[size_t(l - h)], "g" + std::to_string(l));
  add_pa(u, "u");
  for (int i = 0; i < cfg.n_cnn; i++) {
    out.push_back({cnn[size_t(i)].w.data(), int64_t(cnn[size_t(i)].w.size()),
                   "cnn" + std::to_string(i) + ".w"});
    out.push_back({cnn[size_t(i)].b.data(), int64_t(cnn[size_t(i)].b.size()),
                   "cnn" + std::to_string(i) + ".b"});
  }
  return out;
}

template <class T>
int64_t WideBNetParams<T>::count() const {
  int64_t total = 0;
  for (const auto& p : v) total += p.count();
  for (const auto& p : h) total += p.count();
  total += switch_mix.count();
  for (const auto& p : resnet) total += p.count();
  for (const auto& p : g) total += p.count();
  total += u.count();
  for (const auto& p : cnn) total += p.count();
  return total;
}

template <class T>
void WideBNetParams<T>::set_zero() {
  for (auto& p : v) p.set_zero();
  for (auto& p : h) p.set_zero();
  switch_mix.set_zero();
  for (auto& p : resnet) p.set_zero();
  for (auto& p : g) p.set_zero();
  u.set_zero();
  for (auto& p : cnn) p.set_zero();
}

template <class T>
WideBNetParams<T> init_params(const WideBNetConfig& cfg, Rng& rng) {
  cfg.validate();
  const int L = cfg.levels(), h = cfg.half(), r = cfg.rank;
  WideBNetParams<T> P;
  P.cfg = cfg;
  for (int l = h; l <= L; l++) {
    const int nw = cfg.n_omega(l);
    if (nw == 0) {
      P.v.emplace_back();
      continue;
    }
    P.v.emplace_back(int(ipow(4, l)), int(ipow(4, L - l)) * cfg.leaf_channels(l), 2 * r * nw);
  }
  for (int l = L - 1; l >= h; l--)
    P.h.emplace_back(int(ipow(4, l)), 4 * (cfg.channels(l + 1) + 2 * r * cfg.n_omega(l)),
                     cfg.channels(l));
  const int ch = cfg.channels(h);
  P.switch_mix = PatchAffine<T>(int(ipow(4, h)), ch, ch);
  for (int i = 0; i < cfg.n_rnn; i++) P.resnet.emplace_back(int(ipow(4, h)), ch, ch);
  for (int l = h; l < L; l++)
    P.g.emplace_back(int(ipow(4, l)), cfg.channels(l), 4 * cfg.channels(l + 1));
  P.u = PatchAffine<T>(int(ipow(4, L)), cfg.channels(L), cfg.grid.leaf * cfg.grid.leaf);
  for (int i = 0; i < cfg.n_cnn; i++)
    P.cnn.emplace_back(cfg.cnn_kernel, cfg.cnn_kernel, i == 0 ? 1 : cfg.cnn_hidden,
                       i == cfg.n_cnn - 1 ? 1 : cfg.cnn_hidden);

  // Weights drawn in the canonical layer order; biases stay zero.
  for (int l = h; l <= L; l++)
    if (P.v[size_t(l - h)].groups > 0)
      glorot_init(P.v[size_t(l - h)].w, P.v[size_t(l - h)].in_dim, P.v[size_t(l - h)].out_dim, rng);
  for (auto& p : P.h) glorot_init(p.w, p.in_dim, p.out_dim, rng);
  glorot_init(P.switch_mix.w, ch, ch, rng);
  for (auto& p : P.resnet) glorot_init(p.w, p.in_dim, p.out_dim, rng);
  for (auto& p : P.g) glorot_init(p.w, p.in_dim, p.out_dim, rng);
  glorot_init(P.u.w, P.u.in_dim, P.u.out_dim, rng);
  for (auto& p : P.cnn)
    glorot_init(p.w, int64_t(p.kh) * p.kw * p.c_in, int64_t(p.kh) * p.kw * p.c_out, rng);

  WBN_ENSURE(P.count() == param_count(cfg), "init_params: shape table out of sync");
  return P;
}

namespace {

template <class T>
void upscale4(const TrunkBatch<T>& in, TrunkBatch<T>& out) {
  WBN_ENSURE(out.cells == 4 * in.cells && out.channels == in.channels &&
                 out.batch == in.batch,
             "upscale4: shape mismatch");
#pragma omp parallel for schedule(static)
  for (int b = 0; b < in.batch; b++) {
    const T* src = in.at(b);
    T* dst = out.at(b);
    for (int64_t c = 0; c < in.cells; c++)
      for (int k = 0; k < 4; k++)
        std::copy(src + c * in.channels, src + (c + 1) * in.channels,
                  dst + (4 * c + k) * in.channels);
  }
}

template <class T>
void downsum4(const TrunkBatch<T>& dout, TrunkBatch<T>& din) {
#pragma omp parallel for schedule(static)
  for (int b = 0; b < dout.batch; b++) {
    const T* src = dout.at(b);
    T* dst = din.at(b);
    for (int64_t c = 0; c < din.cells; c++)
      for (int ch = 0; ch < din.channels; ch++) {
        T acc = 0;
        for (int k = 0; k < 4; k++) acc += src[(4 * c + k) * din.channels + ch];
        dst[c * din.channels + ch] = acc;
      }
  }
}

// Concatenate b's channels after a's, per cell.
template <class T>
void concat_channels(const TrunkBatch<T>& a, const TrunkBatch<T>& b, TrunkBatch<T>& out) {
#pragma omp parallel for schedule(static)
  for (int s = 0; s < a.batch; s++) {
    const T* pa = a.at(s);
    const T* pb = b.at(s);
    T* po = out.at(s);
    for (int64_t c = 0; c < a.cells; c++) {
      std::copy(pa + c * a.channels, pa + (c + 1) * a.channels,
                po + c * out.channels);
      std::copy(pb + c * b.channels, pb + (c + 1) * b.channels,
                po + c * out.channels + a.channels);
    }
  }
}

template <class T>
void split_channels(const TrunkBatch<T>& dcat, TrunkBatch<T>& da, TrunkBatch<T>& db) {
#pragma omp parallel for schedule(static)
  for (int s = 0; s < dcat.batch; s++) {
    const T* pc = dcat.at(s);
    T* pa = da.at(s);
    T* pb = db.at(s);
    for (int64_t c = 0; c < da.cells; c++) {
      std::copy(pc + c * dcat.channels, pc + c * dcat.channels + da.channels,
                pa + c * da.channels);
      std::copy(pc + c * dcat.channels + da.channels, pc + (c + 1) * dcat.channels,
                pb + c * db.channels);
    }
  }
}

template <class T>
void permute_batch(const TrunkBatch<T>& in, const PermIndex& perm, TrunkBatch<T>& out) {
  WBN_ENSURE(in.sample_stride() == perm.size(), "permute_batch: length mismatch");
#pragma omp parallel for schedule(static)
  for (int b = 0; b < in.batch; b++) {
    const T* src = in.at(b);
    T* dst = out.at(b);
    for (int64_t t = 0; t < perm.size(); t++) dst[t] = src[perm.indices[t]];
  }
}

}  // namespace

template <class T>
BandedBatch<T> format_banded_batch(
    const WideBNetConfig& cfg,
    const std::vector<std::vector<const std::complex<float>*>>& bands) {
  cfg.validate();
  const int L = cfg.levels(), h = cfg.half(), s = cfg.grid.leaf, n = cfg.grid.side();
  WBN_REQUIRE(int(bands.size()) == cfg.band_count(), "format_banded_batch: band count mismatch");
  const int nb = bands.empty() ? 0 : int(bands[0].size());
  BandedBatch<T> out;
  for (int l = h; l <= L; l++) {
    const int nw = cfg.n_omega(l);
    const size_t idx = size_t(l - h);
    if (nw == 0) {
      out.leaf.emplace_back();
      continue;
    }
    WBN_REQUIRE(int(bands[idx].size()) == nb, "format_banded_batch: ragged batch");
    TrunkBatch<T> leaf(nb, ipow(4, L), cfg.leaf_channels(l));
#pragma omp parallel for schedule(static)
    for (int b = 0; b < nb; b++) {
      const std::complex<float>* src = bands[idx][size_t(b)];
      T* dst = leaf.at(b);
      for (int64_t k = 0; k < leaf.cells; k++) {
        int bi, bj;
        morton_coords(k, L, bi, bj);
        T* cell = dst + k * leaf.channels;
        for (int f = 0; f < nw; f++)
          for (int rr = 0; rr < s; rr++)
            for (int cc = 0; cc < s; cc++) {
              const std::complex<float> z =
                  src[(int64_t(bi * s + rr) * n + (bj * s + cc)) * nw + f];
              cell[f * 2 * s * s + rr * s + cc] = T(z.real());
              cell[f * 2 * s * s + s * s + rr * s + cc] = T(z.imag());
            }
      }
    }
    out.leaf.push_back(std::move(leaf));
  }
  return out;
}

template <class T>
ImageBatch<T> widebnet_forward(const WideBNetParams<T>& params, const BandedBatch<T>& data,
                               Tape<T>* tape) {
  const WideBNetConfig& cfg = params.cfg;
  const int L = cfg.levels(), h = cfg.half(), s = cfg.grid.leaf, n = cfg.grid.side();
  WBN_REQUIRE(int(data.leaf.size()) == cfg.band_count(), "widebnet_forward: band mismatch");
  const int nb = data.leaf.back().batch;

  if (tape) {
    tape->input = data;
    tape->v_out.assign(size_t(cfg.band_count()), {});
    tape->h_in.clear();
    tape->resnet_in.clear();
    tape->resnet_z.clear();
    tape->g_in.clear();
    tape->cnn_in.clear();
    tape->cnn_pre.clear();
  }

  // V compressors, one per non-empty band.
  std::vector<TrunkBatch<T>> v_out(size_t(cfg.band_count()));
  for (int l = h; l <= L; l++) {
    const size_t idx = size_t(l - h);
    if (cfg.n_omega(l) == 0) continue;
    const auto& p = params.v[idx];
    v_out[idx] = TrunkBatch<T>(nb, ipow(4, l), p.out_dim);
    patch_affine_forward(p, int(ipow(4, L - l)), data.leaf[idx], v_out[idx]);
  }
  if (tape) tape->v_out = v_out;

  // Decimating trunk: H layers inject each band at its own length scale.
  TrunkBatch<T> trunk = v_out[size_t(L - h)];
  for (int l = L - 1; l >= h; l--) {
    const auto& p = params.h[size_t(L - 1 - l)];
    TrunkBatch<T> trunk_in = trunk;
    if (cfg.strict_butterfly) {
      // Gather so the complementary channel blocks of the four siblings sit
      // contiguously; the learned dense patch map then contains the strict
      // butterfly block pattern as a sub-structure.
      PermIndex perm = perm_indices(cfg.grid, l, trunk.channels / int(ipow(4, L - l - 1)));
      TrunkBatch<T> permuted(nb, trunk.cells, trunk.channels);
      permute_batch(trunk, perm, permuted);
      trunk_in = std::move(permuted);
    }
    TrunkBatch<T> cat;
    const size_t idx = size_t(l - h);
    if (cfg.n_omega(l) > 0) {
      TrunkBatch<T> up(nb, trunk.cells, v_out[idx].channels);
      upscale4(v_out[idx], up);
      cat = TrunkBatch<T>(nb, trunk.cells, trunk.channels + up.channels);
      concat_channels(trunk_in, up, cat);
    } else {
      cat = std::move(trunk_in);
    }
    if (tape) tape->h_in.push_back(cat);
    TrunkBatch<T> next(nb, ipow(4, l), p.out_dim);
    patch_affine_forward(p, 4, cat, next);
    trunk = std::move(next);
  }

  // Switch-resnet core.
  {
    TrunkBatch<T> permuted(nb, trunk.cells, trunk.channels);
    if (cfg.use_switch) {
      PermIndex sw = switch_indices(cfg.grid, cfg.rho());
      permute_batch(trunk, sw, permuted);
    } else {
      permuted.data = trunk.data;
    }
    if (tape) tape->switch_in = permuted;
    TrunkBatch<T> mixed(nb, trunk.cells, trunk.channels);
    patch_affine_forward(params.switch_mix, 1, permuted, mixed);
    if (tape) tape->switch_out = mixed;
    trunk = std::move(mixed);
  }
  for (int i = 0; i < cfg.n_rnn; i++) {
    if (tape) tape->resnet_in.push_back(trunk);
    TrunkBatch<T> z(nb, trunk.cells, trunk.channels), y(nb, trunk.cells, trunk.channels);
    resnet_forward(params.resnet[size_t(i)], trunk, z, y);
    if (tape) tape->resnet_z.push_back(z);
    trunk = std::move(y);
  }

  // Expanding trunk: each G layer splits every cell into its four children.
  for (int l = h; l < L; l++) {
    const auto& p = params.g[size_t(l - h)];
    if (tape) tape->g_in.push_back(trunk);
    TrunkBatch<T> wide(nb, trunk.cells, p.out_dim);
    patch_affine_forward(p, 1, trunk, wide);
    // [4^l cells, 4*c'] and [4^(l+1) cells, c'] share one layout.
    TrunkBatch<T> next;
    next.batch = nb;
    next.cells = trunk.cells * 4;
    next.channels = p.out_dim / 4;
    next.data = std::move(wide.data);
    if (cfg.strict_butterfly) {
      PermIndex perm = perm_indices(cfg.grid, l, next.channels / int(ipow(4, L - l - 1)));
      PermIndex inv = invert_permutation(perm);
      TrunkBatch<T> scattered(nb, next.cells, next.channels);
      permute_batch(next, inv, scattered);
      next = std::move(scattered);
    }
    trunk = std::move(next);
  }

  // Decode to the pixel grid.
  if (tape) tape->u_in = trunk;
  TrunkBatch<T> leafpix(nb, ipow(4, L), s * s);
  patch_affine_forward(params.u, 1, trunk, leafpix);
  ImageBatch<T> img(nb, n, n, 1);
#pragma omp parallel for schedule(static)
  for (int b = 0; b < nb; b++) {
    const T* src = leafpix.at(b);
    T* dst = img.at(b);
    for (int64_t k = 0; k < leafpix.cells; k++) {
      int bi, bj;
      morton_coords(k, L, bi, bj);
      for (int rr = 0; rr < s; rr++)
        for (int cc = 0; cc < s; cc++)
          dst[int64_t(bi * s + rr) * n + (bj * s + cc)] = src[k * leafpix.channels + rr * s + cc];
    }
  }

  for (int i = 0; i < cfg.n_cnn; i++) {
    if (tape) tape->cnn_in.push_back(img);
    const auto& p = params.cnn[size_t(i)];
    ImageBatch<T> out(nb, n, n, p.c_out);
    conv2d_forward(p, img, out);
    if (tape) tape->cnn_pre.push_back(out);
    if (i + 1 < cfg.n_cnn) {
      relu_forward(out.data, out.data);
    }
    img = std::move(out);
  }
  return img;
}

template <class T>
void widebnet_backward(const WideBNetParams<T>& params, const Tape<T>& tape,
                       const ImageBatch<T>& d_out, WideBNetParams<T>* grad,
                       BandedBatch<T>* d_input) {
  const WideBNetConfig& cfg = params.cfg;
  const int L = cfg.levels(), h = cfg.half(), s = cfg.grid.leaf, n = cfg.grid.side();
  const int nb = d_out.batch;

  // CNN chain, last to first; hidden activations were ReLU.
  ImageBatch<T> d_img = d_out;
  for (int i = cfg.n_cnn - 1; i >= 0; i--) {
    const auto& p = params.cnn[size_t(i)];
    if (i + 1 < cfg.n_cnn) {
      const auto& pre = tape.cnn_pre[size_t(i)];
#pragma omp parallel for schedule(static)
      for (int64_t q = 0; q < int64_t(d_img.data.size()); q++)
        if (pre.data[size_t(q)] <= T(0)) d_img.data[size_t(q)] = T(0);
    }
    ImageBatch<T> d_prev(nb, n, n, p.c_in);
    conv2d_backward(p, tape.cnn_in[size_t(i)], d_img, &d_prev,
                    grad ? &grad->cnn[size_t(i)] : nullptr);
    d_img = std::move(d_prev);
  }

  // Image -> leaf pixels -> U affine.
  TrunkBatch<T> d_leafpix(nb, ipow(4, L), s * s);
#pragma omp parallel for schedule(static)
  for (int b = 0; b < nb; b++) {
    const T* src = d_img.at(b);
    T* dst = d_leafpix.at(b);
    for (int64_t k = 0; k < d_leafpix.cells; k++) {
      int bi, bj;
      morton_coords(k, L, bi, bj);
      for (int rr = 0; rr < s; rr++)
        for (int cc = 0; cc < s; cc++)
          dst[k * d_leafpix.channels + rr * s + cc] = src[int64_t(bi * s + rr) * n + (bj * s + cc)];
    }
  }
  TrunkBatch<T> d_trunk(nb, tape.u_in.cells, tape.u_in.channels);
  patch_affine_backward(params.u, 1, tape.u_in, d_leafpix, &d_trunk, grad ? &grad->u : nullptr);

  // G chain, top level down to the middle.
  for (int l = L - 1; l >= h; l--) {
    const auto& p = params.g[size_t(l - h)];
    if (cfg.strict_butterfly) {
      PermIndex perm = perm_indices(cfg.grid, l, d_trunk.channels / int(ipow(4, L - l - 1)));
      TrunkBatch<T> permuted(nb, d_trunk.cells, d_trunk.channels);
      permute_batch(d_trunk, perm, permuted);
      d_trunk = std::move(permuted);
    }
    // Reinterpret [4^(l+1), c'] as [4^l, 4c'].
    TrunkBatch<T> d_wide;
    d_wide.batch = nb;
    d_wide.cells = d_trunk.cells / 4;
    d_wide.channels = d_trunk.channels * 4;
    d_wide.data = std::move(d_trunk.data);
    TrunkBatch<T> d_prev(nb, d_wide.cells, p.in_dim);
    patch_affine_backward(p, 1, tape.g_in[size_t(l - h)], d_wide, &d_prev,
                          grad ? &grad->g[size_t(l - h)] : nullptr);
    d_trunk = std::move(d_prev);
  }

  // Switch-resnet core.
  for (int i = cfg.n_rnn - 1; i >= 0; i--) {
    TrunkBatch<T> d_prev(nb, d_trunk.cells, d_trunk.channels);
    resnet_backward(params.resnet[size_t(i)], tape.resnet_in[size_t(i)],
                    tape.resnet_z[size_t(i)], d_trunk, &d_prev,
                    grad ? &grad->resnet[size_t(i)] : nullptr);
    d_trunk = std::move(d_prev);
  }
  {
    TrunkBatch<T> d_permuted(nb, d_trunk.cells, d_trunk.channels);
    patch_affine_backward(params.switch_mix, 1, tape.switch_in, d_trunk, &d_permuted,
                          grad ? &grad->switch_mix : nullptr);
    if (cfg.use_switch) {
      // The switch is an involution, so the same permutation is its own
      // gradient routing.
      PermIndex sw = switch_indices(cfg.grid, cfg.rho());
      TrunkBatch<T> d_unperm(nb, d_trunk.cells, d_trunk.channels);
      permute_batch(d_permuted, sw, d_unperm);
      d_trunk = std::move(d_unperm);
    } else {
      d_trunk = std::move(d_permuted);
    }
  }

  // H chain, middle back up to the top level; split off each band's branch.
  std::vector<TrunkBatch<T>> d_vout(size_t(cfg.band_count()));
  for (int l = h; l <= L - 1; l++) {
    const auto& p = params.h[size_t(L - 1 - l)];
    const auto& cat = tape.h_in[size_t(L - 1 - l)];
    TrunkBatch<T> d_cat(nb, cat.cells, cat.channels);
    patch_affine_backward(p, 4, cat, d_trunk, &d_cat, grad ? &grad->h[size_t(L - 1 - l)] : nullptr);
    const size_t idx = size_t(l - h);
    TrunkBatch<T> d_trunk_part(nb, cat.cells, cfg.channels(l + 1));
    if (cfg.n_omega(l) > 0) {
      TrunkBatch<T> d_up(nb, cat.cells, 2 * cfg.rank * cfg.n_omega(l));
      split_channels(d_cat, d_trunk_part, d_up);
      d_vout[idx] = TrunkBatch<T>(nb, ipow(4, l), d_up.channels);
      downsum4(d_up, d_vout[idx]);
    } else {
      d_trunk_part.data = std::move(d_cat.data);
    }
    if (cfg.strict_butterfly) {
      PermIndex perm = perm_indices(cfg.grid, l, d_trunk_part.channels / int(ipow(4, L - l - 1)));
      PermIndex inv = invert_permutation(perm);
      TrunkBatch<T> d_unperm(nb, d_trunk_part.cells, d_trunk_part.channels);
      permute_batch(d_trunk_part, inv, d_unperm);
      d_trunk_part = std::move(d_unperm);
    }
    d_trunk = std::move(d_trunk_part);
  }
  d_vout[size_t(L - h)] = std::move(d_trunk);  // gradient reaching V^L directly

  // V layers.
  for (int l = h; l <= L; l++) {
    const size_t idx = size_t(l - h);
    if (cfg.n_omega(l) == 0) continue;
    const auto& p = params.v[idx];
    TrunkBatch<T>* d_leaf = nullptr;
    TrunkBatch<T> d_leaf_store;
    if (d_input) {
      d_leaf_store = TrunkBatch<T>(nb, tape.input.leaf[idx].cells, tape.input.leaf[idx].channels);
      d_leaf = &d_leaf_store;
    }
    patch_affine_backward(p, int(ipow(4, L - l)), tape.input.leaf[idx], d_vout[idx], d_leaf,
                          grad ? &grad->v[idx] : nullptr);
    if (d_input) d_input->leaf[idx] = std::move(d_leaf_store);
  }
}

#define WBN_INSTANTIATE(T)                                                              \
  template struct WideBNetParams<T>;                                                    \
  template WideBNetParams<T> init_params<T>(const WideBNetConfig&, Rng&);               \
  template BandedBatch<T> format_banded_batch<T>(                                       \
      const WideBNetConfig&, const std::vector<std::vector<const std::complex<float>*>>&); \
  template ImageBatch<T> widebnet_forward<T>(const WideBNetParams<T>&,                  \
                                             const BandedBatch<T>&, Tape<T>*);          \
  template void widebnet_backward<T>(const WideBNetParams<T>&, const Tape<T>&,          \
                                     const ImageBatch<T>&, WideBNetParams<T>*,          \
                                     BandedBatch<T>*);

WBN_INSTANTIATE(float)
WBN_INSTANTIATE(double)
#undef WBN_INSTANTIATE

}  // namespace wbn
