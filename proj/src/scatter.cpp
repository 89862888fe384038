#include <algorithm>
#include <cmath>

#include "wbn/wavesim.hpp"

namespace wbn {

void rasterize_scatterer(const Scatterer& sc, double lo, double hi, GridD& eta) {
  const int n = eta.rows;
  const double h = (hi - lo) / n;
  const double len = sc.char_length_px * h;  // lengths are given in pixels
  const double cx = sc.center[0], cz = sc.center[1];
  const double ct = std::cos(sc.rotation), st = std::sin(sc.rotation);
  auto to_local = [&](double x, double z, double& u, double& v) {
    const double dx = x - cx, dz = z - cz;
    u = ct * dx + st * dz;  // rotate by -rotation
    v = -st * dx + ct * dz;
  };
  switch (sc.shape) {
    case ScattererShape::Square: {
      for (int i = 0; i < n; i++)
        for (int j = 0; j < n; j++) {
          double u, v;
          to_local(lo + (j + 0.5) * h, lo + (i + 0.5) * h, u, v);
          if (std::abs(u) <= len / 2 && std::abs(v) <= len / 2) eta(i, j) += sc.amplitude;
        }
      break;
    }
    case ScattererShape::Triangle: {
      // Isoceles with horizontal base `len`, apex up, centroid at the center;
      // height chosen equilateral.
      const double hg = len * std::sqrt(3.0) / 2.0;
      const double ax = 0, az = 2 * hg / 3;                    // apex
      const double bx = -len / 2, bz = -hg / 3;                // base left
      const double dx_ = len / 2, dz = -hg / 3;                // base right
      auto side = [](double px, double pz, double qx, double qz, double rx, double rz) {
        return (qx - px) * (rz - pz) - (qz - pz) * (rx - px);
      };
      for (int i = 0; i < n; i++)
        for (int j = 0; j < n; j++) {
          double u, v;
          to_local(lo + (j + 0.5) * h, lo + (i + 0.5) * h, u, v);
          const double s1 = side(ax, az, bx, bz, u, v);
          const double s2 = side(bx, bz, dx_, dz, u, v);
          const double s3 = side(dx_, dz, ax, az, u, v);
          const bool neg = s1 < 0 || s2 < 0 || s3 < 0;
          const bool pos = s1 > 0 || s2 > 0 || s3 > 0;
          if (!(neg && pos)) eta(i, j) += sc.amplitude;
        }
      break;
    }
    case ScattererShape::Gaussian: {
      const double sig = len;
      const double cut = 6.0 * sig;
      const int j0 = std::max(0, int((cx - cut - lo) / h) - 1);
      const int j1 = std::min(n - 1, int((cx + cut - lo) / h) + 1);
      const int i0 = std::max(0, int((cz - cut - lo) / h) - 1);
      const int i1 = std::min(n - 1, int((cz + cut - lo) / h) + 1);
      for (int i = i0; i <= i1; i++)
        for (int j = j0; j <= j1; j++) {
          const double x = lo + (j + 0.5) * h, z = lo + (i + 0.5) * h;
          const double d2 = (x - cx) * (x - cx) + (z - cz) * (z - cz);
          eta(i, j) += sc.amplitude * std::exp(-d2 / (2 * sig * sig));
        }
      break;
    }
  }
}

BandMap assign_bands(const std::vector<double>& freqs_hz, const GridSpec& spec) {
  spec.validate();
  WBN_REQUIRE(!freqs_hz.empty(), "assign_bands: no frequencies");
  for (size_t i = 0; i < freqs_hz.size(); i++) {
    WBN_REQUIRE(freqs_hz[i] > 0, "assign_bands: frequencies must be positive");
    if (i) WBN_REQUIRE(freqs_hz[i] >= freqs_hz[i - 1], "assign_bands: frequencies must be sorted");
  }
  const int L = spec.levels, h = L / 2;
  const double fmax = freqs_hz.back();
  BandMap map;
  for (int l = h; l <= L; l++) map.freq_indices[l] = {};
  for (size_t i = 0; i < freqs_hz.size(); i++) {
    // Band l covers (fmax 2^(l-L-1), fmax 2^(l-L)]; the top band owns fmax.
    const int k = int(std::floor(std::log2(fmax / freqs_hz[i]) + 1e-9));
    int level = L - k;
    if (level < h) {
      level = h;
      map.below_band_warnings++;
    }
    map.freq_indices[level].push_back(int(i));
  }
  return map;
}

int SimConfig::pml_cells(double freq_lowest) const {
  const double lambda = background_velocity / freq_lowest;
  const double h = (hi - lo) / grid.side();
  return std::max(1, int(std::ceil(lambda / h)));
}

ScatterSample generate_sample(Rng& rng, const SimConfig& cfg, int fd_order) {
  cfg.grid.validate();
  WBN_REQUIRE(!cfg.dict.shapes.empty() && !cfg.dict.count_choices.empty(),
              "generate_sample: empty scatterer dictionary");
  const int n = cfg.grid.side();
  ScatterSample sample;
  sample.seed = rng.state();

  // Draw order is fixed: count, then per scatterer shape, length, radius,
  // angle, rotation.
  const int count = cfg.dict.count_choices[size_t(rng.uniform_index(cfg.dict.count_choices.size()))];
  GridD eta(n, n, 0.0);
  for (int c = 0; c < count; c++) {
    Scatterer sc;
    sc.shape = cfg.dict.shapes[size_t(rng.uniform_index(cfg.dict.shapes.size()))];
    sc.char_length_px =
        cfg.dict.char_lengths_px[size_t(rng.uniform_index(cfg.dict.char_lengths_px.size()))];
    const double rad = cfg.dict.placement_radius * std::sqrt(rng.uniform());
    const double ang = rng.uniform(0, 2 * M_PI);
    sc.center = {rad * std::cos(ang), rad * std::sin(ang)};
    sc.rotation = cfg.dict.rotate ? rng.uniform(0, 2 * M_PI) : 0.0;
    sc.amplitude = cfg.dict.amplitude;
    rasterize_scatterer(sc, cfg.lo, cfg.hi, eta);
    sample.scatterers.push_back(sc);
  }

  const double m_bg = 1.0 / (cfg.background_velocity * cfg.background_velocity);
  PmlSpec pml = cfg.pml;
  if (pml.width <= 0) pml.width = cfg.pml_cells(cfg.freqs_hz.front());

  Medium med;
  if (cfg.geom.mode == SourceMode::PlaneWave) {
    med = homogeneous_medium(n, cfg.lo, cfg.hi, m_bg);
    med.eta = eta;
  } else {
    // Point sources live on the r_src circle; double the box so they fit.
    const double h = (cfg.hi - cfg.lo) / n;
    const double big_lo = 2 * cfg.lo, big_hi = 2 * cfg.hi;
    const int n_big = int(std::lround((big_hi - big_lo) / h));
    med = embed_eta(eta, cfg.lo, cfg.hi, n_big, big_lo, big_hi, m_bg);
  }

  BandMap bands = assign_bands(cfg.freqs_hz, cfg.grid);
  const int L = cfg.grid.levels, half = L / 2;
  sample.bands.assign(size_t(half + 1), {});

  for (int level = half; level <= L; level++) {
    const auto& idxs = bands.freq_indices[level];
    auto& dst = sample.bands[size_t(level - half)];
    dst.assign(size_t(cfg.geom.n_src) * cfg.geom.n_rcv * idxs.size(), {});
    for (size_t fi = 0; fi < idxs.size(); fi++) {
      const double omega = cfg.omega(idxs[fi]);
      if (cfg.geom.mode == SourceMode::PlaneWave) {
        HelmholtzSolver solver(build_helmholtz_system(med, omega, fd_order, pml));
        const HelmholtzSystem& sys = solver.system();
        const int ne = sys.n_ext();
        Eigen::MatrixXcd rhs = Eigen::MatrixXcd::Zero(int64_t(ne) * ne, cfg.geom.n_src);
        for (int s = 0; s < cfg.geom.n_src; s++) {
          const auto dir = cfg.geom.src_dir(s);
          for (int i = 0; i < n; i++)
            for (int j = 0; j < n; j++) {
              const double e = med.eta(i, j);
              if (e == 0.0) continue;
              const double x = med.coord(j), z = med.coord(i);
              rhs(int64_t(i + sys.pad) * ne + (j + sys.pad), s) =
                  -omega * omega * e * std::polar(1.0, omega * (dir[0] * x + dir[1] * z));
            }
        }
        std::vector<Field> fields = solver.solve_many(rhs);
        for (int s = 0; s < cfg.geom.n_src; s++) {
          std::vector<cplx> rec = sample_receivers(fields[size_t(s)], cfg.geom);
          for (int r = 0; r < cfg.geom.n_rcv; r++)
            dst[(size_t(s) * cfg.geom.n_rcv + r) * idxs.size() + fi] =
                std::complex<float>(float(rec[size_t(r)].real()), float(rec[size_t(r)].imag()));
        }
      } else {
        Medium bare = med;
        bare.eta = GridD(med.n(), med.n(), 0.0);
        HelmholtzSolver with(build_helmholtz_system(med, omega, fd_order, pml));
        HelmholtzSolver without(build_helmholtz_system(bare, omega, fd_order, pml));
        for (int s = 0; s < cfg.geom.n_src; s++) {
          Field a = solve_pointsource_total(with, cfg.geom.src_pos(s));
          const Field b = solve_pointsource_total(without, cfg.geom.src_pos(s));
          for (size_t q = 0; q < a.v.size(); q++) a.v[q] -= b.v[q];
          std::vector<cplx> rec = sample_receivers(a, cfg.geom);
          for (int r = 0; r < cfg.geom.n_rcv; r++)
            dst[(size_t(s) * cfg.geom.n_rcv + r) * idxs.size() + fi] =
                std::complex<float>(float(rec[size_t(r)].real()), float(rec[size_t(r)].imag()));
        }
      }
    }
  }

  sample.eta = GridF(n, n);
  for (size_t q = 0; q < eta.v.size(); q++) sample.eta.v[q] = float(eta.v[q]);
  sample.n_src = cfg.geom.n_src;
  sample.n_rcv = cfg.geom.n_rcv;
  return sample;
}

}  // namespace wbn
