#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <array>
#include <complex>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wbn/common.hpp"
#include "wbn/geometry.hpp"

namespace wbn {

// Squared slowness m = m0 + eta on a cell-centered n x n grid over
// [lo, hi]^2; pixel centers at lo + (k + 1/2) h, h = (hi - lo) / n.
struct Medium {
  GridD m0;
  GridD eta;
  double lo = -0.5, hi = 0.5;

  int n() const { return m0.rows; }
  double h() const { return (hi - lo) / n(); }
  double coord(int k) const { return lo + (k + 0.5) * h(); }
  void validate() const;
};

Medium homogeneous_medium(int n, double lo, double hi, double background = 1.0);

// Place an eta grid (defined over [src_lo, src_hi]^2) into the centre of a
// larger homogeneous medium; used for the extended point-source domain.
Medium embed_eta(const GridD& eta, double eta_lo, double eta_hi, int n_big, double big_lo,
                 double big_hi, double background = 1.0);

struct PmlSpec {
  int width = 0;          // cells; 0 = choose one wavelength at solve time
  double intensity = 80;  // sigma(d) = intensity * (d / W)^exponent
  int exponent = 2;
};

enum class SourceMode { PlaneWave, PointSource };

struct AcquisitionGeometry {
  int n_src = 80;
  int n_rcv = 80;
  double r_rcv = 0.5;
  double r_src = 1.0;  // point-source circle
  SourceMode mode = SourceMode::PlaneWave;

  std::array<double, 2> rcv_pos(int k) const {
    const double th = 2.0 * M_PI * k / n_rcv;
    return {r_rcv * std::cos(th), r_rcv * std::sin(th)};
  }
  std::array<double, 2> src_dir(int k) const {
    const double th = 2.0 * M_PI * k / n_src;
    return {std::cos(th), std::sin(th)};
  }
  std::array<double, 2> src_pos(int k) const {
    const double th = 2.0 * M_PI * k / n_src;
    return {r_src * std::cos(th), r_src * std::sin(th)};
  }
};

// Complex field on the PML-extended grid.
struct Field {
  int n_int = 0;  // medium cells per side
  int pad = 0;    // PML cells per side
  double lo = 0, hi = 0;
  std::vector<cplx> v;  // (n_int + 2 pad)^2 row-major, row = z index

  int n_ext() const { return n_int + 2 * pad; }
  double h() const { return (hi - lo) / n_int; }
  double coord(int k) const { return lo + (k - pad + 0.5) * h(); }
  cplx& at(int i, int j) { return v[size_t(i) * n_ext() + j]; }
  const cplx& at(int i, int j) const { return v[size_t(i) * n_ext() + j]; }
};

// Assembled PML-Helmholtz operator. `order` is the finite-difference order
// (2: conservative 5-point, 4: 9-point expanded form).
struct HelmholtzSystem {
  Eigen::SparseMatrix<cplx> A;
  int n_int = 0, pad = 0, order = 2;
  double lo = 0, hi = 0, omega = 0;

  int n_ext() const { return n_int + 2 * pad; }
  double h() const { return (hi - lo) / n_int; }
  double coord(int k) const { return lo + (k - pad + 0.5) * h(); }
  // gamma_x(x) = 1 + i sigma(x)/omega and its derivative
  cplx gamma(double x) const;
  cplx dgamma(double x) const;
  double sigma(double x) const;
  double dsigma(double x) const;
  double pml_intensity = 80;
  int pml_exponent = 2;

  Field wrap(std::vector<cplx> values) const;
};

HelmholtzSystem build_helmholtz_system(const Medium& med, double omega, int order,
                                       const PmlSpec& pml);

// Shared factorization for all sources at one frequency.
class HelmholtzSolver {
 public:
  explicit HelmholtzSolver(HelmholtzSystem sys);
  const HelmholtzSystem& system() const { return sys_; }
  Field solve(const std::vector<cplx>& rhs) const;
  // Column-per-source solves with one factorization.
  std::vector<Field> solve_many(const Eigen::MatrixXcd& rhs) const;

 private:
  HelmholtzSystem sys_;
  Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu_;
};

// Scattered field for an incoming plane wave exp(i w s.x): solves
// (Delta + w^2 (m0 + eta)) u_sc = -w^2 eta exp(i w s.x).
Field solve_scattered_planewave(const Medium& med, double omega, std::array<double, 2> s_dir,
                                int order, const PmlSpec& pml);
Field planewave_rhs_solve(const HelmholtzSolver& solver, const Medium& med,
                          std::array<double, 2> s_dir);

// Scattered field for a grid delta at src: difference of the solves with and
// without the perturbation. Both factorizations are exposed for reuse.
Field solve_scattered_pointsource(const Medium& med, double omega, std::array<double, 2> src,
                                  int order, const PmlSpec& pml);
// Total field driven by a numerical Dirac delta (1/h^2 at nearest cell).
Field solve_pointsource_total(const HelmholtzSolver& solver, std::array<double, 2> src);

// Radiating 2D Helmholtz Green's function (i/4) H0^(1)(w |x-y|).
cplx analytic_greens(double omega, std::array<double, 2> x, std::array<double, 2> y);
// Bessel functions via power series (z <= 12) and Hankel asymptotics beyond.
double bessel_j0(double z);
double bessel_y0(double z);

// Bilinear interpolation of the field at every receiver.
std::vector<cplx> sample_receivers(const Field& field, const AcquisitionGeometry& geom);

enum class ScattererShape { Square, Triangle, Gaussian };

struct Scatterer {
  ScattererShape shape = ScattererShape::Gaussian;
  double char_length_px = 2;  // side for square/triangle, std-dev for gaussian
  std::array<double, 2> center{0, 0};
  double rotation = 0;  // radians
  double amplitude = 0.2;
};

// Adds the scatterer into eta; overlaps accumulate.
void rasterize_scatterer(const Scatterer& sc, double lo, double hi, GridD& eta);

// Octave partition anchored at the highest frequency: band L covers
// (f_max/2, f_max], each lower level halves the band. Frequencies below the
// lowest band fall into level L/2 (with a warning counter).
struct BandMap {
  std::map<int, std::vector<int>> freq_indices;  // level -> indices into input
  int below_band_warnings = 0;
};
BandMap assign_bands(const std::vector<double>& freqs_hz, const GridSpec& spec);

struct ScattererDict {
  std::vector<ScattererShape> shapes{ScattererShape::Gaussian};
  std::vector<double> char_lengths_px{1, 2, 3};
  double amplitude = 0.2;
  std::vector<int> count_choices{2, 3, 4};
  double placement_radius = 0.35;
  bool rotate = false;
};

struct SimConfig {
  GridSpec grid;
  double lo = -0.5, hi = 0.5;
  double background_velocity = 1.0;
  std::vector<double> freqs_hz{2.5, 5.0, 10.0};
  AcquisitionGeometry geom;
  PmlSpec pml;
  ScattererDict dict;
  int fd_order_train = 2;
  int fd_order_test = 4;

  double omega(int i) const { return 2.0 * M_PI * freqs_hz[size_t(i)]; }
  // Default PML width: one wavelength at the lowest frequency.
  int pml_cells(double freq_lowest) const;
};

struct ScatterSample {
  GridF eta;  // n x n
  // bands[idx]: complex data [n_src][n_rcv][n_omega] for level L/2 + idx.
  std::vector<std::vector<std::complex<float>>> bands;
  std::vector<Scatterer> scatterers;
  uint64_t seed = 0;
  int n_src = 0, n_rcv = 0;
};

// Draws scatterers, solves every (frequency, source) pair with one
// factorization per frequency, samples receivers and bands the data.
ScatterSample generate_sample(Rng& rng, const SimConfig& cfg, int fd_order);

}  // namespace wbn
