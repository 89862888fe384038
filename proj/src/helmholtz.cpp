#include <iostream>

#include "wbn/wavesim.hpp"

namespace wbn {

void Medium::validate() const {
  WBN_REQUIRE(m0.rows == m0.cols && m0.rows > 0, "Medium: m0 must be a square grid");
  WBN_REQUIRE(eta.rows == m0.rows && eta.cols == m0.cols, "Medium: eta/m0 shape mismatch");
  WBN_REQUIRE(hi > lo, "Medium: empty extent");
  for (double v : m0.v) WBN_REQUIRE(v > 0, "Medium: background squared slowness must be positive");
}

Medium homogeneous_medium(int n, double lo, double hi, double background) {
  Medium med;
  med.m0 = GridD(n, n, background);
  med.eta = GridD(n, n, 0.0);
  med.lo = lo;
  med.hi = hi;
  return med;
}

Medium embed_eta(const GridD& eta, double eta_lo, double eta_hi, int n_big, double big_lo,
                 double big_hi, double background) {
  Medium med = homogeneous_medium(n_big, big_lo, big_hi, background);
  const double h_small = (eta_hi - eta_lo) / eta.rows;
  WBN_REQUIRE(std::abs(med.h() - h_small) < 1e-12 * h_small,
              "embed_eta: grid spacings must match");
  // Align pixel centers of the small grid with the big one.
  const int off = int(std::lround((eta_lo - big_lo) / h_small));
  WBN_REQUIRE(off >= 0 && off + eta.rows <= n_big, "embed_eta: small grid does not fit");
  for (int i = 0; i < eta.rows; i++)
    for (int j = 0; j < eta.cols; j++) med.eta(off + i, off + j) = eta(i, j);
  return med;
}

double HelmholtzSystem::sigma(double x) const {
  const double w = pad * h();
  if (w <= 0) return 0;
  double d = 0;
  if (x < lo) d = lo - x;
  else if (x > hi) d = x - hi;
  else return 0;
  return pml_intensity * std::pow(d / w, pml_exponent);
}

double HelmholtzSystem::dsigma(double x) const {
  const double w = pad * h();
  if (w <= 0) return 0;
  if (x < lo) {
    const double d = lo - x;
    return -pml_intensity * pml_exponent * std::pow(d, pml_exponent - 1) / std::pow(w, pml_exponent);
  }
  if (x > hi) {
    const double d = x - hi;
    return pml_intensity * pml_exponent * std::pow(d, pml_exponent - 1) / std::pow(w, pml_exponent);
  }
  return 0;
}

cplx HelmholtzSystem::gamma(double x) const {
  if (omega <= 0) return 1.0;  // stretching is frequency-scaled; inert at omega = 0
  return cplx(1.0, sigma(x) / omega);
}

cplx HelmholtzSystem::dgamma(double x) const {
  if (omega <= 0) return 0.0;
  return cplx(0.0, dsigma(x) / omega);
}

Field HelmholtzSystem::wrap(std::vector<cplx> values) const {
  Field f;
  f.n_int = n_int;
  f.pad = pad;
  f.lo = lo;
  f.hi = hi;
  f.v = std::move(values);
  return f;
}

HelmholtzSystem build_helmholtz_system(const Medium& med, double omega, int order,
                                       const PmlSpec& pml) {
  med.validate();
  WBN_REQUIRE(order == 2 || order == 4, "build_helmholtz_system: order must be 2 or 4");
  WBN_REQUIRE(omega >= 0, "build_helmholtz_system: negative frequency");
  WBN_REQUIRE(pml.width >= 1, "build_helmholtz_system: PML width must be at least one cell");

  HelmholtzSystem sys;
  sys.n_int = med.n();
  sys.pad = pml.width;
  sys.lo = med.lo;
  sys.hi = med.hi;
  sys.omega = omega;
  sys.order = order;
  sys.pml_intensity = pml.intensity;
  sys.pml_exponent = pml.exponent;

  const int ne = sys.n_ext();
  const double h = sys.h();
  if (omega > 0) {
    double m_max = 0;
    for (size_t q = 0; q < med.m0.v.size(); q++)
      m_max = std::max(m_max, med.m0.v[q] + med.eta.v[q]);
    const double ppw = 2.0 * M_PI / (omega * std::sqrt(m_max) * h);
    if (ppw < 4.0)
      std::cerr << "warning: Helmholtz grid under-resolved (" << ppw
                << " points per wavelength)\n";
  }

  // m extended by edge replication; eta is zero outside the medium block.
  auto m_at = [&](int i, int j) {
    const int ii = std::clamp(i - sys.pad, 0, sys.n_int - 1);
    const int jj = std::clamp(j - sys.pad, 0, sys.n_int - 1);
    double m = med.m0(ii, jj);
    if (i >= sys.pad && i < sys.pad + sys.n_int && j >= sys.pad && j < sys.pad + sys.n_int)
      m += med.eta(i - sys.pad, j - sys.pad);
    return m;
  };

  std::vector<Eigen::Triplet<cplx>> trips;
  trips.reserve(size_t(ne) * ne * (order == 2 ? 5 : 9));
  auto idx = [&](int i, int j) { return i * ne + j; };

  for (int i = 0; i < ne; i++) {
    for (int j = 0; j < ne; j++) {
      const int row = idx(i, j);
      const bool boundary = i == 0 || j == 0 || i == ne - 1 || j == ne - 1;
      if (boundary) {
        trips.emplace_back(row, row, cplx(1.0, 0.0));  // homogeneous Dirichlet rows
        continue;
      }
      const double x = sys.coord(j), z = sys.coord(i);
      const cplx gx = sys.gamma(x), gz = sys.gamma(z);
      const cplx mass = omega * omega * m_at(i, j) * gx * gz;
      const bool wide_ok = i >= 2 && j >= 2 && i < ne - 2 && j < ne - 2;
      if (order == 4 && wide_ok) {
        // Expanded form a u_xx + a' u_x with analytic PML coefficients and
        // 4th-order central stencils.
        const cplx ax = gz / gx, az = gx / gz;
        const cplx dax = -gz * sys.dgamma(x) / (gx * gx);
        const cplx daz = -gx * sys.dgamma(z) / (gz * gz);
        const double h2 = h * h;
        const double c2[5] = {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12};
        const double c1[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
        cplx diag = mass;
        for (int t = -2; t <= 2; t++) {
          if (t == 0) {
            diag += ax * c2[2] / h2 + az * c2[2] / h2;
            continue;
          }
          trips.emplace_back(row, idx(i, j + t), ax * c2[t + 2] / h2 + dax * c1[t + 2] / h);
          trips.emplace_back(row, idx(i + t, j), az * c2[t + 2] / h2 + daz * c1[t + 2] / h);
        }
        trips.emplace_back(row, row, diag);
      } else {
        // Conservative midpoint form; complex-symmetric everywhere.
        const cplx ax_p = sys.gamma(z) / sys.gamma(x + 0.5 * h);
        const cplx ax_m = sys.gamma(z) / sys.gamma(x - 0.5 * h);
        const cplx az_p = sys.gamma(x) / sys.gamma(z + 0.5 * h);
        const cplx az_m = sys.gamma(x) / sys.gamma(z - 0.5 * h);
        const double h2 = h * h;
        trips.emplace_back(row, idx(i, j + 1), ax_p / h2);
        trips.emplace_back(row, idx(i, j - 1), ax_m / h2);
        trips.emplace_back(row, idx(i + 1, j), az_p / h2);
        trips.emplace_back(row, idx(i - 1, j), az_m / h2);
        trips.emplace_back(row, row, mass - (ax_p + ax_m + az_p + az_m) / h2);
      }
    }
  }
  sys.A.resize(ne * ne, ne * ne);
  sys.A.setFromTriplets(trips.begin(), trips.end());
  sys.A.makeCompressed();
  return sys;
}

HelmholtzSolver::HelmholtzSolver(HelmholtzSystem sys) : sys_(std::move(sys)) {
  lu_.compute(sys_.A);
  WBN_ENSURE(lu_.info() == Eigen::Success, "HelmholtzSolver: factorization failed");
}

Field HelmholtzSolver::solve(const std::vector<cplx>& rhs) const {
  WBN_REQUIRE(int64_t(rhs.size()) == sys_.A.rows(), "HelmholtzSolver: rhs size mismatch");
  Eigen::Map<const Eigen::VectorXcd> b(rhs.data(), int64_t(rhs.size()));
  Eigen::VectorXcd x = lu_.solve(b);
  WBN_ENSURE(lu_.info() == Eigen::Success, "HelmholtzSolver: solve failed");
  const double resid = (sys_.A * x - b).norm();
  const double bn = b.norm();
  if (bn > 0 && resid > 1e-8 * bn)
    fail_runtime("HelmholtzSolver: solve residual " + std::to_string(resid / bn));
  return sys_.wrap(std::vector<cplx>(x.data(), x.data() + x.size()));
}

std::vector<Field> HelmholtzSolver::solve_many(const Eigen::MatrixXcd& rhs) const {
  WBN_REQUIRE(rhs.rows() == sys_.A.rows(), "HelmholtzSolver: rhs size mismatch");
  Eigen::MatrixXcd x = lu_.solve(rhs);
  WBN_ENSURE(lu_.info() == Eigen::Success, "HelmholtzSolver: solve failed");
  std::vector<Field> out;
  out.reserve(size_t(rhs.cols()));
  for (int c = 0; c < rhs.cols(); c++)
    out.push_back(sys_.wrap(std::vector<cplx>(x.col(c).data(), x.col(c).data() + x.rows())));
  return out;
}

Field planewave_rhs_solve(const HelmholtzSolver& solver, const Medium& med,
                          std::array<double, 2> s_dir) {
  const double norm = std::hypot(s_dir[0], s_dir[1]);
  WBN_REQUIRE(std::abs(norm - 1.0) < 1e-9, "plane wave direction must be a unit vector");
  const HelmholtzSystem& sys = solver.system();
  const int ne = sys.n_ext();
  const double w = sys.omega;
  std::vector<cplx> rhs(size_t(ne) * ne, 0.0);
  for (int i = 0; i < med.n(); i++)
    for (int j = 0; j < med.n(); j++) {
      const double e = med.eta(i, j);
      if (e == 0.0) continue;
      const double x = med.coord(j), z = med.coord(i);
      const cplx inc = std::polar(1.0, w * (s_dir[0] * x + s_dir[1] * z));
      // RHS of the stretched equation carries the gamma Jacobian (identity here
      // since eta vanishes inside the PML, kept for form).
      rhs[size_t(i + sys.pad) * ne + (j + sys.pad)] =
          -w * w * e * inc * sys.gamma(x) * sys.gamma(z);
    }
  return solver.solve(rhs);
}

Field solve_scattered_planewave(const Medium& med, double omega, std::array<double, 2> s_dir,
                                int order, const PmlSpec& pml) {
  HelmholtzSolver solver(build_helmholtz_system(med, omega, order, pml));
  return planewave_rhs_solve(solver, med, s_dir);
}

Field solve_pointsource_total(const HelmholtzSolver& solver, std::array<double, 2> src) {
  const HelmholtzSystem& sys = solver.system();
  const int ne = sys.n_ext();
  const double h = sys.h();
  const int j = int(std::floor((src[0] - sys.lo) / h)) + sys.pad;
  const int i = int(std::floor((src[1] - sys.lo) / h)) + sys.pad;
  WBN_REQUIRE(i >= 1 && j >= 1 && i < ne - 1 && j < ne - 1,
              "solve_pointsource_total: source outside the domain");
  std::vector<cplx> rhs(size_t(ne) * ne, 0.0);
  // Numerical Dirac delta: unit impulse scaled by 1/h^2. Sign follows
  // (Delta + w^2 m) u = -delta, matching the radiating Green's function.
  rhs[size_t(i) * ne + j] = -1.0 / (h * h);
  return solver.solve(rhs);
}

Field solve_scattered_pointsource(const Medium& med, double omega, std::array<double, 2> src,
                                  int order, const PmlSpec& pml) {
  Medium bare = med;
  bare.eta = GridD(med.n(), med.n(), 0.0);
  HelmholtzSolver with(build_helmholtz_system(med, omega, order, pml));
  HelmholtzSolver without(build_helmholtz_system(bare, omega, order, pml));
  Field a = solve_pointsource_total(with, src);
  const Field b = solve_pointsource_total(without, src);
  for (size_t q = 0; q < a.v.size(); q++) a.v[q] -= b.v[q];
  return a;
}

std::vector<cplx> sample_receivers(const Field& field, const AcquisitionGeometry& geom) {
  std::vector<cplx> out(size_t(geom.n_rcv));
  const int ne = field.n_ext();
  const double h = field.h();
  const double x0 = field.lo + (0.5 - field.pad) * h;  // center of pixel (0,0)
  for (int k = 0; k < geom.n_rcv; k++) {
    const auto [x, z] = geom.rcv_pos(k);
    const double fj = (x - x0) / h, fi = (z - x0) / h;
    const int j = int(std::floor(fj)), i = int(std::floor(fi));
    WBN_REQUIRE(i >= 0 && j >= 0 && i + 1 < ne && j + 1 < ne,
                "sample_receivers: receiver outside the grid");
    const double tx = fj - j, tz = fi - i;
    out[size_t(k)] = (1 - tz) * ((1 - tx) * field.at(i, j) + tx * field.at(i, j + 1)) +
                     tz * ((1 - tx) * field.at(i + 1, j) + tx * field.at(i + 1, j + 1));
  }
  return out;
}

}  // namespace wbn
