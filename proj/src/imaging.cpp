#include "wbn/imaging.hpp"

namespace wbn {

FarFieldOperator::FarFieldOperator(double omega, int n, double lo, double hi,
                                   const AcquisitionGeometry& geom, int64_t dense_cap)
    : omega_(omega), n_(n), lo_(lo), hi_(hi), h_((hi - lo) / n), geom_(geom),
      dense_cap_(dense_cap) {
  WBN_REQUIRE(omega > 0, "FarFieldOperator: omega must be positive");
  WBN_REQUIRE(geom.mode == SourceMode::PlaneWave,
              "FarFieldOperator: requires plane-wave geometry");
  const double R = geom.r_rcv;
  // Far-field limit of w^2 (i/4) H0^(1)(w |Rr - y|):
  //   w^2 (1/4) sqrt(2/(pi w)) e^{i pi/4} e^{i w R}/sqrt(R) e^{-i w r.y}.
  c0_ = omega * omega * 0.25 * std::sqrt(2.0 / (M_PI * omega)) *
        std::polar(1.0, M_PI / 4.0 + omega * R) / std::sqrt(R) * (h_ * h_);
  src_phase_.resize(geom.n_src, int64_t(n) * n);
  rcv_phase_.resize(geom.n_rcv, int64_t(n) * n);
  for (int p = 0; p < n * n; p++) {
    const double x = lo_ + (p % n + 0.5) * h_;
    const double z = lo_ + (p / n + 0.5) * h_;
    for (int s = 0; s < geom.n_src; s++) {
      const auto d = geom.src_dir(s);
      src_phase_(s, p) = std::polar(1.0, omega * (d[0] * x + d[1] * z));
    }
    for (int r = 0; r < geom.n_rcv; r++) {
      const auto d = geom.src_dir(r);  // receiver directions share the angles
      rcv_phase_(r, p) = std::polar(1.0, -omega * (d[0] * x + d[1] * z));
    }
  }
}

Eigen::MatrixXcd FarFieldOperator::apply(const Eigen::VectorXd& eta) const {
  WBN_REQUIRE(eta.size() == n_pix(), "FarFieldOperator::apply: grid size mismatch");
  Eigen::MatrixXcd weighted = src_phase_ * eta.cast<cplx>().asDiagonal();
  return c0_ * (weighted * rcv_phase_.transpose());
}

Eigen::VectorXcd FarFieldOperator::adjoint(const Eigen::MatrixXcd& lambda) const {
  WBN_REQUIRE(lambda.rows() == geom_.n_src && lambda.cols() == geom_.n_rcv,
              "FarFieldOperator::adjoint: data shape mismatch");
  // (F^H L)(y) = conj(c0) sum_{s,r} conj(a_sy) conj(b_ry) L_sr
  Eigen::MatrixXcd tmp = lambda * rcv_phase_.conjugate();      // [n_src, n_pix]
  Eigen::VectorXcd out = (src_phase_.conjugate().array() * tmp.array()).colwise().sum();
  return std::conj(c0_) * out;
}

Eigen::MatrixXcd FarFieldOperator::dense() const {
  const int64_t total = int64_t(geom_.n_src) * geom_.n_rcv * n_pix();
  WBN_REQUIRE(total <= dense_cap_, "FarFieldOperator::dense: matrix exceeds memory cap");
  Eigen::MatrixXcd M(int64_t(geom_.n_src) * geom_.n_rcv, n_pix());
  for (int s = 0; s < geom_.n_src; s++)
    for (int r = 0; r < geom_.n_rcv; r++)
      M.row(int64_t(s) * geom_.n_rcv + r) =
          c0_ * (src_phase_.row(s).array() * rcv_phase_.row(r).array()).matrix();
  return M;
}

GridD tikhonov_image(const Eigen::MatrixXcd& lambda, const FarFieldOperator& op,
                     const TikhonovOptions& opt) {
  WBN_REQUIRE(opt.eps > 0, "tikhonov_image: regularization must be positive");
  const int npix = op.n_pix();
  // CG on N(x) = Re(F^H F x) + eps x, rhs = Re(F^H Lambda).
  auto normal_op = [&](const Eigen::VectorXd& x) {
    return (op.adjoint(op.apply(x)).real() + opt.eps * x).eval();
  };
  Eigen::VectorXd rhs = op.adjoint(lambda).real();
  const double rhs_norm = rhs.norm();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(npix);
  if (rhs_norm == 0) {
    const int n = int(std::lround(std::sqrt(double(npix))));
    GridD img(n, n, 0.0);
    return img;
  }
  Eigen::VectorXd r = rhs, p = rhs;
  double rr = r.squaredNorm();
  int it = 0;
  for (; it < opt.max_iter; it++) {
    if (std::sqrt(rr) <= opt.tol * rhs_norm) break;
    Eigen::VectorXd Ap = normal_op(p);
    const double alpha = rr / p.dot(Ap);
    x += alpha * p;
    r -= alpha * Ap;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  if (std::sqrt(rr) > opt.tol * rhs_norm)
    fail_runtime("tikhonov_image: CG did not converge, residual " +
                 std::to_string(std::sqrt(rr) / rhs_norm));
  const int n = int(std::lround(std::sqrt(double(npix))));
  GridD img(n, n);
  for (int q = 0; q < npix; q++) img.v[size_t(q)] = x(q);
  return img;
}

GridD multifreq_image(const std::vector<Eigen::MatrixXcd>& lambdas,
                      const std::vector<const FarFieldOperator*>& ops,
                      const TikhonovOptions& opt, const std::vector<double>& weights) {
  WBN_REQUIRE(lambdas.size() == ops.size() && weights.size() == ops.size(),
              "multifreq_image: bands, operators and weights must align");
  WBN_REQUIRE(!ops.empty(), "multifreq_image: no frequencies");
  for (double w : weights) WBN_REQUIRE(w >= 0, "multifreq_image: negative weight");
  GridD acc;
  // Fixed summation order keeps the result deterministic.
  for (size_t i = 0; i < ops.size(); i++) {
    GridD img = tikhonov_image(lambdas[i], *ops[i], opt);
    if (acc.rows == 0) acc = GridD(img.rows, img.cols, 0.0);
    for (size_t q = 0; q < img.v.size(); q++) acc.v[q] += weights[i] * img.v[q];
  }
  return acc;
}

}  // namespace wbn
