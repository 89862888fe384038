#pragma once

#include <Eigen/Dense>

#include "wbn/common.hpp"
#include "wbn/wavesim.hpp"

namespace wbn {

// Linearized far-field forward operator at one frequency. Entry
// ((s,r), y) = c(w) * exp(i w (s - r).y) * dx dz with the full radiating
// far-field constant c(w) = w^2 (e^{i pi/4}/4) sqrt(2/(pi w)) e^{i w R}/sqrt(R),
// so its output is directly comparable to the PDE solver in the Born regime.
class FarFieldOperator {
 public:
  FarFieldOperator(double omega, int n, double lo, double hi, const AcquisitionGeometry& geom,
                   int64_t dense_cap = int64_t(1) << 27);

  double omega() const { return omega_; }
  int n_pix() const { return n_ * n_; }
  int n_src() const { return geom_.n_src; }
  int n_rcv() const { return geom_.n_rcv; }
  cplx constant() const { return c0_; }

  // Lambda(s, r) = sum_y M((s,r), y) eta(y); eta is the real n x n grid.
  Eigen::MatrixXcd apply(const Eigen::VectorXd& eta) const;
  // Complex adjoint: (F^H Lambda)(y); used by tests and the normal equations.
  Eigen::VectorXcd adjoint(const Eigen::MatrixXcd& lambda) const;

  // Dense [n_src*n_rcv, n_pix] matrix; throws past the configured cap.
  Eigen::MatrixXcd dense() const;

 private:
  double omega_;
  int n_;
  double lo_, hi_, h_;
  AcquisitionGeometry geom_;
  cplx c0_;
  Eigen::MatrixXcd src_phase_;  // [n_src, n_pix]  e^{ i w s.y }
  Eigen::MatrixXcd rcv_phase_;  // [n_rcv, n_pix]  e^{ -i w r.y }
  int64_t dense_cap_;
};

// (F*F + eps I)^-1 F* Lambda by conjugate gradients on the (real) normal
// equations. Relative residual target `tol`, iteration cap `max_iter`.
struct TikhonovOptions {
  double eps = 1.0;
  double tol = 1e-3;
  int max_iter = 500;
};

GridD tikhonov_image(const Eigen::MatrixXcd& lambda, const FarFieldOperator& op,
                     const TikhonovOptions& opt);

// Weighted sum of per-frequency Tikhonov images (the imaging condition).
GridD multifreq_image(const std::vector<Eigen::MatrixXcd>& lambdas,
                      const std::vector<const FarFieldOperator*>& ops,
                      const TikhonovOptions& opt, const std::vector<double>& weights);

}  // namespace wbn
