#include "wbn/wavesim.hpp"

namespace wbn {

namespace {

constexpr double kEulerGamma = 0.5772156649015328606;
constexpr double kSeriesCut = 12.0;

// Hankel asymptotic expansion H0^(1)(z) ~ sqrt(2/(pi z)) e^{i(z - pi/4)}
// sum_k i^k a_k z^{-k}, a_k = ((2k-1)!!)^2 / (8^k k!). Truncated when terms
// stop decreasing; accurate to ~1e-14 for z >= 12.
cplx hankel0_asymptotic(double z) {
  cplx sum = 1.0, ik = 1.0;
  double a = 1.0, last = 1.0, zk = 1.0;
  for (int k = 1; k <= 40; k++) {
    a *= double(2 * k - 1) * (2 * k - 1) / (8.0 * k);
    zk *= z;
    ik *= cplx(0, 1);
    const double mag = a / zk;
    if (mag >= last) break;
    last = mag;
    sum += ik * a / zk;
    if (mag < 1e-17) break;
  }
  return std::sqrt(2.0 / (M_PI * z)) * std::polar(1.0, z - M_PI / 4.0) * sum;
}

}  // namespace

double bessel_j0(double z) {
  z = std::abs(z);
  if (z <= kSeriesCut) {
    // sum_k (-1)^k (z^2/4)^k / (k!)^2
    const double q = z * z / 4.0;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k <= 60; k++) {
      term *= -q / (double(k) * k);
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  return hankel0_asymptotic(z).real();
}

double bessel_y0(double z) {
  WBN_REQUIRE(z > 0, "bessel_y0: argument must be positive");
  if (z <= kSeriesCut) {
    // (2/pi)[(ln(z/2) + gamma) J0(z) + sum_k (-1)^{k+1} H_k (z^2/4)^k/(k!)^2]
    const double q = z * z / 4.0;
    double term = 1.0, harmonic = 0.0, sum = 0.0;
    for (int k = 1; k <= 60; k++) {
      term *= -q / (double(k) * k);
      harmonic += 1.0 / k;
      const double add = -term * harmonic;
      sum += add;
      if (std::abs(add) < 1e-18 * (std::abs(sum) + 1)) break;
    }
    return 2.0 / M_PI * ((std::log(z / 2.0) + kEulerGamma) * bessel_j0(z) + sum);
  }
  return hankel0_asymptotic(z).imag();
}

cplx analytic_greens(double omega, std::array<double, 2> x, std::array<double, 2> y) {
  WBN_REQUIRE(omega > 0, "analytic_greens: omega must be positive");
  const double dx = x[0] - y[0], dz = x[1] - y[1];
  const double dist = std::sqrt(dx * dx + dz * dz);
  WBN_REQUIRE(dist > 0, "analytic_greens: evaluation at the source singularity");
  const double z = omega * dist;
  return cplx(0, 0.25) * cplx(bessel_j0(z), bessel_y0(z));
}

}  // namespace wbn
