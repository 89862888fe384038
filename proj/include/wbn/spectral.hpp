#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "wbn/common.hpp"

namespace wbn {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

// O(N^2) reference transform: x_hat(k) = sum_n x_n exp(-2*pi*i*n*k/N).
std::vector<cplx> naive_dft(const std::vector<cplx>& x);

// Radix-2 decimation-in-time FFT. Splits into even/odd halves and merges via
//   x_hat(k)       = e_hat(k) + w^k o_hat(k)
//   x_hat(k + N/2) = e_hat(k) - w^k o_hat(k),  w = exp(-2*pi*i/N).
// N must be a power of two.
std::vector<cplx> fft_radix2(const std::vector<cplx>& x);

// Number of singular values exceeding eps * sigma_max(M); 0 for a zero matrix.
int epsilon_rank(const CMat& M, double eps);

// Epsilon-ranks of every dyadic block over all complementary partitions:
// level p splits rows into 2^p blocks and columns into 2^(levels-p) blocks.
struct RankProfile {
  int levels = 0;
  double eps = 0;
  // ranks[p] is a (2^p) x (2^(levels-p)) row-major table.
  std::vector<std::vector<int>> ranks;
  std::vector<int> max_per_level;
  std::vector<int> min_per_level;
};

RankProfile complementary_rank_profile(const CMat& M, int levels, double eps);

// CSV rows: level, block_row, block_col, rank.
void write_rank_profile_csv(const RankProfile& p, std::ostream& os);

// Two-sided butterfly factorization of an N x N matrix, N = 2^L * s:
//   A ~ U G_{L-1} ... G_{L/2} S H_{L/2} ... H_{L-1} V*
// where U, V are block diagonal over the 2^L leaves, S is the weighted
// middle switch, and the G/H chains hold the level transfer blocks.
struct ButterflyFactors {
  int levels = 0;  // L
  int leaf = 0;    // s
  int rank = 0;    // r
  int n = 0;       // N = 2^L * s

  // One stage of r x 2r transfer blocks; blocks[pair] with pair layout
  // documented in apply(). H stages run leaves->middle, G middle->leaves.
  struct Stage {
    std::vector<Eigen::MatrixXcd> blocks;
  };

  std::vector<Eigen::MatrixXcd> V;  // per source leaf, s x r
  std::vector<Stage> H;             // H[t]: stage L-t -> L-t-1, t = 0..L/2-1
  std::vector<Eigen::MatrixXcd> S;  // middle cores, r x r, indexed i*2^(L/2)+j
  std::vector<Stage> G;             // G[t]: stage L/2+t -> L/2+t+1
  std::vector<Eigen::MatrixXcd> U;  // per target leaf, s x r

  int64_t half() const { return ipow(2, levels / 2); }
  int64_t leaves() const { return ipow(2, levels); }
};

ButterflyFactors butterfly_factorize(const CMat& M, int levels, int rank);

// Counts complex multiply-add pairs when supplied.
struct OpCount {
  int64_t macs = 0;
};

CVec butterfly_apply(const ButterflyFactors& F, const CVec& x, OpCount* ops = nullptr);

// Dense product of the factors; test/diagnostic path.
CMat butterfly_reconstruct(const ButterflyFactors& F);

}  // namespace wbn
