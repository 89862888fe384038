#include "wbn/spectral.hpp"

#include <Eigen/SVD>
#include <ostream>

namespace wbn {

std::vector<cplx> naive_dft(const std::vector<cplx>& x) {
  const size_t n = x.size();
  WBN_REQUIRE(n >= 1, "naive_dft: empty input");
  std::vector<cplx> out(n);
  for (size_t k = 0; k < n; k++) {
    cplx acc = 0;
    for (size_t j = 0; j < n; j++)
      acc += x[j] * std::polar(1.0, -2.0 * M_PI * double(j * k % n) / double(n));
    out[k] = acc;
  }
  return out;
}

std::vector<cplx> fft_radix2(const std::vector<cplx>& x) {
  const size_t n = x.size();
  WBN_REQUIRE(is_pow2(n), "fft_radix2: length must be a power of two");
  if (n == 1) return x;
  std::vector<cplx> even(n / 2), odd(n / 2);
  for (size_t m = 0; m < n / 2; m++) {
    even[m] = x[2 * m];
    odd[m] = x[2 * m + 1];
  }
  std::vector<cplx> e_hat = fft_radix2(even);
  std::vector<cplx> o_hat = fft_radix2(odd);
  std::vector<cplx> out(n);
  for (size_t k = 0; k < n / 2; k++) {
    cplx tw = std::polar(1.0, -2.0 * M_PI * double(k) / double(n)) * o_hat[k];
    out[k] = e_hat[k] + tw;
    out[k + n / 2] = e_hat[k] - tw;
  }
  return out;
}

int epsilon_rank(const CMat& M, double eps) {
  WBN_REQUIRE(eps > 0, "epsilon_rank: eps must be positive");
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<CMat> svd(M);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (int i = 0; i < s.size(); i++)
    if (s(i) > eps * s(0)) r++;
  return r;
}

RankProfile complementary_rank_profile(const CMat& M, int levels, double eps) {
  WBN_REQUIRE(M.rows() == M.cols(), "complementary_rank_profile: matrix must be square");
  const int n = int(M.rows());
  WBN_REQUIRE(levels >= 0 && n % int(ipow(2, levels)) == 0,
              "complementary_rank_profile: N must be divisible by 2^levels");
  RankProfile prof;
  prof.levels = levels;
  prof.eps = eps;
  prof.ranks.resize(levels + 1);
  prof.max_per_level.resize(levels + 1);
  prof.min_per_level.resize(levels + 1);
  for (int p = 0; p <= levels; p++) {
    const int nr = int(ipow(2, p)), nc = int(ipow(2, levels - p));
    const int mr = n / nr, mc = n / nc;
    std::vector<int>& tab = prof.ranks[p];
    tab.assign(size_t(nr) * nc, 0);
    // Deterministic regardless of schedule: each block writes its own slot.
#pragma omp parallel for collapse(2) schedule(dynamic)
    for (int i = 0; i < nr; i++)
      for (int j = 0; j < nc; j++)
        tab[size_t(i) * nc + j] = epsilon_rank(M.block(i * mr, j * mc, mr, mc), eps);
    int mx = 0, mn = n + 1;
    for (int v : tab) {
      mx = std::max(mx, v);
      mn = std::min(mn, v);
    }
    prof.max_per_level[p] = mx;
    prof.min_per_level[p] = mn;
  }
  return prof;
}

void write_rank_profile_csv(const RankProfile& p, std::ostream& os) {
  os << "level,block_row,block_col,rank\n";
  for (int lvl = 0; lvl <= p.levels; lvl++) {
    const int nc = int(ipow(2, p.levels - lvl));
    const auto& tab = p.ranks[lvl];
    for (size_t t = 0; t < tab.size(); t++)
      os << lvl << ',' << t / nc << ',' << t % nc << ',' << tab[t] << '\n';
  }
}

namespace {

// Thin SVD basis with exactly `rank` columns (zero-padded when deficient),
// plus the expansion coefficients of M in that basis.
struct BasisSplit {
  CMat basis;  // rows x rank, orthonormal columns (possibly zero-padded)
  CMat coeff;  // rank x cols, basis * coeff ~ M
};

BasisSplit truncated_basis(const CMat& M, int rank) {
  Eigen::JacobiSVD<CMat> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const int keep = std::min<int>(rank, int(svd.singularValues().size()));
  BasisSplit out;
  out.basis = CMat::Zero(M.rows(), rank);
  out.basis.leftCols(keep) = svd.matrixU().leftCols(keep);
  out.coeff = CMat::Zero(rank, M.cols());
  out.coeff.topRows(keep) = svd.singularValues().head(keep).asDiagonal() *
                            svd.matrixV().leftCols(keep).adjoint();
  return out;
}

}  // namespace

ButterflyFactors butterfly_factorize(const CMat& M, int levels, int rank) {
  WBN_REQUIRE(M.rows() == M.cols(), "butterfly_factorize: matrix must be square");
  WBN_REQUIRE(levels >= 2 && levels % 2 == 0, "butterfly_factorize: levels must be even and >= 2");
  WBN_REQUIRE(rank >= 1, "butterfly_factorize: rank must be positive");
  const int n = int(M.rows());
  const int64_t nleaf = ipow(2, levels);
  WBN_REQUIRE(n % nleaf == 0, "butterfly_factorize: N must equal 2^L * s");

  ButterflyFactors F;
  F.levels = levels;
  F.rank = rank;
  F.n = n;
  F.leaf = int(n / nleaf);
  const int h = levels / 2;
  const int64_t nh = ipow(2, h);
  const int bs = int(n / nh);
  const int r = rank;

  // Middle level: per-block SVD gives the initial row/column bases and the
  // switch cores.
  // Bleft[l]: pair (row block i at level l, col block j at level L-l),
  //           id = i * 2^(L-l) + j, each (n / 2^l) x r.
  // Bright[q]: pair (col block j at level q, row block i at level L-q),
  //            id = j * 2^(L-q) + i.
  std::vector<std::vector<CMat>> Bleft(levels + 1), Bright(levels + 1);
  Bleft[h].resize(size_t(nh * nh));
  Bright[h].resize(size_t(nh * nh));
  F.S.resize(size_t(nh * nh));
  for (int64_t i = 0; i < nh; i++)
    for (int64_t j = 0; j < nh; j++) {
      Eigen::JacobiSVD<CMat> svd(M.block(i * bs, j * bs, bs, bs),
                                 Eigen::ComputeThinU | Eigen::ComputeThinV);
      const int keep = std::min<int>(r, bs);
      CMat W = CMat::Zero(bs, r), Z = CMat::Zero(bs, r), core = CMat::Zero(r, r);
      W.leftCols(keep) = svd.matrixU().leftCols(keep);
      Z.leftCols(keep) = svd.matrixV().leftCols(keep);
      core.topLeftCorner(keep, keep) =
          svd.singularValues().head(keep).asDiagonal();
      Bleft[h][size_t(i * nh + j)] = W;
      Bright[h][size_t(j * nh + i)] = Z;
      F.S[size_t(i * nh + j)] = core;
    }

  // Right chain: split the column-side bases from the middle toward the
  // leaves. At each split the restrictions of two sibling-pair bases are
  // re-compressed; the projection coefficients become the H transfer blocks.
  // Tmap[q][pair id at stage q][k in {0,1}].
  std::vector<std::vector<std::array<CMat, 2>>> Tright(levels + 1);
  for (int q = h; q < levels; q++) {
    const int64_t ncb = ipow(2, q + 1);           // col blocks at q+1
    const int64_t nrb = ipow(2, levels - q - 1);  // row blocks at L-q-1
    const int rows = int(n / ncb);
    Bright[q + 1].resize(size_t(ncb * nrb));
    Tright[q + 1].resize(size_t(ncb * nrb));
    for (int64_t jc = 0; jc < ncb; jc++) {
      const int64_t jpar = jc / 2;
      const int child = int(jc % 2);
      for (int64_t ip = 0; ip < nrb; ip++) {
        CMat stacked(rows, 2 * r);
        for (int k = 0; k < 2; k++) {
          const CMat& par = Bright[q][size_t(jpar * ipow(2, levels - q) + 2 * ip + k)];
          stacked.middleCols(k * r, r) = par.middleRows(child * rows, rows);
        }
        BasisSplit bsys = truncated_basis(stacked, r);
        Bright[q + 1][size_t(jc * nrb + ip)] = bsys.basis;
        Tright[q + 1][size_t(jc * nrb + ip)] = {bsys.coeff.leftCols(r),
                                                bsys.coeff.rightCols(r)};
      }
    }
  }

  // Assemble the apply-order H stages from the right transfers: the stage
  // mapping coefficients at col level q+1 down to q writes, for output pair
  // (col j at q, row i at L-q),
  //   beta_out = sum_k Tright[q+1][(2j+k, i/2)][i%2]^H * beta_in(child k).
  F.H.resize(size_t(h));
  for (int t = 0; t < h; t++) {
    const int q = levels - t - 1;  // output col level
    const int64_t ncb = ipow(2, q), nrb = ipow(2, levels - q);
    auto& stage = F.H[size_t(t)].blocks;
    stage.resize(size_t(ncb * nrb));
    for (int64_t j = 0; j < ncb; j++)
      for (int64_t i = 0; i < nrb; i++) {
        CMat blk(r, 2 * r);
        for (int k = 0; k < 2; k++) {
          const auto& tr = Tright[q + 1][size_t((2 * j + k) * (nrb / 2) + i / 2)];
          blk.middleCols(k * r, r) = tr[size_t(i % 2)].adjoint();
        }
        stage[size_t(j * nrb + i)] = blk;
      }
  }

  // Left chain: same splitting on the row side; coefficients feed G directly.
  for (int l = h; l < levels; l++) {
    const int64_t nrb = ipow(2, l + 1);
    const int64_t ncb = ipow(2, levels - l - 1);
    const int rows = int(n / nrb);
    Bleft[l + 1].resize(size_t(nrb * ncb));
    ButterflyFactors::Stage stage;
    stage.blocks.resize(size_t(nrb * ncb));
    for (int64_t ic = 0; ic < nrb; ic++) {
      const int64_t ipar = ic / 2;
      const int child = int(ic % 2);
      for (int64_t jp = 0; jp < ncb; jp++) {
        CMat stacked(rows, 2 * r);
        for (int k = 0; k < 2; k++) {
          const CMat& par = Bleft[l][size_t(ipar * ipow(2, levels - l) + 2 * jp + k)];
          stacked.middleCols(k * r, r) = par.middleRows(child * rows, rows);
        }
        BasisSplit bsys = truncated_basis(stacked, r);
        Bleft[l + 1][size_t(ic * ncb + jp)] = bsys.basis;
        stage.blocks[size_t(ic * ncb + jp)] = bsys.coeff;  // r x 2r
      }
    }
    F.G.push_back(std::move(stage));
  }

  F.V.resize(size_t(nleaf));
  F.U.resize(size_t(nleaf));
  for (int64_t k = 0; k < nleaf; k++) {
    F.V[size_t(k)] = Bright[levels][size_t(k)];
    F.U[size_t(k)] = Bleft[levels][size_t(k)];
  }
  return F;
}

CVec butterfly_apply(const ButterflyFactors& F, const CVec& x, OpCount* ops) {
  WBN_REQUIRE(x.size() == F.n, "butterfly_apply: dimension mismatch");
  const int r = F.rank, L = F.levels, h = L / 2, s = F.leaf;
  const int64_t nleaf = F.leaves();
  auto count = [&](int64_t m) { if (ops) ops->macs += m; };

  // Leaf compression: beta(j, root) = V_j^* x_j.
  CVec cur(nleaf * r);
  for (int64_t j = 0; j < nleaf; j++) {
    cur.segment(j * r, r) = F.V[size_t(j)].adjoint() * x.segment(j * s, s);
    count(int64_t(s) * r);
  }

  // Column levels L -> L/2; pair layout at level q: id = j * 2^(L-q) + i.
  CVec nxt(nleaf * r);
  for (int t = 0; t < h; t++) {
    const int q = L - t - 1;
    const int64_t ncb = ipow(2, q), nrb = ipow(2, L - q);
    for (int64_t j = 0; j < ncb; j++)
      for (int64_t i = 0; i < nrb; i++) {
        Eigen::VectorXcd in(2 * r);
        for (int k = 0; k < 2; k++)
          in.segment(k * r, r) = cur.segment(((2 * j + k) * (nrb / 2) + i / 2) * r, r);
        nxt.segment((j * nrb + i) * r, r) = F.H[size_t(t)].blocks[size_t(j * nrb + i)] * in;
        count(int64_t(r) * 2 * r);
      }
    cur.swap(nxt);
  }

  // Switch: relocate (col j, row i) -> (row i, col j) through the core.
  const int64_t nh = F.half();
  for (int64_t i = 0; i < nh; i++)
    for (int64_t j = 0; j < nh; j++) {
      nxt.segment((i * nh + j) * r, r) = F.S[size_t(i * nh + j)] * cur.segment((j * nh + i) * r, r);
      count(int64_t(r) * r);
    }
  cur.swap(nxt);

  // Row levels L/2 -> L; pair layout at level l: id = i * 2^(L-l) + j.
  for (int t = 0; t < h; t++) {
    const int l = h + t;
    const int64_t nrb = ipow(2, l + 1), ncb = ipow(2, L - l - 1);
    for (int64_t ic = 0; ic < nrb; ic++)
      for (int64_t jp = 0; jp < ncb; jp++) {
        Eigen::VectorXcd in(2 * r);
        for (int k = 0; k < 2; k++)
          in.segment(k * r, r) = cur.segment(((ic / 2) * 2 * ncb + 2 * jp + k) * r, r);
        nxt.segment((ic * ncb + jp) * r, r) = F.G[size_t(t)].blocks[size_t(ic * ncb + jp)] * in;
        count(int64_t(r) * 2 * r);
      }
    cur.swap(nxt);
  }

  CVec y(F.n);
  for (int64_t i = 0; i < nleaf; i++) {
    y.segment(i * s, s) = F.U[size_t(i)] * cur.segment(i * r, r);
    count(int64_t(s) * r);
  }
  return y;
}

CMat butterfly_reconstruct(const ButterflyFactors& F) {
  CMat A(F.n, F.n);
  CVec e = CVec::Zero(F.n);
  for (int j = 0; j < F.n; j++) {
    e(j) = 1.0;
    A.col(j) = butterfly_apply(F, e);
    e(j) = 0.0;
  }
  return A;
}

}  // namespace wbn
