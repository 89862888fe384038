#pragma once

#include <complex>
#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace wbn {

using cplx = std::complex<double>;

// Precondition failures surface as std::invalid_argument so callers and
// tests can distinguish bad input from internal errors.
[[noreturn]] inline void fail_domain(const std::string& msg) {
  throw std::invalid_argument(msg);
}
[[noreturn]] inline void fail_runtime(const std::string& msg) {
  throw std::runtime_error(msg);
}

#define WBN_REQUIRE(cond, msg) \
  do { if (!(cond)) ::wbn::fail_domain(msg); } while (0)
#define WBN_ENSURE(cond, msg) \
  do { if (!(cond)) ::wbn::fail_runtime(msg); } while (0)

// Row-major rectangular array.
template <class T>
struct Grid {
  int rows = 0;
  int cols = 0;
  std::vector<T> v;

  Grid() = default;
  Grid(int r, int c, T fill = T{}) : rows(r), cols(c), v(size_t(r) * c, fill) {}
  T& operator()(int i, int j) { return v[size_t(i) * cols + j]; }
  const T& operator()(int i, int j) const { return v[size_t(i) * cols + j]; }
  size_t size() const { return v.size(); }
};

using GridF = Grid<float>;
using GridD = Grid<double>;
using GridC = Grid<cplx>;

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic RNG with explicit bit-to-real conversions, so streams do not
// depend on the standard library's distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : s_(splitmix64(seed)) {}

  // Derive an independent stream, e.g. one per sample index.
  Rng fork(uint64_t key) const { return Rng(splitmix64(s_ ^ splitmix64(key))); }

  uint64_t next_u64() {
    // xorshift* keeps the state tiny and the sequence platform-stable.
    uint64_t x = s_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    s_ = x;
    return x * 0x2545f4914f6cdd1dull;
  }

  // Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t uniform_index(uint64_t n) {
    WBN_REQUIRE(n > 0, "uniform_index: empty range");
    // Rejection keeps the draw unbiased.
    uint64_t lim = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do { x = next_u64(); } while (x >= lim);
    return x % n;
  }

  double normal() {
    // Box-Muller; one value per call keeps replay trivial.
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  uint64_t state() const { return s_; }

 private:
  uint64_t s_;
};

inline bool is_pow2(size_t n) { return n > 0 && (n & (n - 1)) == 0; }

inline int64_t ipow(int64_t base, int exp) {
  int64_t r = 1;
  for (int i = 0; i < exp; i++) r *= base;
  return r;
}

}  // namespace wbn
