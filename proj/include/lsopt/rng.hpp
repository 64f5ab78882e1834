#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "lsopt/common.hpp"

namespace lsopt {

// Seeded generator used everywhere randomness is needed. Centralizing the
// draw helpers keeps call sequences stable, which the reproducibility tests
// rely on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double normal() { return normal_(gen_); }
  double uniform() { return unif_(gen_); }

  // Uniform integer in [lo, hi] inclusive.
  Index uniform_index(Index lo, Index hi) {
    std::uniform_int_distribution<Index> d(lo, hi);
    return d(gen_);
  }

  double sign() { return unif_(gen_) < 0.5 ? -1.0 : 1.0; }

  Vector normal_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  Matrix normal_matrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = normal();
    return m;
  }

  // k distinct indices from [0, n), returned sorted.
  std::vector<Index> sample_indices(Index n, Index k) {
    require_arg(k >= 0 && k <= n, "sample_indices: need 0 <= k <= n");
    std::vector<Index> pool(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (Index i = 0; i < k; ++i) {
      Index j = uniform_index(i, n - 1);
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(k));
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

}  // namespace lsopt
