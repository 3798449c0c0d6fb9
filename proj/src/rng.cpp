#include "glift/rng.hpp"

#include <algorithm>
#include <numeric>

namespace glift {

RMatrix Sampler::normal_matrix(Index rows, Index cols, double stddev) {
  RMatrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(stddev);
  }
  return m;
}

CMatrix Sampler::complex_normal_matrix(Index rows, Index cols, double stddev) {
  CMatrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = complex_normal(stddev);
  }
  return m;
}

CVector Sampler::complex_normal_vector(Index n, double stddev) {
  CVector v(n);
  for (Index i = 0; i < n; ++i) v(i) = complex_normal(stddev);
  return v;
}

SupportSet Sampler::sample_without_replacement(Index n, Index count) {
  if (count < 0 || count > n) throw ParameterError("cannot draw more indices than available");
  // Partial Fisher-Yates.
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < count; ++i) {
    const Index pick = uniform_int(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick)]);
  }
  SupportSet out(pool.begin(), pool.begin() + count);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace glift
