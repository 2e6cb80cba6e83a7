#pragma once

// Small helpers shared by the test binaries.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "stnas/layers.hpp"

namespace stnas::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor::parameter(std::move(shape), std::move(v));
}

inline Tensor random_constant(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor::constant(std::move(shape), std::move(v));
}

/// sum(y * r) with a fixed random r, so every output coordinate matters.
inline Tensor probe(const Tensor& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  return sum_all(ad::mul(y, random_constant(y.shape(), rng)));
}

inline std::vector<double> values(const Tensor& t) {
  return {t.values().begin(), t.values().end()};
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.values()[i] - b.values()[i]));
  return d;
}

}  // namespace stnas::testing
