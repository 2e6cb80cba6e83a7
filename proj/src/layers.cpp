#include "stnas/layers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace stnas {

std::uint64_t sub_seed(std::uint64_t seed, std::string_view stage) {
  // FNV-1a over the stage name, mixed into the seed with splitmix64.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : stage) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Tensor uniform_parameter(Shape shape, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::parameter(std::move(shape), std::move(v));
}

Tensor glorot_parameter(Shape shape, Rng& rng) {
  const std::size_t r = shape.size();
  const double fan_in = r >= 2 ? static_cast<double>(shape[r - 2]) : 1.0;
  const double fan_out = static_cast<double>(shape[r - 1]);
  return uniform_parameter(std::move(shape), std::sqrt(6.0 / (fan_in + fan_out)), rng);
}

Tensor zero_parameter(Shape shape) {
  const std::size_t n = ad::numel(shape);
  return Tensor::parameter(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor broadcast_rows(const Tensor& b, std::size_t rows) {
  const Tensor ones = Tensor::full({rows, 1}, 1.0);
  return ad::matmul(ones, ad::reshape(b, {1, b.size()}));
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 2) {
    throw std::invalid_argument("affine: expected a matrix input, got " +
                                ad::shape_str(x.shape()));
  }
  return ad::add(ad::matmul(x, w), broadcast_rows(b, x.dim(0)));
}

Tensor linear_last(const Tensor& x, const Tensor& w) {
  const Shape& s = x.shape();
  const std::size_t in = s.back();
  const std::size_t rows = x.size() / in;
  Shape out = s;
  out.back() = w.dim(1);
  return ad::reshape(ad::matmul(ad::reshape(x, {rows, in}), w), out);
}

Tensor abs(const Tensor& x) { return ad::add(ad::relu(x), ad::relu(ad::scale(x, -1.0))); }

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> index) {
  const std::size_t rows = table.dim(0);
  std::vector<double> onehot(index.size() * rows, 0.0);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= rows) {
      throw std::out_of_range("gather_rows: index " + std::to_string(index[i]) +
                              " outside table of " + std::to_string(rows) + " rows");
    }
    onehot[i * rows + index[i]] = 1.0;
  }
  return ad::matmul(Tensor::constant({index.size(), rows}, std::move(onehot)), table);
}

Tensor sum_all(const Tensor& x) { return ad::sum(ad::reshape(x, {x.size()}), 0); }

}  // namespace stnas
