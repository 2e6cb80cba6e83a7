#pragma once

// Small compositions of primitives shared by the model modules, plus seeded
// parameter initialisation.

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

#include "stnas/tensor.hpp"

namespace stnas {

using ad::Shape;
using ad::Tensor;

using Rng = std::mt19937_64;

/// Deterministic sub-seed for a named stage, so stages draw independent streams.
std::uint64_t sub_seed(std::uint64_t seed, std::string_view stage);

Tensor uniform_parameter(Shape shape, double bound, Rng& rng);
/// Glorot-uniform bound from the last two extents.
Tensor glorot_parameter(Shape shape, Rng& rng);
Tensor zero_parameter(Shape shape);

/// [D] -> [rows, D], as ones[rows x 1] . b[1 x D].
Tensor broadcast_rows(const Tensor& b, std::size_t rows);
/// x[R, in] . w[in, out] + b[out]
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
/// Applies w[in, out] to the last axis of x, keeping the leading axes.
Tensor linear_last(const Tensor& x, const Tensor& w);
/// |x| = relu(x) + relu(-x)
Tensor abs(const Tensor& x);
/// table rows selected by index, via a constant one-hot product.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> index);
/// Sum of all elements as a [1] tensor.
Tensor sum_all(const Tensor& x);

}  // namespace stnas
