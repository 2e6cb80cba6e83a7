#include "stnas/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace stnas::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

thread_local Tape* g_active = nullptr;

constexpr std::array<std::pair<Kind, std::string_view>, 17> kKindNames{{
    {Kind::MatMul, "matmul"},
    {Kind::Add, "add"},
    {Kind::Sub, "sub"},
    {Kind::Mul, "elementwise-mul"},
    {Kind::ScalarScale, "scalar-scale"},
    {Kind::Relu, "relu"},
    {Kind::Sigmoid, "sigmoid"},
    {Kind::Tanh, "tanh"},
    {Kind::Exp, "exp"},
    {Kind::Softmax, "softmax-over-axis"},
    {Kind::Concat, "concat-over-axis"},
    {Kind::Slice, "slice"},
    {Kind::Reshape, "reshape"},
    {Kind::Sum, "sum-over-axis"},
    {Kind::Mean, "mean-over-axis"},
    {Kind::CausalConv1d, "causal-dilated-conv1d"},
    {Kind::Transpose, "transpose"},
}};

[[noreturn]] void shape_error(Kind kind, const std::string& detail) {
  throw std::invalid_argument(std::string(kind_name(kind)) + ": " + detail);
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

std::vector<double>& ensure_grad(Node& n) {
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

// g += f * src, assigning straight into an empty gradient to skip the zero fill.
void accumulate(Node& n, const std::vector<double>& src, double f = 1.0) {
  if (n.grad.empty()) {
    n.grad.resize(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) n.grad[i] = f * src[i];
    return;
  }
  for (std::size_t i = 0; i < src.size(); ++i) n.grad[i] += f * src[i];
}

// Row-major loop kernels for batched products with small inner extents.
// Eigen's blocked GEMM pays a per-call setup cost that dominates for the many
// tiny per-row products in attention.
constexpr std::size_t kNarrow = 64;

// C = A[m,k] * B[k,n]
void gemm_nn(const double* A, const double* B, double* C, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* c = C + i * n;
    std::fill_n(c, n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double a = A[i * k + p];
      const double* b = B + p * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += a * b[j];
    }
  }
}

// GA[m,k] += G[m,n] * B[k,n]^T
void gemm_nt_acc(const double* G, const double* B, double* GA, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* g = G + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* b = B + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += g[j] * b[j];
      GA[i * k + p] += acc;
    }
  }
}

// GB[k,n] += A[m,k]^T * G[m,n]
void gemm_tn_acc(const double* A, const double* G, double* GB, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* g = G + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double a = A[i * k + p];
      double* out = GB + p * n;
      for (std::size_t j = 0; j < n; ++j) out[j] += a * g[j];
    }
  }
}

// Strides of `shape` permuted by `perm`, i.e. the input stride for every
// output axis.
std::vector<std::size_t> permuted_strides(const Shape& in_shape,
                                          const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> stride(in_shape.size(), 1);
  for (std::size_t i = in_shape.size(); i-- > 1;) stride[i - 1] = stride[i] * in_shape[i];
  std::vector<std::size_t> out(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out[i] = stride[perm[i]];
  return out;
}

// Visits (output linear index, input linear index) pairs for a permutation.
template <class F>
void for_each_permuted(const Shape& in_shape, const std::vector<std::size_t>& perm,
                       F&& f) {
  const std::size_t rank = perm.size();
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = in_shape[perm[i]];
  const auto in_stride = permuted_strides(in_shape, perm);
  const std::size_t total = numel(out_shape);
  if (total == 0) return;
  if (rank == 0) {
    f(std::size_t{0}, std::size_t{0});
    return;
  }
  std::vector<std::size_t> idx(rank, 0);
  const std::size_t last = rank - 1;
  const std::size_t last_len = out_shape[last];
  const std::size_t last_stride = in_stride[last];
  std::size_t base = 0;
  for (std::size_t o = 0; o < total; o += last_len) {
    std::size_t src = base;
    for (std::size_t k = 0; k < last_len; ++k, src += last_stride) f(o + k, src);
    // advance the odometer over all but the last axis
    for (std::size_t ax = last; ax-- > 0;) {
      ++idx[ax];
      base += in_stride[ax];
      if (idx[ax] < out_shape[ax]) break;
      base -= in_stride[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
}

Shape infer_shape(Kind kind, const std::vector<Tensor>& in, const Attrs& attrs) {
  auto need = [&](std::size_t n) {
    if (in.size() != n) {
      shape_error(kind, "expected " + std::to_string(n) + " inputs, got " +
                            std::to_string(in.size()));
    }
    for (const auto& t : in) {
      if (!t.defined()) shape_error(kind, "undefined input tensor");
    }
  };
  switch (kind) {
    case Kind::MatMul: {
      need(2);
      const Shape& a = in[0].shape();
      const Shape& b = in[1].shape();
      if (a.size() < 2 || a.size() != b.size()) {
        shape_error(kind, "rank mismatch " + shape_str(a) + " x " + shape_str(b));
      }
      const std::size_t r = a.size();
      for (std::size_t i = 0; i + 2 < r; ++i) {
        if (a[i] != b[i]) {
          shape_error(kind, "batch extents differ " + shape_str(a) + " x " + shape_str(b));
        }
      }
      if (a[r - 1] != b[r - 2]) {
        shape_error(kind, "inner extents differ " + shape_str(a) + " x " + shape_str(b));
      }
      Shape out = a;
      out[r - 1] = b[r - 1];
      return out;
    }
    case Kind::Add:
    case Kind::Sub:
    case Kind::Mul:
      need(2);
      if (in[0].shape() != in[1].shape()) {
        shape_error(kind, "shapes differ " + shape_str(in[0].shape()) + " vs " +
                              shape_str(in[1].shape()));
      }
      return in[0].shape();
    case Kind::ScalarScale:
      if (in.size() == 2) {
        need(2);
        if (in[1].size() != 1) {
          shape_error(kind, "scale factor must hold one element, got " +
                                shape_str(in[1].shape()));
        }
      } else {
        need(1);
      }
      return in[0].shape();
    case Kind::Relu:
    case Kind::Sigmoid:
    case Kind::Tanh:
    case Kind::Exp:
      need(1);
      return in[0].shape();
    case Kind::Softmax:
      need(1);
      if (attrs.axis >= in[0].rank()) {
        shape_error(kind, "axis " + std::to_string(attrs.axis) + " out of range for " +
                              shape_str(in[0].shape()));
      }
      return in[0].shape();
    case Kind::Concat: {
      if (in.empty()) shape_error(kind, "no inputs");
      for (const auto& t : in) {
        if (!t.defined()) shape_error(kind, "undefined input tensor");
      }
      Shape out = in[0].shape();
      if (attrs.axis >= out.size()) {
        shape_error(kind, "axis " + std::to_string(attrs.axis) + " out of range for " +
                              shape_str(out));
      }
      for (std::size_t k = 1; k < in.size(); ++k) {
        const Shape& s = in[k].shape();
        bool ok = s.size() == out.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i) {
          if (i != attrs.axis && s[i] != out[i]) ok = false;
        }
        if (!ok) {
          shape_error(kind, "part " + std::to_string(k) + " " + shape_str(s) +
                                " incompatible with " + shape_str(in[0].shape()));
        }
        out[attrs.axis] += s[attrs.axis];
      }
      return out;
    }
    case Kind::Slice: {
      need(1);
      const Shape& s = in[0].shape();
      if (attrs.axis >= s.size() || attrs.length == 0 ||
          attrs.start + attrs.length > s[attrs.axis]) {
        shape_error(kind, "range [" + std::to_string(attrs.start) + ", " +
                              std::to_string(attrs.start + attrs.length) + ") on axis " +
                              std::to_string(attrs.axis) + " of " + shape_str(s));
      }
      Shape out = s;
      out[attrs.axis] = attrs.length;
      return out;
    }
    case Kind::Reshape:
      need(1);
      if (attrs.shape.empty() || numel(attrs.shape) != in[0].size()) {
        shape_error(kind, "cannot reshape " + shape_str(in[0].shape()) + " to " +
                              shape_str(attrs.shape));
      }
      return attrs.shape;
    case Kind::Sum:
    case Kind::Mean: {
      need(1);
      const Shape& s = in[0].shape();
      if (attrs.axis >= s.size()) {
        shape_error(kind, "axis " + std::to_string(attrs.axis) + " out of range for " +
                              shape_str(s));
      }
      Shape out;
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (i != attrs.axis) out.push_back(s[i]);
      }
      if (out.empty()) out.push_back(1);
      return out;
    }
    case Kind::CausalConv1d: {
      need(2);
      const Shape& x = in[0].shape();
      const Shape& w = in[1].shape();
      if (x.size() != 3 || w.size() != 3 || w[1] != x[2] || w[0] == 0) {
        shape_error(kind, "input " + shape_str(x) + " incompatible with kernel " +
                              shape_str(w) + " (expected [R,T,Cin] and [K,Cin,Cout])");
      }
      if (attrs.dilation == 0) shape_error(kind, "dilation must be positive");
      return {x[0], x[1], w[2]};
    }
    case Kind::Transpose: {
      need(1);
      const Shape& s = in[0].shape();
      std::vector<std::size_t> sorted = attrs.perm;
      std::sort(sorted.begin(), sorted.end());
      bool ok = sorted.size() == s.size();
      for (std::size_t i = 0; ok && i < sorted.size(); ++i) ok = sorted[i] == i;
      if (!ok) shape_error(kind, "permutation does not match rank of " + shape_str(s));
      Shape out(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[attrs.perm[i]];
      return out;
    }
  }
  throw std::invalid_argument("unknown primitive");
}

void run_forward(const Record& r) {
  const auto& in = r.inputs;
  auto& out = r.output->value;
  const Attrs& at = r.attrs;
  switch (r.kind) {
    case Kind::MatMul: {
      const Shape& as = in[0]->shape;
      const Shape& bs = in[1]->shape;
      const std::size_t rk = as.size();
      const std::size_t m = as[rk - 2], k = as[rk - 1], n = bs[rk - 1];
      const std::size_t batch = numel(as) / (m * k);
      for (std::size_t b = 0; b < batch; ++b) {
        MapC A(in[0]->value.data() + b * m * k, m, k);
        MapC B(in[1]->value.data() + b * k * n, k, n);
        if (batch > 1 && k <= kNarrow && n <= kNarrow) {
          gemm_nn(A.data(), B.data(), out.data() + b * m * n, m, k, n);
        } else {
          Map C(out.data() + b * m * n, m, n);
          C.noalias() = A * B;
        }
      }
      return;
    }
    case Kind::Add:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[0]->value[i] + in[1]->value[i];
      return;
    case Kind::Sub:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[0]->value[i] - in[1]->value[i];
      return;
    case Kind::Mul:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[0]->value[i] * in[1]->value[i];
      return;
    case Kind::ScalarScale: {
      const double s = in.size() == 2 ? in[1]->value[0] : at.scale;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * in[0]->value[i];
      return;
    }
    case Kind::Relu:
      // NaN passes through so a poisoned loss still reads as non-finite.
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = in[0]->value[i];
        out[i] = x < 0.0 ? 0.0 : x;
      }
      return;
    case Kind::Sigmoid:
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = in[0]->value[i];
        if (x >= 0) {
          out[i] = 1.0 / (1.0 + std::exp(-x));
        } else {
          const double e = std::exp(x);
          out[i] = e / (1.0 + e);
        }
      }
      return;
    case Kind::Tanh:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(in[0]->value[i]);
      return;
    case Kind::Exp:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(in[0]->value[i]);
      return;
    case Kind::Softmax: {
      const auto s = split_axis(in[0]->shape, at.axis);
      const auto& x = in[0]->value;
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t j = 0; j < s.inner; ++j) {
          const std::size_t base = o * s.len * s.inner + j;
          double mx = x[base];
          for (std::size_t l = 1; l < s.len; ++l) mx = std::max(mx, x[base + l * s.inner]);
          double total = 0.0;
          for (std::size_t l = 0; l < s.len; ++l) {
            const double e = std::exp(x[base + l * s.inner] - mx);
            out[base + l * s.inner] = e;
            total += e;
          }
          for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] /= total;
        }
      }
      return;
    }
    case Kind::Concat: {
      const auto so = split_axis(r.output->shape, at.axis);
      std::size_t offset = 0;
      for (const auto& part : in) {
        const auto sp = split_axis(part->shape, at.axis);
        const std::size_t chunk = sp.len * sp.inner;
        for (std::size_t o = 0; o < so.outer; ++o) {
          std::copy_n(part->value.data() + o * chunk, chunk,
                      out.data() + o * so.len * so.inner + offset * so.inner);
        }
        offset += sp.len;
      }
      return;
    }
    case Kind::Slice: {
      const auto si = split_axis(in[0]->shape, at.axis);
      const std::size_t chunk = at.length * si.inner;
      for (std::size_t o = 0; o < si.outer; ++o) {
        std::copy_n(in[0]->value.data() + o * si.len * si.inner + at.start * si.inner, chunk,
                    out.data() + o * chunk);
      }
      return;
    }
    case Kind::Reshape:
      std::copy(in[0]->value.begin(), in[0]->value.end(), out.begin());
      return;
    case Kind::Sum:
    case Kind::Mean: {
      const auto s = split_axis(in[0]->shape, at.axis);
      const double f = r.kind == Kind::Mean ? 1.0 / static_cast<double>(s.len) : 1.0;
      const auto& x = in[0]->value;
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t j = 0; j < s.inner; ++j) {
          double acc = 0.0;
          for (std::size_t l = 0; l < s.len; ++l) acc += x[(o * s.len + l) * s.inner + j];
          out[o * s.inner + j] = acc * f;
        }
      }
      return;
    }
    case Kind::CausalConv1d: {
      const Shape& xs = in[0]->shape;
      const Shape& ws = in[1]->shape;
      const std::size_t R = xs[0], T = xs[1], cin = xs[2];
      const std::size_t taps = ws[0], cout = ws[2];
      MapC X(in[0]->value.data(), R * T, cin);
      Map Y(out.data(), R * T, cout);
      Y.noalias() = X * MapC(in[1]->value.data(), cin, cout);
      RowMat Z(R * T, cout);
      for (std::size_t k = 1; k < taps; ++k) {
        const std::size_t shift = k * at.dilation;
        if (shift >= T) break;
        Z.noalias() = X * MapC(in[1]->value.data() + k * cin * cout, cin, cout);
        for (std::size_t row = 0; row < R; ++row) {
          Y.middleRows(row * T + shift, T - shift) += Z.middleRows(row * T, T - shift);
        }
      }
      return;
    }
    case Kind::Transpose: {
      const auto& x = in[0]->value;
      for_each_permuted(in[0]->shape, at.perm,
                        [&](std::size_t o, std::size_t i) { out[o] = x[i]; });
      return;
    }
  }
}

void run_backward(const Record& r) {
  const auto& in = r.inputs;
  const auto& gy = r.output->grad;
  const Attrs& at = r.attrs;
  auto wants = [&](std::size_t i) { return in[i]->requires_grad; };
  switch (r.kind) {
    case Kind::MatMul: {
      const Shape& as = in[0]->shape;
      const Shape& bs = in[1]->shape;
      const std::size_t rk = as.size();
      const std::size_t m = as[rk - 2], k = as[rk - 1], n = bs[rk - 1];
      const std::size_t batch = numel(as) / (m * k);
      for (std::size_t b = 0; b < batch; ++b) {
        const bool narrow = batch > 1 && k <= kNarrow && n <= kNarrow;
        const double* a = in[0]->value.data() + b * m * k;
        const double* bv = in[1]->value.data() + b * k * n;
        const double* g = gy.data() + b * m * n;
        if (wants(0)) {
          double* ga = ensure_grad(*in[0]).data() + b * m * k;
          if (narrow) {
            gemm_nt_acc(g, bv, ga, m, k, n);
          } else {
            Map(ga, m, k).noalias() += MapC(g, m, n) * MapC(bv, k, n).transpose();
          }
        }
        if (wants(1)) {
          double* gb = ensure_grad(*in[1]).data() + b * k * n;
          if (narrow) {
            gemm_tn_acc(a, g, gb, m, k, n);
          } else {
            Map(gb, k, n).noalias() += MapC(a, m, k).transpose() * MapC(g, m, n);
          }
        }
      }
      return;
    }
    case Kind::Add:
    case Kind::Sub: {
      if (wants(0)) accumulate(*in[0], gy);
      if (wants(1)) accumulate(*in[1], gy, r.kind == Kind::Add ? 1.0 : -1.0);
      return;
    }
    case Kind::Mul:
      if (wants(0)) {
        auto& g = ensure_grad(*in[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * in[1]->value[i];
      }
      if (wants(1)) {
        auto& g = ensure_grad(*in[1]);
        for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * in[0]->value[i];
      }
      return;
    case Kind::ScalarScale: {
      const double s = in.size() == 2 ? in[1]->value[0] : at.scale;
      if (wants(0)) accumulate(*in[0], gy, s);
      if (in.size() == 2 && wants(1)) {
        double acc = 0.0;
        for (std::size_t i = 0; i < gy.size(); ++i) acc += gy[i] * in[0]->value[i];
        ensure_grad(*in[1])[0] += acc;
      }
      return;
    }
    case Kind::Relu:
      if (wants(0)) {
        auto& g = ensure_grad(*in[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) {
          if (in[0]->value[i] > 0) g[i] += gy[i];
        }
      }
      return;
    case Kind::Sigmoid:
    case Kind::Tanh:
    case Kind::Exp:
      if (wants(0)) {
        auto& g = ensure_grad(*in[0]);
        const auto& y = r.output->value;
        for (std::size_t i = 0; i < gy.size(); ++i) {
          double d = y[i];
          if (r.kind == Kind::Sigmoid) d = y[i] * (1.0 - y[i]);
          if (r.kind == Kind::Tanh) d = 1.0 - y[i] * y[i];
          g[i] += gy[i] * d;
        }
      }
      return;
    case Kind::Softmax:
      if (wants(0)) {
        auto& g = ensure_grad(*in[0]);
        const auto& y = r.output->value;
        const auto s = split_axis(in[0]->shape, at.axis);
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t j = 0; j < s.inner; ++j) {
            const std::size_t base = o * s.len * s.inner + j;
            double dot = 0.0;
            for (std::size_t l = 0; l < s.len; ++l) {
              dot += gy[base + l * s.inner] * y[base + l * s.inner];
            }
            for (std::size_t l = 0; l < s.len; ++l) {
              const std::size_t p = base + l * s.inner;
              g[p] += y[p] * (gy[p] - dot);
            }
          }
        }
      }
      return;
    case Kind::Concat: {
      const auto so = split_axis(r.output->shape, at.axis);
      std::size_t offset = 0;
      for (const auto& part : in) {
        const auto sp = split_axis(part->shape, at.axis);
        const std::size_t chunk = sp.len * sp.inner;
        if (part->requires_grad) {
          auto& g = ensure_grad(*part);
          for (std::size_t o = 0; o < so.outer; ++o) {
            const double* src = gy.data() + o * so.len * so.inner + offset * so.inner;
            double* dst = g.data() + o * chunk;
            for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
          }
        }
        offset += sp.len;
      }
      return;
    }
    case Kind::Slice:
      if (wants(0)) {
        auto& g = ensure_grad(*in[0]);
        const auto si = split_axis(in[0]->shape, at.axis);
        const std::size_t chunk = at.length * si.inner;
        for (std::size_t o = 0; o < si.outer; ++o) {
          double* dst = g.data() + o * si.len * si.inner + at.start * si.inner;
          const double* src = gy.data() + o * chunk;
          for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
        }
      }
      return;
    case Kind::Reshape:
      // Intermediate gradients are dropped after the sweep anyway, so an empty
      // input gradient can take the buffer over.
      if (wants(0)) {
        if (in[0]->grad.empty() && in[0] != r.output) {
          in[0]->grad = std::move(r.output->grad);
        } else {
          accumulate(*in[0], gy);
        }
      }
      return;
    case Kind::Sum:
    case Kind::Mean:
      if (wants(0)) {
        auto& g = ensure_grad(*in[0]);
        const auto s = split_axis(in[0]->shape, at.axis);
        const double f = r.kind == Kind::Mean ? 1.0 / static_cast<double>(s.len) : 1.0;
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t l = 0; l < s.len; ++l) {
            for (std::size_t j = 0; j < s.inner; ++j) {
              g[(o * s.len + l) * s.inner + j] += f * gy[o * s.inner + j];
            }
          }
        }
      }
      return;
    case Kind::CausalConv1d: {
      const Shape& xs = in[0]->shape;
      const Shape& ws = in[1]->shape;
      const std::size_t R = xs[0], T = xs[1], cin = xs[2];
      const std::size_t taps = ws[0], cout = ws[2];
      MapC G(gy.data(), R * T, cout);
      MapC X(in[0]->value.data(), R * T, cin);
      // tap 0 is an unshifted dense product
      if (wants(0)) {
        Map GX(ensure_grad(*in[0]).data(), R * T, cin);
        GX.noalias() += G * MapC(in[1]->value.data(), cin, cout).transpose();
      }
      if (wants(1)) {
        Map GW(ensure_grad(*in[1]).data(), cin, cout);
        GW.noalias() += X.transpose() * G;
      }
      RowMat shifted(R * T, cout);
      for (std::size_t k = 1; k < taps; ++k) {
        const std::size_t shift = k * at.dilation;
        if (shift >= T) break;
        shifted.setZero();
        for (std::size_t row = 0; row < R; ++row) {
          shifted.middleRows(row * T, T - shift) = G.middleRows(row * T + shift, T - shift);
        }
        if (wants(0)) {
          Map GX(ensure_grad(*in[0]).data(), R * T, cin);
          GX.noalias() +=
              shifted * MapC(in[1]->value.data() + k * cin * cout, cin, cout).transpose();
        }
        if (wants(1)) {
          Map GW(ensure_grad(*in[1]).data() + k * cin * cout, cin, cout);
          GW.noalias() += X.transpose() * shifted;
        }
      }
      return;
    }
    case Kind::Transpose:
      if (wants(0)) {
        auto& g = ensure_grad(*in[0]);
        for_each_permuted(in[0]->shape, at.perm,
                          [&](std::size_t o, std::size_t i) { g[i] += gy[o]; });
      }
      return;
  }
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::string_view kind_name(Kind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

Kind parse_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw std::invalid_argument("unknown primitive '" + std::string(name) + "'");
}

// ---------------------------------------------------------------- Tensor

Tensor make_output(Shape shape, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value.assign(numel(shape), 0.0);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  if (values.size() != numel(shape)) {
    throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                " values do not fill shape " + shape_str(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  return Tensor(std::move(n));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = numel(shape);
  return constant(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return constant({1}, {value}); }

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw std::out_of_range("tensor: axis " + std::to_string(axis) + " out of range for " +
                            shape_str(shape()));
  }
  return node_->shape[axis];
}

std::size_t Tensor::size() const { return node_->value.size(); }

std::span<const double> Tensor::values() const { return node_->value; }

std::span<double> Tensor::mutable_values() { return node_->value; }

std::span<const double> Tensor::grad() const { return node_->grad; }

bool Tensor::has_grad() const { return !node_->grad.empty(); }

void Tensor::zero_grad() { node_->grad.clear(); }

double Tensor::item() const {
  if (size() != 1) {
    throw std::invalid_argument("tensor: item() on non-scalar " + shape_str(shape()));
  }
  return node_->value[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank()) throw std::invalid_argument("tensor: index rank mismatch");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= node_->shape[axis]) throw std::out_of_range("tensor: index out of range");
    flat = flat * node_->shape[axis] + i;
    ++axis;
  }
  return node_->value[flat];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

std::optional<std::size_t> Tensor::node_id() const { return node_->tape_index; }

Tensor Tensor::detach() const { return constant(node_->shape, node_->value); }

// ---------------------------------------------------------------- Tape

Tape* active_tape() { return g_active; }

TapeScope::TapeScope(Tape* tape) : previous_(g_active) { g_active = tape; }

TapeScope::~TapeScope() { g_active = previous_; }

void Tape::push(Record record) {
  record.output->tape_index = records_.size();
  records_.push_back(std::move(record));
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar tensor, got " +
                                (loss.defined() ? shape_str(loss.shape()) : "undefined"));
  }
  for (auto& r : records_) r.output->grad.clear();
  if (!loss.requires_grad()) return;
  const auto& id = loss.node_id();
  if (!id || *id >= records_.size() || records_[*id].output != loss.node()) {
    throw std::invalid_argument("backward: loss is not on this tape");
  }
  ensure_grad(*loss.node())[0] = 1.0;
  for (std::size_t i = *id + 1; i-- > 0;) {
    const Record& r = records_[i];
    if (r.output->grad.empty()) continue;
    run_backward(r);
  }
}

void Tape::replay() {
  for (const auto& r : records_) run_forward(r);
}

std::size_t Tape::storage_bytes() const {
  std::size_t bytes = 0;
  for (const auto& r : records_) {
    bytes += (r.output->value.size() + r.output->grad.size()) * sizeof(double);
  }
  return bytes;
}

// ---------------------------------------------------------------- primitives

Tensor apply_primitive(Kind kind, const std::vector<Tensor>& inputs, const Attrs& attrs) {
  Shape out_shape = infer_shape(kind, inputs, attrs);
  bool needs_grad = false;
  for (const auto& t : inputs) needs_grad = needs_grad || t.requires_grad();
  Tape* tape = active_tape();
  const bool record = tape != nullptr && needs_grad;
  Tensor out = make_output(std::move(out_shape), record);
  Record r{kind, {}, out.node(), attrs};
  r.inputs.reserve(inputs.size());
  for (const auto& t : inputs) r.inputs.push_back(t.node());
  run_forward(r);
  if (record) tape->push(std::move(r));
  return out;
}

Tensor apply_primitive(std::string_view kind, const std::vector<Tensor>& inputs,
                       const Attrs& attrs) {
  return apply_primitive(parse_kind(kind), inputs, attrs);
}

Tensor matmul(const Tensor& a, const Tensor& b) { return apply_primitive(Kind::MatMul, {a, b}); }
Tensor add(const Tensor& a, const Tensor& b) { return apply_primitive(Kind::Add, {a, b}); }
Tensor sub(const Tensor& a, const Tensor& b) { return apply_primitive(Kind::Sub, {a, b}); }
Tensor mul(const Tensor& a, const Tensor& b) { return apply_primitive(Kind::Mul, {a, b}); }

Tensor scale(const Tensor& a, double factor) {
  Attrs at;
  at.scale = factor;
  return apply_primitive(Kind::ScalarScale, {a}, at);
}

Tensor scale(const Tensor& a, const Tensor& factor) {
  return apply_primitive(Kind::ScalarScale, {a, factor});
}

Tensor relu(const Tensor& a) { return apply_primitive(Kind::Relu, {a}); }
Tensor sigmoid(const Tensor& a) { return apply_primitive(Kind::Sigmoid, {a}); }
Tensor tanh(const Tensor& a) { return apply_primitive(Kind::Tanh, {a}); }
Tensor exp(const Tensor& a) { return apply_primitive(Kind::Exp, {a}); }

Tensor softmax(const Tensor& a, std::size_t axis) {
  Attrs at;
  at.axis = axis;
  return apply_primitive(Kind::Softmax, {a}, at);
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  Attrs at;
  at.axis = axis;
  return apply_primitive(Kind::Concat, parts, at);
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  Attrs at;
  at.axis = axis;
  at.start = start;
  at.length = length;
  return apply_primitive(Kind::Slice, {a}, at);
}

Tensor reshape(const Tensor& a, Shape shape) {
  Attrs at;
  at.shape = std::move(shape);
  return apply_primitive(Kind::Reshape, {a}, at);
}

Tensor sum(const Tensor& a, std::size_t axis) {
  Attrs at;
  at.axis = axis;
  return apply_primitive(Kind::Sum, {a}, at);
}

Tensor mean(const Tensor& a, std::size_t axis) {
  Attrs at;
  at.axis = axis;
  return apply_primitive(Kind::Mean, {a}, at);
}

Tensor causal_conv1d(const Tensor& x, const Tensor& w, std::size_t dilation) {
  Attrs at;
  at.dilation = dilation;
  return apply_primitive(Kind::CausalConv1d, {x, w}, at);
}

Tensor transpose(const Tensor& a, std::vector<std::size_t> perm) {
  Attrs at;
  at.perm = std::move(perm);
  return apply_primitive(Kind::Transpose, {a}, at);
}

// ---------------------------------------------------------------- checks

namespace {

double eval_scalar(const std::function<Tensor()>& f) {
  TapeScope off(nullptr);
  const Tensor y = f();
  if (y.size() != 1) throw std::invalid_argument("grad_check: function is not scalar");
  const double v = y.item();
  if (!std::isfinite(v)) throw std::domain_error("grad_check: non-finite function value");
  return v;
}

}  // namespace

double grad_check_params(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                         double eps) {
  if (!(eps > 0)) throw std::invalid_argument("grad_check: eps must be positive");
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    TapeScope scope(&tape);
    for (auto p : params) p.zero_grad();
    const Tensor y = f();
    if (y.size() != 1) throw std::invalid_argument("grad_check: function is not scalar");
    if (!std::isfinite(y.item())) {
      throw std::domain_error("grad_check: non-finite function value");
    }
    tape.backward(y);
    for (const auto& p : params) {
      std::vector<double> g(p.size(), 0.0);
      if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), g.begin());
      analytic.push_back(std::move(g));
    }
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor p = params[k];
    auto v = p.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + eps;
      const double up = eval_scalar(f);
      v[i] = saved - eps;
      const double down = eval_scalar(f);
      v[i] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double a = analytic[k][i];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
  }
  return worst;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                  double eps) {
  Tensor x = Tensor::parameter(point.shape(),
                               std::vector<double>(point.values().begin(), point.values().end()));
  return grad_check_params([&] { return f(x); }, {x}, eps);
}

}  // namespace stnas::ad
