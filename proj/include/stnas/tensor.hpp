#pragma once

// Reverse-mode differentiation over dense row-major double tensors.
//
// A Tensor is a cheap handle to shared storage. Primitives applied while a
// Tape is active (see TapeScope) are recorded when at least one input
// requires a gradient; Tape::backward then walks the records in reverse.
// There is no broadcasting: the only mixed-size primitive is scalar-scale.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stnas::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

enum class Kind {
  MatMul,
  Add,
  Sub,
  Mul,
  ScalarScale,
  Relu,
  Sigmoid,
  Tanh,
  Exp,
  Softmax,
  Concat,
  Slice,
  Reshape,
  Sum,
  Mean,
  CausalConv1d,
  Transpose,
};

std::string_view kind_name(Kind kind);
/// Throws std::invalid_argument for names outside the primitive set.
Kind parse_kind(std::string_view name);

struct Attrs {
  std::size_t axis = 0;
  std::size_t start = 0;
  std::size_t length = 0;
  std::size_t dilation = 1;
  double scale = 1.0;
  Shape shape;                    // reshape target
  std::vector<std::size_t> perm;  // transpose permutation
};

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::optional<std::size_t> tape_index;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> values() const;
  /// Direct write access; used by optimizers and finite-difference checks.
  std::span<double> mutable_values();
  /// Empty span when no gradient has reached this tensor.
  std::span<const double> grad() const;
  bool has_grad() const;
  void zero_grad();

  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  std::optional<std::size_t> node_id() const;

  /// Deep copy of the values as a constant.
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  friend Tensor make_output(Shape shape, bool requires_grad);
  std::shared_ptr<Node> node_;
};

struct Record {
  Kind kind;
  std::vector<std::shared_ptr<Node>> inputs;
  std::shared_ptr<Node> output;
  Attrs attrs;
};

class Tape {
 public:
  std::size_t size() const { return records_.size(); }
  const std::vector<Record>& records() const { return records_; }
  void clear() { records_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and propagates through the records in reverse
  /// order. Intermediate gradients are reset first; leaf gradients accumulate.
  void backward(const Tensor& loss);

  /// Recomputes every recorded output from the current input values.
  void replay();

  /// Bytes held by recorded outputs (values plus gradient slots).
  std::size_t storage_bytes() const;

  void push(Record record);

 private:
  std::vector<Record> records_;
};

Tape* active_tape();

/// Installs `tape` (or nullptr to disable recording) for the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape* tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tensor apply_primitive(Kind kind, const std::vector<Tensor>& inputs,
                       const Attrs& attrs = {});
Tensor apply_primitive(std::string_view kind, const std::vector<Tensor>& inputs,
                       const Attrs& attrs = {});

// Shape rules:
//   matmul     [.., a, b] x [.., b, c] -> [.., a, c]; leading extents equal
//   conv1d     x [R, T, Cin], w [K, Cin, Cout] -> [R, T, Cout];
//              y[t] = sum_k w[k] x[t - k*dilation], zero left padding
//   sum/mean   drop the reduced axis ([n] reduces to [1])
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// `factor` must hold exactly one element; gradients flow into it.
Tensor scale(const Tensor& a, const Tensor& factor);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start,
             std::size_t length);
Tensor reshape(const Tensor& a, Shape shape);
Tensor sum(const Tensor& a, std::size_t axis);
Tensor mean(const Tensor& a, std::size_t axis);
Tensor causal_conv1d(const Tensor& x, const Tensor& w, std::size_t dilation);
Tensor transpose(const Tensor& a, std::vector<std::size_t> perm);

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
double grad_check(const std::function<Tensor(const Tensor&)>& f,
                  const Tensor& point, double eps);

/// Same measure, taken jointly over every coordinate of every tensor in
/// `params`. The tensors are perturbed in place and restored afterwards.
double grad_check_params(const std::function<Tensor()>& f,
                         const std::vector<Tensor>& params, double eps);

}  // namespace stnas::ad
