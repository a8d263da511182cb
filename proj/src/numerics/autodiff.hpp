#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <memory>
#include <vector>

#include "numerics/tensor.hpp"

namespace histograph::numerics {

struct VarNode {
  Tensor value;
  Tensor grad;  // empty until something accumulates into it
  bool requires_grad = false;

  // Lazily allocates a zero gradient of the value's shape.
  Tensor& grad_buffer();
};

// Shared handle to a value participating in differentiation.  Parameters are
// long-lived Vars with requires_grad set; intermediates are created by ops.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  const Tensor& grad() const { return node_->grad; }
  // Handle semantics: constness of the handle does not extend to the node.
  Tensor& grad_buffer() const { return node_->grad_buffer(); }
  void zero_grad() const { node_->grad = Tensor(); }
  explicit operator bool() const { return static_cast<bool>(node_); }
  VarNode* node() const { return node_.get(); }

 private:
  std::shared_ptr<VarNode> node_;
};

inline Var constant(Tensor t) { return Var(std::move(t), false); }
inline Var parameter(Tensor t) { return Var(std::move(t), true); }

// Records backward closures in forward order.  A tape supports exactly one
// backward pass; build a fresh one for every forward evaluation.
class Tape {
 public:
  using Backward = std::function<void()>;

  void record(Backward fn) { entries_.push_back(std::move(fn)); }
  std::size_t size() const noexcept { return entries_.size(); }
  bool consumed() const noexcept { return consumed_; }

  // Seeds d(loss)/d(loss) = 1 and replays the closures in reverse.
  void backward(Var& loss);

 private:
  std::vector<Backward> entries_;
  bool consumed_ = false;
};

// Every op takes an optional tape.  With a null tape (or when no input
// requires a gradient) nothing is recorded and the call is a pure function of
// its inputs, which is what concurrent inference relies on.
namespace ops {

Var matmul(Tape* tape, const Var& a, const Var& b);
Var transpose(Tape* tape, const Var& a);
Var add(Tape* tape, const Var& a, const Var& b);
Var add_row_bias(Tape* tape, const Var& x, const Var& bias);
Var scale(Tape* tape, const Var& x, double factor);
Var mul(Tape* tape, const Var& a, const Var& b);
Var scale_rows(Tape* tape, const Var& x, const Var& row_factors);
Var leaky_relu(Tape* tape, const Var& x, double slope);
// Standardizes every column of x (N x F) over its N rows with the population
// variance, then applies gain (F) and shift (F).
Var node_norm(Tape* tape, const Var& x, const Var& gain, const Var& shift, double eps);
// scale * softmax(x) along `axis`.
Var softmax(Tape* tape, const Var& x, std::size_t axis, double scale = 1.0);
Var sum(Tape* tape, const Var& x);
Var reshape(Tape* tape, const Var& x, Shape shape);
Var slice_last(Tape* tape, const Var& x, std::size_t index);
Var stack_last(Tape* tape, const std::vector<Var>& slices);
Var gather(Tape* tape, const Var& x, std::vector<std::size_t> indices);
Var concat(Tape* tape, const std::vector<Var>& parts);
// -log softmax(logits)[label], computed with a max shift.
Var cross_entropy(Tape* tape, const Var& logits, std::size_t label);

}  // namespace ops

// Finite-difference checks need to know when a step crossed a kink.  While a
// sink is installed on the calling thread, leaky_relu folds the sign pattern
// of its inputs into it.  Null uninstalls.
void set_kink_sink(std::uint64_t* sink);
// For ops that apply a piecewise-linear activation inline.
void note_signs(std::span<const double> pre_activations);

// Plain (non-differentiable) helpers shared by ops and oracles.
Tensor softmax_values(const Tensor& x, std::size_t axis, double scale = 1.0);
std::vector<double> softmax_vector(std::span<const double> logits);

// True when a tape is present and any of the inputs needs a gradient.
bool should_record(const Tape* tape, std::initializer_list<const Var*> inputs);

}  // namespace histograph::numerics
