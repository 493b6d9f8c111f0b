#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mpcc {

using Shape = std::vector<long>;

long shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorData {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until the first accumulation
  bool requires_grad = false;
};

// Shared handle to a dense 64-bit float array. Values are immutable once an
// op has consumed the tensor; only grad buffers (and leaf parameters, between
// optimizer steps) are written in place.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return d_ != nullptr; }
  const Shape& shape() const { return d_->shape; }
  long numel() const { return static_cast<long>(d_->values.size()); }
  long rank() const { return static_cast<long>(d_->shape.size()); }
  long rows() const;  // rank-2 only
  long cols() const;  // rank-2 only

  std::vector<double>& values() { return d_->values; }
  const std::vector<double>& values() const { return d_->values; }
  double value() const;  // scalar extraction, numel()==1

  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool b) { d_->requires_grad = b; }

  // Allocates a zero buffer on first use.
  std::vector<double>& grad_buffer();
  // nullptr when no gradient has been accumulated.
  const std::vector<double>* grad() const;
  void zero_grad() { d_->grad.clear(); }

  std::shared_ptr<TensorData> data_ptr() const { return d_; }
  bool same_storage(const Tensor& other) const { return d_ == other.d_; }

 private:
  std::shared_ptr<TensorData> d_;
};

// One-hot rows; throws if an index is outside [0, k).
Tensor one_hot(const std::vector<int>& idx, long k);

// Records elementary ops and replays their backward rules in reverse order.
// Single-threaded: one tape per trainer. Every op appends at most one node,
// so the list is topologically ordered by construction and one reverse sweep
// visits each node exactly once.
//
// Kink conventions (deterministic subgradients):
//   relu:       derivative 0 at input exactly 0 (the zero branch)
//   leaky_relu: derivative = slope at input exactly 0
class Tape {
 public:
  static constexpr double kLeakySlope = 0.2;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // add/mul broadcast in the numpy sense (shapes aligned from the trailing
  // axis; each dimension must match or be 1). This covers the batch cases
  // used here: (n,d)+(d), (n,k)+(n,1) and scalars.
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor negate(const Tensor& a);
  Tensor exp(const Tensor& a);
  Tensor log(const Tensor& a);  // rejects non-positive inputs
  Tensor tanh(const Tensor& a);
  Tensor softplus(const Tensor& a);
  Tensor leaky_relu(const Tensor& a);
  Tensor relu(const Tensor& a);
  Tensor square(const Tensor& a);

  Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a = false,
                bool transpose_b = false);

  Tensor sum(const Tensor& a);
  Tensor mean(const Tensor& a);
  Tensor sum_axis(const Tensor& a, int axis, bool keepdim = false);
  Tensor mean_axis(const Tensor& a, int axis, bool keepdim = false);

  Tensor concat(const Tensor& a, const Tensor& b);        // last axis
  Tensor slice(const Tensor& a, long lo, long hi);        // last axis, [lo,hi)
  Tensor logsumexp(const Tensor& a, bool keepdim = false);  // last axis

  Tensor reshape(const Tensor& a, Shape shape);
  Tensor detach(const Tensor& a);  // constant copy, never recorded

  // Seeds d(root)/d(root) = 1 and sweeps the tape once in reverse.
  // root must be scalar. Gradients accumulate additively across fan-out.
  void backward(const Tensor& root);

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::function<void()> pull;
  };
  std::vector<Node> nodes_;

  Tensor binary_broadcast(const char* op, const Tensor& a, const Tensor& b,
                          bool is_add);
  Tensor unary(const char* op, const Tensor& a,
               const std::function<double(double)>& f,
               const std::function<double(double, double)>& df);
  void record(std::function<void()> pull) { nodes_.push_back({std::move(pull)}); }
};

}  // namespace mpcc
