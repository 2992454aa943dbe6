#ifndef PIM_TENSOR_HPP
#define PIM_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace pim {

// Dense row-major tensor of 64-bit floats with reverse-mode autodiff.
//
// Tensor is a cheap value-semantic handle onto a shared node holding shape,
// data and (once backward has run) the gradient. Operations are free
// functions; while a Tape is active and any input requires grad, each op
// records a backward rule onto it. Gradients accumulate additively across
// paths, so callers zero parameter grads between steps.
//
// Non-differentiable routing (sign, argsort, top-k index selection, max
// tie-breaks) follows the conventions: sign(0) = 0, sign backward = 0,
// descending sorts break ties by ascending flat index, max routes its
// gradient to the first maximum.

namespace detail {

struct TensorNode {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad; // sized lazily, same length as data once touched
  bool requires_grad = false;

  std::size_t size() const { return data.size(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

} // namespace detail

class Tensor {
public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false);
  static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data.size(); }
  std::size_t extent(std::size_t axis) const { return node_->shape.at(axis); }

  const std::vector<double>& data() const { return node_->data; }
  std::vector<double>& mutable_data() { return node_->data; }
  double at(std::size_t flat) const { return node_->data.at(flat); }

  // Value of a rank-0/size-1 tensor.
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }
  bool has_grad() const { return node_->grad.size() == node_->data.size(); }
  const std::vector<double>& grad() const;
  void zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

  std::shared_ptr<detail::TensorNode> node() const { return node_; }

private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::TensorNode> node_;
};

// Records ops in execution order; backward replays them exactly once in
// reverse. A tape is confined to the thread that constructed it. Tapes nest:
// construction pushes, destruction pops.
class Tape {
public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current();

  std::size_t size() const { return entries_.size(); }

  void record(std::function<void()> backward_rule) {
    entries_.push_back(std::move(backward_rule));
  }

  // Seeds d(loss)/d(loss) = 1 and propagates. loss must be scalar and have
  // been recorded on this tape (or be a leaf, in which case this is a no-op
  // beyond seeding).
  void backward(const Tensor& loss);

private:
  std::vector<std::function<void()>> entries_;
  Tape* previous_ = nullptr;
};

std::string shape_to_string(const std::vector<std::size_t>& shape);

// ---- elementwise ----------------------------------------------------------
// add/sub/mul support identical shapes or scalar-vs-tensor broadcasting only.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sign(const Tensor& a); // sign(0) = 0; zero gradient

// Bias helpers used by linear and conv layers (restricted broadcasts).
Tensor add_rowwise(const Tensor& matrix, const Tensor& row);       // [m,n] + [n]
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);      // [N,C,H,W] + [C]

// ---- linear algebra -------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b); // [m,k]x[k,n] -> [m,n]
Tensor transpose(const Tensor& a);               // [m,n] -> [n,m]

// ---- shape ----------------------------------------------------------------
Tensor reshape(const Tensor& a, std::vector<std::size_t> new_shape);
Tensor concat_rows(const std::vector<Tensor>& parts); // [mi,n] -> [sum(mi),n]
// [C,H,W] -> [(H*W),C], row s = y*W + x holds the channel vector at (y,x).
Tensor pixels_as_rows(const Tensor& chw);

// ---- softmax & reductions -------------------------------------------------
// Numerically stable (max-subtracted) softmax along one axis.
Tensor softmax(const Tensor& x, std::size_t axis);

Tensor reduce_sum(const Tensor& x, std::size_t axis);
Tensor reduce_mean(const Tensor& x, std::size_t axis);
Tensor reduce_max(const Tensor& x, std::size_t axis);
Tensor sum_all(const Tensor& x);  // -> scalar
Tensor mean_all(const Tensor& x); // -> scalar

// Descending stable argsort of the flattened tensor (ties by ascending
// index). Pure index computation, never recorded.
std::vector<std::size_t> argsort_descending(const Tensor& x);
std::vector<std::size_t> topk_indices(const Tensor& x, std::size_t k);

// Row gather: out[j, :] = x[indices[j], :]. Differentiable w.r.t. x via
// scatter-add; indices are fixed routing.
Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& indices);

// ---- spatial --------------------------------------------------------------
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride,
              std::size_t padding);
Tensor upsample_nearest(const Tensor& x, std::size_t factor); // [N,C,H,W]

// ---- backward entry point -------------------------------------------------
// Requires an active tape; loss must be scalar.
void backward(const Tensor& loss);

} // namespace pim

#endif
