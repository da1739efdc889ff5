#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace camix {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_size(const Shape& s);

namespace detail {

// One node of the dynamic tape. Parents precede the node in execution
// order, so a depth-first walk from the loss yields a valid topological
// order for the backward sweep.
struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until touched by backward()
  bool requires_grad = false;
  bool backward_done = false;

  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void()> backward_fn;

  std::size_t size() const { return data.size(); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

// Value-semantic handle on a dense f64 tensor participating in the tape.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<double> data, Shape shape, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->size(); }
  std::size_t ndim() const { return node_->shape.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::vector<double>& data() { return node_->data; }
  const std::vector<double>& data() const { return node_->data; }
  // Populated gradient; throws if backward() has not reached this tensor.
  const std::vector<double>& grad() const;
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad();

  // Scalar extraction; throws unless size() == 1.
  double item() const;

  std::shared_ptr<detail::TensorNode> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::TensorNode> n)
      : node_(std::move(n)) {}

  bool defined() const { return node_ != nullptr; }

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

// Reverse-mode sweep from a scalar loss. Populates grad on every reachable
// requires_grad tensor. Calling it twice on the same tape is an error.
void backward(const Tensor& loss);

// --- elementwise ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor gelu(const Tensor& x);  // exact erf formulation

// --- reductions / shape ---
Tensor sum(const Tensor& x);
Tensor reshape(const Tensor& x, Shape new_shape);

// --- linear algebra ---
Tensor matmul(const Tensor& a, const Tensor& b);
// Batched matmul over the leading axis; trans_b treats b as [B, n, k].
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b = false);
// x[..., n] + bias[n], broadcast over leading axes.
Tensor add_bias(const Tensor& x, const Tensor& bias);

// --- nn primitives ---
Tensor conv2d(const Tensor& x, const Tensor& w, std::size_t groups,
              std::size_t padding);
Tensor softmax(const Tensor& x, std::size_t axis);
// Per-position layer norm over the channel axis of an NCHW tensor.
Tensor layer_norm_chw(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      double eps = 1e-5);
Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels);

// --- spatial rearrangement ---
// Five-group spatial shift: left, right, up, down, identity. Zero fill.
Tensor shift5(const Tensor& x);
Tensor pad_hw(const Tensor& x, std::size_t top, std::size_t bottom,
              std::size_t left, std::size_t right);
Tensor crop_hw(const Tensor& x, std::size_t top, std::size_t bottom,
               std::size_t left, std::size_t right);
// NCHW -> [N, P, s*s*C] tokens from non-overlapping s x s patches.
Tensor patchify(const Tensor& x, std::size_t s);
// Inverse of patchify; needs the original C, H, W.
Tensor unpatchify(const Tensor& t, std::size_t s, std::size_t c,
                  std::size_t h, std::size_t w);

}  // namespace camix
