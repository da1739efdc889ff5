#include "camix/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "camix/kernels.hpp"

namespace camix {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

NodePtr make_node(std::vector<double> data, Shape shape, bool requires_grad) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  if (n->data.size() != shape_size(n->shape))
    throw std::invalid_argument("tensor data length " +
                                std::to_string(n->data.size()) +
                                " does not match shape " + shape_str(n->shape));
  return n;
}

bool any_requires_grad(std::initializer_list<const Tensor*> ts) {
  for (const Tensor* t : ts)
    if (t->requires_grad()) return true;
  return false;
}

// Builds the result node and wires parents + backward_fn only when some
// input participates in the tape.
Tensor make_result(std::vector<double> data, Shape shape,
                   std::initializer_list<const Tensor*> inputs,
                   const std::function<void(TensorNode&)>& make_backward) {
  const bool rg = any_requires_grad(inputs);
  auto n = make_node(std::move(data), std::move(shape), rg);
  if (rg) {
    for (const Tensor* t : inputs) n->parents.push_back(t->node());
    make_backward(*n);
  }
  return Tensor(std::move(n));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

void axpy(std::vector<double>& dst, const std::vector<double>& src,
          double alpha = 1.0) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += alpha * src[i];
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(std::vector<double> data, Shape shape, bool requires_grad)
    : node_(make_node(std::move(data), std::move(shape), requires_grad)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> d(shape_size(shape), 0.0);
  return Tensor(std::move(d), std::move(shape), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> d(shape_size(shape), value);
  return Tensor(std::move(d), std::move(shape), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({value}, Shape{1}, requires_grad);
}

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.empty())
    throw std::runtime_error("tensor has no gradient; run backward() first");
  return node_->grad;
}

void Tensor::zero_grad() {
  node_->grad.clear();
  node_->backward_done = false;
}

double Tensor::item() const {
  if (size() != 1)
    throw std::invalid_argument("item() on non-scalar tensor " +
                                shape_str(shape()));
  return node_->data[0];
}

void backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw std::invalid_argument("backward() requires a scalar loss, got " +
                                shape_str(loss.shape()));
  NodePtr root = loss.node();
  if (!root->requires_grad)
    throw std::invalid_argument(
        "backward() on a tensor detached from the tape");
  if (root->backward_done)
    throw std::runtime_error(
        "backward() called twice on the same tape without reset");

  // Iterative post-order DFS: children come after all their parents.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  struct Frame {
    NodePtr node;
    std::size_t next_parent = 0;
  };
  std::vector<Frame> stack;
  stack.push_back({root});
  seen.insert(root.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      NodePtr p = f.node->parents[f.next_parent++];
      if (p->requires_grad && seen.insert(p.get()).second)
        stack.push_back({std::move(p)});
    } else {
      order.push_back(f.node.get());
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backward_fn) {
      n->ensure_grad();
      n->backward_fn();
    }
    n->backward_done = true;
  }
}

// --------------------------------------------------------------------------
// elementwise
// --------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result(std::move(out), a.shape(), {&a, &b}, [&](TensorNode& n) {
    auto an = a.node(), bn = b.node();
    TensorNode* self = &n;
    n.backward_fn = [self, an, bn] {
      if (an->requires_grad) {
        an->ensure_grad();
        axpy(an->grad, self->grad);
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        axpy(bn->grad, self->grad);
      }
    };
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return add(a, scale(b, -1.0));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result(std::move(out), a.shape(), {&a, &b}, [&](TensorNode& n) {
    auto an = a.node(), bn = b.node();
    TensorNode* self = &n;
    n.backward_fn = [self, an, bn] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self->grad.size(); ++i)
          an->grad[i] += self->grad[i] * bn->data[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < self->grad.size(); ++i)
          bn->grad[i] += self->grad[i] * an->data[i];
      }
    };
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
  return make_result(std::move(out), a.shape(), {&a}, [&](TensorNode& n) {
    auto an = a.node();
    TensorNode* self = &n;
    n.backward_fn = [self, an, s] {
      an->ensure_grad();
      axpy(an->grad, self->grad, s);
    };
  });
}

Tensor gelu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x.data()[i];
    out[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  return make_result(std::move(out), x.shape(), {&x}, [&](TensorNode& n) {
    auto xn = x.node();
    TensorNode* self = &n;
    n.backward_fn = [self, xn] {
      xn->ensure_grad();
      for (std::size_t i = 0; i < self->grad.size(); ++i) {
        const double v = xn->data[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        xn->grad[i] += self->grad[i] * (cdf + v * pdf);
      }
    };
  });
}

// --------------------------------------------------------------------------
// reductions / shape
// --------------------------------------------------------------------------

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result({s}, Shape{1}, {&x}, [&](TensorNode& n) {
    auto xn = x.node();
    TensorNode* self = &n;
    n.backward_fn = [self, xn] {
      xn->ensure_grad();
      const double g = self->grad[0];
      for (double& v : xn->grad) v += g;
    };
  });
}

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_size(new_shape) != x.size())
    throw std::invalid_argument("reshape: cannot view " +
                                shape_str(x.shape()) + " as " +
                                shape_str(new_shape));
  std::vector<double> out = x.data();
  return make_result(std::move(out), std::move(new_shape), {&x},
                     [&](TensorNode& n) {
                       auto xn = x.node();
                       TensorNode* self = &n;
                       n.backward_fn = [self, xn] {
                         xn->ensure_grad();
                         axpy(xn->grad, self->grad);
                       };
                     });
}

// --------------------------------------------------------------------------
// linear algebra
// --------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[0])
    throw std::invalid_argument("matmul: incompatible shapes " +
                                shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n);
  kernels::matmul_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  return make_result(std::move(out), Shape{m, n}, {&a, &b},
                     [&](TensorNode& nd) {
    auto an = a.node(), bn = b.node();
    TensorNode* self = &nd;
    nd.backward_fn = [self, an, bn, m, k, n] {
      if (an->requires_grad) {
        an->ensure_grad();
        std::vector<double> tmp(m * k);
        kernels::matmul_nt(self->grad.data(), bn->data.data(), tmp.data(), m,
                           n, k);
        axpy(an->grad, tmp);
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        std::vector<double> tmp(k * n);
        kernels::matmul_tn(an->data.data(), self->grad.data(), tmp.data(), k,
                           m, n);
        axpy(bn->grad, tmp);
      }
    };
  });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.shape()[0] != b.shape()[0])
    throw std::invalid_argument("bmm: incompatible shapes " +
                                shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  const std::size_t batch = a.shape()[0];
  const std::size_t m = a.shape()[1], k = a.shape()[2];
  const std::size_t n = trans_b ? b.shape()[1] : b.shape()[2];
  const std::size_t bk = trans_b ? b.shape()[2] : b.shape()[1];
  if (bk != k)
    throw std::invalid_argument("bmm: inner dimensions disagree, " +
                                shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  std::vector<double> out(batch * m * n);
  for (std::size_t i = 0; i < batch; ++i) {
    const double* ap = a.data().data() + i * m * k;
    const double* bp = b.data().data() + i * k * n;
    double* cp = out.data() + i * m * n;
    trans_b ? kernels::matmul_nt(ap, bp, cp, m, k, n)
            : kernels::matmul_nn(ap, bp, cp, m, k, n);
  }
  return make_result(std::move(out), Shape{batch, m, n}, {&a, &b},
                     [&](TensorNode& nd) {
    auto an = a.node(), bn = b.node();
    TensorNode* self = &nd;
    nd.backward_fn = [self, an, bn, batch, m, k, n, trans_b] {
      for (std::size_t i = 0; i < batch; ++i) {
        const double* gp = self->grad.data() + i * m * n;
        const double* ap = an->data.data() + i * m * k;
        const double* bp = bn->data.data() + i * k * n;
        if (an->requires_grad) {
          an->ensure_grad();
          std::vector<double> tmp(m * k);
          // trans_b: C = A B^T  =>  dA = G B ; else dA = G B^T
          trans_b ? kernels::matmul_nn(gp, bp, tmp.data(), m, n, k)
                  : kernels::matmul_nt(gp, bp, tmp.data(), m, n, k);
          double* dst = an->grad.data() + i * m * k;
          for (std::size_t j = 0; j < tmp.size(); ++j) dst[j] += tmp[j];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          std::vector<double> tmp(k * n);
          // trans_b: dB = G^T A ; else dB = A^T G
          trans_b ? kernels::matmul_tn(gp, ap, tmp.data(), n, m, k)
                  : kernels::matmul_tn(ap, gp, tmp.data(), k, m, n);
          double* dst = bn->grad.data() + i * k * n;
          for (std::size_t j = 0; j < tmp.size(); ++j) dst[j] += tmp[j];
        }
      }
    };
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.ndim() != 1 || x.shape().back() != bias.shape()[0])
    throw std::invalid_argument("add_bias: bias " + shape_str(bias.shape()) +
                                " incompatible with " + shape_str(x.shape()));
  const std::size_t n = bias.size();
  const std::size_t rows = x.size() / n;
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j)
      out[r * n + j] = x.data()[r * n + j] + bias.data()[j];
  return make_result(std::move(out), x.shape(), {&x, &bias},
                     [&](TensorNode& nd) {
    auto xn = x.node(), bn = bias.node();
    TensorNode* self = &nd;
    nd.backward_fn = [self, xn, bn, rows, n] {
      if (xn->requires_grad) {
        xn->ensure_grad();
        axpy(xn->grad, self->grad);
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < n; ++j)
            bn->grad[j] += self->grad[r * n + j];
      }
    };
  });
}

// --------------------------------------------------------------------------
// nn primitives
// --------------------------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, std::size_t groups,
              std::size_t padding) {
  if (x.ndim() != 4 || w.ndim() != 4)
    throw std::invalid_argument("conv2d: expected 4-D input and weight, got " +
                                shape_str(x.shape()) + " and " +
                                shape_str(w.shape()));
  kernels::Conv2dDims d;
  d.batch = x.shape()[0];
  d.c_in = x.shape()[1];
  d.h = x.shape()[2];
  d.w = x.shape()[3];
  d.c_out = w.shape()[0];
  d.kh = w.shape()[2];
  d.kw = w.shape()[3];
  d.groups = groups;
  d.pad = padding;
  if (groups == 0 || d.c_in % groups != 0 || d.c_out % groups != 0)
    throw std::invalid_argument(
        "conv2d: channels not divisible by groups (Cin=" +
        std::to_string(d.c_in) + ", Cout=" + std::to_string(d.c_out) +
        ", groups=" + std::to_string(groups) + ")");
  if (w.shape()[1] != d.c_in / groups)
    throw std::invalid_argument("conv2d: weight " + shape_str(w.shape()) +
                                " inconsistent with input " +
                                shape_str(x.shape()) + " and groups " +
                                std::to_string(groups));
  if (d.h + 2 * d.pad < d.kh || d.w + 2 * d.pad < d.kw)
    throw std::invalid_argument("conv2d: kernel larger than padded input");
  const std::size_t ho = d.out_h(), wo = d.out_w();
  std::vector<double> out(d.batch * d.c_out * ho * wo);
  kernels::conv2d_forward(x.data().data(), w.data().data(), out.data(), d);
  return make_result(std::move(out), Shape{d.batch, d.c_out, ho, wo}, {&x, &w},
                     [&](TensorNode& nd) {
    auto xn = x.node(), wn = w.node();
    TensorNode* self = &nd;
    nd.backward_fn = [self, xn, wn, d] {
      if (xn->requires_grad) {
        xn->ensure_grad();
        kernels::conv2d_backward_input(self->grad.data(), wn->data.data(),
                                       xn->grad.data(), d);
      }
      if (wn->requires_grad) {
        wn->ensure_grad();
        kernels::conv2d_backward_weight(xn->data.data(), self->grad.data(),
                                        wn->grad.data(), d);
      }
    };
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.ndim())
    throw std::invalid_argument("softmax: axis " + std::to_string(axis) +
                                " out of range for " + shape_str(x.shape()));
  const std::size_t len = x.shape()[axis];
  std::size_t inner = 1, outer = 1;
  for (std::size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.shape()[i];
  for (std::size_t i = 0; i < axis; ++i) outer *= x.shape()[i];

  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = x.data()[base];
      for (std::size_t l = 1; l < len; ++l)
        mx = std::max(mx, x.data()[base + l * inner]);
      double denom = 0.0;
      for (std::size_t l = 0; l < len; ++l) {
        const double e = std::exp(x.data()[base + l * inner] - mx);
        out[base + l * inner] = e;
        denom += e;
      }
      for (std::size_t l = 0; l < len; ++l) out[base + l * inner] /= denom;
    }
  }
  return make_result(std::move(out), x.shape(), {&x}, [&](TensorNode& nd) {
    auto xn = x.node();
    TensorNode* self = &nd;
    nd.backward_fn = [self, xn, len, inner, outer] {
      xn->ensure_grad();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * len * inner + in;
          double dot = 0.0;
          for (std::size_t l = 0; l < len; ++l) {
            const std::size_t idx = base + l * inner;
            dot += self->grad[idx] * self->data[idx];
          }
          for (std::size_t l = 0; l < len; ++l) {
            const std::size_t idx = base + l * inner;
            xn->grad[idx] += self->data[idx] * (self->grad[idx] - dot);
          }
        }
      }
    };
  });
}

Tensor layer_norm_chw(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      double eps) {
  if (x.ndim() != 4)
    throw std::invalid_argument("layer_norm_chw: expected NCHW, got " +
                                shape_str(x.shape()));
  const std::size_t nb = x.shape()[0], c = x.shape()[1], h = x.shape()[2],
                    w = x.shape()[3];
  if (gamma.size() != c || beta.size() != c)
    throw std::invalid_argument("layer_norm_chw: affine params sized " +
                                shape_str(gamma.shape()) +
                                " do not match C=" + std::to_string(c));
  const std::size_t hw = h * w;
  std::vector<double> out(x.size());
  std::vector<double> inv_sigma(nb * hw), means(nb * hw);
  for (std::size_t n = 0; n < nb; ++n) {
    for (std::size_t p = 0; p < hw; ++p) {
      double mean = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch)
        mean += x.data()[(n * c + ch) * hw + p];
      mean /= static_cast<double>(c);
      double var = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double dv = x.data()[(n * c + ch) * hw + p] - mean;
        var += dv * dv;
      }
      var /= static_cast<double>(c);
      const double is = 1.0 / std::sqrt(var + eps);
      means[n * hw + p] = mean;
      inv_sigma[n * hw + p] = is;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const std::size_t idx = (n * c + ch) * hw + p;
        out[idx] = gamma.data()[ch] * (x.data()[idx] - mean) * is +
                   beta.data()[ch];
      }
    }
  }
  return make_result(std::move(out), x.shape(), {&x, &gamma, &beta},
                     [&](TensorNode& nd) {
    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    TensorNode* self = &nd;
    nd.backward_fn = [self, xn, gn, bn, nb, c, hw, means, inv_sigma] {
      const double cf = static_cast<double>(c);
      for (std::size_t n = 0; n < nb; ++n) {
        for (std::size_t p = 0; p < hw; ++p) {
          const double mean = means[n * hw + p];
          const double is = inv_sigma[n * hw + p];
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t idx = (n * c + ch) * hw + p;
            const double xhat = (xn->data[idx] - mean) * is;
            const double dxhat = self->grad[idx] * gn->data[ch];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
            if (gn->requires_grad) {
              gn->ensure_grad();
              gn->grad[ch] += self->grad[idx] * xhat;
            }
            if (bn->requires_grad) {
              bn->ensure_grad();
              bn->grad[ch] += self->grad[idx];
            }
          }
          if (xn->requires_grad) {
            xn->ensure_grad();
            for (std::size_t ch = 0; ch < c; ++ch) {
              const std::size_t idx = (n * c + ch) * hw + p;
              const double xhat = (xn->data[idx] - mean) * is;
              const double dxhat = self->grad[idx] * gn->data[ch];
              xn->grad[idx] +=
                  is * (dxhat - sum_dxhat / cf - xhat * sum_dxhat_xhat / cf);
            }
          }
        }
      }
    };
  });
}

Tensor cross_entropy(const Tensor& logits,
                     const std::vector<std::size_t>& labels) {
  if (logits.ndim() != 2)
    throw std::invalid_argument("cross_entropy: expected [N,K] logits, got " +
                                shape_str(logits.shape()));
  const std::size_t n = logits.shape()[0], k = logits.shape()[1];
  if (labels.size() != n)
    throw std::invalid_argument("cross_entropy: " + std::to_string(n) +
                                " rows but " + std::to_string(labels.size()) +
                                " labels");
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] >= k)
      throw std::invalid_argument("cross_entropy: label out of range");
  double loss = 0.0;
  std::vector<double> probs(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = logits.data().data() + i * k;
    double mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      probs[i * k + j] = std::exp(row[j] - mx);
      denom += probs[i * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) probs[i * k + j] /= denom;
    loss += std::log(denom) + mx - row[labels[i]];
  }
  loss /= static_cast<double>(n);
  return make_result({loss}, Shape{1}, {&logits}, [&](TensorNode& nd) {
    auto ln = logits.node();
    TensorNode* self = &nd;
    nd.backward_fn = [self, ln, probs, labels, n, k] {
      ln->ensure_grad();
      const double g = self->grad[0] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j)
          ln->grad[i * k + j] +=
              g * (probs[i * k + j] - (labels[i] == j ? 1.0 : 0.0));
    };
  });
}

// --------------------------------------------------------------------------
// spatial rearrangement
// --------------------------------------------------------------------------

namespace {

// dy/dx per shift group: left, right, up, down, none.
constexpr int kShiftDx[5] = {1, -1, 0, 0, 0};
constexpr int kShiftDy[5] = {0, 0, 1, -1, 0};

void apply_shift5(const double* src, double* dst, std::size_t nb,
                  std::size_t c, std::size_t h, std::size_t w, bool adjoint) {
  const std::size_t gsz = c / 5;
  for (std::size_t n = 0; n < nb; ++n) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t g = ch / gsz;
      const int dx = adjoint ? -kShiftDx[g] : kShiftDx[g];
      const int dy = adjoint ? -kShiftDy[g] : kShiftDy[g];
      const double* sp = src + (n * c + ch) * h * w;
      double* dp = dst + (n * c + ch) * h * w;
      for (std::size_t y = 0; y < h; ++y) {
        const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
        for (std::size_t x = 0; x < w; ++x) {
          const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x) + dx;
          double v = 0.0;
          if (sy >= 0 && sy < static_cast<std::ptrdiff_t>(h) && sx >= 0 &&
              sx < static_cast<std::ptrdiff_t>(w))
            v = sp[sy * static_cast<std::ptrdiff_t>(w) + sx];
          dp[y * w + x] += v;
        }
      }
    }
  }
}

}  // namespace

Tensor shift5(const Tensor& x) {
  if (x.ndim() != 4)
    throw std::invalid_argument("shift5: expected NCHW, got " +
                                shape_str(x.shape()));
  const std::size_t nb = x.shape()[0], c = x.shape()[1], h = x.shape()[2],
                    w = x.shape()[3];
  if (c % 5 != 0)
    throw std::invalid_argument("shift5: channel count " + std::to_string(c) +
                                " not divisible by 5");
  std::vector<double> out(x.size(), 0.0);
  apply_shift5(x.data().data(), out.data(), nb, c, h, w, false);
  return make_result(std::move(out), x.shape(), {&x}, [&](TensorNode& nd) {
    auto xn = x.node();
    TensorNode* self = &nd;
    nd.backward_fn = [self, xn, nb, c, h, w] {
      xn->ensure_grad();
      apply_shift5(self->grad.data(), xn->grad.data(), nb, c, h, w, true);
    };
  });
}

Tensor pad_hw(const Tensor& x, std::size_t top, std::size_t bottom,
              std::size_t left, std::size_t right) {
  if (x.ndim() != 4)
    throw std::invalid_argument("pad_hw: expected NCHW, got " +
                                shape_str(x.shape()));
  const std::size_t nb = x.shape()[0], c = x.shape()[1], h = x.shape()[2],
                    w = x.shape()[3];
  const std::size_t ho = h + top + bottom, wo = w + left + right;
  std::vector<double> out(nb * c * ho * wo, 0.0);
  for (std::size_t nc = 0; nc < nb * c; ++nc)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xw = 0; xw < w; ++xw)
        out[(nc * ho + y + top) * wo + xw + left] =
            x.data()[(nc * h + y) * w + xw];
  return make_result(std::move(out), Shape{nb, c, ho, wo}, {&x},
                     [&](TensorNode& nd) {
    auto xn = x.node();
    TensorNode* self = &nd;
    nd.backward_fn = [self, xn, nb, c, h, w, ho, wo, top, left] {
      xn->ensure_grad();
      for (std::size_t nc = 0; nc < nb * c; ++nc)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t xw = 0; xw < w; ++xw)
            xn->grad[(nc * h + y) * w + xw] +=
                self->grad[(nc * ho + y + top) * wo + xw + left];
    };
  });
}

Tensor crop_hw(const Tensor& x, std::size_t top, std::size_t bottom,
               std::size_t left, std::size_t right) {
  if (x.ndim() != 4)
    throw std::invalid_argument("crop_hw: expected NCHW, got " +
                                shape_str(x.shape()));
  const std::size_t nb = x.shape()[0], c = x.shape()[1], h = x.shape()[2],
                    w = x.shape()[3];
  if (top + bottom >= h || left + right >= w)
    throw std::invalid_argument("crop_hw: crop exceeds extent " +
                                shape_str(x.shape()));
  const std::size_t ho = h - top - bottom, wo = w - left - right;
  std::vector<double> out(nb * c * ho * wo);
  for (std::size_t nc = 0; nc < nb * c; ++nc)
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t xw = 0; xw < wo; ++xw)
        out[(nc * ho + y) * wo + xw] =
            x.data()[(nc * h + y + top) * w + xw + left];
  return make_result(std::move(out), Shape{nb, c, ho, wo}, {&x},
                     [&](TensorNode& nd) {
    auto xn = x.node();
    TensorNode* self = &nd;
    nd.backward_fn = [self, xn, nb, c, h, w, ho, wo, top, left] {
      xn->ensure_grad();
      for (std::size_t nc = 0; nc < nb * c; ++nc)
        for (std::size_t y = 0; y < ho; ++y)
          for (std::size_t xw = 0; xw < wo; ++xw)
            xn->grad[(nc * h + y + top) * w + xw + left] +=
                self->grad[(nc * ho + y) * wo + xw];
    };
  });
}

Tensor patchify(const Tensor& x, std::size_t s) {
  if (x.ndim() != 4)
    throw std::invalid_argument("patchify: expected NCHW, got " +
                                shape_str(x.shape()));
  const std::size_t nb = x.shape()[0], c = x.shape()[1], h = x.shape()[2],
                    w = x.shape()[3];
  if (s == 0 || h % s != 0 || w % s != 0)
    throw std::invalid_argument("patchify: extent " + shape_str(x.shape()) +
                                " not divisible by patch size " +
                                std::to_string(s));
  const std::size_t ph = h / s, pw = w / s, np = ph * pw, td = s * s * c;
  std::vector<double> out(nb * np * td);
  for (std::size_t n = 0; n < nb; ++n)
    for (std::size_t by = 0; by < ph; ++by)
      for (std::size_t bx = 0; bx < pw; ++bx) {
        const std::size_t p = by * pw + bx;
        for (std::size_t ch = 0; ch < c; ++ch)
          for (std::size_t dy = 0; dy < s; ++dy)
            for (std::size_t dx = 0; dx < s; ++dx)
              out[(n * np + p) * td + (ch * s + dy) * s + dx] =
                  x.data()[((n * c + ch) * h + by * s + dy) * w + bx * s + dx];
      }
  return make_result(std::move(out), Shape{nb, np, td}, {&x},
                     [&](TensorNode& nd) {
    auto xn = x.node();
    TensorNode* self = &nd;
    nd.backward_fn = [self, xn, nb, c, h, w, s, ph, pw, np, td] {
      xn->ensure_grad();
      for (std::size_t n = 0; n < nb; ++n)
        for (std::size_t by = 0; by < ph; ++by)
          for (std::size_t bx = 0; bx < pw; ++bx) {
            const std::size_t p = by * pw + bx;
            for (std::size_t ch = 0; ch < c; ++ch)
              for (std::size_t dy = 0; dy < s; ++dy)
                for (std::size_t dx = 0; dx < s; ++dx)
                  xn->grad[((n * c + ch) * h + by * s + dy) * w + bx * s +
                           dx] +=
                      self->grad[(n * np + p) * td + (ch * s + dy) * s + dx];
          }
    };
  });
}

Tensor unpatchify(const Tensor& t, std::size_t s, std::size_t c, std::size_t h,
                  std::size_t w) {
  if (t.ndim() != 3)
    throw std::invalid_argument("unpatchify: expected [N,P,T] tokens, got " +
                                shape_str(t.shape()));
  const std::size_t nb = t.shape()[0], np = t.shape()[1], td = t.shape()[2];
  const std::size_t ph = h / s, pw = w / s;
  if (h % s != 0 || w % s != 0 || np != ph * pw || td != s * s * c)
    throw std::invalid_argument("unpatchify: tokens " + shape_str(t.shape()) +
                                " inconsistent with target C=" +
                                std::to_string(c) + " H=" + std::to_string(h) +
                                " W=" + std::to_string(w));
  std::vector<double> out(nb * c * h * w);
  for (std::size_t n = 0; n < nb; ++n)
    for (std::size_t by = 0; by < ph; ++by)
      for (std::size_t bx = 0; bx < pw; ++bx) {
        const std::size_t p = by * pw + bx;
        for (std::size_t ch = 0; ch < c; ++ch)
          for (std::size_t dy = 0; dy < s; ++dy)
            for (std::size_t dx = 0; dx < s; ++dx)
              out[((n * c + ch) * h + by * s + dy) * w + bx * s + dx] =
                  t.data()[(n * np + p) * td + (ch * s + dy) * s + dx];
      }
  return make_result(std::move(out), Shape{nb, c, h, w}, {&t},
                     [&](TensorNode& nd) {
    auto tn = t.node();
    TensorNode* self = &nd;
    nd.backward_fn = [self, tn, nb, c, h, w, s, ph, pw, np, td] {
      tn->ensure_grad();
      for (std::size_t n = 0; n < nb; ++n)
        for (std::size_t by = 0; by < ph; ++by)
          for (std::size_t bx = 0; bx < pw; ++bx) {
            const std::size_t p = by * pw + bx;
            for (std::size_t ch = 0; ch < c; ++ch)
              for (std::size_t dy = 0; dy < s; ++dy)
                for (std::size_t dx = 0; dx < s; ++dx)
                  tn->grad[(n * np + p) * td + (ch * s + dy) * s + dx] +=
                      self->grad[((n * c + ch) * h + by * s + dy) * w +
                                 bx * s + dx];
          }
    };
  });
}

}  // namespace camix
