#pragma once

// Dense tensor with reverse-mode autodiff over a dynamically recorded graph.
// Single-threaded during graph construction and backward; forward passes over
// frozen parameters may run in parallel across independent examples.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace dgmn {

struct dim_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct degenerate_row_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct autodiff_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Mask = std::vector<std::uint8_t>;

inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}

// Disables graph recording in a scope (inference-only forward passes).
struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_enabled_flag()) { grad_enabled_flag() = false; }
  ~NoGradGuard() { grad_enabled_flag() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

template <class T>
class Tensor {
 public:
  struct Node {
    std::vector<int> shape;
    std::vector<T> data;
    std::vector<T> grad;  // sized lazily during backward
    bool requires_grad = false;
    bool backward_done = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backprop;  // accumulates into parents' grad

    std::size_t size() const { return data.size(); }
    void ensure_grad() {
      if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }
  };

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    std::size_t sz = 1;
    for (int d : shape) {
      if (d < 1) throw dim_error("tensor dimension must be >= 1, got shape " + shape_str(shape));
      sz *= static_cast<std::size_t>(d);
    }
    n->shape = std::move(shape);
    n->data.assign(sz, T(0));
    n->requires_grad = requires_grad;
    return Tensor(n);
  }

  static Tensor from(std::vector<int> shape, std::vector<T> data, bool requires_grad = false) {
    Tensor t = zeros(shape, requires_grad);
    if (t.size() != data.size())
      throw dim_error("data length " + std::to_string(data.size()) + " does not match shape " +
                      shape_str(t.shape()));
    t.n_->data = std::move(data);
    return t;
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return from({1}, {v}, requires_grad);
  }

  bool defined() const { return n_ != nullptr; }
  const std::vector<int>& shape() const { return n_->shape; }
  std::size_t size() const { return n_->data.size(); }
  std::vector<T>& data() { return n_->data; }
  const std::vector<T>& data() const { return n_->data; }
  bool requires_grad() const { return n_->requires_grad; }
  void set_requires_grad(bool b) { n_->requires_grad = b; }

  std::vector<T>& grad() {
    n_->ensure_grad();
    return n_->grad;
  }
  const std::vector<T>& grad() const {
    n_->ensure_grad();
    return n_->grad;
  }

  void zero_grad() {
    n_->grad.assign(n_->data.size(), T(0));
    n_->backward_done = false;
  }

  T item() const {
    if (size() != 1) throw dim_error("item() on non-scalar tensor " + shape_str(shape()));
    return n_->data[0];
  }

  std::shared_ptr<Node> node() const { return n_; }

  // Reverse-mode sweep from a scalar. Visits each recorded node exactly once
  // in reverse topological order; gradients accumulate into .grad.
  void backward() const {
    if (size() != 1) throw autodiff_error("backward requires a scalar loss, got " + shape_str(shape()));
    if (n_->backward_done)
      throw autodiff_error("repeated backward on the same loss without zero_grad");
    n_->backward_done = true;

    // iterative post-order DFS
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(n_.get(), 0);
    visited.insert(n_.get());
    while (!stack.empty()) {
      auto& [node, idx] = stack.back();
      if (idx < node->parents.size()) {
        Node* p = node->parents[idx++].get();
        if (visited.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    n_->ensure_grad();
    n_->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if ((*it)->backprop) (*it)->backprop();
    }
  }

 private:
  std::shared_ptr<Node> n_;
};

namespace detail {

template <class T>
using NodePtr = std::shared_ptr<typename Tensor<T>::Node>;

template <class T>
Tensor<T> make_result(std::vector<int> shape, std::vector<NodePtr<T>> parents) {
  bool rg = false;
  if (grad_enabled_flag())
    for (auto& p : parents) rg = rg || p->requires_grad;
  Tensor<T> out = Tensor<T>::zeros(std::move(shape), rg);
  if (rg) out.node()->parents = std::move(parents);
  return out;
}

template <class T>
void accum(typename Tensor<T>::Node* n, std::size_t i, T v) {
  n->grad[i] += v;
}

inline void check_same_shape(const std::vector<int>& a, const std::vector<int>& b,
                             const char* op) {
  if (a != b)
    throw dim_error(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise ops

template <class T, class Fwd, class Bwd>
Tensor<T> unary_op(const Tensor<T>& x, Fwd f, Bwd dfdx_from_xy) {
  auto out = detail::make_result<T>(x.shape(), {x.node()});
  auto& o = out.data();
  const auto& xd = x.data();
  for (std::size_t i = 0; i < xd.size(); ++i) o[i] = f(xd[i]);
  if (out.requires_grad()) {
    auto xn = x.node().get();
    auto on = out.node().get();
    out.node()->backprop = [xn, on, dfdx_from_xy]() {
      if (!xn->requires_grad) return;
      xn->ensure_grad();
      for (std::size_t i = 0; i < on->data.size(); ++i)
        xn->grad[i] += on->grad[i] * dfdx_from_xy(xn->data[i], on->data[i]);
    };
  }
  return out;
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return v > T(0) ? v : T(0); },
      [](T xi, T) { return xi > T(0) ? T(1) : T(0); });
}

template <class T>
Tensor<T> tanh_t(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                                    : std::exp(v) / (T(1) + std::exp(v)); },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> log_t(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return std::log(v); }, [](T xi, T) { return T(1) / xi; });
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, T c) {
  return unary_op(
      x, [c](T v) { return c * v; }, [c](T, T) { return c; });
}

template <class T>
Tensor<T> add_const(const Tensor<T>& x, T c) {
  return unary_op(
      x, [c](T v) { return v + c; }, [](T, T) { return T(1); });
}

// gradient passes through inside [lo, hi], zero outside
template <class T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  return unary_op(
      x, [lo, hi](T v) { return std::min(hi, std::max(lo, v)); },
      [lo, hi](T xi, T) { return (xi >= lo && xi <= hi) ? T(1) : T(0); });
}

template <class T, class Fwd, class DA, class DB>
Tensor<T> binary_op(const Tensor<T>& a, const Tensor<T>& b, const char* name, Fwd f, DA da,
                    DB db) {
  detail::check_same_shape(a.shape(), b.shape(), name);
  auto out = detail::make_result<T>(a.shape(), {a.node(), b.node()});
  const auto& ad = a.data();
  const auto& bd = b.data();
  auto& o = out.data();
  for (std::size_t i = 0; i < ad.size(); ++i) o[i] = f(ad[i], bd[i]);
  if (out.requires_grad()) {
    auto an = a.node().get();
    auto bn = b.node().get();
    auto on = out.node().get();
    out.node()->backprop = [an, bn, on, da, db]() {
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < on->data.size(); ++i)
          an->grad[i] += on->grad[i] * da(an->data[i], bn->data[i]);
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < on->data.size(); ++i)
          bn->grad[i] += on->grad[i] * db(an->data[i], bn->data[i]);
      }
    };
  }
  return out;
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
      [](T, T) { return T(1); });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
      [](T, T) { return T(-1); });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T x, T y) { (void)x; return y; },
      [](T x, T y) { (void)y; return x; });
}

// multiply by a constant (non-differentiable) array, e.g. a mask
template <class T>
Tensor<T> mul_const(const Tensor<T>& x, const std::vector<T>& c) {
  if (c.size() != x.size())
    throw dim_error("mul_const: constant length " + std::to_string(c.size()) +
                    " does not match tensor " + shape_str(x.shape()));
  auto out = detail::make_result<T>(x.shape(), {x.node()});
  for (std::size_t i = 0; i < c.size(); ++i) out.data()[i] = x.data()[i] * c[i];
  if (out.requires_grad()) {
    auto xn = x.node().get();
    auto on = out.node().get();
    out.node()->backprop = [xn, on, c]() {
      if (!xn->requires_grad) return;
      xn->ensure_grad();
      for (std::size_t i = 0; i < c.size(); ++i) xn->grad[i] += on->grad[i] * c[i];
    };
  }
  return out;
}

// zero out whole rows of a [R, C] matrix where keep[r] == 0
template <class T>
Tensor<T> mul_rowmask(const Tensor<T>& x, const Mask& keep) {
  if (x.shape().size() != 2 || static_cast<int>(keep.size()) != x.shape()[0])
    throw dim_error("mul_rowmask: mask length " + std::to_string(keep.size()) +
                    " vs shape " + shape_str(x.shape()));
  const int cols = x.shape()[1];
  std::vector<T> c(x.size());
  for (std::size_t r = 0; r < keep.size(); ++r)
    std::fill_n(c.begin() + static_cast<std::ptrdiff_t>(r) * cols, cols, keep[r] ? T(1) : T(0));
  return mul_const(x, c);
}

// ---------------------------------------------------------------------------
// matmul / transpose

// a: [..,p,q], b: [..,q,s]; leading batch dims must agree or be absent.
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() < 2 || bs.size() < 2 || as.size() != bs.size() ||
      !std::equal(as.begin(), as.end() - 2, bs.begin()) || as.back() != bs[bs.size() - 2])
    throw dim_error("matmul: incompatible shapes " + shape_str(as) + " x " + shape_str(bs));
  const int p = as[as.size() - 2], q = as.back(), s = bs.back();
  int batch = 1;
  for (std::size_t i = 0; i + 2 < as.size(); ++i) batch *= as[i];
  std::vector<int> oshape(as.begin(), as.end() - 2);
  oshape.push_back(p);
  oshape.push_back(s);
  auto out = detail::make_result<T>(std::move(oshape), {a.node(), b.node()});
  const T* ad = a.data().data();
  const T* bd = b.data().data();
  T* od = out.data().data();
  for (int n = 0; n < batch; ++n) {
    const T* A = ad + static_cast<std::size_t>(n) * p * q;
    const T* B = bd + static_cast<std::size_t>(n) * q * s;
    T* O = od + static_cast<std::size_t>(n) * p * s;
    for (int i = 0; i < p; ++i)
      for (int k = 0; k < q; ++k) {
        const T aik = A[i * q + k];
        for (int j = 0; j < s; ++j) O[i * s + j] += aik * B[k * s + j];
      }
  }
  if (out.requires_grad()) {
    auto an = a.node().get();
    auto bn = b.node().get();
    auto on = out.node().get();
    out.node()->backprop = [an, bn, on, batch, p, q, s]() {
      const T* G = on->grad.data();
      if (an->requires_grad) {
        an->ensure_grad();
        for (int n = 0; n < batch; ++n) {
          const T* B = bn->data.data() + static_cast<std::size_t>(n) * q * s;
          const T* Gn = G + static_cast<std::size_t>(n) * p * s;
          T* GA = an->grad.data() + static_cast<std::size_t>(n) * p * q;
          for (int i = 0; i < p; ++i)
            for (int j = 0; j < s; ++j) {
              const T g = Gn[i * s + j];
              for (int k = 0; k < q; ++k) GA[i * q + k] += g * B[k * s + j];
            }
        }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int n = 0; n < batch; ++n) {
          const T* A = an->data.data() + static_cast<std::size_t>(n) * p * q;
          const T* Gn = G + static_cast<std::size_t>(n) * p * s;
          T* GB = bn->grad.data() + static_cast<std::size_t>(n) * q * s;
          for (int i = 0; i < p; ++i)
            for (int k = 0; k < q; ++k) {
              const T aik = A[i * q + k];
              for (int j = 0; j < s; ++j) GB[k * s + j] += aik * Gn[i * s + j];
            }
        }
      }
    };
  }
  return out;
}

template <class T>
Tensor<T> transpose2d(const Tensor<T>& x) {
  if (x.shape().size() != 2) throw dim_error("transpose2d: need rank 2, got " + shape_str(x.shape()));
  const int r = x.shape()[0], c = x.shape()[1];
  auto out = detail::make_result<T>({c, r}, {x.node()});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.data()[j * r + i] = x.data()[i * c + j];
  if (out.requires_grad()) {
    auto xn = x.node().get();
    auto on = out.node().get();
    out.node()->backprop = [xn, on, r, c]() {
      if (!xn->requires_grad) return;
      xn->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) xn->grad[i * c + j] += on->grad[j * r + i];
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// softmax over the last dimension, stabilized by per-row max subtraction.
// mask (optional) covers the last dimension; masked positions come out exactly 0.
template <class T>
Tensor<T> softmax_rows(const Tensor<T>& x, const Mask* mask = nullptr) {
  const int k = x.shape().back();
  if (mask && static_cast<int>(mask->size()) != k)
    throw dim_error("softmax_rows: mask length " + std::to_string(mask->size()) +
                    " vs last dim " + std::to_string(k));
  if (mask && std::none_of(mask->begin(), mask->end(), [](std::uint8_t m) { return m != 0; }))
    throw degenerate_row_error("softmax_rows: fully masked row");
  const std::size_t rows = x.size() / k;
  auto out = detail::make_result<T>(x.shape(), {x.node()});
  const T* xd = x.data().data();
  T* od = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xd + r * k;
    T* orow = od + r * k;
    T mx = -std::numeric_limits<T>::infinity();
    for (int j = 0; j < k; ++j)
      if (!mask || (*mask)[j]) mx = std::max(mx, xr[j]);
    T sum = 0;
    for (int j = 0; j < k; ++j) {
      if (!mask || (*mask)[j]) {
        orow[j] = std::exp(xr[j] - mx);
        sum += orow[j];
      } else {
        orow[j] = T(0);
      }
    }
    for (int j = 0; j < k; ++j) orow[j] /= sum;
  }
  if (out.requires_grad()) {
    auto xn = x.node().get();
    auto on = out.node().get();
    out.node()->backprop = [xn, on, rows, k]() {
      if (!xn->requires_grad) return;
      xn->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const T* y = on->data.data() + r * k;
        const T* g = on->grad.data() + r * k;
        T dot = 0;
        for (int j = 0; j < k; ++j) dot += g[j] * y[j];
        for (int j = 0; j < k; ++j) xn->grad[r * k + j] += y[j] * (g[j] - dot);
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// per-row layer normalization: gain ⊙ (x − mean)/sqrt(var + ε) + bias
template <class T>
Tensor<T> row_normalize(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                        T eps = T(1e-6)) {
  const int d = x.shape().back();
  if (gain.size() != static_cast<std::size_t>(d) || bias.size() != static_cast<std::size_t>(d))
    throw dim_error("row_normalize: gain/bias length must equal last dim " + std::to_string(d));
  const std::size_t rows = x.size() / d;
  auto out = detail::make_result<T>(x.shape(), {x.node(), gain.node(), bias.node()});
  std::vector<T> inv_std(rows), mean(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.data().data() + r * d;
    T m = 0;
    for (int j = 0; j < d; ++j) m += xr[j];
    m /= d;
    T v = 0;
    for (int j = 0; j < d; ++j) v += (xr[j] - m) * (xr[j] - m);
    v /= d;
    mean[r] = m;
    inv_std[r] = T(1) / std::sqrt(v + eps);
    for (int j = 0; j < d; ++j)
      out.data()[r * d + j] = gain.data()[j] * (xr[j] - m) * inv_std[r] + bias.data()[j];
  }
  if (out.requires_grad()) {
    auto xn = x.node().get();
    auto gn = gain.node().get();
    auto bn = bias.node().get();
    auto on = out.node().get();
    out.node()->backprop = [xn, gn, bn, on, rows, d, mean, inv_std]() {
      for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = xn->data.data() + r * d;
        const T* g = on->grad.data() + r * d;
        if (gn->requires_grad) {
          gn->ensure_grad();
          for (int j = 0; j < d; ++j)
            gn->grad[j] += g[j] * (xr[j] - mean[r]) * inv_std[r];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (int j = 0; j < d; ++j) bn->grad[j] += g[j];
        }
        if (xn->requires_grad) {
          xn->ensure_grad();
          // d/dx of gain*(x-mean)*inv_std: project out mean and variance directions
          T sum_gg = 0, sum_ggx = 0;
          for (int j = 0; j < d; ++j) {
            const T gg = g[j] * gn->data[j];
            sum_gg += gg;
            sum_ggx += gg * (xr[j] - mean[r]);
          }
          for (int j = 0; j < d; ++j) {
            const T gg = g[j] * gn->data[j];
            const T xc = xr[j] - mean[r];
            xn->grad[r * d + j] +=
                inv_std[r] * (gg - sum_gg / d - xc * inv_std[r] * inv_std[r] * sum_ggx / d);
          }
        }
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// shape ops

template <class T>
Tensor<T> reshape(const Tensor<T>& x, std::vector<int> shape) {
  std::size_t sz = 1;
  for (int d : shape) sz *= static_cast<std::size_t>(d);
  if (sz != x.size())
    throw dim_error("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  auto out = detail::make_result<T>(std::move(shape), {x.node()});
  out.data() = x.data();
  if (out.requires_grad()) {
    auto xn = x.node().get();
    auto on = out.node().get();
    out.node()->backprop = [xn, on]() {
      if (!xn->requires_grad) return;
      xn->ensure_grad();
      for (std::size_t i = 0; i < on->data.size(); ++i) xn->grad[i] += on->grad[i];
    };
  }
  return out;
}

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw dim_error("concat: empty part list");
  const auto& s0 = parts[0].shape();
  const int rank = static_cast<int>(s0.size());
  if (axis < 0 || axis >= rank) throw dim_error("concat: bad axis");
  std::vector<int> oshape = s0;
  oshape[axis] = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    if (static_cast<int>(s.size()) != rank)
      throw dim_error("concat: rank mismatch " + shape_str(s0) + " vs " + shape_str(s));
    for (int i = 0; i < rank; ++i)
      if (i != axis && s[i] != s0[i])
        throw dim_error("concat: side dimension mismatch " + shape_str(s0) + " vs " + shape_str(s));
    oshape[axis] += s[axis];
  }
  std::vector<detail::NodePtr<T>> parents;
  for (const auto& p : parts) parents.push_back(p.node());
  auto out = detail::make_result<T>(oshape, std::move(parents));

  // outer = product of dims before axis, inner = product after
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s0[i];
  for (int i = axis + 1; i < rank; ++i) inner *= s0[i];
  const std::size_t ostride = static_cast<std::size_t>(oshape[axis]) * inner;
  std::vector<std::size_t> offsets;  // element offset of each part within a row
  {
    std::size_t off = 0;
    for (const auto& p : parts) {
      offsets.push_back(off);
      off += static_cast<std::size_t>(p.shape()[axis]) * inner;
    }
  }
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const auto& pd = parts[pi].data();
    const std::size_t chunk = static_cast<std::size_t>(parts[pi].shape()[axis]) * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(pd.begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  out.data().begin() + static_cast<std::ptrdiff_t>(o * ostride + offsets[pi]));
  }
  if (out.requires_grad()) {
    auto on = out.node().get();
    std::vector<typename Tensor<T>::Node*> pnodes;
    std::vector<std::size_t> chunks;
    for (const auto& p : parts) {
      pnodes.push_back(p.node().get());
      chunks.push_back(static_cast<std::size_t>(p.shape()[axis]) * inner);
    }
    out.node()->backprop = [on, pnodes, chunks, offsets, outer, ostride]() {
      for (std::size_t pi = 0; pi < pnodes.size(); ++pi) {
        auto* pn = pnodes[pi];
        if (!pn->requires_grad) continue;
        pn->ensure_grad();
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < chunks[pi]; ++i)
            pn->grad[o * chunks[pi] + i] += on->grad[o * ostride + offsets[pi] + i];
      }
    };
  }
  return out;
}

// stack along a new leading axis
template <class T>
Tensor<T> stack(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw dim_error("stack: empty part list");
  std::vector<Tensor<T>> expanded;
  expanded.reserve(parts.size());
  for (const auto& p : parts) {
    std::vector<int> s = p.shape();
    s.insert(s.begin(), 1);
    expanded.push_back(reshape(p, s));
  }
  return concat(expanded, 0);
}

// repeat a [d] or [1,d] vector into [rows, d]; backward sums over rows
template <class T>
Tensor<T> tile_rows(const Tensor<T>& v, int rows) {
  const int d = v.shape().back();
  if (v.size() != static_cast<std::size_t>(d))
    throw dim_error("tile_rows: expected a vector, got " + shape_str(v.shape()));
  auto out = detail::make_result<T>({rows, d}, {v.node()});
  for (int r = 0; r < rows; ++r)
    std::copy_n(v.data().begin(), d, out.data().begin() + static_cast<std::ptrdiff_t>(r) * d);
  if (out.requires_grad()) {
    auto vn = v.node().get();
    auto on = out.node().get();
    out.node()->backprop = [vn, on, rows, d]() {
      if (!vn->requires_grad) return;
      vn->ensure_grad();
      for (int r = 0; r < rows; ++r)
        for (int j = 0; j < d; ++j) vn->grad[j] += on->grad[static_cast<std::size_t>(r) * d + j];
    };
  }
  return out;
}

// row i of a [R, C] matrix as a [C] vector
template <class T>
Tensor<T> select_row(const Tensor<T>& x, int i) {
  if (x.shape().size() != 2 || i < 0 || i >= x.shape()[0])
    throw dim_error("select_row: row " + std::to_string(i) + " of " + shape_str(x.shape()));
  const int c = x.shape()[1];
  auto out = detail::make_result<T>({c}, {x.node()});
  std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(i) * c, c, out.data().begin());
  if (out.requires_grad()) {
    auto xn = x.node().get();
    auto on = out.node().get();
    out.node()->backprop = [xn, on, i, c]() {
      if (!xn->requires_grad) return;
      xn->ensure_grad();
      for (int j = 0; j < c; ++j) xn->grad[static_cast<std::size_t>(i) * c + j] += on->grad[j];
    };
  }
  return out;
}

// x: [R, C], b: [C] added to every row
template <class T>
Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& b) {
  const int c = x.shape().back();
  if (b.size() != static_cast<std::size_t>(c))
    throw dim_error("add_rowvec: bias length " + std::to_string(b.size()) + " vs last dim " +
                    std::to_string(c));
  const std::size_t rows = x.size() / c;
  auto out = detail::make_result<T>(x.shape(), {x.node(), b.node()});
  for (std::size_t r = 0; r < rows; ++r)
    for (int j = 0; j < c; ++j) out.data()[r * c + j] = x.data()[r * c + j] + b.data()[j];
  if (out.requires_grad()) {
    auto xn = x.node().get();
    auto bn = b.node().get();
    auto on = out.node().get();
    out.node()->backprop = [xn, bn, on, rows, c]() {
      if (xn->requires_grad) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < on->data.size(); ++i) xn->grad[i] += on->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (int j = 0; j < c; ++j) bn->grad[j] += on->grad[r * c + j];
      }
    };
  }
  return out;
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  auto out = detail::make_result<T>({1}, {x.node()});
  out.data()[0] = std::accumulate(x.data().begin(), x.data().end(), T(0));
  if (out.requires_grad()) {
    auto xn = x.node().get();
    auto on = out.node().get();
    out.node()->backprop = [xn, on]() {
      if (!xn->requires_grad) return;
      xn->ensure_grad();
      for (auto& g : xn->grad) g += on->grad[0];
    };
  }
  return out;
}

// embedding lookup: table [V, d], ids of length L -> [L, d]; backward scatter-adds
template <class T>
Tensor<T> embed(const Tensor<T>& table, const std::vector<int>& ids) {
  if (table.shape().size() != 2) throw dim_error("embed: table must be [V, d]");
  const int V = table.shape()[0], d = table.shape()[1];
  const int L = static_cast<int>(ids.size());
  for (int id : ids)
    if (id < 0 || id >= V)
      throw dim_error("embed: id " + std::to_string(id) + " out of range [0," + std::to_string(V) + ")");
  auto out = detail::make_result<T>({L, d}, {table.node()});
  for (int r = 0; r < L; ++r)
    std::copy_n(table.data().begin() + static_cast<std::ptrdiff_t>(ids[r]) * d, d,
                out.data().begin() + static_cast<std::ptrdiff_t>(r) * d);
  if (out.requires_grad()) {
    auto tn = table.node().get();
    auto on = out.node().get();
    out.node()->backprop = [tn, on, ids, d]() {
      if (!tn->requires_grad) return;
      tn->ensure_grad();
      for (std::size_t r = 0; r < ids.size(); ++r)
        for (int j = 0; j < d; ++j)
          tn->grad[static_cast<std::size_t>(ids[r]) * d + j] += on->grad[r * d + j];
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// 3D convolution: x [c_in, D, H, W], kernels [c_out, c_in, kd, kh, kw],
// stride 1, zero same-padding so the spatial dims are preserved.
template <class T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias) {
  const auto& xs = x.shape();
  const auto& ks = kernels.shape();
  if (xs.size() != 4 || ks.size() != 5)
    throw dim_error("conv3d: need x [c_in,D,H,W] and kernels [c_out,c_in,kd,kh,kw], got " +
                    shape_str(xs) + " and " + shape_str(ks));
  if (ks[1] != xs[0])
    throw dim_error("conv3d: kernel input channels " + std::to_string(ks[1]) +
                    " != input channels " + std::to_string(xs[0]));
  const int c_out = ks[0], c_in = xs[0];
  const int D = xs[1], H = xs[2], W = xs[3];
  const int kd = ks[2], kh = ks[3], kw = ks[4];
  if (bias.size() != static_cast<std::size_t>(c_out))
    throw dim_error("conv3d: bias length must equal c_out");
  const int pd = kd / 2, ph = kh / 2, pw = kw / 2;
  auto out = detail::make_result<T>({c_out, D, H, W}, {x.node(), kernels.node(), bias.node()});
  auto xat = [&](int c, int z, int y, int u) {
    return x.data()[((static_cast<std::size_t>(c) * D + z) * H + y) * W + u];
  };
  for (int co = 0; co < c_out; ++co)
    for (int z = 0; z < D; ++z)
      for (int y = 0; y < H; ++y)
        for (int u = 0; u < W; ++u) {
          T acc = bias.data()[co];
          for (int ci = 0; ci < c_in; ++ci)
            for (int a = 0; a < kd; ++a) {
              const int zz = z + a - pd;
              if (zz < 0 || zz >= D) continue;
              for (int b = 0; b < kh; ++b) {
                const int yy = y + b - ph;
                if (yy < 0 || yy >= H) continue;
                for (int c = 0; c < kw; ++c) {
                  const int uu = u + c - pw;
                  if (uu < 0 || uu >= W) continue;
                  acc += xat(ci, zz, yy, uu) *
                         kernels.data()[((((static_cast<std::size_t>(co) * c_in + ci) * kd + a) * kh + b) * kw + c)];
                }
              }
            }
          out.data()[((static_cast<std::size_t>(co) * D + z) * H + y) * W + u] = acc;
        }
  if (out.requires_grad()) {
    auto xn = x.node().get();
    auto kn = kernels.node().get();
    auto bn = bias.node().get();
    auto on = out.node().get();
    out.node()->backprop = [=]() {
      const bool gx = xn->requires_grad, gk = kn->requires_grad, gb = bn->requires_grad;
      if (gx) xn->ensure_grad();
      if (gk) kn->ensure_grad();
      if (gb) bn->ensure_grad();
      for (int co = 0; co < c_out; ++co)
        for (int z = 0; z < D; ++z)
          for (int y = 0; y < H; ++y)
            for (int u = 0; u < W; ++u) {
              const T g = on->grad[((static_cast<std::size_t>(co) * D + z) * H + y) * W + u];
              if (g == T(0)) continue;
              if (gb) bn->grad[co] += g;
              for (int ci = 0; ci < c_in; ++ci)
                for (int a = 0; a < kd; ++a) {
                  const int zz = z + a - pd;
                  if (zz < 0 || zz >= D) continue;
                  for (int b = 0; b < kh; ++b) {
                    const int yy = y + b - ph;
                    if (yy < 0 || yy >= H) continue;
                    for (int c = 0; c < kw; ++c) {
                      const int uu = u + c - pw;
                      if (uu < 0 || uu >= W) continue;
                      const std::size_t xi =
                          ((static_cast<std::size_t>(ci) * D + zz) * H + yy) * W + uu;
                      const std::size_t ki =
                          (((static_cast<std::size_t>(co) * c_in + ci) * kd + a) * kh + b) * kw + c;
                      if (gk) kn->grad[ki] += g * xn->data[xi];
                      if (gx) xn->grad[xi] += g * kn->data[ki];
                    }
                  }
                }
            }
    };
  }
  return out;
}

// 3D max pooling; short edge windows are clipped (−∞ padding semantics);
// gradient routes to the first argmax in row-major order.
template <class T>
Tensor<T> maxpool3d(const Tensor<T>& x, int window = 3, int stride = 3) {
  const auto& xs = x.shape();
  if (xs.size() != 4) throw dim_error("maxpool3d: need [c,D,H,W], got " + shape_str(xs));
  const int C = xs[0], D = xs[1], H = xs[2], W = xs[3];
  auto outdim = [&](int n) { return (n + stride - 1) / stride; };
  const int Do = outdim(D), Ho = outdim(H), Wo = outdim(W);
  auto out = detail::make_result<T>({C, Do, Ho, Wo}, {x.node()});
  std::vector<std::size_t> argmax(out.size());
  for (int c = 0; c < C; ++c)
    for (int z = 0; z < Do; ++z)
      for (int y = 0; y < Ho; ++y)
        for (int u = 0; u < Wo; ++u) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_i = 0;
          for (int a = z * stride; a < std::min(D, z * stride + window); ++a)
            for (int b = y * stride; b < std::min(H, y * stride + window); ++b)
              for (int e = u * stride; e < std::min(W, u * stride + window); ++e) {
                const std::size_t xi = ((static_cast<std::size_t>(c) * D + a) * H + b) * W + e;
                if (x.data()[xi] > best) {
                  best = x.data()[xi];
                  best_i = xi;
                }
              }
          const std::size_t oi = ((static_cast<std::size_t>(c) * Do + z) * Ho + y) * Wo + u;
          out.data()[oi] = best;
          argmax[oi] = best_i;
        }
  if (out.requires_grad()) {
    auto xn = x.node().get();
    auto on = out.node().get();
    out.node()->backprop = [xn, on, argmax]() {
      if (!xn->requires_grad) return;
      xn->ensure_grad();
      for (std::size_t i = 0; i < on->data.size(); ++i) xn->grad[argmax[i]] += on->grad[i];
    };
  }
  return out;
}

}  // namespace dgmn
