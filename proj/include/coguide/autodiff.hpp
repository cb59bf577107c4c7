#pragma once

// Tape-based reverse-mode differentiation over rank-2 arrays.
//
// A Tape records every operation in execution order; Tensor is a lightweight
// handle (tape pointer + node id). Parameters enter a tape as leaves and
// receive their gradients when Tape::backward runs. A tape supports exactly
// one backward pass.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "coguide/matrix.hpp"
#include "coguide/params.hpp"

namespace coguide {

template <class T>
class Tape;

template <class T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

  const Matrix<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  // Null until backward has reached this tensor.
  const Matrix<T>* grad() const { return tape_->grad_if_present(id_); }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <class T>
class Tape {
 public:
  // Propagates the node's output gradient into its inputs' gradients.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor<T> constant(Matrix<T> value) {
    return Tensor<T>(this, push(std::move(value), {}, nullptr, false, nullptr));
  }

  // Each parameter is copied onto the tape once; later calls reuse the leaf.
  Tensor<T> param(Parameter<T>& p) {
    if (auto it = param_leaves_.find(&p); it != param_leaves_.end()) {
      return Tensor<T>(this, it->second);
    }
    const std::size_t id = push(p.value, {}, nullptr, true, &p);
    param_leaves_[&p] = id;
    return Tensor<T>(this, id);
  }

  // Records an op result. The node needs a gradient iff any input does.
  Tensor<T> record(Matrix<T> value, std::vector<std::size_t> inputs, BackwardFn backward) {
    bool needs = false;
    for (auto i : inputs) needs = needs || nodes_[i].needs_grad;
    return Tensor<T>(this, push(std::move(value), std::move(inputs),
                                needs ? std::move(backward) : nullptr, needs, nullptr));
  }

  // Leaf whose gradient is delivered by a custom callback (e.g. sparse
  // embedding rows scattered into a parameter).
  Tensor<T> record_leaf(Matrix<T> value, BackwardFn backward) {
    return Tensor<T>(this, push(std::move(value), {}, std::move(backward), true, nullptr));
  }

  const Matrix<T>& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  // Gradient accumulator for node `id`, or null if it does not need one.
  Matrix<T>* grad_target(std::size_t id) {
    auto& n = nodes_[id];
    if (!n.needs_grad) return nullptr;
    if (!n.has_grad) {
      n.grad = Matrix<T>(n.value.rows(), n.value.cols());
      n.has_grad = true;
    }
    return &n.grad;
  }
  const Matrix<T>& grad_of(std::size_t id) const { return nodes_[id].grad; }
  const Matrix<T>* grad_if_present(std::size_t id) const {
    return nodes_[id].has_grad ? &nodes_[id].grad : nullptr;
  }

  std::size_t size() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

  // Populates gradients of every tensor reachable from `loss` and accumulates
  // parameter gradients into Parameter::grad.
  void backward(const Tensor<T>& loss) {
    if (&loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
    if (backward_done_) throw ContractError("backward: tape has already been differentiated");
    if (loss.value().size() != 1) {
      throw ContractError("backward: loss must be scalar, got shape " + loss.shape().str());
    }
    backward_done_ = true;
    if (!nodes_[loss.id()].needs_grad) return;
    grad_target(loss.id())->fill(T{1});
    for (std::size_t k = loss.id() + 1; k-- > 0;) {
      auto& n = nodes_[k];
      if (!n.has_grad) continue;
      if (n.backward) n.backward(*this, k);
      if (n.param) {
        auto& g = n.param->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
      }
    }
  }

 private:
  struct Node {
    Matrix<T> value;
    Matrix<T> grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
    bool needs_grad = false;
    bool has_grad = false;
  };

  std::size_t push(Matrix<T> value, std::vector<std::size_t> inputs, BackwardFn backward,
                   bool needs_grad, Parameter<T>* param) {
    if (backward_done_) throw ContractError("tape: cannot record after backward");
    Node n;
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    n.backward = std::move(backward);
    n.param = param;
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::size_t> param_leaves_;
  bool backward_done_ = false;
};

namespace ops {

namespace detail {

inline std::string shapes(std::string_view op, const Shape& a) {
  return std::string(op) + ": invalid shape " + a.str();
}
inline std::string shapes(std::string_view op, const Shape& a, const Shape& b) {
  return std::string(op) + ": incompatible shapes " + a.str() + " and " + b.str();
}

template <class T>
void same_tape(const Tensor<T>& a, const Tensor<T>& b, std::string_view op) {
  if (&a.tape() != &b.tape()) throw ContractError(std::string(op) + ": operands on different tapes");
}

// Elementwise unary op; dfn(x, y) returns dy/dx.
template <class T, class F, class DF>
Tensor<T> unary(const Tensor<T>& x, F fn, DF dfn) {
  const auto& xv = x.value();
  Matrix<T> y(xv.rows(), xv.cols());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = fn(xv[i]);
  const auto xi = x.id();
  return x.tape().record(std::move(y), {xi}, [xi, dfn](Tape<T>& t, std::size_t self) {
    auto* gx = t.grad_target(xi);
    if (!gx) return;
    const auto& gy = t.grad_of(self);
    const auto& xv = t.value(xi);
    const auto& yv = t.value(self);
    for (std::size_t i = 0; i < gy.size(); ++i) (*gx)[i] += gy[i] * dfn(xv[i], yv[i]);
  });
}

template <class T>
T sigmoid_scalar(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

}  // namespace detail

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::same_tape(a, b, "matmul");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.rows()) throw DimensionError(detail::shapes("matmul", av.shape(), bv.shape()));
  const std::size_t r = av.rows(), k = av.cols(), c = bv.cols();
  Matrix<T> y(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = av(i, p);
      if (aip == T{0}) continue;
      for (std::size_t j = 0; j < c; ++j) y(i, j) += aip * bv(p, j);
    }
  const auto ai = a.id(), bi = b.id();
  return a.tape().record(std::move(y), {ai, bi}, [ai, bi](Tape<T>& t, std::size_t self) {
    const auto& gy = t.grad_of(self);
    const auto& av = t.value(ai);
    const auto& bv = t.value(bi);
    const std::size_t r = av.rows(), k = av.cols(), c = bv.cols();
    if (auto* ga = t.grad_target(ai)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          T s{0};
          for (std::size_t j = 0; j < c; ++j) s += gy(i, j) * bv(p, j);
          (*ga)(i, p) += s;
        }
    }
    if (auto* gb = t.grad_target(bi)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const T aip = av(i, p);
          if (aip == T{0}) continue;
          for (std::size_t j = 0; j < c; ++j) (*gb)(p, j) += aip * gy(i, j);
        }
    }
  });
}

// a * b^T
template <class T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  detail::same_tape(a, b, "matmul_nt");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.cols()) throw DimensionError(detail::shapes("matmul_nt", av.shape(), bv.shape()));
  const std::size_t r = av.rows(), k = av.cols(), c = bv.rows();
  Matrix<T> y(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      T s{0};
      for (std::size_t p = 0; p < k; ++p) s += av(i, p) * bv(j, p);
      y(i, j) = s;
    }
  const auto ai = a.id(), bi = b.id();
  return a.tape().record(std::move(y), {ai, bi}, [ai, bi](Tape<T>& t, std::size_t self) {
    const auto& gy = t.grad_of(self);
    const auto& av = t.value(ai);
    const auto& bv = t.value(bi);
    const std::size_t r = av.rows(), k = av.cols(), c = bv.rows();
    auto* ga = t.grad_target(ai);
    auto* gb = t.grad_target(bi);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const T g = gy(i, j);
        if (g == T{0}) continue;
        for (std::size_t p = 0; p < k; ++p) {
          if (ga) (*ga)(i, p) += g * bv(j, p);
          if (gb) (*gb)(j, p) += g * av(i, p);
        }
      }
  });
}

namespace detail {

// Same-shape binary op; da/db return partials given (a, b).
template <class T, class F, class DA, class DB>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, std::string_view name, F fn, DA da, DB db) {
  same_tape(a, b, name);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.shape() != bv.shape()) throw DimensionError(shapes(name, av.shape(), bv.shape()));
  Matrix<T> y(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) y[i] = fn(av[i], bv[i]);
  const auto ai = a.id(), bi = b.id();
  return a.tape().record(std::move(y), {ai, bi}, [ai, bi, da, db](Tape<T>& t, std::size_t self) {
    const auto& gy = t.grad_of(self);
    const auto& av = t.value(ai);
    const auto& bv = t.value(bi);
    if (auto* ga = t.grad_target(ai))
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * da(av[i], bv[i]);
    if (auto* gb = t.grad_target(bi))
      for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] += gy[i] * db(av[i], bv[i]);
  });
}

}  // namespace detail

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T) { return T{1}; },
      [](T, T) { return T{1}; });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T) { return T{1}; },
      [](T, T) { return T{-1}; });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y) { return y; },
      [](T x, T) { return x; });
}

// Inverted dropout: zeroes each entry with probability `rate`, scales the rest by 1/(1-rate).
template <class T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw ContractError("dropout: rate must be < 1");
  Matrix<T> mask(x.rows(), x.cols());
  std::bernoulli_distribution keep(1.0 - rate);
  const T kept = static_cast<T>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = keep(rng) ? kept : T{0};
  return mul(x, x.tape().constant(std::move(mask)));
}

// Adds a 1 x c row to every row of an r x c matrix.
template <class T>
Tensor<T> add_row(const Tensor<T>& a, const Tensor<T>& row) {
  detail::same_tape(a, row, "add_row");
  const auto& av = a.value();
  const auto& bv = row.value();
  if (bv.rows() != 1 || bv.cols() != av.cols()) {
    throw DimensionError(detail::shapes("add_row", av.shape(), bv.shape()));
  }
  Matrix<T> y = av;
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) += bv(0, j);
  const auto ai = a.id(), bi = row.id();
  return a.tape().record(std::move(y), {ai, bi}, [ai, bi](Tape<T>& t, std::size_t self) {
    const auto& gy = t.grad_of(self);
    if (auto* ga = t.grad_target(ai))
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i];
    if (auto* gb = t.grad_target(bi))
      for (std::size_t i = 0; i < gy.rows(); ++i)
        for (std::size_t j = 0; j < gy.cols(); ++j) (*gb)(0, j) += gy(i, j);
  });
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, T s) {
  return detail::unary(x, [s](T v) { return v * s; }, [s](T, T) { return s; });
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& x, T s) {
  return detail::unary(x, [s](T v) { return v + s; }, [](T, T) { return T{1}; });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return detail::unary(
      x, [](T v) { return detail::sigmoid_scalar(v); }, [](T, T y) { return y * (T{1} - y); });
}

template <class T>
Tensor<T> tanh(const Tensor<T>& x) {
  return detail::unary(x, [](T v) { return std::tanh(v); }, [](T, T y) { return T{1} - y * y; });
}

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  return detail::unary(
      x, [slope](T v) { return v > T{0} ? v : slope * v; },
      [slope](T v, T) { return v > T{0} ? T{1} : slope; });
}

// max(x, 0)
template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  return leaky_relu(x, T{0});
}

// Gradient passes only where lo < x < hi.
template <class T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  return detail::unary(
      x, [lo, hi](T v) { return std::clamp(v, lo, hi); },
      [lo, hi](T v, T) { return (v > lo && v < hi) ? T{1} : T{0}; });
}

template <class T>
Tensor<T> log(const Tensor<T>& x) {
  for (auto v : x.value().values()) {
    if (v <= T{0}) throw ContractError("log: non-positive input");
  }
  return detail::unary(x, [](T v) { return std::log(v); }, [](T v, T) { return T{1} / v; });
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  T s{0};
  for (auto v : x.value().values()) s += v;
  const auto xi = x.id();
  return x.tape().record(Matrix<T>(1, 1, s), {xi}, [xi](Tape<T>& t, std::size_t self) {
    if (auto* gx = t.grad_target(xi)) {
      const T g = t.grad_of(self)[0];
      for (auto& v : gx->values()) v += g;
    }
  });
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.value().empty()) throw DimensionError(detail::shapes("mean", x.shape()));
  return scale(sum(x), T{1} / static_cast<T>(x.value().size()));
}

namespace detail {

// Row softmax restricted to entries where mask != 0; fully masked rows are 0.
template <class T>
Tensor<T> softmax_impl(const Tensor<T>& x, const Matrix<unsigned char>* mask) {
  const auto& xv = x.value();
  Matrix<T> y(xv.rows(), xv.cols());
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < xv.cols(); ++j)
      if (!mask || (*mask)(i, j)) mx = std::max(mx, xv(i, j));
    if (mx == -std::numeric_limits<T>::infinity()) continue;
    T z{0};
    for (std::size_t j = 0; j < xv.cols(); ++j)
      if (!mask || (*mask)(i, j)) z += (y(i, j) = std::exp(xv(i, j) - mx));
    for (std::size_t j = 0; j < xv.cols(); ++j) y(i, j) /= z;
  }
  const auto xi = x.id();
  return x.tape().record(std::move(y), {xi}, [xi](Tape<T>& t, std::size_t self) {
    auto* gx = t.grad_target(xi);
    if (!gx) return;
    const auto& gy = t.grad_of(self);
    const auto& yv = t.value(self);
    for (std::size_t i = 0; i < yv.rows(); ++i) {
      T dot{0};
      for (std::size_t j = 0; j < yv.cols(); ++j) dot += gy(i, j) * yv(i, j);
      for (std::size_t j = 0; j < yv.cols(); ++j) (*gx)(i, j) += yv(i, j) * (gy(i, j) - dot);
    }
  });
}

}  // namespace detail

template <class T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  if (x.cols() == 0) throw DimensionError(detail::shapes("softmax_rows", x.shape()));
  return detail::softmax_impl(x, nullptr);
}

template <class T>
Tensor<T> masked_softmax_rows(const Tensor<T>& x, const Matrix<unsigned char>& mask) {
  if (mask.shape() != x.shape()) {
    throw DimensionError(detail::shapes("masked_softmax_rows", x.shape(), mask.shape()));
  }
  return detail::softmax_impl(x, &mask);
}

template <class T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  const std::size_t r = parts[0].rows();
  std::size_t c = 0;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    detail::same_tape(parts[0], p, "concat_cols");
    if (p.rows() != r) throw DimensionError(detail::shapes("concat_cols", parts[0].shape(), p.shape()));
    c += p.cols();
    ids.push_back(p.id());
  }
  Matrix<T> y(r, c);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& pv = p.value();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < pv.cols(); ++j) y(i, off + j) = pv(i, j);
    off += pv.cols();
  }
  auto inputs = ids;
  return parts[0].tape().record(std::move(y), std::move(inputs), [ids](Tape<T>& t, std::size_t self) {
    const auto& gy = t.grad_of(self);
    std::size_t off = 0;
    for (auto id : ids) {
      const std::size_t w = t.value(id).cols();
      if (auto* g = t.grad_target(id))
        for (std::size_t i = 0; i < gy.rows(); ++i)
          for (std::size_t j = 0; j < w; ++j) (*g)(i, j) += gy(i, off + j);
      off += w;
    }
  });
}

template <class T>
Tensor<T> concat_cols(std::initializer_list<Tensor<T>> parts) {
  return concat_cols(std::vector<Tensor<T>>(parts));
}

template <class T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no operands");
  const std::size_t c = parts[0].cols();
  std::size_t r = 0;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    detail::same_tape(parts[0], p, "concat_rows");
    if (p.cols() != c) throw DimensionError(detail::shapes("concat_rows", parts[0].shape(), p.shape()));
    r += p.rows();
    ids.push_back(p.id());
  }
  Matrix<T> y(r, c);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& pv = p.value();
    std::copy(pv.values().begin(), pv.values().end(), y.values().begin() + off * c);
    off += pv.rows();
  }
  auto inputs = ids;
  return parts[0].tape().record(std::move(y), std::move(inputs), [ids](Tape<T>& t, std::size_t self) {
    const auto& gy = t.grad_of(self);
    std::size_t off = 0;
    for (auto id : ids) {
      const std::size_t n = t.value(id).size();
      if (auto* g = t.grad_target(id))
        for (std::size_t i = 0; i < n; ++i) (*g)[i] += gy[off + i];
      off += n;
    }
  });
}

template <class T>
Tensor<T> concat_rows(std::initializer_list<Tensor<T>> parts) {
  return concat_rows(std::vector<Tensor<T>>(parts));
}

template <class T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t start, std::size_t count) {
  const auto& xv = x.value();
  if (start + count > xv.rows() || count == 0) {
    throw DimensionError("slice_rows: rows [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of " + xv.shape().str());
  }
  const std::size_t c = xv.cols();
  Matrix<T> y(count, c,
              std::vector<T>(xv.values().begin() + start * c, xv.values().begin() + (start + count) * c));
  const auto xi = x.id();
  return x.tape().record(std::move(y), {xi}, [xi, start, c](Tape<T>& t, std::size_t self) {
    if (auto* gx = t.grad_target(xi)) {
      const auto& gy = t.grad_of(self);
      for (std::size_t i = 0; i < gy.size(); ++i) (*gx)[start * c + i] += gy[i];
    }
  });
}

template <class T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t start, std::size_t count) {
  const auto& xv = x.value();
  if (start + count > xv.cols() || count == 0) {
    throw DimensionError("slice_cols: cols [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of " + xv.shape().str());
  }
  Matrix<T> y(xv.rows(), count);
  for (std::size_t i = 0; i < xv.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) y(i, j) = xv(i, start + j);
  const auto xi = x.id();
  return x.tape().record(std::move(y), {xi}, [xi, start](Tape<T>& t, std::size_t self) {
    if (auto* gx = t.grad_target(xi)) {
      const auto& gy = t.grad_of(self);
      for (std::size_t i = 0; i < gy.rows(); ++i)
        for (std::size_t j = 0; j < gy.cols(); ++j) (*gx)(i, start + j) += gy(i, j);
    }
  });
}

template <class T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const int> indices) {
  const auto& xv = x.value();
  if (indices.empty()) throw DimensionError("gather_rows: no indices");
  Matrix<T> y(indices.size(), xv.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int r = indices[i];
    if (r < 0 || static_cast<std::size_t>(r) >= xv.rows()) {
      throw DimensionError("gather_rows: index " + std::to_string(r) + " out of " + xv.shape().str());
    }
    std::copy(xv.row(r).begin(), xv.row(r).end(), y.row(i).begin());
  }
  const auto xi = x.id();
  std::vector<int> idx(indices.begin(), indices.end());
  return x.tape().record(std::move(y), {xi}, [xi, idx](Tape<T>& t, std::size_t self) {
    if (auto* gx = t.grad_target(xi)) {
      const auto& gy = t.grad_of(self);
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < gy.cols(); ++j) (*gx)(idx[i], j) += gy(i, j);
    }
  });
}

// Row lookup straight from a parameter; gradients scatter into the touched rows.
template <class T>
Tensor<T> embedding(Tape<T>& tape, Parameter<T>& table, std::span<const int> ids) {
  const auto& tv = table.value;
  if (ids.empty()) throw DimensionError("embedding: no ids");
  Matrix<T> y(ids.size(), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int r = ids[i];
    if (r < 0 || static_cast<std::size_t>(r) >= tv.rows()) {
      throw DimensionError("embedding: id " + std::to_string(r) + " out of table " + tv.shape().str() +
                           " '" + table.name + "'");
    }
    std::copy(tv.row(r).begin(), tv.row(r).end(), y.row(i).begin());
  }
  std::vector<int> idx(ids.begin(), ids.end());
  Parameter<T>* p = &table;
  return tape.record_leaf(std::move(y), [p, idx](Tape<T>& t, std::size_t self) {
    const auto& gy = t.grad_of(self);
    auto& g = p->grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < gy.cols(); ++j) g(idx[i], j) += gy(i, j);
  });
}

}  // namespace ops
}  // namespace coguide
