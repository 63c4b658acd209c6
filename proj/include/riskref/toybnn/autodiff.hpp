#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "riskref/error.hpp"
#include "riskref/matrix.hpp"

namespace riskref::toybnn {

class Tape;

/// Handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  const Matrix& grad() const;
};

/// Reverse-mode differentiation over matrix-valued nodes. Nodes are appended
/// in evaluation order, so a single reverse sweep visits every consumer before
/// its inputs.
class Tape {
 public:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&)> backward;  // pushes this node's grad into its inputs
  };

  Var leaf(Matrix value) { return push(std::move(value), {}); }
  Var constant(Matrix value) { return push(std::move(value), {}); }

  Var push(Matrix value, std::function<void(Tape&)> backward) {
    Matrix grad(value.rows(), value.cols());
    nodes_.push_back(Node{std::move(value), std::move(grad), std::move(backward)});
    return Var{this, nodes_.size() - 1};
  }

  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Seeds d(root)/d(root) = 1 and propagates to every node.
  void backward(Var root) {
    Node& r = nodes_.at(root.id);
    if (r.value.size() != 1) throw Error(Errc::ShapeMismatch, "backward needs a scalar root");
    r.grad.data()[0] = 1.0;
    for (std::size_t k = root.id + 1; k-- > 0;)
      if (nodes_[k].backward) nodes_[k].backward(*this);
  }

 private:
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape->node(id).value; }
inline const Matrix& Var::grad() const { return tape->node(id).grad; }

namespace detail {

inline Matrix& grad_of(Tape& t, std::size_t id) { return t.node(id).grad; }
inline const Matrix& value_of(Tape& t, std::size_t id) { return t.node(id).value; }

template <typename F, typename D>
Var unary(Var a, F f, D dfdx) {
  Tape& t = *a.tape;
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (std::size_t k = 0; k < x.size(); ++k) y.data()[k] = f(x.data()[k]);
  const std::size_t ia = a.id;
  const std::size_t self = t.size();
  return t.push(std::move(y), [ia, self, dfdx](Tape& t) {
    const Matrix& g = grad_of(t, self);
    const Matrix& x = value_of(t, ia);
    const Matrix& y = value_of(t, self);
    Matrix& ga = grad_of(t, ia);
    for (std::size_t k = 0; k < g.size(); ++k) ga.data()[k] += g.data()[k] * dfdx(x.data()[k], y.data()[k]);
  });
}

inline void require_same_shape(Var a, Var b) {
  if (!a.value().same_shape(b.value())) throw Error(Errc::ShapeMismatch, "elementwise operands differ in shape");
}

}  // namespace detail

inline Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  const Matrix& x = a.value();
  const Matrix& w = b.value();
  if (x.cols() != w.rows()) throw Error(Errc::ShapeMismatch, "matmul inner dimensions differ");
  Matrix y(x.rows(), w.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t k = 0; k < x.cols(); ++k) {
      const double xik = x(i, k);
      for (std::size_t j = 0; j < w.cols(); ++j) y(i, j) += xik * w(k, j);
    }
  const std::size_t ia = a.id, ib = b.id, self = t.size();
  return t.push(std::move(y), [ia, ib, self](Tape& t) {
    const Matrix& g = detail::grad_of(t, self);
    const Matrix& x = detail::value_of(t, ia);
    const Matrix& w = detail::value_of(t, ib);
    Matrix& gx = detail::grad_of(t, ia);
    Matrix& gw = detail::grad_of(t, ib);
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t k = 0; k < x.cols(); ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < w.cols(); ++j) {
          acc += g(i, j) * w(k, j);
          gw(k, j) += x(i, k) * g(i, j);
        }
        gx(i, k) += acc;
      }
  });
}

/// a + b where b is a single row broadcast over the rows of a.
inline Var add_row(Var a, Var b) {
  Tape& t = *a.tape;
  const Matrix& x = a.value();
  const Matrix& r = b.value();
  if (r.rows() != 1 || r.cols() != x.cols()) throw Error(Errc::ShapeMismatch, "bias row width differs");
  Matrix y = x;
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) += r(0, j);
  const std::size_t ia = a.id, ib = b.id, self = t.size();
  return t.push(std::move(y), [ia, ib, self](Tape& t) {
    const Matrix& g = detail::grad_of(t, self);
    Matrix& ga = detail::grad_of(t, ia);
    Matrix& gb = detail::grad_of(t, ib);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) {
        ga(i, j) += g(i, j);
        gb(0, j) += g(i, j);
      }
  });
}

inline Var add(Var a, Var b) {
  detail::require_same_shape(a, b);
  Tape& t = *a.tape;
  Matrix y = a.value();
  for (std::size_t k = 0; k < y.size(); ++k) y.data()[k] += b.value().data()[k];
  const std::size_t ia = a.id, ib = b.id, self = t.size();
  return t.push(std::move(y), [ia, ib, self](Tape& t) {
    const Matrix& g = detail::grad_of(t, self);
    for (std::size_t k = 0; k < g.size(); ++k) {
      detail::grad_of(t, ia).data()[k] += g.data()[k];
      detail::grad_of(t, ib).data()[k] += g.data()[k];
    }
  });
}

inline Var sub(Var a, Var b) {
  detail::require_same_shape(a, b);
  Tape& t = *a.tape;
  Matrix y = a.value();
  for (std::size_t k = 0; k < y.size(); ++k) y.data()[k] -= b.value().data()[k];
  const std::size_t ia = a.id, ib = b.id, self = t.size();
  return t.push(std::move(y), [ia, ib, self](Tape& t) {
    const Matrix& g = detail::grad_of(t, self);
    for (std::size_t k = 0; k < g.size(); ++k) {
      detail::grad_of(t, ia).data()[k] += g.data()[k];
      detail::grad_of(t, ib).data()[k] -= g.data()[k];
    }
  });
}

/// Elementwise product.
inline Var mul(Var a, Var b) {
  detail::require_same_shape(a, b);
  Tape& t = *a.tape;
  Matrix y = a.value();
  for (std::size_t k = 0; k < y.size(); ++k) y.data()[k] *= b.value().data()[k];
  const std::size_t ia = a.id, ib = b.id, self = t.size();
  return t.push(std::move(y), [ia, ib, self](Tape& t) {
    const Matrix& g = detail::grad_of(t, self);
    const Matrix& x = detail::value_of(t, ia);
    const Matrix& z = detail::value_of(t, ib);
    for (std::size_t k = 0; k < g.size(); ++k) {
      detail::grad_of(t, ia).data()[k] += g.data()[k] * z.data()[k];
      detail::grad_of(t, ib).data()[k] += g.data()[k] * x.data()[k];
    }
  });
}

/// Elementwise quotient.
inline Var div(Var a, Var b) {
  detail::require_same_shape(a, b);
  Tape& t = *a.tape;
  Matrix y = a.value();
  for (std::size_t k = 0; k < y.size(); ++k) y.data()[k] /= b.value().data()[k];
  const std::size_t ia = a.id, ib = b.id, self = t.size();
  return t.push(std::move(y), [ia, ib, self](Tape& t) {
    const Matrix& g = detail::grad_of(t, self);
    const Matrix& y = detail::value_of(t, self);
    const Matrix& z = detail::value_of(t, ib);
    for (std::size_t k = 0; k < g.size(); ++k) {
      detail::grad_of(t, ia).data()[k] += g.data()[k] / z.data()[k];
      detail::grad_of(t, ib).data()[k] -= g.data()[k] * y.data()[k] / z.data()[k];
    }
  });
}

inline Var scale(Var a, double c) {
  return detail::unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

inline Var add_scalar(Var a, double c) {
  return detail::unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

inline Var tanh(Var a) {
  return detail::unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double inverse_softplus(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Var softplus(Var a) {
  return detail::unary(a, [](double x) { return softplus(x); }, [](double x, double) { return sigmoid(x); });
}

inline Var log(Var a) {
  return detail::unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

inline Var square(Var a) {
  return detail::unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

/// Sum of all entries as a 1x1 node.
inline Var sum(Var a) {
  Tape& t = *a.tape;
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id, self = t.size();
  return t.push(Matrix(1, 1, s), [ia, self](Tape& t) {
    const double g = detail::grad_of(t, self).data()[0];
    for (double& v : detail::grad_of(t, ia).data()) v += g;
  });
}

/// Summed negative log-likelihood of integer labels under softmax(logits),
/// one row per example.
inline Var softmax_nll(Var logits, std::span<const int> labels) {
  Tape& t = *logits.tape;
  const Matrix& z = logits.value();
  if (labels.size() != z.rows()) throw Error(Errc::ShapeMismatch, "one label per logit row is required");
  Matrix probs(z.rows(), z.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double mx = z(i, 0);
    for (std::size_t j = 1; j < z.cols(); ++j) mx = std::max(mx, z(i, j));
    double norm = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) norm += std::exp(z(i, j) - mx);
    const double log_norm = mx + std::log(norm);
    for (std::size_t j = 0; j < z.cols(); ++j) probs(i, j) = std::exp(z(i, j) - log_norm);
    total += log_norm - z(i, static_cast<std::size_t>(labels[i]));
  }
  std::vector<int> y(labels.begin(), labels.end());
  const std::size_t ia = logits.id, self = t.size();
  return t.push(Matrix(1, 1, total), [ia, self, probs = std::move(probs), y = std::move(y)](Tape& t) {
    const double g = detail::grad_of(t, self).data()[0];
    Matrix& gz = detail::grad_of(t, ia);
    for (std::size_t i = 0; i < probs.rows(); ++i)
      for (std::size_t j = 0; j < probs.cols(); ++j)
        gz(i, j) += g * (probs(i, j) - (static_cast<int>(j) == y[i] ? 1.0 : 0.0));
  });
}

}  // namespace riskref::toybnn
