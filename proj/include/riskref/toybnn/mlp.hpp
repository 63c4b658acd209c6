#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riskref/error.hpp"
#include "riskref/matrix.hpp"
#include "riskref/rng.hpp"
#include "riskref/toybnn/autodiff.hpp"

namespace riskref::toybnn {

/// Fully connected tanh network ending in M logits. Parameters are stored in
/// layer order as W0, b0, W1, b1, ... with W_l of shape (in x out) and b_l of
/// shape (1 x out).
struct ToyMlp {
  std::vector<std::size_t> layer_sizes;
  std::vector<Matrix> params;
  double dropout_rate = 0.0;

  std::size_t n_layers() const noexcept { return layer_sizes.size() - 1; }
  std::size_t n_hidden() const noexcept { return layer_sizes.size() - 2; }
  std::size_t n_inputs() const noexcept { return layer_sizes.front(); }
  std::size_t n_classes() const noexcept { return layer_sizes.back(); }
  const Matrix& weight(std::size_t l) const { return params[2 * l]; }
  const Matrix& bias(std::size_t l) const { return params[2 * l + 1]; }
};

inline void validate_layer_sizes(std::span<const std::size_t> sizes) {
  if (sizes.size() < 2) throw Error(Errc::InvalidSpec, "a network needs input and output widths");
  for (auto s : sizes)
    if (s == 0) throw Error(Errc::InvalidSpec, "layer widths must be positive");
  if (sizes.back() < 2) throw Error(Errc::InvalidSpec, "at least two output classes are required");
}

/// Parameter shapes in storage order.
inline std::vector<std::pair<std::size_t, std::size_t>> param_shapes(std::span<const std::size_t> sizes) {
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    shapes.emplace_back(sizes[l], sizes[l + 1]);
    shapes.emplace_back(1, sizes[l + 1]);
  }
  return shapes;
}

/// Weights ~ N(0, 1/fan_in), biases zero.
inline ToyMlp init_mlp(std::vector<std::size_t> sizes, double dropout_rate, Rng& rng) {
  validate_layer_sizes(sizes);
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw Error(Errc::InvalidSpec, "dropout rate must lie in [0, 1)");
  ToyMlp net{std::move(sizes), {}, dropout_rate};
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const std::size_t in = net.layer_sizes[l], out = net.layer_sizes[l + 1];
    Matrix w(in, out);
    const double sd = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : w.data()) v = sd * rng.normal();
    net.params.push_back(std::move(w));
    net.params.emplace_back(1, out);
  }
  return net;
}

/// Binary keep-masks for every hidden layer, entries ~ Bern(1 - rate).
inline std::vector<Matrix> sample_masks(const ToyMlp& net, std::size_t n_rows, Rng& rng) {
  std::vector<Matrix> masks;
  const double keep = 1.0 - net.dropout_rate;
  for (std::size_t l = 1; l + 1 < net.layer_sizes.size(); ++l) {
    Matrix m(n_rows, net.layer_sizes[l]);
    for (double& v : m.data()) v = rng.bernoulli(keep) ? 1.0 : 0.0;
    masks.push_back(std::move(m));
  }
  return masks;
}

inline void softmax_rows(Matrix& z) {
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto r = z.row(i);
    double mx = r[0];
    for (double v : r) mx = std::max(mx, v);
    double norm = 0.0;
    for (double& v : r) {
      v = std::exp(v - mx);
      norm += v;
    }
    for (double& v : r) v /= norm;
  }
}

/// Class probabilities for every input row. With masks, each hidden
/// activation is multiplied by its binary mask (one stochastic dropout pass);
/// without masks and a nonzero dropout rate, activations are scaled by the
/// keep probability so the deterministic pass matches the masked expectation.
inline Matrix forward(const ToyMlp& net, const Matrix& inputs, const std::vector<Matrix>* masks = nullptr) {
  if (inputs.cols() != net.n_inputs())
    throw Error(Errc::ShapeMismatch, "input width " + std::to_string(inputs.cols()) + " does not match network width " +
                                         std::to_string(net.n_inputs()));
  if (masks && masks->size() != net.n_hidden())
    throw Error(Errc::ShapeMismatch, "one mask per hidden layer is required");
  Matrix h = inputs;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const Matrix& w = net.weight(l);
    const Matrix& b = net.bias(l);
    Matrix z(h.rows(), w.cols());
    for (std::size_t i = 0; i < h.rows(); ++i) {
      for (std::size_t j = 0; j < w.cols(); ++j) z(i, j) = b(0, j);
      for (std::size_t k = 0; k < h.cols(); ++k) {
        const double hik = h(i, k);
        for (std::size_t j = 0; j < w.cols(); ++j) z(i, j) += hik * w(k, j);
      }
    }
    if (l + 1 < net.n_layers()) {
      for (double& v : z.data()) v = std::tanh(v);
      if (masks) {
        const Matrix& m = (*masks)[l];
        if (!m.same_shape(z)) throw Error(Errc::ShapeMismatch, "dropout mask shape differs from its layer");
        for (std::size_t k = 0; k < z.size(); ++k) z.data()[k] *= m.data()[k];
      } else if (net.dropout_rate > 0.0) {
        for (double& v : z.data()) v *= 1.0 - net.dropout_rate;
      }
    }
    h = std::move(z);
  }
  softmax_rows(h);
  return h;
}

/// Logits of a network whose parameters live on a tape (W0, b0, W1, b1, ...).
/// Masks, when given, are applied after every hidden activation.
inline Var forward_logits(std::span<const Var> params, Var inputs, const std::vector<Matrix>* masks = nullptr) {
  const std::size_t n_layers = params.size() / 2;
  Var h = inputs;
  for (std::size_t l = 0; l < n_layers; ++l) {
    h = add_row(matmul(h, params[2 * l]), params[2 * l + 1]);
    if (l + 1 < n_layers) {
      h = tanh(h);
      if (masks) h = mul(h, h.tape->constant((*masks)[l]));
    }
  }
  return h;
}

inline std::size_t count_params(const std::vector<Matrix>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.size();
  return n;
}

inline std::vector<double> flatten(const std::vector<Matrix>& params) {
  std::vector<double> out;
  for (const auto& p : params) out.insert(out.end(), p.data().begin(), p.data().end());
  return out;
}

/// Writes a flat vector back into matrices of the given shapes; returns the
/// number of values consumed.
inline std::size_t unflatten(std::span<const double> flat, std::vector<Matrix>& params) {
  std::size_t offset = 0;
  for (auto& p : params) {
    if (offset + p.size() > flat.size()) throw Error(Errc::ShapeMismatch, "flat parameter vector too short");
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
              flat.begin() + static_cast<std::ptrdiff_t>(offset + p.size()), p.data().begin());
    offset += p.size();
  }
  return offset;
}

}  // namespace riskref::toybnn
