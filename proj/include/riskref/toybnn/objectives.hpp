#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "riskref/error.hpp"
#include "riskref/matrix.hpp"
#include "riskref/rng.hpp"
#include "riskref/toybnn/autodiff.hpp"
#include "riskref/toybnn/divergence.hpp"
#include "riskref/toybnn/mlp.hpp"

namespace riskref::toybnn {

/// Mean-field posterior over the parameters of a ToyMlp: every parameter has
/// a mean mu and a scale sigma = softplus(rho). The prior is N(0, 1) per
/// parameter. Flat layout is [all mu..., all rho...] in ToyMlp storage order.
struct VariationalMlp {
  std::vector<std::size_t> layer_sizes;
  std::vector<Matrix> mu;
  std::vector<Matrix> rho;

  std::size_t n_params() const { return count_params(mu); }

  std::vector<double> sigma_flat() const {
    std::vector<double> s = flatten(rho);
    for (double& v : s) v = softplus(v);
    return s;
  }

  std::vector<double> flat() const {
    std::vector<double> f = flatten(mu);
    const auto r = flatten(rho);
    f.insert(f.end(), r.begin(), r.end());
    return f;
  }

  void set_flat(std::span<const double> f) {
    const std::size_t used = unflatten(f, mu);
    unflatten(f.subspan(used), rho);
  }
};

/// Means from a deterministic initialization, scales all equal to sigma0.
inline VariationalMlp init_variational(const ToyMlp& base, double sigma0) {
  if (!(sigma0 > 0.0)) throw Error(Errc::NonPositiveScale, "initial scale must be positive");
  VariationalMlp v{base.layer_sizes, base.params, base.params};
  const double r = inverse_softplus(sigma0);
  for (auto& m : v.rho)
    for (double& x : m.data()) x = r;
  return v;
}

/// Radial draw for one weight vector: w = mu + sigma * (eps / ||eps||) * r with
/// eps ~ N(0, I), r ~ N(0, 1).
inline std::vector<double> radial_sample(std::span<const double> mu, std::span<const double> sigma, Rng& rng) {
  if (sigma.size() != mu.size()) throw Error(Errc::ShapeMismatch, "mu and sigma differ in length");
  std::vector<double> eps(mu.size());
  double norm2 = 0.0;
  for (double& e : eps) {
    e = rng.normal();
    norm2 += e * e;
  }
  const double r = rng.normal();
  const double scale_factor = r / std::sqrt(norm2);
  std::vector<double> w(mu.size());
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = mu[j] + sigma[j] * (eps[j] * scale_factor);
  return w;
}

enum class Method { Map, McDropout, Mfvi, Radial, Gvi, Ensemble };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Map: return "map";
    case Method::McDropout: return "mc-dropout";
    case Method::Mfvi: return "mfvi";
    case Method::Radial: return "radial";
    case Method::Gvi: return "gvi";
    case Method::Ensemble: return "ensemble";
  }
  return "unknown";
}

inline Method method_from_string(const std::string& s) {
  for (Method m : {Method::Map, Method::McDropout, Method::Mfvi, Method::Radial, Method::Gvi, Method::Ensemble})
    if (to_string(m) == s) return m;
  throw Error(Errc::InvalidConfig, "unknown method '" + s + "'");
}

inline bool is_variational(Method m) { return m == Method::Mfvi || m == Method::Radial || m == Method::Gvi; }

/// Standardized offsets xi for one posterior draw, theta = mu + sigma * xi.
/// Gaussian methods use xi = eps; Radial normalizes eps per parameter tensor
/// (each weight matrix and each bias vector is one vector) and scales by one
/// radius r per tensor.
inline std::vector<double> draw_offsets(Method method, const std::vector<std::size_t>& layer_sizes, Rng& rng) {
  std::vector<double> xi;
  for (auto [rows, cols] : param_shapes(layer_sizes)) {
    const std::size_t d = rows * cols;
    if (method == Method::Radial) {
      std::vector<double> zero(d, 0.0), one(d, 1.0);
      auto w = radial_sample(zero, one, rng);
      xi.insert(xi.end(), w.begin(), w.end());
    } else {
      for (std::size_t k = 0; k < d; ++k) xi.push_back(rng.normal());
    }
  }
  return xi;
}

/// Parameters of one posterior draw given its offsets.
inline ToyMlp materialize(const VariationalMlp& v, std::span<const double> xi) {
  ToyMlp net{v.layer_sizes, v.mu, 0.0};
  std::size_t k = 0;
  for (std::size_t t = 0; t < net.params.size(); ++t)
    for (std::size_t e = 0; e < net.params[t].size(); ++e, ++k)
      net.params[t].data()[e] = v.mu[t].data()[e] + softplus(v.rho[t].data()[e]) * xi[k];
  return net;
}

struct Batch {
  const Matrix& x;
  std::span<const int> y;
};

/// Objective value (for minimization) with its gradient over the flat
/// parameter vector and the two parts it is built from.
struct ObjectiveValue {
  double value = 0.0;
  double data_term = 0.0;  // summed NLL over the batch, averaged over draws
  double reg_term = 0.0;   // regularizer before reg_scale is applied
  std::vector<double> grad;
};

namespace detail {

inline std::vector<Var> leaves(Tape& t, std::vector<Matrix> mats) {
  std::vector<Var> out;
  for (auto& m : mats) out.push_back(t.leaf(std::move(m)));
  return out;
}

inline std::vector<Matrix> shaped(const std::vector<std::size_t>& sizes, std::span<const double> flat) {
  std::vector<Matrix> mats;
  for (auto [r, c] : param_shapes(sizes)) mats.emplace_back(r, c);
  unflatten(flat, mats);
  return mats;
}

inline Var concat_sum(std::span<const Var> parts) {
  Var acc = parts.front();
  for (std::size_t k = 1; k < parts.size(); ++k) acc = add(acc, parts[k]);
  return acc;
}

inline void check_finite(double v) {
  if (!std::isfinite(v)) throw Error(Errc::NonFinite, "objective is not finite");
}

}  // namespace detail

/// MAP objective: summed NLL on the batch (dropout masks applied when given)
/// plus reg_scale * l2 * sum(theta^2).
inline ObjectiveValue map_objective(const std::vector<std::size_t>& layer_sizes, std::span<const double> flat,
                                    const Batch& batch, double l2, double reg_scale,
                                    const std::vector<Matrix>* masks = nullptr) {
  Tape tape;
  auto params = detail::leaves(tape, detail::shaped(layer_sizes, flat));
  Var x = tape.constant(batch.x);
  Var nll = softmax_nll(forward_logits(params, x, masks), batch.y);
  std::vector<Var> sq;
  for (Var p : params) sq.push_back(sum(square(p)));
  Var reg = detail::concat_sum(sq);
  Var total = add(nll, scale(reg, l2 * reg_scale));
  tape.backward(total);
  ObjectiveValue out{total.value()(0, 0), nll.value()(0, 0), l2 * reg.value()(0, 0), {}};
  detail::check_finite(out.value);
  for (Var p : params) out.grad.insert(out.grad.end(), p.grad().data().begin(), p.grad().data().end());
  return out;
}

/// Shared body of the three variational objectives with frozen offsets:
///   (1/S) sum_s NLL(batch; mu + sigma * xi_s) + reg_scale * R(mu, sigma)
/// where R is the closed-form KL (Mfvi), the closed-form Renyi divergence
/// (Gvi), or, for Radial, the MC prior cross-entropy -E log N(theta; 0, 1)
/// minus the entropy surrogate sum log sigma.
inline ObjectiveValue variational_objective(Method method, const std::vector<std::size_t>& layer_sizes,
                                            std::span<const double> flat, const Batch& batch,
                                            std::span<const std::vector<double>> offsets, double reg_scale,
                                            double alpha = 0.5) {
  if (!is_variational(method)) throw Error(Errc::InvalidConfig, "not a variational method");
  if (offsets.empty()) throw Error(Errc::InvalidSpec, "at least one posterior draw is required");
  const std::size_t n = flat.size() / 2;
  Tape tape;
  auto mu = detail::leaves(tape, detail::shaped(layer_sizes, flat.first(n)));
  auto rho = detail::leaves(tape, detail::shaped(layer_sizes, flat.subspan(n)));
  std::vector<Var> sigma;
  for (Var r : rho) sigma.push_back(softplus(r));
  Var x = tape.constant(batch.x);

  const double inv_s = 1.0 / static_cast<double>(offsets.size());
  std::vector<Var> nlls;
  std::vector<Var> cross_entropies;
  for (const auto& xi : offsets) {
    if (xi.size() != n) throw Error(Errc::ShapeMismatch, "offset vector length differs from parameter count");
    std::vector<Var> theta;
    std::size_t k = 0;
    for (std::size_t t = 0; t < mu.size(); ++t) {
      const Matrix& shape = mu[t].value();
      Matrix noise(shape.rows(), shape.cols());
      for (double& v : noise.data()) v = xi[k++];
      theta.push_back(add(mu[t], mul(sigma[t], tape.constant(std::move(noise)))));
    }
    nlls.push_back(softmax_nll(forward_logits(theta, x), batch.y));
    if (method == Method::Radial) {
      std::vector<Var> sq;
      for (Var th : theta) sq.push_back(sum(square(th)));
      const double log_norm_const = 0.5 * std::log(2.0 * std::numbers::pi) * static_cast<double>(n);
      cross_entropies.push_back(add_scalar(scale(detail::concat_sum(sq), 0.5), log_norm_const));
    }
  }
  Var data = scale(detail::concat_sum(nlls), inv_s);

  std::vector<Var> reg_parts;
  for (std::size_t t = 0; t < mu.size(); ++t) {
    if (method == Method::Mfvi) reg_parts.push_back(kl_to_standard_normal(mu[t], sigma[t]));
    if (method == Method::Gvi) reg_parts.push_back(renyi_to_standard_normal(mu[t], sigma[t], alpha));
    if (method == Method::Radial) reg_parts.push_back(scale(sum(log(sigma[t])), -1.0));
  }
  Var reg = detail::concat_sum(reg_parts);
  if (method == Method::Radial) reg = add(reg, scale(detail::concat_sum(cross_entropies), inv_s));

  Var total = add(data, scale(reg, reg_scale));
  tape.backward(total);
  ObjectiveValue out{total.value()(0, 0), data.value()(0, 0), reg.value()(0, 0), {}};
  detail::check_finite(out.value);
  for (Var p : mu) out.grad.insert(out.grad.end(), p.grad().data().begin(), p.grad().data().end());
  for (Var p : rho) out.grad.insert(out.grad.end(), p.grad().data().begin(), p.grad().data().end());
  return out;
}

inline std::vector<std::vector<double>> draw_offset_set(Method method, const std::vector<std::size_t>& sizes,
                                                        std::size_t n_mc, Rng& rng) {
  if (n_mc < 1) throw Error(Errc::InvalidSpec, "n_mc must be at least 1");
  std::vector<std::vector<double>> out;
  for (std::size_t s = 0; s < n_mc; ++s) out.push_back(draw_offsets(method, sizes, rng));
  return out;
}

/// Negative ELBO with n_mc reparameterized draws.
inline ObjectiveValue elbo_mfvi(const VariationalMlp& v, const Batch& batch, std::size_t n_mc, double reg_scale,
                                Rng& rng) {
  const auto xi = draw_offset_set(Method::Mfvi, v.layer_sizes, n_mc, rng);
  return variational_objective(Method::Mfvi, v.layer_sizes, v.flat(), batch, xi, reg_scale);
}

/// Negative ELBO up to a constant under the radial posterior.
inline ObjectiveValue radial_objective(const VariationalMlp& v, const Batch& batch, std::size_t n_mc,
                                       double reg_scale, Rng& rng) {
  const auto xi = draw_offset_set(Method::Radial, v.layer_sizes, n_mc, rng);
  return variational_objective(Method::Radial, v.layer_sizes, v.flat(), batch, xi, reg_scale);
}

/// Expected NLL plus Renyi alpha-divergence to the standard normal prior.
inline ObjectiveValue gvi_objective(const VariationalMlp& v, const Batch& batch, std::size_t n_mc, double reg_scale,
                                    Rng& rng, double alpha = 0.5) {
  const auto xi = draw_offset_set(Method::Gvi, v.layer_sizes, n_mc, rng);
  return variational_objective(Method::Gvi, v.layer_sizes, v.flat(), batch, xi, reg_scale, alpha);
}

/// Central-difference check of an objective's analytic gradient.
///
/// Step h = 1e-5 * max(1, |theta_k|). Returns the largest
/// |analytic - numeric| / (|numeric| + 1e-8) over `n_coords` coordinates
/// chosen uniformly without replacement (all of them when n_coords is 0 or
/// exceeds the parameter count).
inline double grad_check(const std::function<ObjectiveValue(std::span<const double>)>& objective,
                         std::span<const double> params, std::size_t n_coords = 0, std::uint64_t seed = 0) {
  const ObjectiveValue at = objective(params);
  if (!std::isfinite(at.value)) throw Error(Errc::NonFinite, "objective is not finite");
  if (at.grad.size() != params.size()) throw Error(Errc::ShapeMismatch, "gradient length differs from parameters");
  std::vector<std::size_t> coords(params.size());
  for (std::size_t k = 0; k < coords.size(); ++k) coords[k] = k;
  if (n_coords > 0 && n_coords < coords.size()) {
    Rng rng(seed);
    for (std::size_t k = 0; k < n_coords; ++k) std::swap(coords[k], coords[k + rng.index(coords.size() - k)]);
    coords.resize(n_coords);
  }
  std::vector<double> p(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t k : coords) {
    const double h = 1e-5 * std::max(1.0, std::abs(params[k]));
    p[k] = params[k] + h;
    const double up = objective(p).value;
    p[k] = params[k] - h;
    const double down = objective(p).value;
    p[k] = params[k];
    const double numeric = (up - down) / (2.0 * h);
    if (!std::isfinite(numeric)) throw Error(Errc::NonFinite, "finite difference is not finite");
    worst = std::max(worst, std::abs(at.grad[k] - numeric) / (std::abs(numeric) + 1e-8));
  }
  return worst;
}

}  // namespace riskref::toybnn
