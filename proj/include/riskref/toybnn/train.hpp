#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "riskref/core.hpp"
#include "riskref/error.hpp"
#include "riskref/matrix.hpp"
#include "riskref/rng.hpp"
#include "riskref/toybnn/mlp.hpp"
#include "riskref/toybnn/objectives.hpp"
#include "riskref/toybnn/synthetic.hpp"

namespace riskref::toybnn {

struct TrainConfig {
  Method method = Method::Map;
  std::vector<std::size_t> hidden = {16, 16};
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  double l2_weight = 1e-3;     // MAP / MC dropout / ensemble members
  double dropout_rate = 0.1;   // MAP / MC dropout / ensemble members
  std::size_t n_train_mc = 1;  // posterior draws per step for variational methods
  double alpha = 0.5;          // GVI
  double init_sigma = 0.01;    // initial posterior scale for variational methods
  std::size_t ensemble_size = 3;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs == 0 || batch_size == 0) throw Error(Errc::InvalidConfig, "epochs and batch size must be positive");
    if (!(learning_rate > 0.0)) throw Error(Errc::InvalidConfig, "learning rate must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error(Errc::InvalidConfig, "dropout rate must lie in [0, 1)");
    if (!(l2_weight >= 0.0)) throw Error(Errc::InvalidConfig, "l2 weight must be non-negative");
    if (n_train_mc == 0) throw Error(Errc::InvalidConfig, "n_train_mc must be at least 1");
    check_alpha(alpha);
    if (!(init_sigma > 0.0)) throw Error(Errc::InvalidConfig, "initial sigma must be positive");
    if (method == Method::Ensemble && ensemble_size == 0) throw Error(Errc::InvalidConfig, "empty ensemble");
  }
};

/// A trained model: deterministic members for MAP, MC dropout and ensembles,
/// a mean-field posterior for the variational methods.
struct ModelBundle {
  Method method = Method::Map;
  std::vector<std::size_t> layer_sizes;
  double dropout_rate = 0.0;
  std::vector<ToyMlp> members;
  VariationalMlp posterior;
};

/// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
 public:
  Adam(std::size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad) {
    ++t_;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      m_[k] = b1 * m_[k] + (1.0 - b1) * grad[k];
      v_[k] = b2 * v_[k] + (1.0 - b2) * grad[k] * grad[k];
      params[k] -= lr_ * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps);
    }
  }

 private:
  double lr_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

inline std::vector<std::size_t> layer_sizes_for(const TrainConfig& cfg, std::size_t n_inputs, std::size_t n_classes) {
  std::vector<std::size_t> sizes{n_inputs};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(n_classes);
  return sizes;
}

inline std::size_t infer_classes(const Dataset& data) {
  int top = 1;
  for (int y : data.y) {
    if (y < 0) throw Error(Errc::InvalidLabel, "negative label");
    top = std::max(top, y);
  }
  return static_cast<std::size_t>(top) + 1;
}

namespace detail {

inline Matrix gather_rows(const Matrix& x, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), x.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    auto r = x.row(idx[k]);
    std::copy(r.begin(), r.end(), out.row(k).begin());
  }
  return out;
}

// Runs minibatch Adam for cfg.epochs; `step_objective` maps (flat params,
// batch, reg_scale, rng) to an objective value.
template <typename F>
std::vector<double> minibatch_descent(std::vector<double> flat, const Dataset& data, const TrainConfig& cfg, Rng& rng,
                                      F&& step_objective) {
  const std::size_t n = data.size();
  if (n == 0) throw Error(Errc::EmptyInput, "training set is empty");
  Adam opt(flat.size(), cfg.learning_rate);
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t k = n; k > 1; --k) std::swap(order[k - 1], order[rng.index(k)]);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + start, stop - start);
      Matrix x = gather_rows(data.x, idx);
      std::vector<int> y;
      for (auto i : idx) y.push_back(data.y[i]);
      const double reg_scale = static_cast<double>(idx.size()) / static_cast<double>(n);
      ObjectiveValue obj;
      try {
        obj = step_objective(flat, Batch{x, y}, reg_scale, rng);
      } catch (const Error& e) {
        if (e.code() == Errc::NonFinite)
          throw Error(Errc::Diverged, "non-finite objective in epoch " + std::to_string(epoch));
        throw;
      }
      opt.step(flat, obj.grad);
    }
  }
  for (double v : flat)
    if (!std::isfinite(v)) throw Error(Errc::Diverged, "non-finite parameters after training");
  return flat;
}

inline ToyMlp train_deterministic(const std::vector<std::size_t>& sizes, const Dataset& data, const TrainConfig& cfg,
                                  std::uint64_t seed) {
  Rng rng(seed);
  ToyMlp net = init_mlp(sizes, cfg.dropout_rate, rng);
  auto flat = minibatch_descent(flatten(net.params), data, cfg, rng,
                                [&](const std::vector<double>& p, const Batch& b, double reg_scale, Rng& r) {
                                  if (cfg.dropout_rate > 0.0) {
                                    auto masks = sample_masks(net, b.x.rows(), r);
                                    return map_objective(sizes, p, b, cfg.l2_weight, reg_scale, &masks);
                                  }
                                  return map_objective(sizes, p, b, cfg.l2_weight, reg_scale);
                                });
  unflatten(flat, net.params);
  return net;
}

}  // namespace detail

/// Minibatch training of the configured method; deterministic given cfg.seed.
inline ModelBundle train(const TrainConfig& cfg, const Dataset& data) {
  cfg.validate();
  const auto sizes = layer_sizes_for(cfg, data.x.cols(), infer_classes(data));
  ModelBundle bundle{cfg.method, sizes, 0.0, {}, {}};
  switch (cfg.method) {
    case Method::Map:
    case Method::McDropout:
      bundle.dropout_rate = cfg.dropout_rate;
      bundle.members.push_back(detail::train_deterministic(sizes, data, cfg, cfg.seed));
      break;
    case Method::Ensemble:
      bundle.dropout_rate = cfg.dropout_rate;
      for (std::size_t k = 0; k < cfg.ensemble_size; ++k)
        bundle.members.push_back(detail::train_deterministic(sizes, data, cfg, Rng::child(cfg.seed, k).next()));
      break;
    case Method::Mfvi:
    case Method::Radial:
    case Method::Gvi: {
      Rng rng(cfg.seed);
      VariationalMlp v = init_variational(init_mlp(sizes, 0.0, rng), cfg.init_sigma);
      auto flat = detail::minibatch_descent(
          v.flat(), data, cfg, rng, [&](const std::vector<double>& p, const Batch& b, double reg_scale, Rng& r) {
            const auto xi = draw_offset_set(cfg.method, sizes, cfg.n_train_mc, r);
            return variational_objective(cfg.method, sizes, p, b, xi, reg_scale, cfg.alpha);
          });
      v.set_flat(flat);
      bundle.posterior = std::move(v);
      break;
    }
  }
  return bundle;
}

/// Number of draws predict_stack emits: the member count for ensembles, S otherwise.
inline std::size_t stack_size(const ModelBundle& bundle, std::size_t s) {
  return bundle.method == Method::Ensemble ? bundle.members.size() : s;
}

/// Per-draw class probabilities. MAP repeats its deterministic prediction,
/// MC dropout samples fresh binary masks, ensembles emit one draw per member
/// (S is ignored), and variational methods draw parameters from the posterior
/// (radial draws for Radial). Draw s uses child stream s of `seed`.
inline SampleStack predict_stack(const ModelBundle& bundle, const Dataset& data, std::size_t s, std::uint64_t seed) {
  if (s == 0 && bundle.method != Method::Ensemble) throw Error(Errc::InvalidSpec, "S must be at least 1");
  if (data.x.cols() != bundle.layer_sizes.front())
    throw Error(Errc::ShapeMismatch, "input width does not match the model");
  std::vector<Matrix> samples;
  const std::size_t count = stack_size(bundle, s);
  for (std::size_t k = 0; k < count; ++k) {
    Rng rng = Rng::child(seed, k);
    switch (bundle.method) {
      case Method::Map:
        samples.push_back(forward(bundle.members.front(), data.x));
        break;
      case Method::McDropout: {
        const ToyMlp& net = bundle.members.front();
        auto masks = sample_masks(net, data.x.rows(), rng);
        samples.push_back(forward(net, data.x, &masks));
        break;
      }
      case Method::Ensemble:
        samples.push_back(forward(bundle.members[k], data.x));
        break;
      case Method::Mfvi:
      case Method::Radial:
      case Method::Gvi: {
        const auto xi = draw_offsets(bundle.method, bundle.layer_sizes, rng);
        samples.push_back(forward(materialize(bundle.posterior, xi), data.x));
        break;
      }
    }
  }
  return SampleStack(std::move(samples), data.y, data.ids);
}

}  // namespace riskref::toybnn
