#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riskref/core.hpp"
#include "riskref/error.hpp"
#include "riskref/matrix.hpp"
#include "riskref/metrics.hpp"

namespace riskref {

/// Per-example risk scores aligned with a PredictionSet; higher is more uncertain.
class UncertaintyVector {
 public:
  UncertaintyVector() = default;
  explicit UncertaintyVector(std::vector<double> values) : values_(std::move(values)) {
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (!std::isfinite(values_[i]))
        throw Error(Errc::NonFinite, "uncertainty " + std::to_string(i) + " is not finite");
  }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const noexcept { return values_; }

  UncertaintyVector select(std::span<const std::size_t> indices) const {
    std::vector<double> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(values_.at(i));
    return UncertaintyVector(std::move(out));
  }

 private:
  std::vector<double> values_;
};

/// Predictive entropy in nats, with 0 ln 0 = 0.
inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

inline UncertaintyVector entropy(const PredictionSet& preds) {
  std::vector<double> out(preds.n_examples());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = entropy(preds.row(i));
  return UncertaintyVector(std::move(out));
}

/// 1 - max_i p_i. Thresholding this at 1 - tau is the classic reject rule
/// max_i p_i < tau.
inline UncertaintyVector max_prob_reject(const PredictionSet& preds) {
  std::vector<double> out(preds.n_examples());
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto r = preds.row(i);
    out[i] = 1.0 - r[argmax(r)];
  }
  return UncertaintyVector(std::move(out));
}

/// A loss L(p, target) evaluated on a prediction distribution p.
template <typename F>
concept DistributionLoss = requires(F f, std::span<const double> p, std::size_t target) {
  { f(p, target) } -> std::convertible_to<double>;
};

/// Negative log-likelihood of the target under p. Plugged into the expected
/// conditional risk it yields the predictive entropy; p_target = 0 only ever
/// appears with zero weight, so it is mapped to 0 rather than infinity.
struct NllLoss {
  double operator()(std::span<const double> p, std::size_t target) const {
    return p[target] > 0.0 ? -std::log(p[target]) : 0.0;
  }
};

/// Loss given as a table L(j, i): the cost of predicting j when the target is i.
/// Evaluated on a distribution p it is marginalized over the prediction,
/// L(p, i) = sum_j p_j L(j, i).
struct TableLoss {
  const Matrix* table;

  double operator()(std::span<const double> p, std::size_t target) const {
    double s = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) s += p[j] * (*table)(j, target);
    return s;
  }
};

/// R(x) = sum_i L(p(.|x), i) p(i|x) for every row.
template <DistributionLoss Loss>
UncertaintyVector expected_conditional_risk(const PredictionSet& preds, const Loss& loss) {
  std::vector<double> out(preds.n_examples());
  for (std::size_t r = 0; r < out.size(); ++r) {
    auto p = preds.row(r);
    double risk = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) risk += loss(p, i) * p[i];
    out[r] = risk;
  }
  return UncertaintyVector(std::move(out));
}

inline UncertaintyVector expected_conditional_risk(const PredictionSet& preds, const Matrix& loss_table) {
  const std::size_t m = preds.n_classes();
  if (loss_table.rows() != m || loss_table.cols() != m)
    throw Error(Errc::ShapeMismatch, "loss table must be M x M");
  for (double v : loss_table.data())
    if (!std::isfinite(v)) throw Error(Errc::NonFinite, "loss table entry is not finite");
  return expected_conditional_risk(preds, TableLoss{&loss_table});
}

/// 0 on the diagonal, 1 elsewhere.
inline Matrix zero_one_loss_table(std::size_t m) {
  Matrix t(m, m, 1.0);
  for (std::size_t k = 0; k < m; ++k) t(k, k) = 0.0;
  return t;
}

/// Table of kappa values kappa(C + S_{j,i}) for every prediction j and target
/// i, on the unit scale. Depends only on the validation confusion matrix, so
/// it is built once and shared by every example.
class QwkRiskTable {
 public:
  /// `smoothing` adds a constant to every validation cell before the single
  /// entry is added; 0 keeps the raw counts.
  explicit QwkRiskTable(const ConfusionMatrix& validation, double smoothing = 0.0)
      : m_(validation.m()), kappa_(validation.m(), validation.m()) {
    if (validation.total() <= 0)
      throw Error(Errc::EmptyMatrix, "validation confusion matrix is empty");
    if (!(smoothing >= 0.0) || !std::isfinite(smoothing))
      throw Error(Errc::InvalidSpec, "smoothing must be a finite non-negative number");
    std::vector<double> counts = detail::as_real(validation);
    for (double& v : counts) v += smoothing;
    for (std::size_t j = 0; j < m_; ++j)
      for (std::size_t i = 0; i < m_; ++i) {
        counts[j * m_ + i] += 1.0;
        kappa_(j, i) = detail::kappa_unit(counts, m_);
        counts[j * m_ + i] -= 1.0;
      }
  }

  std::size_t m() const noexcept { return m_; }
  /// kappa(C + S_{j,i}) with j the prediction and i the target.
  double kappa(std::size_t predicted, std::size_t target) const { return kappa_(predicted, target); }
  const Matrix& table() const noexcept { return kappa_; }

  /// -sum_i p_i sum_j p_j kappa(C + S_{j,i}).
  double risk(std::span<const double> p) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      double inner = 0.0;
      for (std::size_t j = 0; j < m_; ++j) inner += p[j] * kappa_(j, i);
      acc += p[i] * inner;
    }
    return -acc;
  }

 private:
  std::size_t m_;
  Matrix kappa_;
};

inline UncertaintyVector qwk_risk(const PredictionSet& preds, const QwkRiskTable& table) {
  if (table.m() != preds.n_classes())
    throw Error(Errc::ShapeMismatch, "validation confusion matrix has " + std::to_string(table.m()) +
                                         " classes, predictions have " + std::to_string(preds.n_classes()));
  std::vector<double> out(preds.n_examples());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = table.risk(preds.row(i));
  return UncertaintyVector(std::move(out));
}

inline UncertaintyVector qwk_risk(const PredictionSet& preds, const ConfusionMatrix& validation,
                                  double smoothing = 0.0) {
  if (validation.m() != preds.n_classes())
    throw Error(Errc::ShapeMismatch, "validation confusion matrix class count differs from predictions");
  return qwk_risk(preds, QwkRiskTable(validation, smoothing));
}

/// Empirical expected risk over a set: the mean of the per-example risks.
inline double dataset_expected_risk(const UncertaintyVector& u) {
  if (u.size() == 0) throw Error(Errc::EmptyInput, "expected risk of an empty set");
  double s = 0.0;
  for (double v : u.values()) s += v;
  return s / static_cast<double>(u.size());
}

enum class MeasureKind { Entropy, MaxProbReject, QwkRisk, GenericRisk };

inline std::string to_string(MeasureKind k) {
  switch (k) {
    case MeasureKind::Entropy: return "entropy";
    case MeasureKind::MaxProbReject: return "max-prob";
    case MeasureKind::QwkRisk: return "qwk-risk";
    case MeasureKind::GenericRisk: return "generic-risk";
  }
  return "unknown";
}

/// Which uncertainty measure to compute, plus what it needs.
struct UncertaintySpec {
  MeasureKind kind = MeasureKind::Entropy;
  std::optional<ConfusionMatrix> validation_confusion;  // QwkRisk
  double smoothing = 0.0;                               // QwkRisk
  std::optional<Matrix> loss_table;                     // GenericRisk, L(j, i)
  bool nll_loss = false;  // GenericRisk with the NLL loss instead of a table

  void validate(std::size_t m) const {
    switch (kind) {
      case MeasureKind::QwkRisk:
        if (!validation_confusion)
          throw Error(Errc::InvalidConfig, "qwk-risk needs a validation confusion matrix");
        if (validation_confusion->m() != m)
          throw Error(Errc::ShapeMismatch, "validation confusion matrix class count differs from predictions");
        if (validation_confusion->total() <= 0)
          throw Error(Errc::EmptyMatrix, "validation confusion matrix is empty");
        break;
      case MeasureKind::GenericRisk:
        if (!nll_loss && !loss_table) throw Error(Errc::InvalidConfig, "generic risk needs a loss table");
        break;
      default:
        break;
    }
  }
};

inline UncertaintyVector compute_uncertainty(const PredictionSet& preds, const UncertaintySpec& spec) {
  spec.validate(preds.n_classes());
  switch (spec.kind) {
    case MeasureKind::Entropy: return entropy(preds);
    case MeasureKind::MaxProbReject: return max_prob_reject(preds);
    case MeasureKind::QwkRisk: return qwk_risk(preds, *spec.validation_confusion, spec.smoothing);
    case MeasureKind::GenericRisk:
      if (spec.nll_loss) return expected_conditional_risk(preds, NllLoss{});
      return expected_conditional_risk(preds, *spec.loss_table);
  }
  throw Error(Errc::InvalidConfig, "unknown uncertainty measure");
}

}  // namespace riskref
