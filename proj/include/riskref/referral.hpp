#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riskref/core.hpp"
#include "riskref/error.hpp"
#include "riskref/metrics.hpp"
#include "riskref/uncertainty.hpp"

namespace riskref {

/// Number of examples referred at `level`: floor(level * n). The 1e-9 slack
/// absorbs representation error such as 0.29 * 100 = 28.999999999999996.
inline std::size_t referred_count(double level, std::size_t n) {
  if (!(level >= 0.0 && level < 1.0))
    throw Error(Errc::InvalidLevel, "referral level must lie in [0, 1)");
  const double k = std::floor(level * static_cast<double>(n) + 1e-9);
  return std::min(n, static_cast<std::size_t>(k));
}

/// Indices of the examples kept at `level`, in original order. The
/// floor(level * n) most uncertain examples are dropped; among equal
/// uncertainties the later index is dropped first.
inline std::vector<std::size_t> retained_indices(std::span<const double> u, double level) {
  const std::size_t n = u.size();
  const std::size_t drop = referred_count(level, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return u[a] < u[b]; });
  order.resize(n - drop);
  std::sort(order.begin(), order.end());
  return order;
}

inline PredictionSet refer(const PredictionSet& preds, const UncertaintyVector& u, double level) {
  if (u.size() != preds.n_examples())
    throw Error(Errc::Misaligned, "uncertainty vector length differs from prediction count");
  const auto keep = retained_indices(u.values(), level);
  return preds.select(keep);
}

enum class Metric { Qwk, Auc };

inline std::string to_string(Metric m) { return m == Metric::Qwk ? "qwk" : "auc"; }

/// Evaluates `metric` on a set: QWK on the argmax confusion matrix, AUC on the
/// class-1 probability of a two-class set. 0-100 scale unless `scale` says otherwise.
inline double evaluate_metric(const PredictionSet& preds, Metric metric, double scale = kMetricScale) {
  if (preds.n_examples() == 0) throw Error(Errc::EmptyInput, "metric of an empty set");
  if (metric == Metric::Qwk) return scale * qwk_unit(confusion_from(preds));
  if (preds.n_classes() != 2)
    throw Error(Errc::WrongClassCount, "AUC needs a two-class set; binarize first");
  std::vector<double> scores(preds.n_examples());
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = preds.row(i)[1];
  return scale / kMetricScale * roc_auc(scores, preds.labels());
}

struct CurvePoint {
  double level = 0.0;
  std::size_t retained_count = 0;
  std::optional<double> value;  // missing when the metric is undefined on the retained set
  std::string reason;           // error code name when missing
};

struct ReferralCurve {
  Metric metric = Metric::Qwk;
  std::vector<CurvePoint> points;

  std::vector<double> levels() const {
    std::vector<double> out;
    for (const auto& p : points) out.push_back(p.level);
    return out;
  }
};

inline void validate_levels(std::span<const double> levels) {
  if (levels.empty()) throw Error(Errc::InvalidLevel, "no referral levels given");
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (!(levels[k] >= 0.0 && levels[k] < 1.0))
      throw Error(Errc::InvalidLevel, "referral level must lie in [0, 1)");
    if (k > 0 && !(levels[k] > levels[k - 1]))
      throw Error(Errc::InvalidLevel, "referral levels must be strictly increasing");
  }
}

inline ReferralCurve referral_curve(const PredictionSet& preds, const UncertaintyVector& u,
                                    std::span<const double> levels, Metric metric,
                                    double scale = kMetricScale) {
  validate_levels(levels);
  if (u.size() != preds.n_examples())
    throw Error(Errc::Misaligned, "uncertainty vector length differs from prediction count");
  ReferralCurve curve{metric, {}};
  for (double level : levels) {
    CurvePoint pt;
    pt.level = level;
    PredictionSet kept = refer(preds, u, level);
    pt.retained_count = kept.n_examples();
    try {
      pt.value = evaluate_metric(kept, metric, scale);
    } catch (const Error& e) {
      if (e.code() != Errc::SingleClass && e.code() != Errc::EmptyInput &&
          e.code() != Errc::DegenerateAgreement)
        throw;
      pt.reason = std::string(to_string(e.code()));
    }
    curve.points.push_back(std::move(pt));
  }
  return curve;
}

enum class Marker { Up, Equal, Down, Missing };

inline std::string to_string(Marker m) {
  switch (m) {
    case Marker::Up: return "up";
    case Marker::Equal: return "equal";
    case Marker::Down: return "down";
    case Marker::Missing: return "missing";
  }
  return "missing";
}

/// Rounds to the one-decimal display precision of the result tables (half up).
inline double round_display(double v) { return std::floor(v * 10.0 + 0.5) / 10.0; }

/// Up/Equal/Down between consecutive values. Equal means identical after
/// rounding to one decimal; a missing value on either side gives Missing.
inline std::vector<Marker> improvement_markers(std::span<const std::optional<double>> values) {
  if (values.size() < 2) throw Error(Errc::TooFewLevels, "markers need at least two levels");
  std::vector<Marker> out;
  for (std::size_t k = 1; k < values.size(); ++k) {
    const auto& prev = values[k - 1];
    const auto& cur = values[k];
    if (!prev || !cur) {
      out.push_back(Marker::Missing);
    } else if (std::floor(*cur * 10.0 + 0.5) == std::floor(*prev * 10.0 + 0.5)) {
      out.push_back(Marker::Equal);
    } else {
      out.push_back(*cur > *prev ? Marker::Up : Marker::Down);
    }
  }
  return out;
}

inline std::vector<Marker> improvement_markers(const ReferralCurve& curve) {
  std::vector<std::optional<double>> values;
  for (const auto& p : curve.points) values.push_back(p.value);
  return improvement_markers(values);
}

}  // namespace riskref
