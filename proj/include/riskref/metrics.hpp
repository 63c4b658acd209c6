#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "riskref/core.hpp"
#include "riskref/error.hpp"
#include "riskref/matrix.hpp"

namespace riskref {

/// Metrics are reported on a 0-100 scale unless a caller asks for raw units.
inline constexpr double kMetricScale = 100.0;

/// Square count matrix; counts(i, j) is the number of examples predicted as
/// class i whose true class is j.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t m) : m_(m), counts_(m * m, 0) {
    if (m < 2) throw Error(Errc::ShapeMismatch, "confusion matrix needs at least two classes");
  }
  ConfusionMatrix(std::size_t m, std::vector<std::int64_t> counts) : m_(m), counts_(std::move(counts)) {
    if (m < 2) throw Error(Errc::ShapeMismatch, "confusion matrix needs at least two classes");
    if (counts_.size() != m * m) throw Error(Errc::ShapeMismatch, "confusion matrix is not square");
    for (auto c : counts_)
      if (c < 0) throw Error(Errc::InvalidSpec, "negative confusion count");
  }

  std::size_t m() const noexcept { return m_; }
  std::int64_t operator()(std::size_t predicted, std::size_t truth) const {
    return counts_[predicted * m_ + truth];
  }
  void add(std::size_t predicted, std::size_t truth, std::int64_t count = 1) {
    counts_.at(predicted * m_ + truth) += count;
  }
  std::int64_t total() const { return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0}); }
  const std::vector<std::int64_t>& counts() const noexcept { return counts_; }

  ConfusionMatrix transposed() const {
    ConfusionMatrix t(m_);
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t j = 0; j < m_; ++j) t.counts_[j * m_ + i] = counts_[i * m_ + j];
    return t;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t m_;
  std::vector<std::int64_t> counts_;
};

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k)
    if (row[k] > row[best]) best = k;
  return best;
}

inline ConfusionMatrix confusion_from(const PredictionSet& preds) {
  ConfusionMatrix c(preds.n_classes());
  for (std::size_t i = 0; i < preds.n_examples(); ++i)
    c.add(argmax(preds.row(i)), static_cast<std::size_t>(preds.labels()[i]));
  return c;
}

/// Chance-agreement matrix: outer product of the predicted and true marginals
/// divided by the total count.
inline Matrix expected_agreement(const ConfusionMatrix& c) {
  const std::size_t m = c.m();
  const double n = static_cast<double>(c.total());
  if (n <= 0) throw Error(Errc::EmptyMatrix, "expected agreement of an empty confusion matrix");
  std::vector<double> rows(m, 0.0), cols(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      rows[i] += static_cast<double>(c(i, j));
      cols[j] += static_cast<double>(c(i, j));
    }
  Matrix e(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) e(i, j) = rows[i] * cols[j] / n;
  return e;
}

namespace detail {

// Quadratic weighted kappa on the unit scale over real-valued counts (row =
// predicted). Shared by the integer path and the smoothed QWK-Risk table.
inline double kappa_unit(std::span<const double> counts, std::size_t m) {
  double n = 0.0;
  std::vector<double> rows(m, 0.0), cols(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double v = counts[i * m + j];
      rows[i] += v;
      cols[j] += v;
      n += v;
    }
  if (n <= 0) throw Error(Errc::EmptyMatrix, "kappa of an empty confusion matrix");
  double observed = 0.0, expected = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double d = static_cast<double>(i) - static_cast<double>(j);
      const double w = d * d;
      observed += w * counts[i * m + j];
      expected += w * (rows[i] * cols[j] / n);
    }
  if (expected == 0.0) {
    if (observed == 0.0) return 1.0;
    throw Error(Errc::DegenerateAgreement, "zero expected disagreement with nonzero observed disagreement");
  }
  return 1.0 - observed / expected;
}

inline std::vector<double> as_real(const ConfusionMatrix& c) {
  return {c.counts().begin(), c.counts().end()};
}

}  // namespace detail

/// Quadratic weighted Cohen's kappa on [0, 1] units (1 = perfect agreement).
inline double qwk_unit(const ConfusionMatrix& c) {
  const auto counts = detail::as_real(c);
  return detail::kappa_unit(counts, c.m());
}

/// Quadratic weighted Cohen's kappa on the 0-100 reporting scale.
inline double qwk(const ConfusionMatrix& c) { return kMetricScale * qwk_unit(c); }

/// ROC AUC via the Mann-Whitney U statistic, tied scores sharing midranks.
/// Labels are 0/1; returns the 0-100 scale.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw Error(Errc::Misaligned, "scores and labels differ in length");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw Error(Errc::InvalidLabel, "AUC labels must be 0 or 1");
    n_pos += static_cast<std::size_t>(y);
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw Error(Errc::SingleClass, "AUC needs both positive and negative examples");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo + 1;
    while (hi < n && scores[order[hi]] == scores[order[lo]]) ++hi;
    // ranks lo+1..hi share their mean
    const double midrank = (static_cast<double>(lo + 1) + static_cast<double>(hi)) / 2.0;
    for (std::size_t k = lo; k < hi; ++k)
      if (labels[order[k]] == 1) pos_rank_sum += midrank;
    lo = hi;
  }
  const double np = static_cast<double>(n_pos);
  const double u = pos_rank_sum - np * (np + 1.0) / 2.0;
  return kMetricScale * u / (np * static_cast<double>(n_neg));
}

}  // namespace riskref
