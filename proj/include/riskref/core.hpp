#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "riskref/error.hpp"
#include "riskref/matrix.hpp"

namespace riskref {

/// Rows whose sum is off by more than this are rejected on ingestion.
inline constexpr double kRowSumTolerance = 1e-6;
/// Rows whose sum is off by more than this (but within kRowSumTolerance) are
/// divided by their sum; closer rows are stored untouched.
inline constexpr double kRenormalizeThreshold = 1e-12;

namespace detail {

// Validates one probability row in place. Returns false when the row cannot be
// accepted (non-finite entry, entry outside [0,1], or sum outside tolerance).
inline bool normalize_row(std::span<double> row) {
  double sum = 0.0;
  for (double p : row) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0 + kRowSumTolerance) return false;
    sum += p;
  }
  if (std::abs(sum - 1.0) > kRowSumTolerance) return false;
  if (std::abs(sum - 1.0) > kRenormalizeThreshold)
    for (double& p : row) p /= sum;
  for (double& p : row)
    if (p > 1.0) p = 1.0;
  return true;
}

inline std::vector<std::string> default_ids(std::size_t n) {
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  return ids;
}

}  // namespace detail

/// Per-example posterior-predictive probabilities glued to their labels and ids.
///
/// Immutable after construction. Construction validates every row (entries in
/// [0,1], sum within 1e-6 of one) and renormalizes rows that drift by more
/// than 1e-12. Ids are opaque and never parsed; duplicates are allowed here
/// (bootstrap resamples repeat examples) and rejected only by the file loader.
class PredictionSet {
 public:
  PredictionSet(Matrix probs, std::vector<int> labels, std::vector<std::string> ids)
      : probs_(std::move(probs)), labels_(std::move(labels)), ids_(std::move(ids)) {
    validate();
  }

  PredictionSet(Matrix probs, std::vector<int> labels)
      : PredictionSet(std::move(probs), std::move(labels), {}) {}

  std::size_t n_examples() const noexcept { return probs_.rows(); }
  std::size_t n_classes() const noexcept { return probs_.cols(); }
  const Matrix& probs() const noexcept { return probs_; }
  std::span<const double> row(std::size_t i) const { return probs_.row(i); }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  /// Subset in the given index order (indices may repeat).
  PredictionSet select(std::span<const std::size_t> indices) const {
    Matrix probs(indices.size(), n_classes());
    std::vector<int> labels;
    std::vector<std::string> ids;
    labels.reserve(indices.size());
    ids.reserve(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const std::size_t i = indices[k];
      if (i >= n_examples()) throw Error(Errc::Misaligned, "selection index out of range");
      auto src = row(i);
      std::copy(src.begin(), src.end(), probs.row(k).begin());
      labels.push_back(labels_[i]);
      ids.push_back(ids_[i]);
    }
    return PredictionSet(std::move(probs), std::move(labels), std::move(ids));
  }

 private:
  void validate() {
    if (probs_.cols() < 2)
      throw Error(Errc::ShapeMismatch, "at least two classes are required");
    if (ids_.empty() && probs_.rows() > 0) ids_ = detail::default_ids(probs_.rows());
    if (labels_.size() != probs_.rows() || ids_.size() != probs_.rows())
      throw Error(Errc::ShapeMismatch, "labels, ids and probability rows differ in length");
    const int m = static_cast<int>(probs_.cols());
    for (std::size_t i = 0; i < probs_.rows(); ++i) {
      if (!detail::normalize_row(probs_.row(i)))
        throw Error(Errc::InvalidProbabilityRow, "row " + std::to_string(i));
      if (labels_[i] < 0 || labels_[i] >= m)
        throw Error(Errc::InvalidLabel, "row " + std::to_string(i) + " has label " +
                                            std::to_string(labels_[i]));
    }
  }

  Matrix probs_;
  std::vector<int> labels_;
  std::vector<std::string> ids_;
};

/// S draws of per-example class probabilities, one N×M matrix per draw.
class SampleStack {
 public:
  SampleStack(std::vector<Matrix> samples, std::vector<int> labels, std::vector<std::string> ids = {})
      : samples_(std::move(samples)), labels_(std::move(labels)), ids_(std::move(ids)) {
    if (samples_.empty()) throw Error(Errc::EmptyStack, "stack holds no samples");
    const Matrix& first = samples_.front();
    if (ids_.empty()) ids_ = detail::default_ids(first.rows());
    for (std::size_t s = 0; s < samples_.size(); ++s) {
      if (!samples_[s].same_shape(first))
        throw Error(Errc::ShapeMismatch, "sample " + std::to_string(s) + " differs in shape");
      for (std::size_t i = 0; i < first.rows(); ++i)
        if (!detail::normalize_row(samples_[s].row(i)))
          throw Error(Errc::InvalidProbabilityRow,
                      "sample " + std::to_string(s) + " row " + std::to_string(i));
    }
    if (first.cols() < 2) throw Error(Errc::ShapeMismatch, "at least two classes are required");
    if (labels_.size() != first.rows() || ids_.size() != first.rows())
      throw Error(Errc::ShapeMismatch, "labels, ids and probability rows differ in length");
  }

  std::size_t n_samples() const noexcept { return samples_.size(); }
  std::size_t n_examples() const noexcept { return samples_.front().rows(); }
  std::size_t n_classes() const noexcept { return samples_.front().cols(); }
  const std::vector<Matrix>& samples() const noexcept { return samples_; }
  const Matrix& sample(std::size_t s) const { return samples_.at(s); }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  std::vector<Matrix> samples_;
  std::vector<int> labels_;
  std::vector<std::string> ids_;
};

enum class SchemeKind { Pirc5, Rdr2, Generic };

struct ClassificationScheme {
  SchemeKind kind = SchemeKind::Pirc5;
  int n_classes = 5;
  /// Smallest PIRC grade counted as referable when deriving RDR.
  int rdr_threshold = 2;

  static ClassificationScheme pirc5() { return {SchemeKind::Pirc5, 5, 2}; }
  static ClassificationScheme rdr2(int threshold = 2) { return {SchemeKind::Rdr2, 2, threshold}; }
  static ClassificationScheme generic(int m) { return {SchemeKind::Generic, m, 2}; }
};

/// Posterior predictive from a sample stack: the cell-wise mean over draws.
inline PredictionSet aggregate(const SampleStack& stack) {
  const std::size_t n = stack.n_examples();
  const std::size_t m = stack.n_classes();
  Matrix mean(n, m);
  for (const Matrix& s : stack.samples())
    for (std::size_t k = 0; k < mean.size(); ++k) mean.data()[k] += s.data()[k];
  const double inv = 1.0 / static_cast<double>(stack.n_samples());
  for (double& v : mean.data()) v *= inv;
  return PredictionSet(std::move(mean), stack.labels(), stack.ids());
}

/// Collapses 5-grade predictions to referable/non-referable: p(RDR=1) is the
/// mass on grades >= threshold, labels map through the same threshold.
inline PredictionSet binarize_rdr(const PredictionSet& preds,
                                  const ClassificationScheme& scheme = ClassificationScheme::rdr2()) {
  if (preds.n_classes() != 5)
    throw Error(Errc::WrongClassCount,
                "RDR binarization needs 5 classes, got " + std::to_string(preds.n_classes()));
  if (scheme.kind != SchemeKind::Rdr2 || scheme.rdr_threshold < 1 || scheme.rdr_threshold > 4)
    throw Error(Errc::InvalidSpec, "binarization needs an RDR2 scheme with threshold in [1,4]");
  const auto t = static_cast<std::size_t>(scheme.rdr_threshold);
  Matrix out(preds.n_examples(), 2);
  std::vector<int> labels(preds.n_examples());
  for (std::size_t i = 0; i < preds.n_examples(); ++i) {
    auto r = preds.row(i);
    double low = 0.0, high = 0.0;
    for (std::size_t k = 0; k < 5; ++k) (k < t ? low : high) += r[k];
    out(i, 0) = low;
    out(i, 1) = high;
    labels[i] = preds.labels()[i] >= scheme.rdr_threshold ? 1 : 0;
  }
  return PredictionSet(std::move(out), std::move(labels), preds.ids());
}

/// Applies binarize_rdr to every draw of a stack.
inline SampleStack binarize_rdr(const SampleStack& stack,
                                const ClassificationScheme& scheme = ClassificationScheme::rdr2()) {
  std::vector<Matrix> samples;
  std::vector<int> labels;
  for (const Matrix& s : stack.samples()) {
    PredictionSet b = binarize_rdr(PredictionSet(s, stack.labels(), stack.ids()), scheme);
    labels = b.labels();
    samples.push_back(b.probs());
  }
  return SampleStack(std::move(samples), std::move(labels), stack.ids());
}

}  // namespace riskref
