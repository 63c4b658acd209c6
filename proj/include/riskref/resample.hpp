#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "riskref/core.hpp"
#include "riskref/error.hpp"
#include "riskref/referral.hpp"
#include "riskref/rng.hpp"
#include "riskref/uncertainty.hpp"

namespace riskref {

struct LevelSummary {
  double level = 0.0;
  double mean = 0.0;  // over valid resamples; 0 when none were valid
  double std = 0.0;   // population standard deviation
  std::size_t n_valid = 0;
  std::size_t n_skipped = 0;
};

struct BootstrapReport {
  std::size_t n_resamples = 0;
  std::uint64_t seed = 0;
  std::vector<LevelSummary> per_level;

  std::vector<std::optional<double>> means() const {
    std::vector<std::optional<double>> out;
    for (const auto& s : per_level)
      out.push_back(s.n_valid > 0 ? std::optional<double>(s.mean) : std::nullopt);
    return out;
  }
};

/// Example order used before resampling: ascending by id, ties by position.
inline std::vector<std::size_t> canonical_order(const PredictionSet& preds) {
  std::vector<std::size_t> order(preds.n_examples());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& ids = preds.ids();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  return order;
}

/// Example indices (into the canonically ordered set) drawn for resample `b`.
inline std::vector<std::size_t> bootstrap_draw(std::uint64_t seed, std::size_t b, std::size_t n) {
  Rng rng = Rng::child(seed, b);
  std::vector<std::size_t> draw(n);
  for (auto& i : draw) i = rng.index(n);
  return draw;
}

/// Mean and population std of a metric over B bootstrap resamples, per
/// referral level. Each resample draws n examples with replacement and reruns
/// referral on the drawn set; the uncertainty of an example travels with it.
/// Resamples where the metric is undefined at a level count as skipped there.
inline BootstrapReport bootstrap(const PredictionSet& preds, const UncertaintyVector& u,
                                 std::span<const double> levels, Metric metric, std::size_t n_resamples,
                                 std::uint64_t seed, double scale = kMetricScale) {
  if (n_resamples < 1) throw Error(Errc::InvalidB, "at least one bootstrap resample is required");
  if (u.size() != preds.n_examples())
    throw Error(Errc::Misaligned, "uncertainty vector length differs from prediction count");
  if (preds.n_examples() == 0) throw Error(Errc::EmptyInput, "bootstrap of an empty set");
  validate_levels(levels);

  const auto order = canonical_order(preds);
  const PredictionSet sorted = preds.select(order);
  const UncertaintyVector sorted_u = u.select(order);
  const std::size_t n = sorted.n_examples();

  std::vector<std::vector<double>> values(levels.size());
  for (std::size_t b = 0; b < n_resamples; ++b) {
    const auto draw = bootstrap_draw(seed, b, n);
    const ReferralCurve curve = referral_curve(sorted.select(draw), sorted_u.select(draw), levels, metric, scale);
    for (std::size_t k = 0; k < levels.size(); ++k)
      if (curve.points[k].value) values[k].push_back(*curve.points[k].value);
  }

  BootstrapReport report{n_resamples, seed, {}};
  for (std::size_t k = 0; k < levels.size(); ++k) {
    LevelSummary s;
    s.level = levels[k];
    s.n_valid = values[k].size();
    s.n_skipped = n_resamples - s.n_valid;
    if (s.n_valid > 0) {
      double sum = 0.0;
      for (double v : values[k]) sum += v;
      s.mean = sum / static_cast<double>(s.n_valid);
      double sq = 0.0;
      for (double v : values[k]) sq += (v - s.mean) * (v - s.mean);
      s.std = std::sqrt(sq / static_cast<double>(s.n_valid));
    }
    report.per_level.push_back(s);
  }
  return report;
}

}  // namespace riskref
