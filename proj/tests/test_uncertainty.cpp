#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "catch_util.hpp"
#include "oracles.hpp"
#include "riskref/uncertainty.hpp"
#include "test_helpers.hpp"

using namespace riskref;

namespace {

PredictionSet single(std::vector<double> row, int label = 0) {
  const std::size_t m = row.size();
  return PredictionSet(Matrix(1, m, std::move(row)), {label});
}

}  // namespace

TEST_CASE("entropy") {
  CHECK(entropy(single({0, 0, 1, 0}))[0] == 0.0);
  CHECK(std::abs(entropy(single({0.2, 0.2, 0.2, 0.2, 0.2}))[0] - std::log(5.0)) < 1e-12);
  const double oracle_value = -(0.7 * std::log(0.7) + 0.2 * std::log(0.2) + 0.1 * std::log(0.1));
  CHECK(std::abs(entropy(single({0.7, 0.2, 0.1}))[0] - oracle_value) < 1e-12);
  CHECK(std::abs(oracle_value - 0.80182) < 1e-5);
}

TEST_CASE("max_prob_reject") {
  CHECK(max_prob_reject(single({1, 0, 0}))[0] == 0.0);
  CHECK(std::abs(max_prob_reject(single({0.2, 0.2, 0.2, 0.2, 0.2}))[0] - 0.8) < 1e-15);
  CHECK(std::abs(max_prob_reject(single({0.6, 0.3, 0.1}))[0] - 0.4) < 1e-15);
  // thresholding at 1 - tau is the classic max_i p_i < tau rule
  Rng rng(4);
  auto p = testing_util::random_predictions(rng, 100, 4);
  auto u = max_prob_reject(p);
  const double tau = 0.55;
  for (std::size_t i = 0; i < 100; ++i) {
    const double mx = *std::max_element(p.row(i).begin(), p.row(i).end());
    CHECK((u[i] > 1.0 - tau) == (mx < tau));
  }
}

TEST_CASE("expected_conditional_risk") {
  Rng rng(8);
  auto p = testing_util::random_predictions(rng, 50, 4);
  auto zero = expected_conditional_risk(p, Matrix(4, 4, 0.0));
  CHECK(std::all_of(zero.values().begin(), zero.values().end(), [](double v) { return v == 0.0; }));

  auto zo = expected_conditional_risk(p, zero_one_loss_table(4));
  for (std::size_t r = 0; r < 50; ++r) {
    double s = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) s += p.row(r)[i] * p.row(r)[j] * (i == j ? 0.0 : 1.0);
    for (double v : p.row(r)) sq += v * v;
    CHECK(std::abs(zo[r] - s) < 1e-12);
    CHECK(std::abs(zo[r] - (1.0 - sq)) < 1e-12);
  }
  auto nll = expected_conditional_risk(p, NllLoss{});
  auto h = entropy(p);
  for (std::size_t r = 0; r < 50; ++r) CHECK(std::abs(nll[r] - h[r]) <= 1e-12);

  CHECK_ERRC(expected_conditional_risk(p, Matrix(3, 3, 0.0)), Errc::ShapeMismatch);
  Matrix bad(4, 4, 0.0);
  bad(1, 2) = std::nan("");
  CHECK_ERRC(expected_conditional_risk(p, bad), Errc::NonFinite);
}

TEST_CASE("qwk_risk against the exhaustive cell oracle") {
  ConfusionMatrix c(2, {10, 0, 0, 10});
  auto uniform = qwk_risk(single({0.5, 0.5}), c);
  CHECK(std::abs(uniform[0] - oracle::qwk_risk_bruteforce(std::vector<double>{0.5, 0.5}, c.counts(), 2)) < 1e-12);

  ConfusionMatrix c5 = ConfusionMatrix(5, {30, 6, 1, 0, 0, 5, 12, 4, 1, 0, 1, 3, 15, 3, 1, 0, 0, 2, 6, 2, 0, 0, 0, 1, 4});
  for (std::size_t k = 0; k < 5; ++k) {
    std::vector<double> row(5, 0.0);
    row[k] = 1.0;
    std::vector<std::int64_t> plus = c5.counts();
    plus[k * 5 + k] += 1;
    CHECK(std::abs(qwk_risk(single(row), c5)[0] + oracle::kappa_exact(plus, 5)) < 1e-12);
  }
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    auto row = testing_util::random_row(rng, 5);
    CHECK(std::abs(qwk_risk(single(row), c5)[0] - oracle::qwk_risk_bruteforce(row, c5.counts(), 5)) < 1e-12);
  }
  CHECK_ERRC(qwk_risk(single({0.5, 0.5}), c5), Errc::ShapeMismatch);
  CHECK_ERRC(QwkRiskTable(ConfusionMatrix(3)), Errc::EmptyMatrix);
}

TEST_CASE("qwk_risk table is hoisted and smoothing is opt-in") {
  ConfusionMatrix c(3, {5, 1, 0, 0, 4, 2, 0, 0, 3});
  QwkRiskTable table(c);
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t i = 0; i < 3; ++i) {
      auto counts = c.counts();
      counts[j * 3 + i]++;
      CHECK(std::abs(table.kappa(j, i) - qwk_unit(ConfusionMatrix(3, counts))) < 1e-15);
    }
  QwkRiskTable smoothed(c, 0.5);
  CHECK(smoothed.kappa(0, 0) != table.kappa(0, 0));
  CHECK_ERRC(QwkRiskTable(c, -1.0), Errc::InvalidSpec);
}

TEST_CASE("qwk_risk for two classes is a continuous quadratic in p1") {
  ConfusionMatrix c(2, {40, 7, 5, 30});
  std::vector<double> grid, risk;
  for (int k = 0; k <= 200; ++k) {
    const double p1 = k / 200.0;
    grid.push_back(p1);
    risk.push_back(qwk_risk(single({1.0 - p1, p1}), c)[0]);
    CHECK(std::abs(risk.back() - oracle::qwk_risk_bruteforce(std::vector<double>{1.0 - p1, p1}, c.counts(), 2)) < 1e-12);
  }
  // constant second difference and no jumps
  const double d2 = risk[2] - 2 * risk[1] + risk[0];
  for (std::size_t k = 1; k + 1 < risk.size(); ++k) {
    CHECK(std::abs((risk[k + 1] - 2 * risk[k] + risk[k - 1]) - d2) < 1e-12);
    CHECK(std::abs(risk[k + 1] - risk[k]) < 0.05);
  }
  // piecewise monotone: at most one change of slope sign
  int sign_changes = 0;
  for (std::size_t k = 2; k < risk.size(); ++k)
    if ((risk[k] - risk[k - 1]) * (risk[k - 1] - risk[k - 2]) < 0) ++sign_changes;
  CHECK(sign_changes <= 1);
}

TEST_CASE("measures are permutation-equivariant over examples") {
  Rng rng(31);
  auto p = testing_util::random_predictions(rng, 40, 5);
  ConfusionMatrix c = testing_util::random_confusion(rng, 5);
  std::vector<std::size_t> perm(40);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t k = 40; k > 1; --k) std::swap(perm[k - 1], perm[rng.index(k)]);
  auto q = p.select(perm);
  auto check = [&](const UncertaintyVector& a, const UncertaintyVector& b) {
    for (std::size_t k = 0; k < 40; ++k) CHECK(b[k] == a[perm[k]]);
  };
  check(entropy(p), entropy(q));
  check(max_prob_reject(p), max_prob_reject(q));
  check(qwk_risk(p, c), qwk_risk(q, c));
  CHECK(qwk_risk(p, c).values() == qwk_risk(p, c).values());
}

TEST_CASE("class relabeling: entropy and max-prob invariant, qwk_risk is not") {
  Rng rng(41);
  auto p = testing_util::random_predictions(rng, 30, 5);
  ConfusionMatrix c(5, {30, 6, 1, 0, 0, 5, 12, 4, 1, 0, 1, 3, 15, 3, 1, 0, 0, 2, 6, 2, 0, 0, 0, 1, 4});
  const std::vector<std::size_t> relabel{2, 0, 4, 1, 3};
  Matrix probs(30, 5);
  std::vector<int> labels(30);
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t k = 0; k < 5; ++k) probs(i, relabel[k]) = p.row(i)[k];
    labels[i] = static_cast<int>(relabel[static_cast<std::size_t>(p.labels()[i])]);
  }
  PredictionSet q(probs, labels);
  std::vector<std::int64_t> counts(25);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) counts[relabel[i] * 5 + relabel[j]] = c(i, j);
  ConfusionMatrix cq(5, counts);
  double max_diff = 0.0;
  auto hp = entropy(p), hq = entropy(q), mp = max_prob_reject(p), mq = max_prob_reject(q);
  auto rp = qwk_risk(p, c), rq = qwk_risk(q, cq);
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(std::abs(hp[i] - hq[i]) < 1e-12);
    CHECK(mp[i] == mq[i]);
    max_diff = std::max(max_diff, std::abs(rp[i] - rq[i]));
  }
  CHECK(max_diff > 1e-3);
}

TEST_CASE("dataset_expected_risk and dispatch") {
  CHECK(dataset_expected_risk(UncertaintyVector({0.0, 0.0})) == 0.0);
  CHECK(dataset_expected_risk(UncertaintyVector({1.0, 3.0})) == 2.0);
  Rng rng(2);
  std::vector<double> v(37);
  for (auto& x : v) x = rng.uniform();
  double s = 0.0;
  for (double x : v) s += x;
  CHECK(std::abs(dataset_expected_risk(UncertaintyVector(v)) - s / 37.0) < 1e-15);
  CHECK_ERRC(dataset_expected_risk(UncertaintyVector()), Errc::EmptyInput);
  CHECK_ERRC(UncertaintyVector({1.0, std::nan("")}), Errc::NonFinite);

  auto p = testing_util::random_predictions(rng, 10, 3);
  UncertaintySpec spec;
  spec.kind = MeasureKind::QwkRisk;
  CHECK_ERRC(compute_uncertainty(p, spec), Errc::InvalidConfig);
  spec.validation_confusion = ConfusionMatrix(3, {3, 1, 0, 1, 3, 1, 0, 1, 3});
  CHECK(compute_uncertainty(p, spec).values() == qwk_risk(p, *spec.validation_confusion).values());
  spec.kind = MeasureKind::GenericRisk;
  CHECK_ERRC(compute_uncertainty(p, spec), Errc::InvalidConfig);
  spec.nll_loss = true;
  CHECK(compute_uncertainty(p, spec).values().size() == 10);
}
