#pragma once

// Independent reference computations used only by the test suites. They are
// written as direct transcriptions of the defining formulas and share no code
// path with the library routines they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace oracle {

using Rational = boost::multiprecision::cpp_rational;

/// Literal quadratic weighted kappa in exact rational arithmetic, counts
/// row-major with row = predicted. Unit scale.
inline double kappa_exact(const std::vector<std::int64_t>& counts, std::size_t m) {
  Rational n = 0;
  for (auto c : counts) n += c;
  Rational num = 0, den = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      Rational row = 0, col = 0;
      for (std::size_t a = 0; a < m; ++a) row += counts[i * m + a];
      for (std::size_t b = 0; b < m; ++b) col += counts[b * m + j];
      const Rational e = row * col / n;
      const auto d = static_cast<std::int64_t>(i) - static_cast<std::int64_t>(j);
      num += Rational(d * d) * counts[i * m + j];
      den += Rational(d * d) * e;
    }
  if (den == 0) return 1.0;
  return static_cast<double>(Rational(1) - num / den);
}

/// QWK-Risk by rebuilding C + S_{j,i} for every cell and re-evaluating kappa.
inline double qwk_risk_bruteforce(std::span<const double> p, const std::vector<std::int64_t>& counts, std::size_t m) {
  double r = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      auto c = counts;
      c[j * m + i] += 1;
      r -= p[i] * p[j] * kappa_exact(c, m);
    }
  return r;
}

/// AUC by counting ordered positive/negative pairs, ties worth one half. 0-100.
inline double auc_pairs(std::span<const double> s, std::span<const int> y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = 0; b < s.size(); ++b)
      if (y[a] == 1 && y[b] == 0) {
        pairs += 1.0;
        if (s[a] > s[b]) wins += 1.0;
        else if (s[a] == s[b]) wins += 0.5;
      }
  return 100.0 * wins / pairs;
}

/// Composite Simpson rule with `intervals` (even) subintervals.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, std::size_t intervals = 20000) {
  const double h = (hi - lo) / static_cast<double>(intervals);
  double acc = f(lo) + f(hi);
  for (std::size_t k = 1; k < intervals; ++k) acc += (k % 2 ? 4.0 : 2.0) * f(lo + h * static_cast<double>(k));
  return acc * h / 3.0;
}

inline double log_normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

/// KL[N(mq, sq^2) || N(mp, sp^2)] by quadrature of q log(q/p).
inline double kl_quadrature(double mq, double sq, double mp, double sp) {
  const double lo = std::min(mq - 14 * sq, mp - 14 * sp), hi = std::max(mq + 14 * sq, mp + 14 * sp);
  return simpson(
      [&](double x) {
        const double lq = log_normal_pdf(x, mq, sq), lp = log_normal_pdf(x, mp, sp);
        return std::exp(lq) * (lq - lp);
      },
      lo, hi, 40000);
}

/// 1/(alpha(alpha-1)) log int q^alpha p^(1-alpha) by quadrature.
inline double renyi_quadrature(double mq, double sq, double mp, double sp, double alpha) {
  const double lo = std::min(mq - 14 * sq, mp - 14 * sp), hi = std::max(mq + 14 * sq, mp + 14 * sp);
  const double integral = simpson(
      [&](double x) { return std::exp(alpha * log_normal_pdf(x, mq, sq) + (1 - alpha) * log_normal_pdf(x, mp, sp)); },
      lo, hi, 40000);
  return std::log(integral) / (alpha * (alpha - 1.0));
}

/// Retained original indices after removing floor(level*n) examples with the
/// largest uncertainty, sorting (u, index) pairs lexicographically.
inline std::vector<std::size_t> retained(std::span<const double> u, double level) {
  std::vector<std::pair<double, std::size_t>> keyed;
  for (std::size_t i = 0; i < u.size(); ++i) keyed.emplace_back(u[i], i);
  std::sort(keyed.begin(), keyed.end());
  const auto drop = static_cast<std::size_t>(std::floor(level * static_cast<double>(u.size()) + 1e-9));
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k + drop < keyed.size(); ++k) keep.push_back(keyed[k].second);
  std::sort(keep.begin(), keep.end());
  return keep;
}

/// SplitMix64 written out from its published definition.
struct SplitMix {
  std::uint64_t x;
  std::uint64_t operator()() {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

}  // namespace oracle
