#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "riskref/error.hpp"
#include "riskref/matrix.hpp"
#include "riskref/rng.hpp"

namespace riskref::toybnn {

/// Feature rows with integer labels and opaque ids.
struct Dataset {
  Matrix x;
  std::vector<int> y;
  std::vector<std::string> ids;

  std::size_t size() const noexcept { return y.size(); }

  Dataset subset(const std::vector<std::size_t>& idx) const {
    Dataset out{Matrix(idx.size(), x.cols()), {}, {}};
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto src = x.row(idx[k]);
      std::copy(src.begin(), src.end(), out.x.row(k).begin());
      out.y.push_back(y[idx[k]]);
      out.ids.push_back(ids[idx[k]]);
    }
    return out;
  }
};

enum class SyntheticKind { Blobs, Ordinal };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::Ordinal;
  std::size_t n = 1000;
  std::size_t classes = 5;
  /// Blobs: 0 gives disjoint class disks, 1 puts every center at the origin.
  double overlap = 0.0;
  /// Ordinal: standard deviation of the feature noise around the latent severity.
  double noise = 0.35;
  double train_fraction = 0.7;
  double val_fraction = 0.1;
  double test_fraction = 0.2;

  void validate() const {
    if (n < 3) throw Error(Errc::InvalidSpec, "need at least 3 examples");
    if (classes < 2) throw Error(Errc::InvalidSpec, "need at least 2 classes");
    if (!(overlap >= 0.0 && overlap <= 1.0)) throw Error(Errc::InvalidSpec, "overlap must lie in [0, 1]");
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw Error(Errc::InvalidSpec, "noise must be non-negative");
    for (double f : {train_fraction, val_fraction, test_fraction})
      if (!(f >= 0.0 && f <= 1.0)) throw Error(Errc::InvalidSpec, "split fractions must lie in [0, 1]");
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
      throw Error(Errc::InvalidSpec, "split fractions must sum to 1");
  }
};

inline std::string make_id(std::size_t i, std::size_t n) {
  std::string digits = std::to_string(i);
  const std::size_t width = std::to_string(n > 0 ? n - 1 : 0).size();
  return "ex" + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

/// Two-feature synthetic classification data.
///
/// Blobs: class k is uniform on a unit disk centred on a circle, adjacent
/// centres 2.5 * (1 - overlap) apart, so overlap 0 is linearly separable for
/// two classes. Ordinal: a latent severity z ~ U(0, M) sets the label floor(z),
/// and both features are (z - M/2) plus independent N(0, noise^2) noise, so
/// confusions concentrate between neighbouring grades near class boundaries.
inline Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  Dataset d{Matrix(spec.n, 2), std::vector<int>(spec.n), {}};
  const double m = static_cast<double>(spec.classes);
  const double spacing = 2.5 * (1.0 - spec.overlap);
  const double radius = spacing / (2.0 * std::sin(std::numbers::pi / m));
  for (std::size_t i = 0; i < spec.n; ++i) {
    if (spec.kind == SyntheticKind::Blobs) {
      const std::size_t k = rng.index(spec.classes);
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / m;
      const double r = std::sqrt(rng.uniform());
      const double phi = 2.0 * std::numbers::pi * rng.uniform();
      d.x(i, 0) = radius * std::cos(angle) + r * std::cos(phi);
      d.x(i, 1) = radius * std::sin(angle) + r * std::sin(phi);
      d.y[i] = static_cast<int>(k);
    } else {
      const double z = m * rng.uniform();
      d.y[i] = std::min(static_cast<int>(std::floor(z)), static_cast<int>(spec.classes) - 1);
      d.x(i, 0) = z - m / 2.0 + spec.noise * rng.normal();
      d.x(i, 1) = z - m / 2.0 + spec.noise * rng.normal();
    }
    d.ids.push_back(make_id(i, spec.n));
  }
  return d;
}

struct Splits {
  Dataset train, validation, test;
};

/// Shuffles, then cuts floor(f * n) training and validation examples; the
/// remainder is the test split.
inline Splits split_dataset(const Dataset& d, double train_fraction, double val_fraction, std::uint64_t seed) {
  const std::size_t n = d.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t k = 0; k < n; ++k) idx[k] = k;
  Rng rng(seed);
  for (std::size_t k = n; k > 1; --k) std::swap(idx[k - 1], idx[rng.index(k)]);
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(n) + 1e-9));
  if (n_train + n_val > n) throw Error(Errc::InvalidSpec, "split fractions exceed the dataset");
  auto take = [&](std::size_t from, std::size_t count) {
    std::vector<std::size_t> part(idx.begin() + static_cast<std::ptrdiff_t>(from),
                                  idx.begin() + static_cast<std::ptrdiff_t>(from + count));
    std::sort(part.begin(), part.end());
    return d.subset(part);
  };
  return {take(0, n_train), take(n_train, n_val), take(n_train + n_val, n - n_train - n_val)};
}

}  // namespace riskref::toybnn
