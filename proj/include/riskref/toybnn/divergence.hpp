#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "riskref/error.hpp"
#include "riskref/toybnn/autodiff.hpp"

namespace riskref::toybnn {

/// KL[q || p] between diagonal Gaussians q = N(mu, sigma^2), p = N(m, s^2):
///   sum_j log(s_j / sigma_j) + ((mu_j - m_j)^2 + sigma_j^2 - s_j^2) / (2 s_j^2)
inline double kl_diag_gaussian(std::span<const double> mu, std::span<const double> sigma,
                               std::span<const double> m, std::span<const double> s) {
  if (sigma.size() != mu.size() || m.size() != mu.size() || s.size() != mu.size())
    throw Error(Errc::ShapeMismatch, "KL operands differ in length");
  double kl = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    if (!(sigma[j] > 0.0) || !(s[j] > 0.0)) throw Error(Errc::NonPositiveScale, "scale " + std::to_string(j));
    const double d = mu[j] - m[j];
    kl += (std::log(s[j]) - std::log(sigma[j])) + (d * d + sigma[j] * sigma[j] - s[j] * s[j]) / (2.0 * s[j] * s[j]);
  }
  return kl;
}

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::InvalidAlpha, "alpha must lie in (0, 1)");
}

/// Renyi alpha-divergence in the alpha-family normalization
///   D(q || p) = 1 / (alpha (alpha - 1)) * log int q^alpha p^(1 - alpha),
/// non-negative for alpha in (0, 1) and zero iff q == p. For diagonal
/// Gaussians it factorizes over coordinates; with v = alpha s_p^2 + (1 - alpha) s_q^2
///   D_j = (mu_q - mu_p)^2 / (2 v)
///       + (log v - 2 (1 - alpha) log s_q - 2 alpha log s_p) / (2 alpha (1 - alpha)).
/// Derivation in docs/divergences.md.
inline double renyi_divergence_diag(std::span<const double> mu_q, std::span<const double> sigma_q,
                                    std::span<const double> mu_p, std::span<const double> sigma_p,
                                    double alpha) {
  check_alpha(alpha);
  if (sigma_q.size() != mu_q.size() || mu_p.size() != mu_q.size() || sigma_p.size() != mu_q.size())
    throw Error(Errc::ShapeMismatch, "divergence operands differ in length");
  double d = 0.0;
  for (std::size_t j = 0; j < mu_q.size(); ++j) {
    if (!(sigma_q[j] > 0.0) || !(sigma_p[j] > 0.0))
      throw Error(Errc::NonPositiveScale, "scale " + std::to_string(j));
    const double v = alpha * sigma_p[j] * sigma_p[j] + (1.0 - alpha) * sigma_q[j] * sigma_q[j];
    const double dm = mu_q[j] - mu_p[j];
    d += dm * dm / (2.0 * v) +
         (std::log(v) - 2.0 * (1.0 - alpha) * std::log(sigma_q[j]) - 2.0 * alpha * std::log(sigma_p[j])) /
             (2.0 * alpha * (1.0 - alpha));
  }
  return d;
}

/// KL[N(mu, sigma^2) || N(0, 1)] on the tape, summed over entries.
inline Var kl_to_standard_normal(Var mu, Var sigma) {
  Var quad = scale(add_scalar(add(square(mu), square(sigma)), -1.0), 0.5);
  return sum(sub(quad, log(sigma)));
}

/// Renyi divergence of N(mu, sigma^2) from N(0, 1) on the tape, summed over entries.
inline Var renyi_to_standard_normal(Var mu, Var sigma, double alpha) {
  check_alpha(alpha);
  Var v = add_scalar(scale(square(sigma), 1.0 - alpha), alpha);
  Var mean_term = div(scale(square(mu), 0.5), v);
  Var log_term = scale(sub(log(v), scale(log(sigma), 2.0 * (1.0 - alpha))), 1.0 / (2.0 * alpha * (1.0 - alpha)));
  return sum(add(mean_term, log_term));
}

}  // namespace riskref::toybnn
