#pragma once

// Closed-form behaviour of the one-sided Wald test when the calibrated PD is
// understated by a relative shift eps: data follow p, the test uses p(1 - eps).

#include <algorithm>
#include <cmath>

#include "rscale/error.hpp"
#include "rscale/stats_core.hpp"

namespace rscale {

namespace detail {

inline void check_theory_args(double n, double p, double alpha, double epsilon) {
  require(n > 0.0, "analytics.domain", "n must be positive");
  require(p > 0.0 && p < 1.0, "analytics.domain", "p must lie in (0, 1)");
  require(alpha > 0.0 && alpha < 0.5, "analytics.domain", "alpha must lie in (0, 0.5)");
  require(epsilon >= 0.0 && epsilon < 1.0, "analytics.domain", "epsilon must lie in [0, 1)");
}

}  // namespace detail

/// sqrt(np/(1-p)) + z_alpha (1 - 1/(2(1-p))).
inline double omega(double n, double p, double alpha) {
  detail::check_theory_args(n, p, alpha, 0.0);
  const double z = std_normal_quantile(1.0 - alpha);
  return std::sqrt(n * p / (1.0 - p)) + z * (1.0 - 1.0 / (2.0 * (1.0 - p)));
}

/// alpha + eps * omega * phi(z_alpha), clamped to [0, 1].
inline double failure_prob_first_order(double n, double p, double alpha, double epsilon) {
  detail::check_theory_args(n, p, alpha, epsilon);
  if (epsilon == 0.0) return alpha;
  const double z = std_normal_quantile(1.0 - alpha);
  return std::clamp(alpha + epsilon * omega(n, p, alpha) * std_normal_pdf(z), 0.0, 1.0);
}

/// Critical count of the asymptotic test at p(1 - eps):
/// np(1 - eps) + z_alpha sqrt(np(1 - eps)(1 - p + p eps)).
inline double shifted_critical_count(double n, double p, double alpha, double epsilon) {
  detail::check_theory_args(n, p, alpha, epsilon);
  const double z = std_normal_quantile(1.0 - alpha);
  const double q = p * (1.0 - epsilon);
  return n * q + z * std::sqrt(n * q * (1.0 - q));
}

/// P(X > k*_eps) for X ~ Binomial(n, p), the exact counterpart of
/// failure_prob_first_order.
inline double failure_prob_exact(Count n, double p, double alpha, double epsilon) {
  const double k = shifted_critical_count(static_cast<double>(n), p, alpha, epsilon);
  return binom_upper_tail(n, p, static_cast<Count>(std::floor(k)) + 1);
}

/// Largest p for which merging grades still leaves a calibration discount:
/// 1 - z_alpha / (2 (z_alpha + z_{alpha/2} / eps_R)).
inline double max_p_bound(double alpha, double eps_r) {
  detail::require(alpha > 0.0 && alpha < 0.5, "analytics.domain", "alpha must lie in (0, 0.5)");
  detail::require(eps_r > 0.0, "analytics.domain", "eps_R must be positive");
  const double z = std_normal_quantile(1.0 - alpha);
  const double z2 = two_sided_z(alpha);
  if (std::isinf(eps_r)) return 0.5;
  return 1.0 - z / (2.0 * (z + z2 / eps_r));
}

/// Admissible calibration discount for small p at n = m_alpha:
/// alpha / ((z_{alpha/2}/eps_R + z_alpha/2) phi(z_alpha)).
/// The alpha^2 term of the two-sample failure probability is dropped.
inline double epsilon_estimate(double alpha, double eps_r) {
  detail::require(alpha > 0.0 && alpha < 0.5, "analytics.domain", "alpha must lie in (0, 0.5)");
  detail::require(eps_r > 0.0, "analytics.domain", "eps_R must be positive");
  const double z = std_normal_quantile(1.0 - alpha);
  const double z2 = two_sided_z(alpha);
  return alpha / ((z2 / eps_r + 0.5 * z) * std_normal_pdf(z));
}

/// Probability that at least one of two independent level-alpha tests fails.
inline double two_sample_union_failure(double alpha) {
  detail::require(alpha >= 0.0 && alpha <= 1.0, "analytics.domain",
                  "alpha must lie in [0, 1]");
  return 2.0 * alpha - alpha * alpha;
}

/// eps_R of a geometric scale with g grades spanning [floor, 1]:
/// (1/floor)^(1/(2g)) - 1.
inline double geometric_scale_tolerance(int grades, double pd_floor) {
  detail::require(grades >= 1, "analytics.domain", "grades must be >= 1");
  detail::require(pd_floor > 0.0 && pd_floor < 1.0, "analytics.domain",
                  "floor must lie in (0, 1)");
  return std::pow(1.0 / pd_floor, 1.0 / (2.0 * grades)) - 1.0;
}

}  // namespace rscale
