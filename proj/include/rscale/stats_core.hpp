#pragma once

// Statistical kernels: standard normal, binomial upper tail, the Wald
// binomial test in asymptotic and exact form, and the minimum number of
// observations needed to tell a PD band apart from its neighbours.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "rscale/error.hpp"

namespace rscale {

enum class WaldMode { asymptotic, exact };

struct WaldTestResult {
  double threshold_dr = 0.0;
  double observed_dr = 0.0;
  bool passed = false;
  WaldMode mode = WaldMode::exact;
};

enum class Zone { green, yellow, red };

/// Grey: fewer than m(5%) observations. Partial: m(5%) <= n < m(1%).
/// Full: n >= m(1%).
enum class Distinguishability { grey, partial, full };

inline std::string_view to_string(WaldMode mode) {
  return mode == WaldMode::exact ? "exact" : "asymptotic";
}

inline std::string_view to_string(Zone zone) {
  switch (zone) {
    case Zone::green: return "green";
    case Zone::yellow: return "yellow";
    case Zone::red: return "red";
  }
  return "?";
}

inline std::string_view to_string(Distinguishability cls) {
  switch (cls) {
    case Distinguishability::grey: return "grey";
    case Distinguishability::partial: return "partial";
    case Distinguishability::full: return "full";
  }
  return "?";
}

inline double std_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double std_normal_quantile(double p) {
  detail::require(p > 0.0 && p < 1.0, "stats_core.domain",
                  "std_normal_quantile: p must lie in (0, 1), got " + std::to_string(p));
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

/// P(X >= k) for X ~ Binomial(n, p), via the regularized incomplete beta
/// identity P(X >= k) = I_p(k, n - k + 1).
inline double binom_upper_tail(Count n, double p, Count k) {
  detail::require(n >= 0, "stats_core.domain", "binom_upper_tail: n must be >= 0");
  detail::require(p >= 0.0 && p <= 1.0, "stats_core.domain",
                  "binom_upper_tail: p must lie in [0, 1]");
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  return boost::math::ibeta(static_cast<double>(k), static_cast<double>(n - k + 1), p);
}

namespace detail {

inline void check_test_args(double pd, Count n, double alpha, const char* who) {
  require(pd > 0.0 && pd < 1.0, "stats_core.domain",
          std::string(who) + ": pd must lie in (0, 1)");
  require(n >= 1, "stats_core.domain", std::string(who) + ": n must be >= 1");
  require(alpha > 0.0 && alpha <= 0.5, "stats_core.domain",
          std::string(who) + ": alpha must lie in (0, 0.5]");
}

}  // namespace detail

/// Upper one-sided bound pd + z_{1-alpha} sqrt(pd (1 - pd) / n).
inline double wald_threshold_asymptotic(double pd, Count n, double alpha) {
  detail::check_test_args(pd, n, alpha, "wald_threshold_asymptotic");
  const double z = std_normal_quantile(1.0 - alpha);
  return pd + z * std::sqrt(pd * (1.0 - pd) / static_cast<double>(n));
}

/// Smallest k with P(X >= k) <= alpha, X ~ Binomial(n, pd). Always in [1, n + 1].
///
/// The search starts from the normal approximation and walks, so neighbouring
/// calls cost one or two tail evaluations.
inline Count exact_critical_count(Count n, double pd, double alpha) {
  detail::check_test_args(pd, n, alpha, "exact_critical_count");
  const double mean = static_cast<double>(n) * pd;
  const double sd = std::sqrt(mean * (1.0 - pd));
  const double z = std_normal_quantile(1.0 - alpha);
  Count k = static_cast<Count>(std::ceil(mean + z * sd));
  k = std::clamp<Count>(k, 1, n + 1);
  if (binom_upper_tail(n, pd, k) <= alpha) {
    while (k > 1 && binom_upper_tail(n, pd, k - 1) <= alpha) --k;
  } else {
    while (k <= n && binom_upper_tail(n, pd, k) > alpha) ++k;
  }
  return k;
}

/// k*/n where k* is the exact critical count. The tail is compared with
/// alpha (not 1 - alpha) so the exact and asymptotic forms test the same
/// one-sided hypothesis.
inline double wald_threshold_exact(double pd, Count n, double alpha) {
  return static_cast<double>(exact_critical_count(n, pd, alpha)) / static_cast<double>(n);
}

inline WaldTestResult wald_test(double pd, Count n, Count defaults, double alpha,
                                WaldMode mode = WaldMode::exact) {
  detail::require(defaults >= 0 && defaults <= n, "stats_core.domain",
                  "wald_test: defaults must lie in [0, n]");
  WaldTestResult r;
  r.mode = mode;
  r.threshold_dr = mode == WaldMode::exact ? wald_threshold_exact(pd, n, alpha)
                                           : wald_threshold_asymptotic(pd, n, alpha);
  r.observed_dr = static_cast<double>(defaults) / static_cast<double>(n);
  r.passed = r.threshold_dr > r.observed_dr;
  return r;
}

inline Zone wald_zone(double pd, Count n, Count defaults) {
  if (!wald_test(pd, n, defaults, 0.01).passed) return Zone::red;
  if (wald_test(pd, n, defaults, 0.05).passed) return Zone::green;
  return Zone::yellow;
}

/// min(p*/p_lo, p_hi/p*) - 1, with p*/p_lo treated as +inf when p_lo = 0.
inline double relative_tolerance(double p_star, double p_lo, double p_hi) {
  const double lower = p_lo > 0.0 ? p_star / p_lo : std::numeric_limits<double>::infinity();
  return std::min(lower, p_hi / p_star) - 1.0;
}

/// Two-sided normal quantile z_{alpha/2} = Phi^-1(1 - alpha/2).
inline double two_sided_z(double alpha) { return std_normal_quantile(1.0 - alpha / 2.0); }

/// z^2 (1 - p*) / (eps_R^2 p*) before rounding up.
inline double min_observations_continuous(double p_star, double p_lo, double p_hi,
                                          double alpha) {
  detail::require(p_star > 0.0 && p_star < 1.0, "stats_core.domain",
                  "min_observations: p_star must lie in (0, 1)");
  detail::require(p_lo >= 0.0 && p_lo < p_star && p_star < p_hi && p_hi <= 1.0,
                  "stats_core.domain",
                  "min_observations: need 0 <= p_lo < p_star < p_hi <= 1");
  detail::require(alpha > 0.0 && alpha < 1.0, "stats_core.domain",
                  "min_observations: alpha must lie in (0, 1)");
  const double eps_r = relative_tolerance(p_star, p_lo, p_hi);
  detail::require(eps_r > 0.0, "stats_core.domain", "min_observations: degenerate band");
  const double z = two_sided_z(alpha);
  return z * z * (1.0 - p_star) / (eps_r * eps_r * p_star);
}

inline Count min_observations(double p_star, double p_lo, double p_hi, double alpha) {
  return static_cast<Count>(std::ceil(min_observations_continuous(p_star, p_lo, p_hi, alpha)));
}

/// Non-throwing variant; empty for degenerate bands (zero width, ties).
inline std::optional<Count> try_min_observations(double p_star, double p_lo, double p_hi,
                                                 double alpha) noexcept {
  if (!(p_star > 0.0 && p_star < 1.0 && p_lo >= 0.0 && p_lo < p_star && p_star < p_hi &&
        p_hi <= 1.0))
    return std::nullopt;
  if (relative_tolerance(p_star, p_lo, p_hi) <= 0.0) return std::nullopt;
  return min_observations(p_star, p_lo, p_hi, alpha);
}

inline Distinguishability distinguishability_class(Count n, double p_star, double p_lo,
                                                   double p_hi) {
  const Count m5 = min_observations(p_star, p_lo, p_hi, 0.05);
  const Count m1 = min_observations(p_star, p_lo, p_hi, 0.01);
  if (n < m5) return Distinguishability::grey;
  if (n < m1) return Distinguishability::partial;
  return Distinguishability::full;
}

}  // namespace rscale
