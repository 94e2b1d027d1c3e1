#pragma once

// Piecewise risk profile F(p) over PD. Mass n[0] is spread uniformly on
// [0, P[0]); mass n[k] is spread uniformly in ln p on [P[k-1], P[k]).
// Integrals and first moments are closed-form per segment.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rscale/error.hpp"
#include "rscale/smoothing.hpp"

namespace rscale {

class RiskProfile {
 public:
  /// Masses are normalized to sum to one.
  RiskProfile(std::vector<double> knots, std::vector<double> masses)
      : knots_(std::move(knots)), masses_(std::move(masses)) {
    detail::require(!knots_.empty() && knots_.size() == masses_.size(), "risk_profile.invalid",
                    "knots and masses must be nonempty and of equal length");
    detail::require(knots_.front() > 0.0 && knots_.back() <= 1.0, "risk_profile.invalid",
                    "knots must lie in (0, 1]");
    for (std::size_t i = 0; i + 1 < knots_.size(); ++i)
      detail::require(knots_[i] < knots_[i + 1], "risk_profile.invalid",
                      "knots must be strictly increasing");
    for (double m : masses_)
      detail::require(m > 0.0 && std::isfinite(m), "risk_profile.invalid",
                      "masses must be positive");
    const double total = std::accumulate(masses_.begin(), masses_.end(), 0.0);
    for (double& m : masses_) m /= total;
    cum_.assign(masses_.size() + 1, 0.0);
    for (std::size_t i = 0; i < masses_.size(); ++i) cum_[i + 1] = cum_[i] + masses_[i];
    cum_.back() = 1.0;
  }

  std::span<const double> knots() const { return knots_; }
  std::span<const double> masses() const { return masses_; }
  std::size_t size() const { return knots_.size(); }

  double cdf(double p) const {
    if (p <= 0.0) return 0.0;
    if (p >= knots_.back()) return 1.0;
    const std::size_t k = segment(p);
    if (k == 0) return masses_[0] * p / knots_[0];
    const double lo = knots_[k - 1];
    const double hi = knots_[k];
    const double v = cum_[k] + masses_[k] * std::log(p / lo) / std::log(hi / lo);
    return std::clamp(v, 0.0, 1.0);
  }

  /// Integral of F over [a, b].
  double cdf_integral(double a, double b) const {
    return accumulate_segments(a, b, [this](std::size_t k, double u, double v) {
      if (k == 0) return 0.5 * masses_[0] / knots_[0] * (v * v - u * u);
      if (k == knots_.size()) return v - u;
      const double lo = knots_[k - 1];
      const double slope = masses_[k] / std::log(knots_[k] / lo);
      // F = cum + slope * ln(x / lo)
      auto prim = [&](double x) { return cum_[k] * x + slope * (x * std::log(x / lo) - x); };
      return prim(v) - prim(u);
    });
  }

  /// Integral of x dF(x) over [a, b].
  double partial_moment(double a, double b) const {
    return accumulate_segments(a, b, [this](std::size_t k, double u, double v) {
      if (k == 0) return 0.5 * masses_[0] / knots_[0] * (v * v - u * u);
      if (k == knots_.size()) return 0.0;
      return masses_[k] / std::log(knots_[k] / knots_[k - 1]) * (v - u);
    });
  }

  double mass(double a, double b) const { return cdf(b) - cdf(a); }

  /// E[p | a <= p <= b].
  double conditional_mean(double a, double b) const {
    const double m = mass(a, b);
    detail::require(m > 0.0, "risk_profile.zero_mass",
                    "no mass in [" + std::to_string(a) + ", " + std::to_string(b) + "]");
    return std::clamp(partial_moment(a, b) / m, a, b);
  }

  double mean() const { return partial_moment(0.0, 1.0); }

  /// Mean PD over [p, lambda p].
  double band_mean(double p, double lambda) const {
    detail::require(p > 0.0 && lambda > 1.0 && lambda * p <= 1.0 + 1e-15, "risk_profile.domain",
                    "band_mean: need p > 0, lambda > 1, lambda p <= 1");
    return conditional_mean(p, std::min(1.0, lambda * p));
  }

  /// Mean PD over [0, p].
  double first_band_mean(double p) const {
    detail::require(p > 0.0 && p <= 1.0, "risk_profile.domain",
                    "first_band_mean: need 0 < p <= 1");
    return conditional_mean(0.0, p);
  }

  /// Mean PD over [p / lambda, p].
  double band_mean_desc(double p, double lambda) const {
    detail::require(p > 0.0 && p <= 1.0 && lambda > 1.0, "risk_profile.domain",
                    "band_mean_desc: need 0 < p <= 1, lambda > 1");
    return conditional_mean(p / lambda, p);
  }

  /// Mean PD over [p, 1].
  double last_band_mean_desc(double p) const {
    detail::require(p >= 0.0 && p < 1.0, "risk_profile.domain",
                    "last_band_mean_desc: need 0 <= p < 1");
    return conditional_mean(p, 1.0);
  }

 private:
  // Index k of the segment holding p: 0 for [0, P0), k for [P(k-1), P(k)),
  // size() for [P(G-1), 1].
  std::size_t segment(double p) const {
    return static_cast<std::size_t>(std::upper_bound(knots_.begin(), knots_.end(), p) -
                                    knots_.begin());
  }

  template <class SegmentFn>
  double accumulate_segments(double a, double b, SegmentFn fn) const {
    detail::require(a >= 0.0 && a <= b && b <= 1.0, "risk_profile.domain",
                    "need 0 <= a <= b <= 1");
    double total = 0.0;
    double u = a;
    while (u < b) {
      const std::size_t k = segment(u);
      const double seg_end = k < knots_.size() ? knots_[k] : 1.0;
      const double v = std::min(b, seg_end);
      total += fn(k, u, v);
      if (v <= u) break;
      u = v;
    }
    return total;
  }

  std::vector<double> knots_;
  std::vector<double> masses_;
  std::vector<double> cum_;
};

/// Knots at the smoothed upper boundaries (the last one is 1), masses from
/// the observation counts.
inline RiskProfile profile_from_scale(const SmoothedScale& scale, const GradeObservations& obs) {
  detail::require(scale.size() == obs.size() && scale.p_hi.size() == scale.size(),
                  "risk_profile.invalid", "scale and observations are not aligned");
  for (std::size_t i = 0; i + 1 < scale.size(); ++i)
    detail::require(scale.p_hi[i] < scale.p_hi[i + 1], "risk_profile.invalid",
                    "boundaries are not strictly increasing; smooth the scale first");
  std::vector<double> masses;
  masses.reserve(obs.size());
  for (const auto& g : obs.grades) masses.push_back(static_cast<double>(g.n));
  return RiskProfile(scale.p_hi, std::move(masses));
}

}  // namespace rscale
