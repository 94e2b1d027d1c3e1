#pragma once

// Design of a statistically distinguishable rating scale.
//
// Every band [lo, hi] must carry enough of the N potential observations for
// its mean PD to be told apart from both neighbours at level alpha:
//
//   N * mass(lo, hi) >= z_{alpha/2}^2 (1 - p*) / (eps_R^2 p*),
//   eps_R = min(p*/lo, hi/p*) - 1.
//
// The ascending cascade builds bands from PD = 0 upwards, each one as narrow
// as the requirement allows; the descending cascade builds them from PD = 1
// downwards. Each step solves the requirement with equality (ceil dropped)
// by a geometric scan for a sign change followed by bisection.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rscale/error.hpp"
#include "rscale/risk_profile.hpp"
#include "rscale/stats_core.hpp"

namespace rscale {

enum class Direction { ascending, descending };

inline std::string_view to_string(Direction d) {
  return d == Direction::ascending ? "ascending" : "descending";
}

struct Band {
  double p_lo = 0.0;
  double p_hi = 0.0;
  double p_star = 0.0;
  double mass = 0.0;
  Count m_required = 0;
};

struct HhiMetrics {
  double hhi = 1.0;
  double hhi_adj = 1.0;
};

struct ScaleDesign {
  Direction direction = Direction::ascending;
  double alpha = 0.05;
  Count n_obs = 0;
  std::vector<Band> bands;  // ordered by PD, best grade first
  double hhi = 1.0;
  double hhi_adj = 1.0;
  // Set when N cannot support even one distinguishable band.
  bool underpowered = false;
  // Index of the band exempt from the distinguishability requirement (the
  // merged/left-over terminal band), if any.
  std::optional<std::size_t> terminal_band;

  std::size_t grades() const { return bands.size(); }
};

inline HhiMetrics hhi_metrics(std::span<const Band> bands) {
  HhiMetrics h;
  h.hhi = 0.0;
  for (const auto& b : bands) h.hhi += b.mass * b.mass;
  const double g = static_cast<double>(bands.size());
  h.hhi_adj = bands.size() <= 1 ? 1.0 : (h.hhi - 1.0 / g) / (1.0 - 1.0 / g);
  return h;
}

inline HhiMetrics hhi_metrics(const ScaleDesign& design) { return hhi_metrics(design.bands); }

/// Observation count at which [lo, hi] becomes distinguishable, before
/// rounding: z^2 (1 - p*) / (eps_R^2 p* mass). +inf for empty or degenerate
/// bands.
inline double required_total_observations(const RiskProfile& profile, double lo, double hi,
                                           double alpha) {
  const double mass = profile.mass(lo, hi);
  if (!(mass > 0.0) || !(hi > lo)) return std::numeric_limits<double>::infinity();
  const double p_star = profile.partial_moment(lo, hi) / mass;
  if (!(p_star > lo && p_star < hi && p_star < 1.0)) return std::numeric_limits<double>::infinity();
  const double eps_r = relative_tolerance(p_star, lo, hi);
  if (!(eps_r > 0.0)) return std::numeric_limits<double>::infinity();
  const double z = two_sided_z(alpha);
  return z * z * (1.0 - p_star) / (eps_r * eps_r * p_star * mass);
}

namespace detail {

inline constexpr int kScanPointsPerDecade = 64;
inline constexpr double kBoundaryTolerance = 1e-12;

// Smallest t in (t_min, t_max] with f(t) <= target, searched on a geometric
// grid and refined by bisection. f is expected to start above the target.
inline std::optional<double> first_crossing(const std::function<double(double)>& f, double t_min,
                                            double t_max, double target) {
  if (!(t_max > t_min) || t_min <= 0.0) return std::nullopt;
  const double decades = std::log10(t_max / t_min);
  const int steps = std::max(8, static_cast<int>(std::ceil(decades * kScanPointsPerDecade)));
  const double ratio = std::pow(t_max / t_min, 1.0 / steps);
  double prev = t_min;
  for (int j = 1; j <= steps; ++j) {
    const double t = j == steps ? t_max : t_min * std::pow(ratio, j);
    if (f(t) <= target) {
      double a = prev;
      double b = t;
      while (b - a > kBoundaryTolerance * b) {
        const double mid = 0.5 * (a + b);
        if (f(mid) <= target) b = mid; else a = mid;
      }
      return b;
    }
    prev = t;
  }
  return std::nullopt;
}

inline Band make_band(const RiskProfile& profile, double lo, double hi, double alpha) {
  Band b;
  b.p_lo = lo;
  b.p_hi = hi;
  b.mass = profile.mass(lo, hi);
  b.p_star = profile.conditional_mean(lo, hi);
  b.m_required = try_min_observations(b.p_star, lo, hi, alpha)
                     .value_or(std::numeric_limits<Count>::max());
  return b;
}

inline void check_design_args(Count n_obs, double alpha) {
  require(n_obs >= 1, "scale_design.domain", "N must be >= 1");
  require(alpha > 0.0 && alpha < 1.0, "scale_design.domain", "alpha must lie in (0, 1)");
}

inline void finish(ScaleDesign& d) {
  const auto h = hhi_metrics(d.bands);
  d.hhi = h.hhi;
  d.hhi_adj = h.hhi_adj;
}

}  // namespace detail

/// Ascending cascade: the first band is [0, x], each further band
/// [edge, lambda * edge]. When what is left above the last edge cannot be
/// made distinguishable it is merged into the last band.
inline ScaleDesign design_ascending(const RiskProfile& profile, Count n_obs, double alpha) {
  detail::check_design_args(n_obs, alpha);
  const double n = static_cast<double>(n_obs);
  ScaleDesign d;
  d.direction = Direction::ascending;
  d.alpha = alpha;
  d.n_obs = n_obs;

  auto first = detail::first_crossing(
      [&](double x) { return required_total_observations(profile, 0.0, x, alpha); }, 1e-12, 1.0,
      n);
  if (!first) {
    d.bands.push_back(detail::make_band(profile, 0.0, 1.0, alpha));
    d.underpowered = true;
    d.terminal_band = 0;
    detail::finish(d);
    return d;
  }
  d.bands.push_back(detail::make_band(profile, 0.0, std::min(1.0, *first), alpha));
  while (d.bands.back().p_hi < 1.0) {
    const double edge = d.bands.back().p_hi;
    // The remainder carries no mass (profile ends below 1): close the scale.
    if (profile.mass(edge, 1.0) <= 0.0) {
      d.bands.back() = detail::make_band(profile, d.bands.back().p_lo, 1.0, alpha);
      break;
    }
    auto next = detail::first_crossing(
        [&](double y) { return required_total_observations(profile, edge, y, alpha); },
        edge * (1.0 + 1e-9), 1.0, n);
    if (!next) {
      const double lo = d.bands.back().p_lo;
      d.bands.back() = detail::make_band(profile, lo, 1.0, alpha);
      d.terminal_band = d.bands.size() - 1;
      break;
    }
    d.bands.push_back(detail::make_band(profile, edge, std::min(1.0, *next), alpha));
  }
  detail::finish(d);
  return d;
}

/// Descending cascade: the first (worst) band is [x, 1], each further band
/// [edge / lambda, edge]. When no further band can be made distinguishable
/// the rest [0, edge] becomes the best grade, possibly under-observed.
inline ScaleDesign design_descending(const RiskProfile& profile, Count n_obs, double alpha) {
  detail::check_design_args(n_obs, alpha);
  const double n = static_cast<double>(n_obs);
  ScaleDesign d;
  d.direction = Direction::descending;
  d.alpha = alpha;
  d.n_obs = n_obs;

  std::vector<Band> worst_first;
  double edge = 1.0;
  while (true) {
    // lambda = edge / lo, scanned from 1 upwards; lo -> 0 handled separately.
    const double top = edge;
    auto lambda = detail::first_crossing(
        [&](double l) { return required_total_observations(profile, top / l, top, alpha); },
        1.0 + 1e-9, 1e15, n);
    if (!lambda) {
      worst_first.push_back(detail::make_band(profile, 0.0, top, alpha));
      if (!(required_total_observations(profile, 0.0, top, alpha) <= n)) {
        d.terminal_band = 0;
        if (worst_first.size() == 1) d.underpowered = true;
      }
      break;
    }
    const double lo = top / *lambda;
    worst_first.push_back(detail::make_band(profile, lo, top, alpha));
    edge = lo;
    if (profile.cdf(edge) <= 0.0) {
      worst_first.back() = detail::make_band(profile, 0.0, top, alpha);
      break;
    }
  }
  d.bands.assign(worst_first.rbegin(), worst_first.rend());
  detail::finish(d);
  return d;
}

inline ScaleDesign design_scale(const RiskProfile& profile, Count n_obs, double alpha,
                                Direction direction) {
  return direction == Direction::ascending ? design_ascending(profile, n_obs, alpha)
                                           : design_descending(profile, n_obs, alpha);
}

struct DesignCurvePoint {
  Count n_obs = 0;
  std::size_t grades = 0;
  double p1_upper = 0.0;
  double hhi_adj = 1.0;
};

inline std::vector<DesignCurvePoint> design_curves(const RiskProfile& profile,
                                                   std::span<const Count> n_grid, double alpha,
                                                   Direction direction = Direction::ascending) {
  detail::require(!n_grid.empty(), "scale_design.domain", "N grid is empty");
  for (std::size_t i = 0; i + 1 < n_grid.size(); ++i)
    detail::require(n_grid[i] < n_grid[i + 1], "scale_design.domain",
                    "N grid must be strictly ascending");
  std::vector<DesignCurvePoint> out;
  out.reserve(n_grid.size());
  for (Count n : n_grid) {
    const auto d = design_scale(profile, n, alpha, direction);
    out.push_back({n, d.grades(), d.bands.front().p_hi, d.hhi_adj});
  }
  return out;
}

}  // namespace rscale
