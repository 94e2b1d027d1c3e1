#pragma once

// Constrained maximum-likelihood smoothing of per-grade default frequencies.
//
// Grades are ordered best to worst. The smoothed PDs maximize the Bernoulli
// log-likelihood subject to a minimum log-gap eps between neighbours
// (p[i+1] >= p[i] * exp(eps)), a floor on the best grade and p < 1 on the
// worst one. Substituting q[i] = ln p[i] - i * eps turns the gap constraints
// into plain monotonicity q[0] <= q[1] <= ... and the floor/cap into a common
// box on q, so the problem is a separable concave isotonic regression, solved
// exactly by pool-adjacent-violators with a 1-D Newton solve per pooled block.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rscale/error.hpp"
#include "rscale/stats_core.hpp"

namespace rscale {

struct Grade {
  std::string label;
  Count n = 0;  // borrower-years
  Count d = 0;  // defaults
};

struct GradeObservations {
  std::vector<Grade> grades;

  std::size_t size() const { return grades.size(); }
  Count total_n() const {
    Count s = 0;
    for (const auto& g : grades) s += g.n;
    return s;
  }
  Count total_d() const {
    Count s = 0;
    for (const auto& g : grades) s += g.d;
    return s;
  }
};

inline void validate(const GradeObservations& obs) {
  detail::require(!obs.grades.empty(), "smoothing.invalid_input", "no grades");
  std::set<std::string> labels;
  for (const auto& g : obs.grades) {
    detail::require(g.n > 0, "smoothing.invalid_input",
                    "grade '" + g.label + "' has no observations");
    detail::require(g.d >= 0 && g.d <= g.n, "smoothing.invalid_input",
                    "grade '" + g.label + "' has d outside [0, n]");
    detail::require(labels.insert(g.label).second, "smoothing.invalid_input",
                    "duplicate grade label '" + g.label + "'");
  }
}

struct SmoothedScale {
  std::vector<double> p_star;
  std::vector<double> p_lo;
  std::vector<double> p_hi;
  std::vector<double> log_increments;  // b[i] = ln p[i] - ln p[i+1], b[G-1] = ln p[G-1]
  double eps_mono = 0.0;
  double pd_floor = 0.0;

  std::size_t size() const { return p_star.size(); }
};

/// Upper cap on the worst grade's PD.
inline constexpr double kMaxPd = 1.0 - 1e-12;

inline double log_likelihood(const GradeObservations& obs, std::span<const double> p) {
  double ll = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto& g = obs.grades[i];
    if (g.d > 0) ll += static_cast<double>(g.d) * std::log(p[i]);
    if (g.n > g.d) ll += static_cast<double>(g.n - g.d) * std::log1p(-p[i]);
  }
  return ll;
}

namespace detail {

struct PoolBlock {
  std::size_t first = 0;
  std::size_t last = 0;  // inclusive
  double q = 0.0;
};

// d LL / d q for a block sharing q, with p[i] = exp(q + i * eps).
inline double block_score(const GradeObservations& obs, const PoolBlock& b, double q,
                          double eps, double* curvature) {
  double score = 0.0;
  double curv = 0.0;
  for (std::size_t i = b.first; i <= b.last; ++i) {
    const auto& g = obs.grades[i];
    const double p = std::exp(q + static_cast<double>(i) * eps);
    const double odds = p / (1.0 - p);
    const double healthy = static_cast<double>(g.n - g.d);
    score += static_cast<double>(g.d) - healthy * odds;
    curv += healthy * odds / (1.0 - p);
  }
  if (curvature) *curvature = curv;
  return score;
}

// Maximizer of the block log-likelihood over q in [lo, hi]; lo may be -inf,
// and so may the result.
inline double solve_block(const GradeObservations& obs, const PoolBlock& b, double eps,
                          double lo, double hi) {
  double defaults = 0.0;
  double weighted_n = 0.0;
  for (std::size_t i = b.first; i <= b.last; ++i) {
    defaults += static_cast<double>(obs.grades[i].d);
    weighted_n += static_cast<double>(obs.grades[i].n) * std::exp(static_cast<double>(i) * eps);
  }
  // Without defaults the block wants p = 0: -inf when there is no floor.
  if (defaults == 0.0) return lo;
  // At this q every p <= 1/2 and the score is >= 0.
  const double bracket_lo = std::log(defaults / (2.0 * weighted_n));
  double a = std::max(lo, bracket_lo);
  double c = hi;
  if (block_score(obs, b, a, eps, nullptr) <= 0.0) return a;
  if (block_score(obs, b, c, eps, nullptr) >= 0.0) return c;
  // Safeguarded Newton on a decreasing score.
  double q = 0.5 * (a + c);
  for (int it = 0; it < 200; ++it) {
    double curv = 0.0;
    const double s = block_score(obs, b, q, eps, &curv);
    if (s > 0.0) a = q; else c = q;
    if (s == 0.0 || c - a <= 1e-15 * std::max(1.0, std::abs(q))) break;
    double next = q + s / curv;
    if (!(next > a && next < c)) next = 0.5 * (a + c);
    if (std::abs(next - q) <= 1e-16 * std::max(1.0, std::abs(q))) {
      q = next;
      break;
    }
    q = next;
  }
  return q;
}

}  // namespace detail

/// Fills p_lo/p_hi with geometric midpoints between neighbouring p_star:
/// p_hi[i] = exp(sum_{k>=i} b_k - b_i / 2) = sqrt(p[i] p[i+1]), p_lo[0] = 0,
/// p_hi[G-1] = 1.
inline SmoothedScale grade_boundaries(SmoothedScale scale) {
  const std::size_t g = scale.size();
  detail::require(g > 0, "smoothing.invalid_input", "grade_boundaries: empty scale");
  scale.log_increments.assign(g, 0.0);
  for (std::size_t i = 0; i + 1 < g; ++i)
    scale.log_increments[i] = std::log(scale.p_star[i]) - std::log(scale.p_star[i + 1]);
  scale.log_increments[g - 1] = std::log(scale.p_star[g - 1]);
  scale.p_lo.assign(g, 0.0);
  scale.p_hi.assign(g, 1.0);
  for (std::size_t i = 0; i + 1 < g; ++i) {
    const double edge = scale.p_star[i] * std::exp(-0.5 * scale.log_increments[i]);
    scale.p_hi[i] = edge;
    scale.p_lo[i + 1] = edge;
  }
  return scale;
}

inline SmoothedScale smooth_monotone(const GradeObservations& obs, double eps_mono,
                                     double pd_floor) {
  validate(obs);
  detail::require(eps_mono >= 0.0 && std::isfinite(eps_mono), "smoothing.invalid_input",
                  "eps_mono must be finite and >= 0");
  detail::require(pd_floor >= 0.0 && pd_floor < 1.0, "smoothing.invalid_input",
                  "pd_floor must lie in [0, 1)");
  const std::size_t g = obs.size();
  if (g == 1 && obs.grades[0].d == 0 && pd_floor == 0.0)
    detail::fail("smoothing.degenerate", "single grade with zero defaults");

  const double lo = pd_floor > 0.0 ? std::log(pd_floor) : -std::numeric_limits<double>::infinity();
  const double hi = std::log(kMaxPd) - static_cast<double>(g - 1) * eps_mono;
  detail::require(lo <= hi, "smoothing.infeasible",
                  "pd_floor and eps_mono force the worst grade's PD to reach 1");

  std::vector<detail::PoolBlock> stack;
  stack.reserve(g);
  for (std::size_t i = 0; i < g; ++i) {
    detail::PoolBlock b{i, i, 0.0};
    b.q = detail::solve_block(obs, b, eps_mono, lo, hi);
    stack.push_back(b);
    while (stack.size() > 1 && stack[stack.size() - 2].q > stack.back().q) {
      detail::PoolBlock merged{stack[stack.size() - 2].first, stack.back().last, 0.0};
      stack.pop_back();
      stack.pop_back();
      merged.q = detail::solve_block(obs, merged, eps_mono, lo, hi);
      stack.push_back(merged);
    }
  }

  for (const auto& b : stack)
    detail::require(std::isfinite(b.q), "smoothing.degenerate",
                    "grades " + obs.grades[b.first].label + ".." + obs.grades[b.last].label +
                        " pool to zero defaults and there is no PD floor");

  SmoothedScale scale;
  scale.eps_mono = eps_mono;
  scale.pd_floor = pd_floor;
  scale.p_star.resize(g);
  for (const auto& b : stack)
    for (std::size_t i = b.first; i <= b.last; ++i)
      scale.p_star[i] = std::exp(b.q + static_cast<double>(i) * eps_mono);
  return grade_boundaries(std::move(scale));
}

/// Largest violation of the optimality conditions of smooth_monotone, in
/// units of the log-likelihood score d LL / d q. Grades sharing a pooled
/// block must have a zero total score (or the sign pushing against the
/// floor/cap when the block sits on it) and nonnegative prefix sums, which
/// are the multipliers of the ordering constraints.
inline double kkt_residual(const GradeObservations& obs, const SmoothedScale& scale) {
  const std::size_t g = obs.size();
  const double eps = scale.eps_mono;
  const double lo = scale.pd_floor > 0.0 ? std::log(scale.pd_floor)
                                         : -std::numeric_limits<double>::infinity();
  const double hi = std::log(kMaxPd) - static_cast<double>(g - 1) * eps;
  std::vector<double> q(g);
  for (std::size_t i = 0; i < g; ++i)
    q[i] = std::log(scale.p_star[i]) - static_cast<double>(i) * eps;
  auto score = [&](std::size_t i) {
    return detail::block_score(obs, detail::PoolBlock{i, i, q[i]}, q[i], eps, nullptr);
  };
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < g; ++i)
    worst = std::max(worst, q[i] - q[i + 1]);  // ordering feasibility
  std::size_t first = 0;
  while (first < g) {
    std::size_t last = first;
    while (last + 1 < g && std::abs(q[last + 1] - q[first]) <= 1e-9) ++last;
    const bool at_floor = std::abs(q[first] - lo) <= 1e-9;
    const bool at_cap = std::abs(q[first] - hi) <= 1e-9;
    double prefix = 0.0;
    for (std::size_t i = first; i <= last; ++i) {
      prefix += score(i);
      if (i < last && !at_floor && !at_cap) worst = std::max(worst, -prefix);
    }
    if (at_floor) worst = std::max(worst, prefix);
    else if (at_cap) worst = std::max(worst, -prefix);
    else worst = std::max(worst, std::abs(prefix));
    first = last + 1;
  }
  return worst;
}

struct ReportRow {
  std::string label;
  double dr = 0.0;
  double p_lo = 0.0;
  double p_star = 0.0;
  double p_hi = 0.0;
  Count n = 0;
  std::optional<Count> m_alpha;  // empty for degenerate (zero-width) bands
  Distinguishability cls = Distinguishability::grey;

  bool distinguishable() const { return m_alpha && n >= *m_alpha; }
};

struct DistinguishabilityReport {
  double alpha = 0.05;
  std::vector<ReportRow> rows;
  Count total_n = 0;
  double total_dr = 0.0;
  double mean_p_star = 0.0;  // n-weighted mean of smoothed PDs
  Count total_m_alpha = 0;
  std::size_t distinguishable_count = 0;
};

inline DistinguishabilityReport distinguishability_report(const SmoothedScale& scale,
                                                          const GradeObservations& obs,
                                                          double alpha) {
  detail::require(scale.size() == obs.size(), "smoothing.invalid_input",
                  "scale and observations differ in grade count");
  DistinguishabilityReport rep;
  rep.alpha = alpha;
  double weighted = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto& g = obs.grades[i];
    ReportRow row;
    row.label = g.label;
    row.n = g.n;
    row.dr = static_cast<double>(g.d) / static_cast<double>(g.n);
    row.p_lo = scale.p_lo[i];
    row.p_star = scale.p_star[i];
    row.p_hi = scale.p_hi[i];
    row.m_alpha = try_min_observations(row.p_star, row.p_lo, row.p_hi, alpha);
    if (row.m_alpha)
      row.cls = distinguishability_class(g.n, row.p_star, row.p_lo, row.p_hi);
    rep.total_n += g.n;
    if (row.m_alpha) rep.total_m_alpha += *row.m_alpha;
    if (row.distinguishable()) ++rep.distinguishable_count;
    weighted += static_cast<double>(g.n) * row.p_star;
    rep.rows.push_back(std::move(row));
  }
  rep.total_dr = static_cast<double>(obs.total_d()) / static_cast<double>(rep.total_n);
  rep.mean_p_star = weighted / static_cast<double>(rep.total_n);
  return rep;
}

}  // namespace rscale
