#pragma once

// Monte Carlo validation experiment. Each iteration draws grade counts from
// a multinomial over the scale's masses, draws defaults at the true PDs and
// tests every grade at the understated PD p(1 - eps). An iteration fails
// when at least C grades are rejected.
//
// Iteration i draws from its own generator seeded by (seed, stream, i), so
// results do not depend on how iterations are spread over threads.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <thread>
#include <unordered_map>
#include <vector>

#include "rscale/capital.hpp"
#include "rscale/error.hpp"
#include "rscale/scale_design.hpp"
#include "rscale/smoothing.hpp"
#include "rscale/stats_core.hpp"

namespace rscale {

inline constexpr int kYellowCriterion = 3;
inline constexpr int kRedCriterion = 5;

struct SimulationConfig {
  PortfolioSlice scale;
  Count n_obs = 10000;
  Count iterations = 10000;
  double alpha = 0.05;
  int criterion = kYellowCriterion;
  std::vector<double> epsilon_grid{0.0};
  std::uint64_t seed = 0;
  WaldMode mode = WaldMode::exact;
  bool fixed_concentrations = false;
  unsigned threads = 1;
};

struct SimulationPoint {
  double epsilon = 0.0;
  double var_percent = 1.0;
  double bad_percent = 0.0;
  double std_error = 0.0;
  Count failures = 0;
};

struct SimulationOutcome {
  std::vector<SimulationPoint> points;
  double baseline_bad_percent = 0.0;
  Count iterations = 0;
};

inline PortfolioSlice slice_from_design(const ScaleDesign& design,
                                        double correlation = kDefaultCorrelation) {
  PortfolioSlice s;
  s.correlation = correlation;
  for (const auto& b : design.bands) {
    s.concentrations.push_back(b.mass);
    s.pds.push_back(b.p_star);
  }
  return s;
}

inline PortfolioSlice slice_from_scale(const SmoothedScale& scale, const GradeObservations& obs,
                                       double correlation = kDefaultCorrelation) {
  detail::require(scale.size() == obs.size(), "simulation.invalid",
                  "scale and observations are not aligned");
  PortfolioSlice s;
  s.correlation = correlation;
  const double total = static_cast<double>(obs.total_n());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    s.concentrations.push_back(static_cast<double>(obs.grades[i].n) / total);
    s.pds.push_back(scale.p_star[i]);
  }
  return s;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t iteration_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t i) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ i);
}

inline unsigned resolve_threads(unsigned threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  return threads;
}

// Runs fn(begin, end, chunk) over [0, count) split into contiguous chunks.
template <class Fn>
void parallel_chunks(Count count, unsigned threads, Fn fn) {
  threads = static_cast<unsigned>(std::min<Count>(resolve_threads(threads), std::max<Count>(count, 1)));
  if (threads <= 1) {
    fn(Count{0}, count, 0u);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    const Count begin = count * t / threads;
    const Count end = count * (t + 1) / threads;
    pool.emplace_back(fn, begin, end, t);
  }
  for (auto& th : pool) th.join();
}

// Counts proportional to the masses, rounded so they sum to n exactly
// (largest remainder).
inline std::vector<Count> apportion(std::span<const double> masses, Count n) {
  std::vector<Count> out(masses.size());
  std::vector<std::pair<double, std::size_t>> rem;
  Count used = 0;
  for (std::size_t i = 0; i < masses.size(); ++i) {
    const double exact = masses[i] * static_cast<double>(n);
    out[i] = static_cast<Count>(std::floor(exact));
    used += out[i];
    rem.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; used < n; ++j, ++used) ++out[rem[j % rem.size()].second];
  return out;
}

}  // namespace detail

/// Grade and default counts for M iterations, stored row-major
/// (iteration, grade).
struct SampleBank {
  std::size_t grades = 0;
  Count iterations = 0;
  std::vector<Count> counts;
  std::vector<Count> defaults;

  Count n(Count it, std::size_t g) const { return counts[static_cast<std::size_t>(it) * grades + g]; }
  Count d(Count it, std::size_t g) const {
    return defaults[static_cast<std::size_t>(it) * grades + g];
  }
};

/// Steps 1 and 2 of the experiment: concentrations and defaults.
inline SampleBank draw_samples(const PortfolioSlice& scale, Count n_obs, Count iterations,
                               std::uint64_t seed, bool fixed_concentrations = false,
                               unsigned threads = 1, std::uint64_t stream = 0) {
  validate(scale);
  detail::require(n_obs >= 1, "simulation.invalid", "N must be >= 1");
  detail::require(iterations >= 1, "simulation.invalid", "M must be >= 1");
  const std::size_t g = scale.pds.size();
  SampleBank bank;
  bank.grades = g;
  bank.iterations = iterations;
  bank.counts.assign(static_cast<std::size_t>(iterations) * g, 0);
  bank.defaults.assign(bank.counts.size(), 0);
  const auto fixed = detail::apportion(scale.concentrations, n_obs);

  detail::parallel_chunks(iterations, threads, [&](Count begin, Count end, unsigned) {
    for (Count it = begin; it < end; ++it) {
      std::mt19937_64 rng(detail::iteration_seed(seed, stream, static_cast<std::uint64_t>(it)));
      Count* ni = &bank.counts[static_cast<std::size_t>(it) * g];
      Count* di = &bank.defaults[static_cast<std::size_t>(it) * g];
      if (fixed_concentrations) {
        std::copy(fixed.begin(), fixed.end(), ni);
      } else {
        Count remaining = n_obs;
        double rest = 1.0;
        for (std::size_t k = 0; k < g; ++k) {
          if (k + 1 == g || remaining == 0) {
            ni[k] = k + 1 == g ? remaining : 0;
            continue;
          }
          const double q = std::clamp(scale.concentrations[k] / rest, 0.0, 1.0);
          ni[k] = std::binomial_distribution<Count>(remaining, q)(rng);
          remaining -= ni[k];
          rest -= scale.concentrations[k];
        }
      }
      for (std::size_t k = 0; k < g; ++k)
        di[k] = ni[k] > 0 ? std::binomial_distribution<Count>(ni[k], scale.pds[k])(rng) : 0;
    }
  });
  return bank;
}

/// Steps 3 to 5: number of failed iterations when every grade is tested at
/// pd (1 - eps).
inline Count count_failures(const SampleBank& bank, std::span<const double> pds, double epsilon,
                            double alpha, int criterion, WaldMode mode = WaldMode::exact,
                            unsigned threads = 1) {
  detail::require(pds.size() == bank.grades, "simulation.invalid",
                  "pds do not match the sample bank");
  detail::require(epsilon >= 0.0 && epsilon < 1.0, "simulation.invalid",
                  "epsilon must lie in [0, 1)");
  detail::require(alpha > 0.0 && alpha <= 0.5, "simulation.invalid",
                  "alpha must lie in (0, 0.5]");
  detail::require(criterion >= 1, "simulation.invalid", "criterion must be >= 1");
  const std::size_t g = bank.grades;
  std::vector<double> tested(g);
  for (std::size_t k = 0; k < g; ++k) tested[k] = pds[k] * (1.0 - epsilon);

  const unsigned t = detail::resolve_threads(threads);
  std::vector<Count> partial(t, 0);
  detail::parallel_chunks(bank.iterations, t, [&](Count begin, Count end, unsigned chunk) {
    std::vector<std::unordered_map<Count, Count>> cache(g);
    Count failed = 0;
    for (Count it = begin; it < end; ++it) {
      int violations = 0;
      for (std::size_t k = 0; k < g; ++k) {
        const Count n = bank.n(it, k);
        if (n == 0) continue;
        const Count d = bank.d(it, k);
        bool rejected;
        if (mode == WaldMode::exact) {
          auto [pos, fresh] = cache[k].try_emplace(n, 0);
          if (fresh) pos->second = exact_critical_count(n, tested[k], alpha);
          rejected = d >= pos->second;
        } else {
          rejected = !wald_test(tested[k], n, d, alpha, WaldMode::asymptotic).passed;
        }
        violations += rejected ? 1 : 0;
      }
      if (violations >= criterion) ++failed;
    }
    partial[chunk] = failed;
  });
  Count total = 0;
  for (Count c : partial) total += c;
  return total;
}

inline double bad_percent_stderr(double b, Count iterations) {
  return std::sqrt(b * (1.0 - b) / static_cast<double>(iterations));
}

inline void validate(const SimulationConfig& c) {
  validate(c.scale);
  detail::require(c.n_obs >= 1, "simulation.invalid", "N must be >= 1");
  detail::require(c.iterations >= 1, "simulation.invalid", "M must be >= 1");
  detail::require(c.alpha > 0.0 && c.alpha <= 0.5, "simulation.invalid",
                  "alpha must lie in (0, 0.5]");
  detail::require(c.criterion >= 1, "simulation.invalid", "criterion must be >= 1");
  detail::require(!c.epsilon_grid.empty(), "simulation.invalid", "epsilon grid is empty");
  for (double e : c.epsilon_grid)
    detail::require(e >= 0.0 && e < 1.0, "simulation.invalid", "epsilon must lie in [0, 1)");
}

inline SimulationOutcome simulate_validation(const SimulationConfig& c) {
  validate(c);
  const auto bank = draw_samples(c.scale, c.n_obs, c.iterations, c.seed, c.fixed_concentrations,
                                 c.threads);
  SimulationOutcome out;
  out.iterations = c.iterations;
  const double m = static_cast<double>(c.iterations);
  bool have_baseline = false;
  for (double e : c.epsilon_grid) {
    SimulationPoint p;
    p.epsilon = e;
    p.var_percent = var_percent(c.scale, e);
    p.failures = count_failures(bank, c.scale.pds, e, c.alpha, c.criterion, c.mode, c.threads);
    p.bad_percent = static_cast<double>(p.failures) / m;
    p.std_error = bad_percent_stderr(p.bad_percent, c.iterations);
    if (e == 0.0 && !have_baseline) {
      out.baseline_bad_percent = p.bad_percent;
      have_baseline = true;
    }
    out.points.push_back(p);
  }
  if (!have_baseline)
    out.baseline_bad_percent =
        static_cast<double>(count_failures(bank, c.scale.pds, 0.0, c.alpha, c.criterion, c.mode,
                                           c.threads)) / m;
  return out;
}

/// simulate_validation over a grid that starts at 0 and increases.
inline SimulationOutcome sweep_epsilon(const SimulationConfig& c) {
  detail::require(!c.epsilon_grid.empty() && c.epsilon_grid.front() == 0.0,
                  "simulation.invalid", "epsilon grid must start at 0");
  for (std::size_t i = 0; i + 1 < c.epsilon_grid.size(); ++i)
    detail::require(c.epsilon_grid[i] < c.epsilon_grid[i + 1], "simulation.invalid",
                    "epsilon grid must be strictly ascending");
  return simulate_validation(c);
}

/// Evenly spaced grid {0, step, ..., max}.
inline std::vector<double> epsilon_grid(double max, double step) {
  detail::require(step > 0.0 && max >= 0.0 && max < 1.0, "simulation.invalid",
                  "need step > 0 and 0 <= max < 1");
  std::vector<double> grid;
  const auto n = static_cast<long>(std::floor(max / step + 1e-9));
  for (long i = 0; i <= n; ++i) grid.push_back(static_cast<double>(i) * step);
  return grid;
}

struct SavingsConfig {
  Count iterations = 10000;
  double alpha = 0.05;
  int criterion = kYellowCriterion;
  double failure_budget = 0.01;
  double epsilon_max = 0.99;
  double tolerance = 1e-3;
  std::uint64_t seed = 0;
  WaldMode mode = WaldMode::exact;
  bool fixed_concentrations = false;
  unsigned threads = 1;
};

struct AdmissibleShift {
  double epsilon = 0.0;
  double savings = 0.0;  // 1 - VAR%(epsilon)
  double bad_percent = 0.0;
  bool budget_below_baseline = false;
};

struct SavingsPoint {
  Count n_obs = 0;
  AdmissibleShift excessive;
  AdmissibleShift distinguishable;
  double difference = 0.0;  // distinguishable minus excessive
};

/// Largest eps with BAD%(eps) <= budget, by bisection on a fixed sample bank.
inline AdmissibleShift admissible_shift(const PortfolioSlice& scale, Count n_obs,
                                        const SavingsConfig& c, std::uint64_t stream = 0) {
  detail::require(c.failure_budget > 0.0 && c.failure_budget <= 1.0, "simulation.invalid",
                  "failure budget must lie in (0, 1]");
  detail::require(c.epsilon_max > 0.0 && c.epsilon_max < 1.0 && c.tolerance > 0.0,
                  "simulation.invalid", "need 0 < epsilon_max < 1 and tolerance > 0");
  const auto bank =
      draw_samples(scale, n_obs, c.iterations, c.seed, c.fixed_concentrations, c.threads, stream);
  const double m = static_cast<double>(c.iterations);
  auto bad = [&](double e) {
    return static_cast<double>(
               count_failures(bank, scale.pds, e, c.alpha, c.criterion, c.mode, c.threads)) / m;
  };
  AdmissibleShift r;
  const double b0 = bad(0.0);
  if (b0 > c.failure_budget) {
    r.bad_percent = b0;
    r.budget_below_baseline = true;
    return r;
  }
  double lo = 0.0;
  double hi = c.epsilon_max;
  double b_lo = b0;
  const double b_hi = bad(hi);
  if (b_hi <= c.failure_budget) {
    lo = hi;
    b_lo = b_hi;
  } else {
    while (hi - lo > c.tolerance) {
      const double mid = 0.5 * (lo + hi);
      const double b = bad(mid);
      if (b <= c.failure_budget) {
        lo = mid;
        b_lo = b;
      } else {
        hi = mid;
      }
    }
  }
  r.epsilon = lo;
  r.bad_percent = b_lo;
  r.savings = 1.0 - var_percent(scale, lo);
  return r;
}

inline std::vector<SavingsPoint> capital_savings_at_budget(const PortfolioSlice& excessive,
                                                           const PortfolioSlice& distinguishable,
                                                           std::span<const Count> n_grid,
                                                           const SavingsConfig& c) {
  detail::require(!n_grid.empty(), "simulation.invalid", "N grid is empty");
  std::vector<SavingsPoint> out;
  for (Count n : n_grid) {
    SavingsPoint p;
    p.n_obs = n;
    p.excessive = admissible_shift(excessive, n, c, 1);
    p.distinguishable = admissible_shift(distinguishable, n, c, 2);
    p.difference = p.distinguishable.savings - p.excessive.savings;
    out.push_back(p);
  }
  return out;
}

}  // namespace rscale
