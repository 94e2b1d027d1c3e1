#pragma once

// Basel IRB capital requirement (corporate formula, no maturity or size
// adjustment) per grade and for a portfolio of grades.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "rscale/error.hpp"
#include "rscale/stats_core.hpp"

namespace rscale {

inline constexpr double kDefaultCorrelation = 0.20;

/// EAD * LGD * (Phi((Phi^-1(pd) + sqrt(R) Phi^-1(0.999)) / sqrt(1 - R)) - pd)
/// with EAD = LGD = 1.
inline double irb_capital(double pd, double correlation = kDefaultCorrelation) {
  detail::require(pd >= 0.0 && pd <= 1.0, "capital.domain", "pd must lie in [0, 1]");
  detail::require(correlation >= 0.0 && correlation < 1.0, "capital.domain",
                  "correlation must lie in [0, 1)");
  if (pd == 0.0 || pd == 1.0) return 0.0;
  static const double z999 = std_normal_quantile(0.999);
  const double x = (std_normal_quantile(pd) + std::sqrt(correlation) * z999) /
                   std::sqrt(1.0 - correlation);
  return std_normal_cdf(x) - pd;
}

struct PortfolioSlice {
  std::vector<double> concentrations;
  std::vector<double> pds;
  double correlation = kDefaultCorrelation;
  double ead = 1.0;
  double lgd = 1.0;
};

inline void validate(const PortfolioSlice& s) {
  detail::require(!s.pds.empty() && s.pds.size() == s.concentrations.size(), "capital.invalid",
                  "concentrations and pds must be nonempty and of equal length");
  for (double m : s.concentrations)
    detail::require(m >= 0.0, "capital.invalid", "concentrations must be nonnegative");
  const double total = std::accumulate(s.concentrations.begin(), s.concentrations.end(), 0.0);
  detail::require(std::abs(total - 1.0) <= 1e-9, "capital.invalid",
                  "concentrations must sum to 1");
  for (double p : s.pds)
    detail::require(p > 0.0 && p < 1.0, "capital.invalid", "pds must lie in (0, 1)");
  detail::require(s.correlation > 0.0 && s.correlation < 1.0, "capital.invalid",
                  "correlation must lie in (0, 1)");
  detail::require(s.ead > 0.0 && s.lgd > 0.0 && s.lgd <= 1.0, "capital.invalid",
                  "need ead > 0 and 0 < lgd <= 1");
}

/// Sum of concentration * CR(pd * (1 - epsilon)).
inline double portfolio_capital(const PortfolioSlice& s, double epsilon = 0.0) {
  validate(s);
  detail::require(epsilon >= 0.0 && epsilon < 1.0, "capital.domain",
                  "epsilon must lie in [0, 1)");
  double total = 0.0;
  for (std::size_t i = 0; i < s.pds.size(); ++i)
    total += s.concentrations[i] * irb_capital(s.pds[i] * (1.0 - epsilon), s.correlation);
  return s.ead * s.lgd * total;
}

/// Capital after a relative PD shift eps, as a fraction of unshifted capital.
inline double var_percent(const PortfolioSlice& s, double epsilon) {
  if (epsilon == 0.0) {
    validate(s);
    return 1.0;
  }
  return portfolio_capital(s, epsilon) / portfolio_capital(s, 0.0);
}

}  // namespace rscale
