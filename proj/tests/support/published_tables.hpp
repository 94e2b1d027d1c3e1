#pragma once

// Published scales (percent values converted to fractions) and the fixture
// datasets used to rebuild them.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace tables {

struct PublishedScale {
  std::vector<std::string> labels;
  std::vector<double> dr;
  std::vector<double> p_lo;
  std::vector<double> p_star;
  std::vector<double> p_hi;
  std::vector<std::int64_t> n;
  std::vector<std::int64_t> m5;
  double half_unit;  // half a unit of the last printed digit of p*
};

inline std::vector<double> pct(std::vector<double> v) {
  for (double& x : v) x /= 100.0;
  return v;
}

inline PublishedScale fitch() {
  return {{"AAA", "AA+", "AA", "AA-", "A+", "A", "A-", "BBB+", "BBB", "BBB-", "BB+", "BB", "BB-",
           "B+", "B", "B-", "CCC to C"},
          pct({0.108, 0, 0, 0.074, 0, 0.062, 0.065, 0.082, 0.066, 0.216, 0.259, 0.504, 1.071,
               1.447, 1.942, 3.042, 23.308}),
          pct({0.000, 0.053, 0.058, 0.064, 0.071, 0.078, 0.087, 0.096, 0.106, 0.150, 0.236, 0.369,
               0.717, 1.235, 1.699, 2.437, 8.393}),
          pct({0.050, 0.055, 0.061, 0.067, 0.075, 0.082, 0.091, 0.101, 0.111, 0.202, 0.275, 0.494,
               1.042, 1.464, 1.972, 3.012, 23.393}),
          pct({0.053, 0.058, 0.064, 0.071, 0.078, 0.087, 0.096, 0.106, 0.150, 0.236, 0.369, 0.717,
               1.235, 1.699, 2.437, 8.393, 100.0}),
          {31348, 21862, 60520, 136952, 190536, 272170, 261222, 288898, 309264, 267546, 131308,
           121482, 120598, 105706, 108562, 71536, 44200},
          {2921225, 2643095, 2391432, 2163718, 1957674, 1771238, 1602543, 1449902, 1311787, 67989,
           49880, 6726, 10601, 10015, 7396, 2226, 4},
          0.0005 / 100.0};
}

inline PublishedScale expert_ra() {
  return {{"ruAAA", "ruAA+", "ruAA", "ruAA-", "ruA+", "ruA", "ruA-", "ruBBB+", "ruBBB", "ruBBB-",
           "ruBB+", "ruBB", "ruBB-", "ruB+", "ruB", "ruB-", "ruCCC", "ruCC"},
          pct({0, 0, 0.25, 0, 0.61, 0.74, 0.51, 1.19, 2.14, 1.61, 3.14, 5.06, 6.89, 6.27, 5.29,
               4.98, 13.30, 28.57}),
          pct({0.00, 0.05, 0.08, 0.12, 0.26, 0.57, 0.63, 0.91, 1.48, 1.82, 2.44, 3.84, 4.98, 5.50,
               6.08, 6.72, 9.75, 19.02}),
          pct({0.05, 0.06, 0.11, 0.13, 0.54, 0.60, 0.66, 1.26, 1.73, 1.91, 3.11, 4.74, 5.24, 5.79,
               6.39, 7.07, 13.44, 26.91}),
          pct({0.05, 0.08, 0.12, 0.26, 0.57, 0.63, 0.91, 1.48, 1.82, 2.44, 3.84, 4.98, 5.50, 6.08,
               6.72, 9.75, 19.02, 100.0}),
          {365, 206, 396, 372, 488, 538, 593, 505, 513, 684, 828, 613, 305, 335, 359, 221, 218, 21},
          {2921215, 2643086, 1281076, 1159026, 269962, 244133, 220762, 10307, 83021, 74981, 2192,
           29387, 26452, 23796, 21392, 19217, 173, 61},
          0.005 / 100.0};
}

// Published verdicts: Fitch is distinguishable from BBB- down, Expert RA only
// at ruCCC.
inline std::vector<bool> fitch_distinguishable() {
  std::vector<bool> v(17, false);
  for (std::size_t i = 9; i < 17; ++i) v[i] = true;
  return v;
}

inline std::vector<bool> expert_ra_distinguishable() {
  std::vector<bool> v(18, false);
  v[16] = true;
  return v;
}

// Printed p* values are rounded, which breaks the exact exp(eps) spacing of
// grades that sit on the monotonicity constraint. A link i -> i+1 is taken as
// constrained when exp(eps) lies inside the rounding interval of the ratio;
// each constrained run is rebuilt as an exact geometric chain anchored at the
// floor (first run, if it starts on the floor) or at the run's log-mean.
inline std::vector<double> restore_chains(const std::vector<double>& p, double half, double eps,
                                          double floor) {
  const std::size_t g = p.size();
  const double e = std::exp(eps);
  std::vector<bool> link(g, false);
  for (std::size_t i = 0; i + 1 < g; ++i) {
    const double lo = (p[i + 1] - half) / (p[i] + half);
    const double hi = (p[i + 1] + half) / (p[i] - half);
    link[i] = lo <= e && e <= hi;
  }
  std::vector<double> out(g);
  std::size_t i = 0;
  while (i < g) {
    std::size_t j = i;
    while (j + 1 < g && link[j]) ++j;
    if (j > i) {
      double c;
      if (i == 0 && std::abs(p[0] - floor) <= half) {
        c = floor;
      } else {
        double s = 0.0;
        for (std::size_t k = i; k <= j; ++k) s += std::log(p[k]) - (k - i) * eps;
        c = std::exp(s / static_cast<double>(j - i + 1));
      }
      for (std::size_t k = i; k <= j; ++k) out[k] = c * std::exp((k - i) * eps);
    } else {
      out[i] = p[i];
    }
    i = j + 1;
  }
  return out;
}

}  // namespace tables
