#pragma once

// File formats: grade CSV (`rating,n,d`), JSON for smoothed scales, risk
// profiles and designs, and curve CSVs. Floating-point values are written
// with 12 significant digits. All rates are fractions, never percent.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "rscale/error.hpp"
#include "rscale/risk_profile.hpp"
#include "rscale/scale_design.hpp"
#include "rscale/simulation.hpp"
#include "rscale/smoothing.hpp"

namespace rscale::io {

using json = nlohmann::ordered_json;

inline std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

/// x rounded to 12 significant digits, so JSON output is stable.
inline double round12(double x) {
  if (!std::isfinite(x)) return x;
  return std::strtod(format_number(x).c_str(), nullptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] inline void parse_fail(const std::string& source, std::size_t line,
                                    const std::string& msg) {
  rscale::detail::fail("cli_io.parse", source + ":" + std::to_string(line) + ": " + msg);
}

inline Count parse_count(std::string_view field, const std::string& source, std::size_t line,
                         const char* name) {
  Count v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
    parse_fail(source, line, std::string("column ") + name + " is not an integer: '" +
                                 std::string(field) + "'");
  return v;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  rscale::detail::require(static_cast<bool>(out), "cli_io.io", "cannot write " + path);
  return out;
}

}  // namespace detail

/// Reads `rating,n,d` rows ordered best to worst. Blank lines and lines
/// starting with '#' are skipped.
inline GradeObservations read_grades(std::istream& in, const std::string& source = "<input>") {
  GradeObservations obs;
  std::set<std::string> labels;
  std::string raw;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = detail::split(line);
    if (!header) {
      if (fields.size() != 3 || fields[0] != "rating" || fields[1] != "n" || fields[2] != "d")
        detail::parse_fail(source, line_no, "expected header 'rating,n,d'");
      header = true;
      continue;
    }
    if (fields.size() != 3)
      detail::parse_fail(source, line_no,
                         "expected 3 fields, got " + std::to_string(fields.size()));
    Grade g;
    g.label = std::string(fields[0]);
    if (g.label.empty()) detail::parse_fail(source, line_no, "empty rating label");
    g.n = detail::parse_count(fields[1], source, line_no, "n");
    g.d = detail::parse_count(fields[2], source, line_no, "d");
    if (g.n <= 0) detail::parse_fail(source, line_no, "n must be positive");
    if (g.d < 0 || g.d > g.n) detail::parse_fail(source, line_no, "d must lie in [0, n]");
    if (!labels.insert(g.label).second)
      detail::parse_fail(source, line_no, "duplicate rating '" + g.label + "'");
    obs.grades.push_back(std::move(g));
  }
  rscale::detail::require(header, "cli_io.empty", source + ": file is empty");
  rscale::detail::require(!obs.grades.empty(), "cli_io.empty", source + ": no grade rows");
  return obs;
}

inline GradeObservations ingest_grades(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  rscale::detail::require(static_cast<bool>(in), "cli_io.io", "cannot open " + path);
  return read_grades(in, path);
}

inline void write_grades(std::ostream& out, const GradeObservations& obs) {
  out << "rating,n,d\n";
  for (const auto& g : obs.grades) out << g.label << ',' << g.n << ',' << g.d << '\n';
}

// Smoothed scale together with the observations it was fitted to.
inline json to_json(const SmoothedScale& scale, const GradeObservations& obs) {
  json grades = json::array();
  for (std::size_t i = 0; i < scale.size(); ++i) {
    const auto& g = obs.grades[i];
    grades.push_back({{"rating", g.label},
                      {"n", g.n},
                      {"d", g.d},
                      {"dr", round12(static_cast<double>(g.d) / static_cast<double>(g.n))},
                      {"p_lo", round12(scale.p_lo[i])},
                      {"p_star", round12(scale.p_star[i])},
                      {"p_hi", round12(scale.p_hi[i])}});
  }
  return {{"eps_mono", round12(scale.eps_mono)},
          {"pd_floor", round12(scale.pd_floor)},
          {"grades", std::move(grades)}};
}

struct ScaleFile {
  SmoothedScale scale;
  GradeObservations obs;
};

inline ScaleFile scale_from_json(const json& j) {
  ScaleFile f;
  f.scale.eps_mono = j.at("eps_mono").get<double>();
  f.scale.pd_floor = j.at("pd_floor").get<double>();
  for (const auto& g : j.at("grades")) {
    f.obs.grades.push_back({g.at("rating").get<std::string>(), g.at("n").get<Count>(),
                            g.at("d").get<Count>()});
    f.scale.p_star.push_back(g.at("p_star").get<double>());
  }
  validate(f.obs);
  f.scale = grade_boundaries(std::move(f.scale));
  return f;
}

inline json to_json(const RiskProfile& profile) {
  json knots = json::array();
  json masses = json::array();
  for (double k : profile.knots()) knots.push_back(round12(k));
  for (double m : profile.masses()) masses.push_back(round12(m));
  return {{"knots", std::move(knots)}, {"masses", std::move(masses)}};
}

inline RiskProfile profile_from_json(const json& j) {
  return RiskProfile(j.at("knots").get<std::vector<double>>(),
                     j.at("masses").get<std::vector<double>>());
}

inline json to_json(const ScaleDesign& d) {
  json bands = json::array();
  for (const auto& b : d.bands)
    bands.push_back({{"p_lo", round12(b.p_lo)},
                     {"p_hi", round12(b.p_hi)},
                     {"p_star", round12(b.p_star)},
                     {"mass", round12(b.mass)},
                     {"m_required", b.m_required}});
  json j = {{"direction", std::string(to_string(d.direction))},
            {"alpha", round12(d.alpha)},
            {"N", d.n_obs},
            {"G", d.grades()},
            {"hhi", round12(d.hhi)},
            {"hhi_adj", round12(d.hhi_adj)},
            {"underpowered", d.underpowered},
            {"terminal_band", nullptr},
            {"bands", std::move(bands)}};
  if (d.terminal_band) j["terminal_band"] = *d.terminal_band;
  return j;
}

inline ScaleDesign design_from_json(const json& j) {
  ScaleDesign d;
  const auto dir = j.at("direction").get<std::string>();
  rscale::detail::require(dir == "ascending" || dir == "descending", "cli_io.parse",
                          "unknown direction '" + dir + "'");
  d.direction = dir == "ascending" ? Direction::ascending : Direction::descending;
  d.alpha = j.at("alpha").get<double>();
  d.n_obs = j.at("N").get<Count>();
  d.underpowered = j.value("underpowered", false);
  if (j.contains("terminal_band") && !j["terminal_band"].is_null())
    d.terminal_band = j["terminal_band"].get<std::size_t>();
  for (const auto& b : j.at("bands"))
    d.bands.push_back({b.at("p_lo").get<double>(), b.at("p_hi").get<double>(),
                       b.at("p_star").get<double>(), b.at("mass").get<double>(),
                       b.at("m_required").get<Count>()});
  rscale::detail::require(!d.bands.empty(), "cli_io.parse", "design has no bands");
  const auto h = hhi_metrics(d.bands);
  d.hhi = h.hhi;
  d.hhi_adj = h.hhi_adj;
  return d;
}

inline json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  rscale::detail::require(static_cast<bool>(in), "cli_io.io", "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    rscale::detail::fail("cli_io.parse", path + ": " + e.what());
  }
}

inline void write_json(const std::string& path, const json& j) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
}

inline void write_curve_csv(std::ostream& out, const SimulationOutcome& o) {
  out << "epsilon,var_percent,bad_percent,stderr\n";
  for (const auto& p : o.points)
    out << format_number(p.epsilon) << ',' << format_number(p.var_percent) << ','
        << format_number(p.bad_percent) << ',' << format_number(p.std_error) << '\n';
}

inline void write_design_curves_csv(std::ostream& out, std::span<const DesignCurvePoint> pts) {
  out << "N,G,p1_upper,hhi_adj\n";
  for (const auto& p : pts)
    out << p.n_obs << ',' << p.grades << ',' << format_number(p.p1_upper) << ','
        << format_number(p.hhi_adj) << '\n';
}

inline void write_savings_csv(std::ostream& out, std::span<const SavingsPoint> pts) {
  out << "N,eps_excessive,eps_distinguishable,savings_excessive,savings_distinguishable,"
         "difference\n";
  for (const auto& p : pts)
    out << p.n_obs << ',' << format_number(p.excessive.epsilon) << ','
        << format_number(p.distinguishable.epsilon) << ',' << format_number(p.excessive.savings)
        << ',' << format_number(p.distinguishable.savings) << ','
        << format_number(p.difference) << '\n';
}

}  // namespace rscale::io
