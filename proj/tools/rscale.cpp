// rscale: rating scale smoothing, design and validation from the command line.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rscale/analytics.hpp"
#include "rscale/capital.hpp"
#include "rscale/error.hpp"
#include "rscale/io.hpp"
#include "rscale/risk_profile.hpp"
#include "rscale/scale_design.hpp"
#include "rscale/simulation.hpp"
#include "rscale/smoothing.hpp"
#include "rscale/stats_core.hpp"

namespace fs = std::filesystem;
using rscale::io::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Options {
  std::string input;
  std::string scale;
  std::string profile;
  std::string design;
  std::string baseline;
  std::string output;
  double alpha = 0.05;
  double eps_mono = 0.1;
  double pd_floor = 0.0005;
  rscale::Count n_obs = 0;
  std::string direction = "ascending";
  std::string n_grid;
  rscale::Count iterations = 10000;
  std::optional<std::uint64_t> seed;
  std::string criterion = "yellow";
  std::string mode = "exact";
  std::vector<double> epsilons;
  double eps_max = 0.18;
  double eps_step = 0.02;
  double budget = 0.01;
  bool fixed_concentrations = false;
  std::vector<double> pds;
  double corr = rscale::kDefaultCorrelation;
  unsigned threads = 1;
};

bool ci_mode() {
  const char* ci = std::getenv("CI");
  if (!ci) return false;
  const std::string v(ci);
  return !v.empty() && v != "0" && v != "false";
}

unsigned default_threads() {
  const char* env = std::getenv("RSCALE_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  rscale::detail::require(end && *end == '\0' && v >= 0, "cli_io.usage",
                          "RSCALE_THREADS must be a nonnegative integer");
  return static_cast<unsigned>(v);
}

int criterion_count(const std::string& c) {
  if (c == "yellow") return rscale::kYellowCriterion;
  if (c == "red") return rscale::kRedCriterion;
  char* end = nullptr;
  const long v = std::strtol(c.c_str(), &end, 10);
  rscale::detail::require(!c.empty() && *end == '\0' && v >= 1, "cli_io.usage",
                          "criterion must be yellow, red or a positive integer");
  return static_cast<int>(v);
}

rscale::WaldMode wald_mode(const std::string& m) {
  rscale::detail::require(m == "exact" || m == "asymptotic", "cli_io.usage",
                          "mode must be exact or asymptotic");
  return m == "exact" ? rscale::WaldMode::exact : rscale::WaldMode::asymptotic;
}

rscale::Direction direction(const std::string& d) {
  rscale::detail::require(d == "ascending" || d == "descending", "cli_io.usage",
                          "direction must be ascending or descending");
  return d == "ascending" ? rscale::Direction::ascending : rscale::Direction::descending;
}

std::vector<rscale::Count> parse_n_grid(const std::string& spec) {
  std::vector<rscale::Count> grid;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const long long v = std::strtoll(item.c_str(), &end, 10);
    rscale::detail::require(!item.empty() && *end == '\0' && v >= 1, "cli_io.usage",
                            "bad N in grid: '" + item + "'");
    grid.push_back(v);
  }
  rscale::detail::require(!grid.empty(), "cli_io.usage", "N grid is empty");
  return grid;
}

json provenance(const std::string& command, const Options& o) {
  json cfg = {{"alpha", o.alpha}, {"threads", o.threads}};
  auto put = [&](const char* key, const std::string& v) {
    if (!v.empty()) cfg[key] = v;
  };
  put("input", o.input);
  put("scale", o.scale);
  put("profile", o.profile);
  put("design", o.design);
  put("baseline", o.baseline);
  put("output", o.output);
  if (command == "smooth" || command == "report") {
    cfg["eps_mono"] = o.eps_mono;
    cfg["pd_floor"] = o.pd_floor;
  }
  if (command == "design" || command == "curves") cfg["direction"] = o.direction;
  if (o.n_obs > 0) cfg["N"] = o.n_obs;
  put("n_grid", o.n_grid);
  if (command == "simulate" || command == "sweep" || command == "savings") {
    cfg["iterations"] = o.iterations;
    cfg["criterion"] = o.criterion;
    cfg["mode"] = o.mode;
    cfg["fixed_concentrations"] = o.fixed_concentrations;
    cfg["seed"] = o.seed ? json(*o.seed) : json(nullptr);
    if (command == "simulate") cfg["epsilon"] = o.epsilons;
    if (command == "sweep") {
      cfg["eps_max"] = o.eps_max;
      cfg["eps_step"] = o.eps_step;
    }
    if (command == "savings") cfg["budget"] = o.budget;
  }
  if (command == "capital") cfg["corr"] = o.corr;
  return {{"tool", "rscale"}, {"version", kVersion}, {"command", command}, {"config", cfg}};
}

void emit_json(const Options& o, const json& j) {
  if (o.output.empty())
    std::cout << j.dump(2) << '\n';
  else
    rscale::io::write_json(o.output, j);
}

void emit_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  rscale::detail::require(static_cast<bool>(out), "cli_io.io", "cannot write " + path);
  out << text;
}

fs::path sidecar(const std::string& output, const std::string& suffix) {
  fs::path p(output);
  return p.parent_path() / (p.stem().string() + suffix);
}

void write_provenance(const std::string& output, const json& prov) {
  if (output.empty()) return;
  rscale::io::write_json(sidecar(output, ".provenance.json").string(), prov);
}

rscale::io::ScaleFile load_scale(const Options& o) {
  if (!o.scale.empty()) return rscale::io::scale_from_json(rscale::io::read_json(o.scale));
  rscale::detail::require(!o.input.empty(), "cli_io.usage", "need --input or --scale");
  auto obs = rscale::io::ingest_grades(o.input);
  auto scale = rscale::smooth_monotone(obs, o.eps_mono, o.pd_floor);
  return {std::move(scale), std::move(obs)};
}

rscale::RiskProfile load_profile(const Options& o) {
  if (!o.profile.empty()) return rscale::io::profile_from_json(rscale::io::read_json(o.profile));
  const auto f = load_scale(o);
  return rscale::profile_from_scale(f.scale, f.obs);
}

void require_seed(const Options& o) {
  if (ci_mode())
    rscale::detail::require(o.seed.has_value(), "cli_io.usage", "--seed is required when CI is set");
}

rscale::SimulationConfig sim_config(const Options& o, rscale::PortfolioSlice slice,
                                    rscale::Count n_obs) {
  rscale::SimulationConfig c;
  c.scale = std::move(slice);
  c.n_obs = n_obs;
  c.iterations = o.iterations;
  c.alpha = o.alpha;
  c.criterion = criterion_count(o.criterion);
  c.seed = o.seed.value_or(0);
  c.mode = wald_mode(o.mode);
  c.fixed_concentrations = o.fixed_concentrations;
  c.threads = o.threads;
  return c;
}

json outcome_json(const rscale::SimulationOutcome& out) {
  json pts = json::array();
  for (const auto& p : out.points)
    pts.push_back({{"epsilon", rscale::io::round12(p.epsilon)},
                   {"var_percent", rscale::io::round12(p.var_percent)},
                   {"bad_percent", rscale::io::round12(p.bad_percent)},
                   {"stderr", rscale::io::round12(p.std_error)},
                   {"failures", p.failures}});
  return {{"iterations", out.iterations},
          {"baseline_bad_percent", rscale::io::round12(out.baseline_bad_percent)},
          {"points", std::move(pts)}};
}

// Scale to simulate: a design, or a smoothed scale with its grade counts.
rscale::PortfolioSlice load_slice(const Options& o, rscale::Count* design_n) {
  if (!o.design.empty()) {
    const auto d = rscale::io::design_from_json(rscale::io::read_json(o.design));
    if (design_n) *design_n = d.n_obs;
    return rscale::slice_from_design(d);
  }
  const auto f = load_scale(o);
  if (design_n) *design_n = 0;
  return rscale::slice_from_scale(f.scale, f.obs);
}

int run_smooth(const Options& o) {
  rscale::detail::require(!o.input.empty(), "cli_io.usage", "smooth needs --input");
  const auto obs = rscale::io::ingest_grades(o.input);
  const auto scale = rscale::smooth_monotone(obs, o.eps_mono, o.pd_floor);
  auto j = rscale::io::to_json(scale, obs);
  j["provenance"] = provenance("smooth", o);
  emit_json(o, j);
  return 0;
}

int run_report(const Options& o) {
  const auto f = load_scale(o);
  const auto r = rscale::distinguishability_report(f.scale, f.obs, o.alpha);
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"rating", row.label},
                    {"dr", rscale::io::round12(row.dr)},
                    {"p_lo", rscale::io::round12(row.p_lo)},
                    {"p_star", rscale::io::round12(row.p_star)},
                    {"p_hi", rscale::io::round12(row.p_hi)},
                    {"n", row.n},
                    {"m_alpha", row.m_alpha ? json(*row.m_alpha) : json(nullptr)},
                    {"class", std::string(rscale::to_string(row.cls))},
                    {"distinguishable", row.distinguishable()}});
  json j = {{"alpha", r.alpha},
            {"rows", std::move(rows)},
            {"total_n", r.total_n},
            {"total_dr", rscale::io::round12(r.total_dr)},
            {"mean_p_star", rscale::io::round12(r.mean_p_star)},
            {"total_m_alpha", r.total_m_alpha},
            {"distinguishable_count", r.distinguishable_count},
            {"provenance", provenance("report", o)}};
  emit_json(o, j);
  return 0;
}

int run_profile(const Options& o) {
  const auto f = load_scale(o);
  auto j = rscale::io::to_json(rscale::profile_from_scale(f.scale, f.obs));
  j["provenance"] = provenance("profile", o);
  emit_json(o, j);
  return 0;
}

int run_design(const Options& o) {
  rscale::detail::require(o.n_obs >= 1, "cli_io.usage", "design needs --n-obs");
  const auto profile = load_profile(o);
  const auto d = rscale::design_scale(profile, o.n_obs, o.alpha, direction(o.direction));
  auto j = rscale::io::to_json(d);
  j["provenance"] = provenance("design", o);
  emit_json(o, j);
  return 0;
}

int run_curves(const Options& o) {
  const auto profile = load_profile(o);
  const auto grid = parse_n_grid(o.n_grid);
  const auto pts = rscale::design_curves(profile, grid, o.alpha, direction(o.direction));
  std::ostringstream csv;
  rscale::io::write_design_curves_csv(csv, pts);
  emit_text(o.output, csv.str());
  write_provenance(o.output, provenance("curves", o));
  return 0;
}

int run_simulate(const Options& o) {
  require_seed(o);
  rscale::Count design_n = 0;
  auto slice = load_slice(o, &design_n);
  const rscale::Count n = o.n_obs > 0 ? o.n_obs : design_n;
  rscale::detail::require(n >= 1, "cli_io.usage", "simulate needs --n-obs");
  auto c = sim_config(o, std::move(slice), n);
  if (!o.epsilons.empty()) c.epsilon_grid = o.epsilons;
  auto j = outcome_json(rscale::simulate_validation(c));
  j["N"] = n;
  j["provenance"] = provenance("simulate", o);
  emit_json(o, j);
  return 0;
}

int run_sweep(const Options& o) {
  require_seed(o);
  rscale::Count design_n = 0;
  auto slice = load_slice(o, &design_n);
  const rscale::Count n = o.n_obs > 0 ? o.n_obs : design_n;
  rscale::detail::require(n >= 1, "cli_io.usage", "sweep needs --n-obs");
  auto c = sim_config(o, std::move(slice), n);
  c.epsilon_grid = rscale::epsilon_grid(o.eps_max, o.eps_step);
  std::ostringstream csv;
  rscale::io::write_curve_csv(csv, rscale::sweep_epsilon(c));
  emit_text(o.output, csv.str());

  if (!o.design.empty() && !o.baseline.empty()) {
    rscale::detail::require(!o.output.empty(), "cli_io.usage",
                            "--baseline with --design needs --output");
    const auto f = rscale::io::scale_from_json(rscale::io::read_json(o.baseline));
    auto cb = c;
    cb.scale = rscale::slice_from_scale(f.scale, f.obs);
    std::ostringstream base;
    rscale::io::write_curve_csv(base, rscale::sweep_epsilon(cb));
    emit_text(sidecar(o.output, ".baseline.csv").string(), base.str());
  }
  write_provenance(o.output, provenance("sweep", o));
  return 0;
}

int run_savings(const Options& o) {
  require_seed(o);
  rscale::detail::require(!o.design.empty() && !o.baseline.empty(), "cli_io.usage",
                          "savings needs --design and --baseline");
  const auto d = rscale::io::design_from_json(rscale::io::read_json(o.design));
  const auto f = rscale::io::scale_from_json(rscale::io::read_json(o.baseline));
  rscale::SavingsConfig c;
  c.iterations = o.iterations;
  c.alpha = o.alpha;
  c.criterion = criterion_count(o.criterion);
  c.failure_budget = o.budget;
  c.seed = o.seed.value_or(0);
  c.mode = wald_mode(o.mode);
  c.fixed_concentrations = o.fixed_concentrations;
  c.threads = o.threads;
  const auto grid = o.n_grid.empty() ? std::vector<rscale::Count>{d.n_obs} : parse_n_grid(o.n_grid);
  const auto pts = rscale::capital_savings_at_budget(rscale::slice_from_scale(f.scale, f.obs),
                                                     rscale::slice_from_design(d), grid, c);
  std::ostringstream csv;
  rscale::io::write_savings_csv(csv, pts);
  emit_text(o.output, csv.str());
  write_provenance(o.output, provenance("savings", o));
  return 0;
}

int run_capital(const Options& o) {
  json j;
  if (!o.design.empty()) {
    const auto d = rscale::io::design_from_json(rscale::io::read_json(o.design));
    auto slice = rscale::slice_from_design(d, o.corr);
    json bands = json::array();
    for (std::size_t i = 0; i < slice.pds.size(); ++i)
      bands.push_back({{"pd", rscale::io::round12(slice.pds[i])},
                       {"mass", rscale::io::round12(slice.concentrations[i])},
                       {"capital", rscale::io::round12(rscale::irb_capital(slice.pds[i], o.corr))}});
    j = {{"bands", std::move(bands)},
         {"portfolio_capital", rscale::io::round12(rscale::portfolio_capital(slice))}};
  } else {
    rscale::detail::require(!o.pds.empty(), "cli_io.usage", "capital needs --pd or --design");
    json rows = json::array();
    for (double pd : o.pds)
      rows.push_back({{"pd", pd}, {"capital", rscale::io::round12(rscale::irb_capital(pd, o.corr))}});
    j = {{"rows", std::move(rows)}};
  }
  j["correlation"] = o.corr;
  j["provenance"] = provenance("capital", o);
  emit_json(o, j);
  return 0;
}

int fail_json(const std::string& code, const std::string& message) {
  json err = {{"error", {{"code", code}, {"message", message}}}};
  std::cerr << err.dump() << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Rating scale smoothing, design and validation. All rates are fractions."};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  auto add_scale_inputs = [&](CLI::App* sub) {
    sub->add_option("--input", o.input, "grade CSV with header rating,n,d");
    sub->add_option("--scale", o.scale, "smoothed scale JSON");
    sub->add_option("--eps-mono", o.eps_mono, "minimum log-gap between grades")
        ->check(CLI::Range(0.0, 10.0));
    sub->add_option("--pd-floor", o.pd_floor, "PD floor of the best grade")
        ->check(CLI::Range(0.0, 0.999999));
  };
  auto add_output = [&](CLI::App* sub) {
    sub->add_option("-o,--output", o.output, "output file (default stdout)");
  };
  auto add_alpha = [&](CLI::App* sub) {
    sub->add_option("--alpha", o.alpha, "significance level")
        ->check(CLI::Range(1e-12, 0.5));
  };
  auto add_sim = [&](CLI::App* sub) {
    sub->add_option("--design", o.design, "design JSON");
    sub->add_option("--n-obs", o.n_obs, "portfolio size N")->check(CLI::PositiveNumber);
    sub->add_option("-M,--iterations", o.iterations, "Monte Carlo iterations")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", o.seed, "64-bit seed");
    sub->add_option("--criterion", o.criterion, "yellow (C>=3), red (C>=5) or a count");
    sub->add_option("--mode", o.mode, "exact or asymptotic Wald test");
    sub->add_option("--threads", o.threads,
                    "worker threads (0 = all cores; default RSCALE_THREADS or 1)");
    sub->add_flag("--fixed-concentrations", o.fixed_concentrations,
                  "use N*mass per grade instead of multinomial draws");
    add_alpha(sub);
    add_output(sub);
  };

  auto* smooth = app.add_subcommand("smooth", "constrained-MLE smoothing of grade default rates");
  add_scale_inputs(smooth);
  add_output(smooth);

  auto* report = app.add_subcommand("report", "distinguishability report of a smoothed scale");
  add_scale_inputs(report);
  add_alpha(report);
  add_output(report);

  auto* profile = app.add_subcommand("profile", "risk profile from a smoothed scale");
  add_scale_inputs(profile);
  add_output(profile);

  auto* design = app.add_subcommand("design", "distinguishable scale design");
  design->add_option("--profile", o.profile, "profile JSON");
  add_scale_inputs(design);
  design->add_option("--n-obs", o.n_obs, "total observations N")
      ->required()
      ->check(CLI::PositiveNumber);
  design->add_option("--direction", o.direction, "ascending or descending");
  add_alpha(design);
  add_output(design);

  auto* curves = app.add_subcommand("curves", "G, p1 upper edge and HHI_adj over an N grid");
  curves->add_option("--profile", o.profile, "profile JSON");
  add_scale_inputs(curves);
  curves->add_option("--n-grid", o.n_grid, "comma-separated ascending N values")->required();
  curves->add_option("--direction", o.direction, "ascending or descending");
  add_alpha(curves);
  add_output(curves);

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo validation at given shifts");
  add_scale_inputs(simulate);
  add_sim(simulate);
  simulate->add_option("--epsilon", o.epsilons, "calibration shifts")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 0.999999));

  auto* sweep = app.add_subcommand("sweep", "BAD% against VAR% over an epsilon grid");
  add_scale_inputs(sweep);
  add_sim(sweep);
  sweep->add_option("--baseline", o.baseline, "smoothed scale JSON of the excessive scale");
  sweep->add_option("--eps-max", o.eps_max, "largest shift")->check(CLI::Range(0.0, 0.999999));
  sweep->add_option("--eps-step", o.eps_step, "grid step")->check(CLI::Range(1e-6, 1.0));

  auto* savings = app.add_subcommand("savings", "capital savings at a failure budget over N");
  add_sim(savings);
  savings->add_option("--baseline", o.baseline, "smoothed scale JSON of the excessive scale");
  savings->add_option("--n-grid", o.n_grid, "comma-separated N values");
  savings->add_option("--budget", o.budget, "failure budget")->check(CLI::Range(1e-9, 1.0));

  auto* capital = app.add_subcommand("capital", "IRB capital requirement");
  capital->add_option("--pd", o.pds, "PD values")->delimiter(',')->check(CLI::Range(0.0, 1.0));
  capital->add_option("--corr", o.corr, "asset correlation R")->check(CLI::Range(1e-9, 0.999999));
  capital->add_option("--design", o.design, "design JSON (batch mode)");
  add_output(capital);

  try {
    o.threads = default_threads();
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail_json("cli_io.usage", e.what());
  } catch (const rscale::Error& e) {
    return fail_json(e.code(), e.what());
  }

  try {
    if (*smooth) return run_smooth(o);
    if (*report) return run_report(o);
    if (*profile) return run_profile(o);
    if (*design) return run_design(o);
    if (*curves) return run_curves(o);
    if (*simulate) return run_simulate(o);
    if (*sweep) return run_sweep(o);
    if (*savings) return run_savings(o);
    if (*capital) return run_capital(o);
  } catch (const rscale::Error& e) {
    return fail_json(e.code(), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail_json("cli_io.parse", e.what());
  } catch (const std::exception& e) {
    return fail_json("cli_io.internal", e.what());
  }
  return 0;
}
