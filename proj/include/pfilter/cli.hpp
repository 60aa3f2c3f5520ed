#pragma once

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pfilter/engine.hpp"
#include "pfilter/io.hpp"
#include "pfilter/montecarlo.hpp"

namespace pfilter::cli {

// exit codes: 0 success, 1 internal error / failed check, 2 validation or
// parse failure, 3 oversize oracle instance
inline constexpr int kOk = 0;
inline constexpr int kInternal = 1;
inline constexpr int kInvalid = 2;
inline constexpr int kOversize = 3;

namespace cli_detail {

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline std::string plot_path_for(const std::string& output) {
  const auto dot = output.rfind('.');
  if (dot == std::string::npos) return output + ".plot.csv";
  return output.substr(0, dot) + ".plot.csv";
}

inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace cli_detail

inline int cmd_run(const std::string& input, const std::string& output,
                   const std::string& ic_override, double tolerance, double csv_alpha,
                   std::ostream& err) {
  bool defaulted = false;
  Problem problem;
  if (cli_detail::ends_with(input, ".csv")) {
    problem = load_csv_problem(input, csv_alpha);
  } else {
    problem = parse_problem(load_json(input), &defaulted);
  }
  if (defaulted) err << "note: missing weights field, defaulting w = u = 1\n";

  if (ic_override == "weak") problem.ic_mode = IcMode::Weak;
  else if (ic_override == "strong") problem.ic_mode = IcMode::Strong;
  else if (!ic_override.empty()) {
    err << "error: --ic must be 'weak' or 'strong'\n";
    return kInvalid;
  }

  const auto violations = validate(problem);
  if (!violations.empty()) {
    err << "error: input fails validation:\n";
    for (const auto& v : violations) err << "  " << v << "\n";
    return kInvalid;
  }

  EngineOptions options;
  options.tolerance = tolerance;
  const RejectionResult result = pfilter(problem, options);
  save_text(output, result_to_json(result).dump(2) + "\n");
  return kOk;
}

inline int cmd_simulate(const std::string& config, long reps, std::uint64_t seed,
                        const std::string& output, std::ostream& err) {
  if (reps < 1) {
    err << "error: --reps must be >= 1\n";
    return kInvalid;
  }
  SimScenario scenario = parse_scenario(load_json(config));
  scenario.model.seed = seed;

  {
    Problem check = scenario.problem;
    check.pvalues.assign(scenario.model.n, 0.5);
    const auto violations = validate(check);
    if (!violations.empty()) {
      err << "error: scenario fails validation:\n";
      for (const auto& v : violations) err << "  " << v << "\n";
      return kInvalid;
    }
  }

  const SimReport report = estimate_fdr(scenario.problem, scenario.model, reps);
  json doc = report_to_json(report);

  // plot data: alpha level vs estimated FDR per layer
  std::vector<double> grid = scenario.alpha_grid;
  if (grid.empty()) grid = {0.05, 0.1, 0.15, 0.2, 0.25};
  std::string csv = "alpha,layer,fdr,fdr_se,power,power_se\n";
  for (double alpha : grid) {
    Problem swept = scenario.problem;
    for (auto& layer : swept.layers) layer.alpha = alpha;
    const SimReport point = estimate_fdr(swept, scenario.model, reps);
    for (std::size_t m = 0; m < point.layers.size(); ++m) {
      const auto& e = point.layers[m];
      csv += cli_detail::format_g17(alpha) + "," + std::to_string(m) + "," +
             cli_detail::format_g17(e.fdr) + "," + cli_detail::format_g17(e.fdr_se) + "," +
             cli_detail::format_g17(e.power) + "," + cli_detail::format_g17(e.power_se) + "\n";
    }
  }

  save_text(output, doc.dump(2) + "\n");
  save_text(cli_detail::plot_path_for(output), csv);
  return kOk;
}

inline int cmd_oracle(const std::string& input, double tolerance, std::ostream& out,
                      std::ostream& err) {
  Problem problem = parse_problem(load_json(input));
  const auto violations = validate(problem);
  if (!violations.empty()) {
    err << "error: input fails validation:\n";
    for (const auto& v : violations) err << "  " << v << "\n";
    return kInvalid;
  }
  EngineOptions options;
  options.tolerance = tolerance;
  const RejectionResult result = pfilter(problem, options);
  const KVector oracle = oracle_max_corner(problem, options);

  out << "engine k_hat:";
  for (double v : result.k_hat) out << " " << cli_detail::format_g17(v);
  out << "\noracle k_hat:";
  for (double v : oracle) out << " " << cli_detail::format_g17(v);
  bool match = true;
  for (std::size_t m = 0; m < oracle.size(); ++m)
    if (std::fabs(oracle[m] - result.k_hat[m]) > 1e-9) match = false;
  out << "\nverdict: " << (match ? "match" : "MISMATCH") << "\n";
  return match ? kOk : kInternal;
}

inline int cmd_check_lemmas(const std::string& suite, long reps, std::uint64_t seed,
                            std::ostream& out, std::ostream& err) {
  if (reps < 1000) {
    err << "error: --reps must be >= 1000 for the lemma batteries\n";
    return kInvalid;
  }
  std::vector<CheckResult> checks;
  try {
    checks = run_lemma_suite(suite, reps, seed);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kInvalid;
  }
  bool all_pass = true;
  for (const auto& c : checks) {
    out << (c.pass ? "[pass] " : "[FAIL] ") << c.name << ": estimate "
        << cli_detail::format_g17(c.estimate) << " (SE " << cli_detail::format_g17(c.se)
        << "), " << c.criterion << "\n";
    if (!c.pass) all_pass = false;
  }
  return all_pass ? kOk : kInternal;
}

inline int run_main(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"p-filter: simultaneous multi-layer FDR control"};
  app.require_subcommand(1);

  std::string input, output = "pfilter_out.json", config, suite = "all", ic;
  long reps = 100000;
  std::uint64_t seed = 1;
  double tolerance = 1e-9;
  double csv_alpha = 0.05;

  auto* run = app.add_subcommand("run", "run the p-filter on a problem file");
  run->add_option("--input", input, "problem JSON (or flat CSV of p-values)")->required();
  run->add_option("--output", output, "result path");
  run->add_option("--ic", ic, "override internal consistency: weak|strong");
  run->add_option("--tolerance", tolerance, "fixed-point tolerance");
  run->add_option("--alpha", csv_alpha, "target FDR level for CSV input");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo FDR/power estimation");
  sim->add_option("--config", config, "scenario JSON")->required();
  sim->add_option("--reps", reps, "replications");
  sim->add_option("--seed", seed, "RNG seed");
  sim->add_option("--output", output, "report path (plot CSV goes next to it)");

  auto* orc = app.add_subcommand("oracle", "compare the engine against the brute-force corner");
  orc->add_option("--input", input, "problem JSON")->required();
  orc->add_option("--tolerance", tolerance, "comparison tolerance");

  auto* lem = app.add_subcommand("check-lemmas", "run the stochastic lemma batteries");
  lem->add_option("--suite", suite,
                  "superuniformity|group|inverse-binomial|simes-dist|all");
  lem->add_option("--reps", reps, "replications (>= 1000)");
  lem->add_option("--seed", seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalid;
  }

  try {
    if (run->parsed()) return cmd_run(input, output, ic, tolerance, csv_alpha, err);
    if (sim->parsed()) return cmd_simulate(config, reps, seed, output, err);
    if (orc->parsed()) return cmd_oracle(input, tolerance, out, err);
    if (lem->parsed()) return cmd_check_lemmas(suite, reps, seed, out, err);
  } catch (const oracle_size_error& e) {
    err << "error: " << e.what() << "\n";
    return kOversize;
  } catch (const parse_error& e) {
    err << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}

}  // namespace pfilter::cli
