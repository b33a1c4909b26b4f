/*
   Copyright 2026 The bifurk Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

// Command-line surface: simulate, fit, test, verify.
// Exit codes: 0 success, 1 internal failure (or a failed verdict under
// --strict), 2 usage error, 3 data error.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include <CLI11.hpp>

#include "bifurk/bar.hpp"
#include "bifurk/error.hpp"
#include "bifurk/experiments.hpp"
#include "bifurk/hypotest.hpp"
#include "bifurk/inference.hpp"
#include "bifurk/io.hpp"

namespace bifurk {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;

inline int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bifurcating autoregressive lineages: simulate, fit, test, verify", "bifurk"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  std::string params_path, data_path, out_path, plan_path, csv_path, which;
  unsigned depth = 0;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool constrain = false;
  bool strict = false;

  auto* sim = app.add_subcommand("simulate", "Simulate a complete BAR lineage of depth R");
  sim->add_option("--params", params_path, "BAR parameter JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--depth", depth, "Tree depth R (nodes 1 .. 2^(R+1)-1)")
      ->required()
      ->check(CLI::Range(0u, 26u));
  sim->add_option("--seed", seed, "Random seed")->required();
  sim->add_option("--out", out_path, "Output CSV")->required();

  auto* fit_cmd = app.add_subcommand("fit", "Least-squares fit of the BAR model");
  fit_cmd->add_option("--data", data_path, "Lineage CSV")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--out", out_path, "Output JSON")->required();
  fit_cmd->add_flag("--constrain-alpha-zero", constrain, "Fix alpha0 = alpha1 = 0");

  auto* test_cmd = app.add_subcommand("test", "Run one asymmetry test");
  test_cmd->add_option("--data", data_path, "Lineage CSV")->required()->check(CLI::ExistingFile);
  test_cmd->add_option("--which", which, "Test to run")
      ->required()
      ->check(CLI::IsMember({"equal-dynamics", "equal-alpha", "equal-beta",
                             "equal-fixed-point", "sister"}));
  test_cmd->add_option("--out", out_path, "Output JSON")->required();

  auto* verify = app.add_subcommand("verify", "Run a Monte Carlo experiment plan");
  verify->add_option("--plan", plan_path, "Experiment plan JSON")->required()->check(CLI::ExistingFile);
  verify->add_option("--out", out_path, "Output report JSON")->required();
  verify->add_option("--seed", seed, "Base seed")->required();
  verify->add_option("--csv", csv_path, "Per-replication CSV");
  verify->add_option("--threads", threads, "Worker threads (0: all cores)");
  verify->add_flag("--strict", strict, "Exit 1 when a verdict fails");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sim) {
      const BarModel m = read_params(params_path);
      const Lineage l(simulate_bar(m.params, m.root, depth, seed));
      write_lineage(l, std::filesystem::path(out_path));
      out << "wrote " << l.size() << " cells to " << out_path << '\n';
    } else if (*fit_cmd) {
      const FitResult f = fit(read_lineage(data_path), constrain);
      write_report(f, out_path);
      const auto se = f.standard_errors();
      const Theta& t = f.theta_hat;
      out << "theta_hat = (" << t.alpha0 << ", " << t.beta0 << ", " << t.alpha1 << ", "
          << t.beta1 << ") se (" << se[0] << ", " << se[1] << ", " << se[2] << ", " << se[3]
          << ")\n";
    } else if (*test_cmd) {
      const TestReport r = run_test(read_lineage(data_path), *parse_test_name(which));
      write_report(r, out_path);
      out << to_string(r.name) << ": statistic " << r.statistic << ", p-value " << r.p_value
          << '\n';
    } else if (*verify) {
      ExperimentPlan plan = read_plan(plan_path);
      plan.seed = seed;
      if (verify->count("--threads") > 0) plan.threads = threads;
      const ExperimentReport r = run_experiment(plan);
      write_report(r, out_path);
      if (!csv_path.empty()) write_records_csv(r, std::filesystem::path(csv_path));
      for (const auto& v : r.verdicts) {
        out << (v.passed ? "PASS " : "FAIL ") << v.rule << "  " << v.detail << '\n';
      }
      if (!r.limit_detected) out << "no limit detected\n";
      if (strict && !r.passed()) return kExitFailure;
    }
  } catch (const Error& e) {
    err << "bifurk: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "bifurk: internal error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace bifurk
