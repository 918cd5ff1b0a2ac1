/*
   Copyright 2026 the tokenwalk authors

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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "CLI11.hpp"
#include "tokenwalk/errors.hpp"
#include "tokenwalk/experiment.hpp"

namespace {

using namespace tokenwalk;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitSolver = 2;
constexpr int kExitTheorem = 3;

struct RunOverrides {
  std::string algorithm;
  double tau = 0.0;
  double rho = 0.0;
  double alpha = 0.0;
  int n_walks = 0;
  std::int64_t max_events = 0;
  std::uint64_t seed = 0;
  int fresh_tokens = -1;
  double inner_tol = 0.0;
  std::int64_t probe_interval = 0;
  std::string trace_path;
  std::string manifest_path;
};

// Flags take precedence over config-file keys.
void apply_overrides(const CLI::App& cmd, const RunOverrides& ov, ExperimentConfig& config) {
  if (cmd.count("--algorithm")) config.run.algorithm = algorithm_from_name(ov.algorithm);
  if (cmd.count("--tau")) config.run.tau = ov.tau;
  if (cmd.count("--rho")) config.run.rho = ov.rho;
  if (cmd.count("--alpha")) config.run.alpha = ov.alpha;
  if (cmd.count("--walks")) config.run.n_walks = ov.n_walks;
  if (cmd.count("--max-events")) config.run.max_events = ov.max_events;
  if (cmd.count("--seed")) config.run.seed = ov.seed;
  if (cmd.count("--fresh-tokens")) config.run.fresh_tokens = ov.fresh_tokens != 0;
  if (cmd.count("--inner-tol")) config.run.inner_tol = ov.inner_tol;
  if (cmd.count("--probe-interval")) config.probe_interval = ov.probe_interval;
  if (cmd.count("--trace")) config.output.trace_path = ov.trace_path;
  if (cmd.count("--manifest")) config.output.manifest_path = ov.manifest_path;
  config.run.validate(config.topology.n_agents);
}

int dispatch(int argc, char** argv) {
  CLI::App app{"tokenwalk: token-walk decentralized learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = default_out_dir();
  RunOverrides ov;

  CLI::App* run = app.add_subcommand("run", "execute one experiment (config or manifest)");
  run->add_option("--config", config_path, "JSON config or run manifest")->required();
  run->add_option("--outdir", out_dir, "output directory (default $TOKENWALK_OUTDIR)");
  run->add_option("--algorithm", ov.algorithm,
                  "override: ibcd|apibcd|gapibcd|wpg|centralized|sync-multi");
  run->add_option("--tau", ov.tau, "override penalty parameter");
  run->add_option("--rho", ov.rho, "override proximal parameter");
  run->add_option("--alpha", ov.alpha, "override wpg learning rate");
  run->add_option("--walks", ov.n_walks, "override walk count");
  run->add_option("--max-events", ov.max_events, "override event budget");
  run->add_option("--seed", ov.seed, "override master seed");
  run->add_option("--fresh-tokens", ov.fresh_tokens, "override fresh-token mode (0/1)");
  run->add_option("--inner-tol", ov.inner_tol, "override inner solver tolerance");
  run->add_option("--probe-interval", ov.probe_interval, "override probe interval");
  run->add_option("--trace", ov.trace_path, "override trace output path");
  run->add_option("--manifest", ov.manifest_path, "override manifest output path");

  CLI::App* compare = app.add_subcommand("compare", "run several algorithms on one instance");
  compare->add_option("--config", config_path, "JSON compare config")->required();
  compare->add_option("--outdir", out_dir, "output directory (default $TOKENWALK_OUTDIR)");
  std::string csv_override;
  compare->add_option("--csv", csv_override, "override comparison CSV path");

  CLI::App* verify = app.add_subcommand("verify", "descent-theorem verification sweep");
  verify->add_option("--config", config_path, "JSON verify config")->required();
  verify->add_option("--outdir", out_dir, "output directory (default $TOKENWALK_OUTDIR)");
  std::string theorem_override;
  verify->add_option("--theorem", theorem_override, "override theorem: thm1|thm2|thm3");
  std::string report_override;
  verify->add_option("--report", report_override, "override report path");

  CLI::App* gendata = app.add_subcommand("gendata", "write a synthetic LIBSVM dataset");
  std::string out_base;
  std::string task = "regression";
  GendataSpec spec;
  gendata->add_option("--out", out_base, "output base path (writes <out>.libsvm, <out>.truth.json)")
      ->required();
  gendata->add_option("--task", task, "regression|classification");
  gendata->add_option("--rows", spec.rows, "row count");
  gendata->add_option("--features", spec.features, "feature count");
  gendata->add_option("--noise", spec.noise_sigma, "regression noise sigma");
  gendata->add_option("--margin", spec.margin, "classification margin");
  gendata->add_option("--flip-prob", spec.flip_prob, "classification label flip probability");
  gendata->add_option("--seed", spec.seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    ExperimentConfig config = load_experiment_config(config_path);
    apply_overrides(*run, ov, config);
    auto [trace_path, manifest_path] = run_experiment_to_files(config, out_dir);
    std::printf("trace:    %s\nmanifest: %s\n", trace_path.c_str(), manifest_path.c_str());
    return kExitOk;
  }

  if (compare->parsed()) {
    CompareConfig config = load_compare_config(config_path);
    if (compare->count("--csv")) config.csv_path = csv_override;
    if (config.csv_path.empty()) config.csv_path = "compare.csv";
    ComparisonResult result = run_comparison(config);
    std::filesystem::path csv_path(config.csv_path);
    if (csv_path.is_relative() && !out_dir.empty()) {
      csv_path = std::filesystem::path(out_dir) / csv_path;
    }
    if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
    std::ofstream out(csv_path);
    if (!out) throw ValidationError("cannot write " + csv_path.string());
    write_comparison_csv(result, out);
    for (const auto& [label, sim] : result.runs) {
      if (sim.stop == StopReason::SolverFailure) {
        throw SolverError(label + ": " + sim.error, 0.0);
      }
      std::printf("%-12s events=%lld comm=%lld sim_time=%.6g\n", label.c_str(),
                  static_cast<long long>(sim.events),
                  static_cast<long long>(sim.ledger.comm_units), sim.ledger.sim_time);
    }
    std::printf("csv: %s\n", csv_path.string().c_str());
    return kExitOk;
  }

  if (verify->parsed()) {
    VerifyConfig config = load_verify_config(config_path);
    if (verify->count("--theorem")) {
      config.theorem = theorem_from_name(theorem_override);
      if (config.theorem == TheoremVariant::Thm1) config.walks = {1};
    }
    if (verify->count("--report")) config.report_path = report_override;
    const std::vector<VerifyRunReport> reports = run_verification(config);
    bool all_pass = true;
    for (const auto& r : reports) {
      std::printf("seed=%llu tau=%g rho=%g M=%d events=%lld min_slack=%.3e %s\n",
                  static_cast<unsigned long long>(r.seed), r.tau, r.rho, r.n_walks,
                  static_cast<long long>(r.events), r.min_slack, r.pass ? "PASS" : "FAIL");
      if (!r.pass) {
        all_pass = false;
        std::fprintf(stderr, "  violation: %s\n", r.first_violation.c_str());
      }
    }
    if (!config.report_path.empty()) {
      std::filesystem::path report_path(config.report_path);
      if (report_path.is_relative() && !out_dir.empty()) {
        report_path = std::filesystem::path(out_dir) / report_path;
      }
      if (report_path.has_parent_path()) {
        std::filesystem::create_directories(report_path.parent_path());
      }
      std::ofstream out(report_path);
      if (!out) throw ValidationError("cannot write " + report_path.string());
      out << verify_report_json(config, reports) << '\n';
      std::printf("report: %s\n", report_path.string().c_str());
    }
    if (!all_pass) {
      throw TheoremViolation("descent violated in " + std::to_string(reports.size()) +
                             "-run sweep; see report");
    }
    return kExitOk;
  }

  if (gendata->parsed()) {
    if (task == "regression") {
      spec.task = Task::Regression;
    } else if (task == "classification") {
      spec.task = Task::Classification;
    } else {
      throw ValidationError("unknown task \"" + task + "\"");
    }
    auto [libsvm_path, truth_path] = generate_data_files(spec, out_base);
    std::printf("data:  %s\ntruth: %s\n", libsvm_path.c_str(), truth_path.c_str());
    return kExitOk;
  }
  return kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const TheoremViolation& e) {
    std::fprintf(stderr, "theorem violation: %s\n", e.what());
    return kExitTheorem;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kExitSolver;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  }
}
