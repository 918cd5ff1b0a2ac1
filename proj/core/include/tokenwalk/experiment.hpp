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
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tokenwalk/simulator.hpp"

namespace tokenwalk {

struct TopologySpec {
  int n_agents = 2;
  double zeta = 1.0;
  bool require_cycle = false;
};

struct SyntheticSpec {
  Task task = Task::Regression;
  int rows = 100;
  int features = 10;
  double noise_sigma = 0.0;  // regression
  double margin = 0.5;       // classification
  double flip_prob = 0.0;    // classification
};

/// Either a LIBSVM file on disk or a synthetic generator.
struct DatasetSpec {
  std::optional<std::string> path;
  Task task = Task::Regression;
  std::optional<double> positive_label;  // one-vs-rest reduction for files
  std::optional<SyntheticSpec> synthetic;
};

struct OutputSpec {
  std::string trace_path;     // empty: derived from label/seed under the out dir
  std::string manifest_path;  // empty: alongside the trace
};

/// Full description of one run; parsed from strict JSON (unknown keys are
/// rejected) and echoed verbatim into the run manifest.
struct ExperimentConfig {
  std::string description;
  RunConfig run;
  double l2_reg = 0.0;
  TopologySpec topology;
  DatasetSpec dataset;
  PartitionScheme partition_scheme = PartitionScheme::IidEqual;
  NormalizeMode normalize_mode = NormalizeMode::None;
  double test_fraction = 0.2;
  std::int64_t probe_interval = 1;
  LatencyModel latency{};
  ComputeModel compute{};
  StoppingRule stopping{};
  OutputSpec output{};
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
/// Accepts either a config file or a previously written run manifest (the
/// embedded config is extracted), so a manifest reproduces its run.
ExperimentConfig load_experiment_config(const std::string& path);
std::string experiment_config_json(const ExperimentConfig& config);

/// Deterministic materialization of a config: topology, split/normalized
/// data, shards, and per-agent loss models. All randomness is derived from
/// the config's master seed.
struct PreparedExperiment {
  Topology topology;
  std::vector<LossModelPtr> models;
  Dataset train;
  Dataset test;
  std::optional<Eigen::VectorXd> true_model;
  PartitionResult shards;
  std::string topology_hash;
  std::string shards_hash;
};

PreparedExperiment prepare_experiment(const ExperimentConfig& config);

struct ExperimentResult {
  SimulationResult sim;
  std::string manifest_json;
};

ExperimentResult run_experiment(const ExperimentConfig& config, StepObserver observer = {});

/// Runs end-to-end and writes the trace CSV and manifest JSON. Relative
/// output paths resolve against out_dir when nonempty. Returns the two paths.
std::pair<std::string, std::string> run_experiment_to_files(const ExperimentConfig& config,
                                                            const std::string& out_dir);

// ---- compare ----

struct CompareConfig {
  std::string description;
  std::vector<std::string> labels;
  std::vector<ExperimentConfig> runs;  // base config with per-entry overrides applied
  std::string csv_path;
};

CompareConfig parse_compare_config(const std::string& json_text);
CompareConfig load_compare_config(const std::string& path);

struct ComparisonResult {
  std::vector<std::pair<std::string, SimulationResult>> runs;  // label -> result
};

/// Runs every entry on identical topology/shards/seed (entries may only vary
/// algorithm-family settings). Independent runs execute concurrently; output
/// order follows the config.
ComparisonResult run_comparison(const CompareConfig& config);
void write_comparison_csv(const ComparisonResult& result, std::ostream& out);

// ---- verify ----

struct VerifyConfig {
  std::string description;
  TheoremVariant theorem = TheoremVariant::Thm1;
  std::vector<std::uint64_t> seeds{0};
  std::int64_t iterations = 1000;
  LossKind loss = LossKind::LeastSquares;
  double inner_tol = 1e-10;
  std::vector<double> taus{1.0};
  std::vector<double> rhos{0.0};
  /// When set, each rho entry is a multiple of the measured smoothness L.
  bool rho_in_smoothness_units = false;
  std::vector<int> walks{1};
  TopologySpec topology{};
  SyntheticSpec synthetic{};
  SelectionRule selection = SelectionRule::Markov;
  TransitionPolicy transition_policy = TransitionPolicy::UniformNeighbors;
  double l2_reg = 0.0;
  std::string report_path;
};

VerifyConfig parse_verify_config(const std::string& json_text);
VerifyConfig load_verify_config(const std::string& path);

struct VerifyRunReport {
  std::uint64_t seed = 0;
  double tau = 0.0;
  double rho = 0.0;
  int n_walks = 1;
  std::int64_t events = 0;
  double min_slack = 0.0;
  std::int64_t violations = 0;
  std::string first_violation;
  bool pass = true;
};

/// Fresh-token sweep asserting the theorem's descent inequality on every
/// iteration; violations are collected, not thrown.
std::vector<VerifyRunReport> run_verification(const VerifyConfig& config);
std::string verify_report_json(const VerifyConfig& config,
                               std::span<const VerifyRunReport> reports);

// ---- gendata ----

struct GendataSpec {
  Task task = Task::Regression;
  int rows = 100;
  int features = 10;
  double noise_sigma = 0.1;
  double margin = 0.5;
  double flip_prob = 0.0;
  std::uint64_t seed = 0;
};

/// Writes <base>.libsvm plus a <base>.truth.json sidecar with the generating
/// model. Returns the two paths.
std::pair<std::string, std::string> generate_data_files(const GendataSpec& spec,
                                                        const std::string& base_path);

/// Value of TOKENWALK_OUTDIR, or empty.
std::string default_out_dir();

/// Name mappings shared by configs, manifests, and CLI flags.
AlgorithmKind algorithm_from_name(const std::string& name);
std::string to_name(AlgorithmKind algorithm);
TheoremVariant theorem_from_name(const std::string& name);
std::string to_name(TheoremVariant theorem);

}  // namespace tokenwalk
