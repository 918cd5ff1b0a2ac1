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
#include "tokenwalk/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tokenwalk/errors.hpp"
#include "tokenwalk/hash.hpp"

namespace tokenwalk {

namespace {

using json = nlohmann::ordered_json;

void require_keys(const json& j, const std::set<std::string>& allowed, const std::string& ctx) {
  if (!j.is_object()) throw ValidationError("config: " + ctx + " must be a JSON object");
  for (const auto& [key, unused] : j.items()) {
    if (!allowed.count(key)) {
      throw ValidationError("config: unknown key \"" + key + "\" in " + ctx);
    }
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError("config: bad value for \"" + std::string(key) + "\": " + e.what());
  }
}

// ---- enum <-> string ----

AlgorithmKind parse_algorithm(const std::string& s) {
  if (s == "ibcd") return AlgorithmKind::IBcd;
  if (s == "apibcd") return AlgorithmKind::ApiBcd;
  if (s == "gapibcd") return AlgorithmKind::GApiBcd;
  if (s == "wpg") return AlgorithmKind::Wpg;
  if (s == "centralized") return AlgorithmKind::Centralized;
  if (s == "sync-multi") return AlgorithmKind::SyncMulti;
  throw ValidationError("config: unknown algorithm \"" + s +
                        "\" (expected ibcd|apibcd|gapibcd|wpg|centralized|sync-multi)");
}

std::string algorithm_name(AlgorithmKind a) {
  switch (a) {
    case AlgorithmKind::IBcd: return "ibcd";
    case AlgorithmKind::ApiBcd: return "apibcd";
    case AlgorithmKind::GApiBcd: return "gapibcd";
    case AlgorithmKind::Wpg: return "wpg";
    case AlgorithmKind::Centralized: return "centralized";
    case AlgorithmKind::SyncMulti: return "sync-multi";
  }
  return "?";
}

SelectionRule parse_selection(const std::string& s) {
  if (s == "cyclic") return SelectionRule::Cyclic;
  if (s == "markov") return SelectionRule::Markov;
  throw ValidationError("config: unknown selection \"" + s + "\" (expected cyclic|markov)");
}

std::string selection_name(SelectionRule s) {
  return s == SelectionRule::Cyclic ? "cyclic" : "markov";
}

TransitionPolicy parse_policy(const std::string& s) {
  if (s == "uniform-neighbors") return TransitionPolicy::UniformNeighbors;
  if (s == "metropolis-hastings") return TransitionPolicy::MetropolisHastings;
  if (s == "include-self") return TransitionPolicy::IncludeSelf;
  throw ValidationError("config: unknown transition_policy \"" + s + "\"");
}

std::string policy_name(TransitionPolicy p) {
  switch (p) {
    case TransitionPolicy::UniformNeighbors: return "uniform-neighbors";
    case TransitionPolicy::MetropolisHastings: return "metropolis-hastings";
    case TransitionPolicy::IncludeSelf: return "include-self";
  }
  return "?";
}

Task parse_task(const std::string& s) {
  if (s == "regression") return Task::Regression;
  if (s == "classification") return Task::Classification;
  throw ValidationError("config: unknown task \"" + s + "\"");
}

std::string task_name(Task t) {
  return t == Task::Regression ? "regression" : "classification";
}

PartitionScheme parse_partition(const std::string& s) {
  if (s == "iid-equal") return PartitionScheme::IidEqual;
  if (s == "contiguous") return PartitionScheme::Contiguous;
  throw ValidationError("config: unknown partition \"" + s + "\"");
}

std::string partition_name(PartitionScheme p) {
  return p == PartitionScheme::IidEqual ? "iid-equal" : "contiguous";
}

NormalizeMode parse_normalize(const std::string& s) {
  if (s == "none") return NormalizeMode::None;
  if (s == "per-feature-standardize") return NormalizeMode::PerFeatureStandardize;
  if (s == "unit-row") return NormalizeMode::UnitRow;
  throw ValidationError("config: unknown normalize mode \"" + s + "\"");
}

std::string normalize_name(NormalizeMode m) {
  switch (m) {
    case NormalizeMode::None: return "none";
    case NormalizeMode::PerFeatureStandardize: return "per-feature-standardize";
    case NormalizeMode::UnitRow: return "unit-row";
  }
  return "?";
}

LossKind parse_loss(const std::string& s) {
  if (s == "least-squares") return LossKind::LeastSquares;
  if (s == "logistic") return LossKind::Logistic;
  throw ValidationError("config: unknown loss \"" + s + "\"");
}

TheoremVariant parse_theorem(const std::string& s) {
  if (s == "thm1") return TheoremVariant::Thm1;
  if (s == "thm2") return TheoremVariant::Thm2;
  if (s == "thm3") return TheoremVariant::Thm3;
  throw ValidationError("config: unknown theorem \"" + s + "\" (expected thm1|thm2|thm3)");
}

std::string theorem_name(TheoremVariant t) {
  switch (t) {
    case TheoremVariant::Thm1: return "thm1";
    case TheoremVariant::Thm2: return "thm2";
    case TheoremVariant::Thm3: return "thm3";
  }
  return "?";
}

std::string stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::MaxEvents: return "max-events";
    case StopReason::ObjectiveTol: return "objective-tol";
    case StopReason::NmseTarget: return "nmse-target";
    case StopReason::SolverFailure: return "solver-failure";
  }
  return "?";
}

json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

// ---- sub-object parsing ----

TopologySpec parse_topology_spec(const json& j) {
  require_keys(j, {"n_agents", "zeta", "require_cycle"}, "topology");
  TopologySpec spec;
  spec.n_agents = get_or<int>(j, "n_agents", spec.n_agents);
  spec.zeta = get_or<double>(j, "zeta", spec.zeta);
  spec.require_cycle = get_or<bool>(j, "require_cycle", spec.require_cycle);
  return spec;
}

SyntheticSpec parse_synthetic_spec(const json& j, Task task) {
  require_keys(j, {"task", "rows", "features", "noise_sigma", "margin", "flip_prob"},
               "dataset.synthetic");
  SyntheticSpec spec;
  spec.task = j.contains("task") ? parse_task(j.at("task").get<std::string>()) : task;
  spec.rows = get_or<int>(j, "rows", spec.rows);
  spec.features = get_or<int>(j, "features", spec.features);
  spec.noise_sigma = get_or<double>(j, "noise_sigma", spec.noise_sigma);
  spec.margin = get_or<double>(j, "margin", spec.margin);
  spec.flip_prob = get_or<double>(j, "flip_prob", spec.flip_prob);
  return spec;
}

DatasetSpec parse_dataset_spec(const json& j) {
  require_keys(j, {"path", "task", "positive_label", "synthetic"}, "dataset");
  DatasetSpec spec;
  if (j.contains("task")) spec.task = parse_task(j.at("task").get<std::string>());
  if (j.contains("path")) spec.path = j.at("path").get<std::string>();
  if (j.contains("positive_label")) spec.positive_label = j.at("positive_label").get<double>();
  if (j.contains("synthetic")) {
    spec.synthetic = parse_synthetic_spec(j.at("synthetic"), spec.task);
    spec.task = spec.synthetic->task;
  }
  if (spec.path.has_value() == spec.synthetic.has_value()) {
    throw ValidationError("config: dataset needs exactly one of \"path\" or \"synthetic\"");
  }
  return spec;
}

ComputeModel parse_compute(const json& j) {
  ComputeModel model;
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "measured") {
      model.kind = ComputeModelKind::Measured;
    } else if (s == "zero") {
      model.kind = ComputeModelKind::Zero;
    } else {
      throw ValidationError("config: compute must be \"measured\", \"zero\", or {\"constant\": c}");
    }
    return model;
  }
  require_keys(j, {"constant"}, "compute");
  if (!j.contains("constant")) {
    throw ValidationError("config: compute object needs a \"constant\" value");
  }
  model.kind = ComputeModelKind::Constant;
  model.constant = j.at("constant").get<double>();
  if (model.constant < 0.0) throw ValidationError("config: compute constant must be >= 0");
  return model;
}

json compute_to_json(const ComputeModel& model) {
  switch (model.kind) {
    case ComputeModelKind::Measured: return "measured";
    case ComputeModelKind::Zero: return "zero";
    case ComputeModelKind::Constant: return json{{"constant", model.constant}};
  }
  return nullptr;
}

StoppingRule parse_stopping(const json& j) {
  require_keys(j, {"mode", "tol", "target"}, "stopping");
  StoppingRule rule;
  const std::string mode = get_or<std::string>(j, "mode", "max-events");
  if (mode == "max-events") {
    rule.mode = StoppingMode::MaxEvents;
  } else if (mode == "objective-tol") {
    rule.mode = StoppingMode::ObjectiveTol;
    if (!j.contains("tol")) throw ValidationError("config: objective-tol stopping needs \"tol\"");
    rule.tol = j.at("tol").get<double>();
  } else if (mode == "nmse-target") {
    rule.mode = StoppingMode::NmseTarget;
    if (!j.contains("target")) {
      throw ValidationError("config: nmse-target stopping needs \"target\"");
    }
    rule.target = j.at("target").get<double>();
  } else {
    throw ValidationError("config: unknown stopping mode \"" + mode + "\"");
  }
  return rule;
}

json stopping_to_json(const StoppingRule& rule) {
  switch (rule.mode) {
    case StoppingMode::MaxEvents: return json{{"mode", "max-events"}};
    case StoppingMode::ObjectiveTol: return json{{"mode", "objective-tol"}, {"tol", rule.tol}};
    case StoppingMode::NmseTarget: return json{{"mode", "nmse-target"}, {"target", rule.target}};
  }
  return nullptr;
}

const std::set<std::string> kExperimentKeys = {
    "description", "algorithm",   "tau",           "rho",
    "alpha",       "n_walks",     "fresh_tokens",  "max_events",
    "seed",        "selection",   "transition_policy", "inner_tol",
    "l2_reg",      "topology",    "dataset",       "partition",
    "normalize",   "test_fraction", "probe_interval", "latency",
    "compute",     "stopping",    "output"};

ExperimentConfig parse_experiment_json(const json& doc) {
  require_keys(doc, kExperimentKeys, "config");
  ExperimentConfig config;
  config.description = get_or<std::string>(doc, "description", "");
  if (doc.contains("algorithm")) {
    config.run.algorithm = parse_algorithm(doc.at("algorithm").get<std::string>());
  }
  config.run.tau = get_or<double>(doc, "tau", config.run.tau);
  config.run.rho = get_or<double>(doc, "rho", config.run.rho);
  config.run.alpha = get_or<double>(doc, "alpha", config.run.alpha);
  config.run.n_walks = get_or<int>(doc, "n_walks", config.run.n_walks);
  config.run.fresh_tokens = get_or<bool>(doc, "fresh_tokens", config.run.fresh_tokens);
  config.run.max_events = get_or<std::int64_t>(doc, "max_events", config.run.max_events);
  config.run.seed = get_or<std::uint64_t>(doc, "seed", config.run.seed);
  if (doc.contains("selection")) {
    config.run.selection = parse_selection(doc.at("selection").get<std::string>());
  }
  if (doc.contains("transition_policy")) {
    config.run.transition_policy = parse_policy(doc.at("transition_policy").get<std::string>());
  }
  config.run.inner_tol = get_or<double>(doc, "inner_tol", config.run.inner_tol);
  config.l2_reg = get_or<double>(doc, "l2_reg", config.l2_reg);
  if (!doc.contains("topology")) throw ValidationError("config: missing \"topology\"");
  config.topology = parse_topology_spec(doc.at("topology"));
  if (!doc.contains("dataset")) throw ValidationError("config: missing \"dataset\"");
  config.dataset = parse_dataset_spec(doc.at("dataset"));
  if (doc.contains("partition")) {
    config.partition_scheme = parse_partition(doc.at("partition").get<std::string>());
  }
  if (doc.contains("normalize")) {
    config.normalize_mode = parse_normalize(doc.at("normalize").get<std::string>());
  }
  config.test_fraction = get_or<double>(doc, "test_fraction", config.test_fraction);
  config.probe_interval = get_or<std::int64_t>(doc, "probe_interval", config.probe_interval);
  if (doc.contains("latency")) {
    const json& lat = doc.at("latency");
    require_keys(lat, {"low", "high"}, "latency");
    config.latency.low = get_or<double>(lat, "low", config.latency.low);
    config.latency.high = get_or<double>(lat, "high", config.latency.high);
    if (config.latency.low < 0.0 || config.latency.high < config.latency.low) {
      throw ValidationError("config: latency bounds need 0 <= low <= high");
    }
  }
  if (doc.contains("compute")) config.compute = parse_compute(doc.at("compute"));
  if (doc.contains("stopping")) config.stopping = parse_stopping(doc.at("stopping"));
  if (doc.contains("output")) {
    const json& out = doc.at("output");
    require_keys(out, {"trace", "manifest"}, "output");
    config.output.trace_path = get_or<std::string>(out, "trace", "");
    config.output.manifest_path = get_or<std::string>(out, "manifest", "");
  }

  if (config.topology.n_agents < 2) throw ValidationError("config: n_agents must be >= 2");
  if (!(config.topology.zeta > 0.0) || config.topology.zeta > 1.0) {
    throw ValidationError("config: zeta must be in (0, 1]");
  }
  if (config.test_fraction < 0.0 || config.test_fraction >= 1.0) {
    throw ValidationError("config: test_fraction must be in [0, 1)");
  }
  if (config.probe_interval < 1) throw ValidationError("config: probe_interval must be >= 1");
  if (config.l2_reg < 0.0) throw ValidationError("config: l2_reg must be >= 0");
  if (config.run.selection == SelectionRule::Cyclic && !config.topology.require_cycle) {
    throw ValidationError("config: cyclic selection requires topology.require_cycle=true");
  }
  config.run.validate(config.topology.n_agents);
  return config;
}

json experiment_to_json(const ExperimentConfig& config) {
  json doc;
  if (!config.description.empty()) doc["description"] = config.description;
  doc["algorithm"] = algorithm_name(config.run.algorithm);
  doc["tau"] = config.run.tau;
  doc["rho"] = config.run.rho;
  doc["alpha"] = config.run.alpha;
  doc["n_walks"] = config.run.n_walks;
  doc["fresh_tokens"] = config.run.fresh_tokens;
  doc["max_events"] = config.run.max_events;
  doc["seed"] = config.run.seed;
  doc["selection"] = selection_name(config.run.selection);
  doc["transition_policy"] = policy_name(config.run.transition_policy);
  doc["inner_tol"] = config.run.inner_tol;
  doc["l2_reg"] = config.l2_reg;
  doc["topology"] = {{"n_agents", config.topology.n_agents},
                     {"zeta", config.topology.zeta},
                     {"require_cycle", config.topology.require_cycle}};
  json dataset;
  dataset["task"] = task_name(config.dataset.task);
  if (config.dataset.path) dataset["path"] = *config.dataset.path;
  if (config.dataset.positive_label) dataset["positive_label"] = *config.dataset.positive_label;
  if (config.dataset.synthetic) {
    const SyntheticSpec& s = *config.dataset.synthetic;
    dataset["synthetic"] = {{"task", task_name(s.task)}, {"rows", s.rows},
                            {"features", s.features},   {"noise_sigma", s.noise_sigma},
                            {"margin", s.margin},       {"flip_prob", s.flip_prob}};
  }
  doc["dataset"] = dataset;
  doc["partition"] = partition_name(config.partition_scheme);
  doc["normalize"] = normalize_name(config.normalize_mode);
  doc["test_fraction"] = config.test_fraction;
  doc["probe_interval"] = config.probe_interval;
  doc["latency"] = {{"low", config.latency.low}, {"high", config.latency.high}};
  doc["compute"] = compute_to_json(config.compute);
  doc["stopping"] = stopping_to_json(config.stopping);
  if (!config.output.trace_path.empty() || !config.output.manifest_path.empty()) {
    json out;
    if (!config.output.trace_path.empty()) out["trace"] = config.output.trace_path;
    if (!config.output.manifest_path.empty()) out["manifest"] = config.output.manifest_path;
    doc["output"] = out;
  }
  return doc;
}

json parse_json_text(const std::string& text, const std::string& ctx) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(ctx + ": " + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path resolve_path(const std::string& path, const std::string& out_dir) {
  std::filesystem::path p(path);
  if (p.is_absolute() || out_dir.empty()) return p;
  return std::filesystem::path(out_dir) / p;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  return parse_experiment_json(parse_json_text(json_text, "config"));
}

ExperimentConfig load_experiment_config(const std::string& path) {
  json doc = parse_json_text(read_file(path), path);
  if (doc.is_object() && doc.contains("manifest_version")) {
    if (!doc.contains("config")) {
      throw ValidationError(path + ": manifest has no embedded config");
    }
    doc = doc.at("config");
  }
  return parse_experiment_json(doc);
}

std::string experiment_config_json(const ExperimentConfig& config) {
  return experiment_to_json(config).dump(2);
}

PreparedExperiment prepare_experiment(const ExperimentConfig& config) {
  PreparedExperiment prep;
  prep.topology = generate_topology(config.topology.n_agents, config.topology.zeta,
                                    config.run.seed, config.topology.require_cycle);
  {
    std::string canonical = to_edge_list(prep.topology);
    if (prep.topology.cycle_order) {
      canonical += "cycle";
      for (int v : *prep.topology.cycle_order) canonical += ' ' + std::to_string(v);
      canonical += '\n';
    }
    prep.topology_hash = sha1_hex(canonical);
  }

  Dataset full;
  if (config.dataset.synthetic) {
    const SyntheticSpec& s = *config.dataset.synthetic;
    if (s.task == Task::Regression) {
      RegressionData data =
          synthesize_regression(s.rows, s.features, s.noise_sigma, config.run.seed);
      full = std::move(data.dataset);
      prep.true_model = std::move(data.true_model);
    } else {
      ClassificationData data = synthesize_classification(s.rows, s.features, s.margin,
                                                          config.run.seed, s.flip_prob);
      full = std::move(data.dataset);
    }
  } else {
    std::ifstream in(*config.dataset.path);
    if (!in) throw ValidationError("cannot open dataset " + *config.dataset.path);
    full = parse_libsvm(in, config.dataset.task);
    if (config.dataset.task == Task::Classification) {
      if (config.dataset.positive_label) {
        full = to_binary_labels(full, *config.dataset.positive_label);
      }
    }
    full.validate();
  }

  auto [train, test] = train_test_split(full, config.test_fraction, config.run.seed);
  auto [train_norm, params] = normalize(train, config.normalize_mode);
  prep.train = std::move(train_norm);
  prep.test = apply_normalization(test, params);

  prep.shards =
      partition(prep.train, config.topology.n_agents, config.partition_scheme, config.run.seed);
  {
    std::string bytes;
    for (const auto& shard : prep.shards.shards) {
      Dataset view;
      view.rows = shard.rows;
      view.labels = shard.labels;
      view.n_features = shard.n_features;
      bytes += "shard " + std::to_string(shard.owner) + "\n" + to_libsvm(view);
    }
    prep.shards_hash = sha1_hex(bytes);
  }

  const LossKind kind =
      config.dataset.task == Task::Regression ? LossKind::LeastSquares : LossKind::Logistic;
  for (auto& shard : prep.shards.shards) {
    prep.models.push_back(make_loss_model(kind, shard, config.l2_reg));
  }
  return prep;
}

namespace {

json build_manifest(const ExperimentConfig& config, const PreparedExperiment& prep,
                    const SimulationResult& sim) {
  json manifest;
  manifest["manifest_version"] = 1;
  manifest["config"] = experiment_to_json(config);
  manifest["topology"] = {{"n_agents", prep.topology.n_agents},
                          {"n_edges", prep.topology.edges.size()},
                          {"hash", prep.topology_hash}};
  json sizes = json::array();
  json rows = json::array();
  for (std::size_t a = 0; a < prep.shards.shards.size(); ++a) {
    sizes.push_back(prep.shards.shards[a].size());
    rows.push_back(prep.shards.row_indices[a]);
  }
  manifest["data"] = {{"train_rows", prep.train.size()},
                      {"test_rows", prep.test.size()},
                      {"n_features", prep.train.n_features},
                      {"shards_hash", prep.shards_hash},
                      {"shard_sizes", sizes},
                      {"shard_row_indices", rows}};
  json result;
  result["events"] = sim.events;
  result["stop"] = stop_reason_name(sim.stop);
  if (!sim.error.empty()) result["error"] = sim.error;
  result["sim_time_s"] = sim.ledger.sim_time;
  result["comm_units"] = sim.ledger.comm_units;
  result["compute_time_total_s"] = sim.ledger.compute_time_total;
  if (!sim.trace.empty()) {
    const TraceRecord& last = sim.trace.back();
    result["final_objective"] = finite_or_null(last.objective);
    result["final_train_metric"] = finite_or_null(last.train_metric);
    result["final_test_metric"] = finite_or_null(last.test_metric);
    result["final_consensus_gap"] = finite_or_null(last.consensus_gap);
  }
  json per_token = json::array();
  for (double v : sim.per_token_test_metric) per_token.push_back(finite_or_null(v));
  result["per_token_test_metric"] = per_token;
  result["parameter_nmse"] = finite_or_null(sim.final_parameter_nmse);
  manifest["result"] = result;
  return manifest;
}

SimulationOptions options_from_config(const ExperimentConfig& config,
                                      const PreparedExperiment& prep, StepObserver observer) {
  SimulationOptions options;
  options.latency = config.latency;
  options.compute = config.compute;
  options.probe_interval = config.probe_interval;
  options.stopping = config.stopping;
  options.eval.train = &prep.train;
  options.eval.test = prep.test.size() > 0 ? &prep.test : nullptr;
  if (prep.true_model) options.eval.true_model = &*prep.true_model;
  options.observer = std::move(observer);
  return options;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, StepObserver observer) {
  const PreparedExperiment prep = prepare_experiment(config);
  const SimulationOptions options = options_from_config(config, prep, std::move(observer));
  ExperimentResult result;
  result.sim = run_simulation(config.run, prep.topology, prep.models, options);
  result.manifest_json = build_manifest(config, prep, result.sim).dump(2);
  return result;
}

std::pair<std::string, std::string> run_experiment_to_files(const ExperimentConfig& config,
                                                            const std::string& out_dir) {
  ExperimentResult result = run_experiment(config);

  std::string stem = config.description.empty()
                         ? algorithm_name(config.run.algorithm) + "_seed" +
                               std::to_string(config.run.seed)
                         : config.description;
  std::replace_if(
      stem.begin(), stem.end(), [](char c) { return c == ' ' || c == '/' || c == '\\'; }, '_');
  const std::string trace_name =
      config.output.trace_path.empty() ? stem + ".trace.csv" : config.output.trace_path;
  const std::string manifest_name =
      config.output.manifest_path.empty() ? stem + ".manifest.json" : config.output.manifest_path;

  const std::filesystem::path trace_path = resolve_path(trace_name, out_dir);
  const std::filesystem::path manifest_path = resolve_path(manifest_name, out_dir);
  for (const auto& p : {trace_path, manifest_path}) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  }
  {
    std::ofstream out(trace_path);
    if (!out) throw ValidationError("cannot write " + trace_path.string());
    write_trace_csv(result.sim.trace, out);
  }
  {
    std::ofstream out(manifest_path);
    if (!out) throw ValidationError("cannot write " + manifest_path.string());
    out << result.manifest_json << '\n';
  }
  if (result.sim.stop == StopReason::SolverFailure) {
    throw SolverError("run aborted: " + result.sim.error, 0.0);
  }
  return {trace_path.string(), manifest_path.string()};
}

// ---- compare ----

namespace {

const std::set<std::string> kCompareOverrideKeys = {
    "label", "algorithm", "tau", "rho", "alpha", "n_walks", "fresh_tokens", "inner_tol"};

}  // namespace

CompareConfig parse_compare_config(const std::string& json_text) {
  const json doc = parse_json_text(json_text, "compare config");
  require_keys(doc, {"description", "base", "algorithms", "output"}, "compare config");
  CompareConfig config;
  config.description = get_or<std::string>(doc, "description", "");
  if (!doc.contains("base")) throw ValidationError("compare config: missing \"base\"");
  if (!doc.contains("algorithms") || !doc.at("algorithms").is_array() ||
      doc.at("algorithms").empty()) {
    throw ValidationError("compare config: \"algorithms\" must be a nonempty array");
  }
  if (doc.contains("output")) {
    const json& out = doc.at("output");
    require_keys(out, {"csv"}, "compare output");
    config.csv_path = get_or<std::string>(out, "csv", "");
  }
  for (const json& entry : doc.at("algorithms")) {
    require_keys(entry, kCompareOverrideKeys, "algorithms[] entry");
    json merged = doc.at("base");
    for (const auto& [key, value] : entry.items()) {
      if (key != "label") merged[key] = value;
    }
    ExperimentConfig run = parse_experiment_json(merged);
    std::string label = get_or<std::string>(entry, "label", algorithm_name(run.run.algorithm));
    if (std::find(config.labels.begin(), config.labels.end(), label) != config.labels.end()) {
      throw ValidationError("compare config: duplicate label \"" + label +
                            "\" (give entries distinct \"label\" values)");
    }
    config.labels.push_back(std::move(label));
    config.runs.push_back(std::move(run));
  }
  return config;
}

CompareConfig load_compare_config(const std::string& path) {
  return parse_compare_config(read_file(path));
}

ComparisonResult run_comparison(const CompareConfig& config) {
  std::vector<std::future<SimulationResult>> futures;
  futures.reserve(config.runs.size());
  for (const ExperimentConfig& run : config.runs) {
    futures.push_back(std::async(std::launch::async, [&run] {
      return run_experiment(run).sim;
    }));
  }
  ComparisonResult result;
  for (std::size_t i = 0; i < futures.size(); ++i) {
    result.runs.emplace_back(config.labels[i], futures[i].get());
  }
  return result;
}

void write_comparison_csv(const ComparisonResult& result, std::ostream& out) {
  out << "algorithm,event,sim_time_s,comm_units,walk_id,agent,objective,train_metric,"
         "test_metric\n";
  char buf[64];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& [label, sim] : result.runs) {
    for (const TraceRecord& r : sim.trace) {
      out << label << ',' << r.event << ',' << fmt(r.sim_time_s) << ',' << r.comm_units << ','
          << r.walk_id << ',' << r.agent << ',' << fmt(r.objective) << ','
          << fmt(r.train_metric) << ',' << fmt(r.test_metric) << '\n';
    }
  }
}

// ---- verify ----

VerifyConfig parse_verify_config(const std::string& json_text) {
  const json doc = parse_json_text(json_text, "verify config");
  require_keys(doc,
               {"description", "theorem", "seeds", "iterations", "loss", "inner_tol", "taus",
                "rhos", "rho_in_smoothness_units", "walks", "topology", "synthetic",
                "selection", "transition_policy", "l2_reg", "output"},
               "verify config");
  VerifyConfig config;
  config.description = get_or<std::string>(doc, "description", "");
  if (!doc.contains("theorem")) throw ValidationError("verify config: missing \"theorem\"");
  config.theorem = parse_theorem(doc.at("theorem").get<std::string>());
  if (doc.contains("seeds")) {
    const json& seeds = doc.at("seeds");
    if (seeds.is_array()) {
      config.seeds = seeds.get<std::vector<std::uint64_t>>();
    } else {
      require_keys(seeds, {"count", "base"}, "seeds");
      const auto count = get_or<std::uint64_t>(seeds, "count", 1);
      const auto base = get_or<std::uint64_t>(seeds, "base", 0);
      config.seeds.clear();
      for (std::uint64_t s = 0; s < count; ++s) config.seeds.push_back(base + s);
    }
  }
  if (config.seeds.empty()) throw ValidationError("verify config: empty seed list");
  config.iterations = get_or<std::int64_t>(doc, "iterations", config.iterations);
  if (config.iterations < 0) throw ValidationError("verify config: iterations must be >= 0");
  if (doc.contains("loss")) config.loss = parse_loss(doc.at("loss").get<std::string>());
  config.inner_tol = get_or<double>(doc, "inner_tol", config.inner_tol);
  if (doc.contains("taus")) config.taus = doc.at("taus").get<std::vector<double>>();
  if (doc.contains("rhos")) config.rhos = doc.at("rhos").get<std::vector<double>>();
  config.rho_in_smoothness_units =
      get_or<bool>(doc, "rho_in_smoothness_units", config.rho_in_smoothness_units);
  if (doc.contains("walks")) config.walks = doc.at("walks").get<std::vector<int>>();
  if (doc.contains("topology")) config.topology = parse_topology_spec(doc.at("topology"));
  if (doc.contains("synthetic")) {
    config.synthetic = parse_synthetic_spec(
        doc.at("synthetic"),
        config.loss == LossKind::LeastSquares ? Task::Regression : Task::Classification);
  }
  config.synthetic.task =
      config.loss == LossKind::LeastSquares ? Task::Regression : Task::Classification;
  if (doc.contains("selection")) {
    config.selection = parse_selection(doc.at("selection").get<std::string>());
  }
  if (doc.contains("transition_policy")) {
    config.transition_policy = parse_policy(doc.at("transition_policy").get<std::string>());
  }
  config.l2_reg = get_or<double>(doc, "l2_reg", config.l2_reg);
  if (doc.contains("output")) {
    const json& out = doc.at("output");
    require_keys(out, {"report"}, "verify output");
    config.report_path = get_or<std::string>(out, "report", "");
  }
  if (config.theorem == TheoremVariant::Thm1) config.walks = {1};
  if (config.theorem != TheoremVariant::Thm3) config.rhos = {0.0};
  return config;
}

VerifyConfig load_verify_config(const std::string& path) {
  return parse_verify_config(read_file(path));
}

std::vector<VerifyRunReport> run_verification(const VerifyConfig& config) {
  std::vector<VerifyRunReport> reports;
  for (std::uint64_t seed : config.seeds) {
    // One instance (topology + data + shards) per seed, shared by the sweep.
    ExperimentConfig base;
    base.run.seed = seed;
    base.run.selection = config.selection;
    base.run.transition_policy = config.transition_policy;
    base.topology = config.topology;
    base.dataset.task = config.synthetic.task;
    base.dataset.synthetic = config.synthetic;
    base.l2_reg = config.l2_reg;
    base.test_fraction = 0.0;  // theorem checks need no held-out split
    const PreparedExperiment prep = prepare_experiment(base);

    double smoothness = 0.0;
    for (const auto& model : prep.models) {
      smoothness = std::max(smoothness, model->estimate_smoothness());
    }

    for (double tau : config.taus) {
      for (double rho_raw : config.rhos) {
        const double rho = config.rho_in_smoothness_units ? rho_raw * smoothness : rho_raw;
        for (int walks : config.walks) {
          RunConfig run;
          run.seed = seed;
          run.selection = config.selection;
          run.transition_policy = config.transition_policy;
          run.tau = tau;
          run.rho = rho;
          run.n_walks = walks;
          run.fresh_tokens = true;
          run.max_events = config.iterations;
          run.inner_tol = config.inner_tol;
          switch (config.theorem) {
            case TheoremVariant::Thm1:
              run.algorithm = AlgorithmKind::IBcd;
              break;
            case TheoremVariant::Thm2:
              run.algorithm = AlgorithmKind::ApiBcd;
              break;
            case TheoremVariant::Thm3:
              run.algorithm = AlgorithmKind::GApiBcd;
              break;
          }

          VerifyRunReport report;
          report.seed = seed;
          report.tau = tau;
          report.rho = rho;
          report.n_walks = walks;
          report.min_slack = std::numeric_limits<double>::infinity();

          const int n_agents = config.topology.n_agents;
          const TheoremVariant theorem = config.theorem;
          StepObserver observer = [&report, tau, rho, smoothness, n_agents, theorem](
                                      const StepReport& step, const RunState&) {
            const DescentCheck check =
                check_descent(step.objective_before, step.objective_after, *step.delta_x,
                              step.delta_z, tau, rho, smoothness, n_agents, theorem);
            report.min_slack = std::min(report.min_slack, check.slack);
            if (!check.pass) {
              ++report.violations;
              if (report.first_violation.empty()) {
                report.first_violation =
                    "event " + std::to_string(step.event) + ": dF=" +
                    std::to_string(check.delta_f) + " > bound=" +
                    std::to_string(check.bound_rhs) + " + tol=" +
                    std::to_string(check.tolerance);
              }
            }
          };

          SimulationOptions options;
          options.latency = LatencyModel{0.0, 0.0};
          options.compute = ComputeModel{ComputeModelKind::Zero, 0.0};
          options.probe_interval = std::max<std::int64_t>(config.iterations, 1);
          options.observer = observer;
          const SimulationResult sim =
              run_simulation(run, prep.topology, prep.models, options);
          report.events = sim.events;
          report.pass = report.violations == 0 && sim.stop != StopReason::SolverFailure;
          if (sim.stop == StopReason::SolverFailure && report.first_violation.empty()) {
            report.first_violation = sim.error;
          }
          if (!std::isfinite(report.min_slack)) report.min_slack = 0.0;  // 0-iteration run
          reports.push_back(std::move(report));
        }
      }
    }
  }
  return reports;
}

std::string verify_report_json(const VerifyConfig& config,
                               std::span<const VerifyRunReport> reports) {
  json doc;
  doc["theorem"] = theorem_name(config.theorem);
  if (!config.description.empty()) doc["description"] = config.description;
  json runs = json::array();
  bool all_pass = true;
  for (const auto& r : reports) {
    json run;
    run["seed"] = r.seed;
    run["tau"] = r.tau;
    run["rho"] = r.rho;
    run["n_walks"] = r.n_walks;
    run["events"] = r.events;
    run["min_slack"] = finite_or_null(r.min_slack);
    run["violations"] = r.violations;
    if (!r.first_violation.empty()) run["first_violation"] = r.first_violation;
    run["pass"] = r.pass;
    all_pass = all_pass && r.pass;
    runs.push_back(std::move(run));
  }
  doc["runs"] = runs;
  doc["all_pass"] = all_pass;
  return doc.dump(2);
}

// ---- gendata ----

std::pair<std::string, std::string> generate_data_files(const GendataSpec& spec,
                                                        const std::string& base_path) {
  if (base_path.empty()) throw ValidationError("gendata: empty output path");
  const std::filesystem::path libsvm_path = base_path + ".libsvm";
  const std::filesystem::path truth_path = base_path + ".truth.json";
  if (libsvm_path.has_parent_path()) {
    std::filesystem::create_directories(libsvm_path.parent_path());
  }

  json truth;
  truth["seed"] = spec.seed;
  truth["rows"] = spec.rows;
  truth["features"] = spec.features;
  truth["task"] = task_name(spec.task);
  Dataset dataset;
  if (spec.task == Task::Regression) {
    RegressionData data =
        synthesize_regression(spec.rows, spec.features, spec.noise_sigma, spec.seed);
    dataset = std::move(data.dataset);
    truth["noise_sigma"] = spec.noise_sigma;
    truth["true_model"] = std::vector<double>(
        data.true_model.data(), data.true_model.data() + data.true_model.size());
  } else {
    ClassificationData data = synthesize_classification(spec.rows, spec.features, spec.margin,
                                                        spec.seed, spec.flip_prob);
    dataset = std::move(data.dataset);
    truth["margin"] = spec.margin;
    truth["flip_prob"] = spec.flip_prob;
    truth["hyperplane"] = std::vector<double>(
        data.hyperplane.data(), data.hyperplane.data() + data.hyperplane.size());
  }
  {
    std::ofstream out(libsvm_path);
    if (!out) throw ValidationError("cannot write " + libsvm_path.string());
    write_libsvm(dataset, out);
  }
  {
    std::ofstream out(truth_path);
    if (!out) throw ValidationError("cannot write " + truth_path.string());
    out << truth.dump(2) << '\n';
  }
  return {libsvm_path.string(), truth_path.string()};
}

std::string default_out_dir() {
  const char* env = std::getenv("TOKENWALK_OUTDIR");
  return env == nullptr ? std::string() : std::string(env);
}

AlgorithmKind algorithm_from_name(const std::string& name) { return parse_algorithm(name); }
std::string to_name(AlgorithmKind algorithm) { return algorithm_name(algorithm); }
TheoremVariant theorem_from_name(const std::string& name) { return parse_theorem(name); }
std::string to_name(TheoremVariant theorem) { return theorem_name(theorem); }

}  // namespace tokenwalk
