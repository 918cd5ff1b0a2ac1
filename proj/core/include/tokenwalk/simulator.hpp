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

#include <functional>
#include <iosfwd>
#include <limits>
#include <string>

#include "tokenwalk/algorithms.hpp"
#include "tokenwalk/metrics.hpp"

namespace tokenwalk {

/// Per-transmission latency in seconds, Uniform(low, high). Equal bounds give
/// a constant latency; the draw is consumed either way, so a walk's path does
/// not depend on the latency bounds.
struct LatencyModel {
  double low = 1e-5;
  double high = 1e-4;
};

enum class ComputeModelKind {
  Measured,  // wall-clock duration of the local update
  Constant,
  Zero,  // isolates communication effects
};

struct ComputeModel {
  ComputeModelKind kind = ComputeModelKind::Measured;
  double constant = 0.0;
};

enum class StoppingMode { MaxEvents, ObjectiveTol, NmseTarget };

/// max-events is always in force as a cap; objective-tol fires when |dF| over
/// a window of N consecutive events drops below tol; nmse-target fires at the
/// first probe whose test metric reaches the target (<= for NMSE, >= for
/// accuracy).
struct StoppingRule {
  StoppingMode mode = StoppingMode::MaxEvents;
  double tol = 0.0;
  double target = 0.0;
};

/// Communication and time accounting. comm_units moves by exactly 1 per
/// non-self token transmission; sim_time is the clock after the last processed
/// event (its compute plus its outgoing transmission) and never decreases.
struct CostLedger {
  std::int64_t comm_units = 0;
  double sim_time = 0.0;
  double compute_time_total = 0.0;
};

/// Held-out data for trace metrics; optional.
struct EvalContext {
  const Dataset* train = nullptr;
  const Dataset* test = nullptr;
  const Eigen::VectorXd* true_model = nullptr;
};

/// Everything one event changed, for theorem checks and invariant tests.
struct StepReport {
  std::int64_t event = 0;  // virtual counter k, 1-based
  double time = 0.0;       // arrival time of the processed event
  int walk_id = -1;
  int agent = -1;
  double objective_before = 0.0;
  double objective_after = 0.0;
  const Eigen::VectorXd* delta_x = nullptr;
  std::span<const Eigen::VectorXd> delta_z;
};

using StepObserver = std::function<void(const StepReport&, const RunState&)>;

enum class StopReason { MaxEvents, ObjectiveTol, NmseTarget, SolverFailure };

struct SimulationResult {
  std::vector<TraceRecord> trace;
  CostLedger ledger;
  RunState state;
  StopReason stop = StopReason::MaxEvents;
  std::int64_t events = 0;
  std::string error;  // nonempty when stop == SolverFailure
  std::vector<double> per_token_test_metric;
  double final_parameter_nmse = std::numeric_limits<double>::quiet_NaN();
};

struct SimulationOptions {
  LatencyModel latency{};
  ComputeModel compute{};
  std::int64_t probe_interval = 1;
  StoppingRule stopping{};
  /// Cadence of the full objective recomputation and of the token/model-mean
  /// consistency guard.
  std::int64_t recompute_interval = 100;
  double consistency_rel_tol = 1e-10;
  bool check_consistency = true;
  EvalContext eval{};
  StepObserver observer;
};

/// Deterministic single-threaded event loop over the configured algorithm.
/// Token-arrival events are processed in (time, creation-order) order; the
/// virtual counter k is the processing index. The synchronous reference
/// algorithms (centralized, sync-multi) run as one round per event with a
/// collect-and-broadcast cost of 2N units.
SimulationResult run_simulation(const RunConfig& config, const Topology& topology,
                                std::vector<LossModelPtr> models,
                                const SimulationOptions& options = {});

/// One routing decision: the walk's next agent plus the uniform variate that
/// turns into its transmission latency. Exactly the draws the engine makes,
/// in the same order, so a walk's path can be replayed from its stream alone.
struct WalkDraw {
  int next = -1;
  double latency_u = 0.0;
};
WalkDraw advance_walk(RngStream& stream, SelectionRule rule, const Topology& topology,
                      const TransitionMatrix* matrix, int current);

/// CSV with the pinned header
/// event,sim_time_s,comm_units,walk_id,agent,objective,train_metric,test_metric
void write_trace_csv(std::span<const TraceRecord> trace, std::ostream& out);
std::string trace_csv(std::span<const TraceRecord> trace);

}  // namespace tokenwalk
