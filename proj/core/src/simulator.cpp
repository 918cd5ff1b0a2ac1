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
#include "tokenwalk/simulator.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <sstream>

#include "tokenwalk/errors.hpp"

namespace tokenwalk {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Event {
  double time = 0.0;
  std::int64_t tie = 0;  // creation order; breaks equal timestamps
  int walk_id = 0;
};

struct EventLater {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.tie > b.tie;
  }
};

bool is_reference_algorithm(AlgorithmKind a) {
  return a == AlgorithmKind::Centralized || a == AlgorithmKind::SyncMulti;
}

double metric_at(const Eigen::VectorXd& z, const Dataset* data) {
  if (data == nullptr || data->rows.empty()) return kNaN;
  try {
    return data->task == Task::Regression ? nmse(z, *data) : accuracy(z, *data);
  } catch (const MetricError&) {
    return kNaN;
  }
}

bool target_reached(double metric, double target, const Dataset* data) {
  if (data == nullptr || std::isnan(metric)) return false;
  return data->task == Task::Regression ? metric <= target : metric >= target;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Incremental bookkeeping of F(x, z) = sum f_i(x_i) + (tau/2) P with
/// P = M * sum_i |x_i|^2 - 2 <sum_i x_i, sum_m z_m> + N * sum_m |z_m|^2.
class ObjectiveTracker {
 public:
  ObjectiveTracker(const RunState& state, double tau) : tau_(tau) {
    n_ = state.n_agents();
    m_ = state.n_walks();
    const int p = static_cast<int>(state.agents[0].x.size());
    sum_x_ = Eigen::VectorXd::Zero(p);
    sum_z_ = Eigen::VectorXd::Zero(p);
    agent_loss_.resize(n_);
    recompute(state);
  }

  double value() const {
    const double penalty =
        m_ * quad_x_ - 2.0 * sum_x_.dot(sum_z_) + n_ * quad_z_;
    return loss_sum_ + 0.5 * tau_ * penalty;
  }

  /// Applies one event's deltas. x_old/z_old are the pre-step values of the
  /// touched agent and tokens.
  void apply_step(const RunState& state, int agent, const Eigen::VectorXd& x_old,
                  std::span<const Eigen::VectorXd> z_old) {
    const AgentState& ag = state.agents[agent];
    const double new_loss = ag.model->eval_loss(ag.x);
    loss_sum_ += new_loss - agent_loss_[agent];
    agent_loss_[agent] = new_loss;
    quad_x_ += ag.x.squaredNorm() - x_old.squaredNorm();
    sum_x_ += ag.x - x_old;
    for (std::size_t m = 0; m < z_old.size(); ++m) {
      const Eigen::VectorXd& z_new = state.tokens[m].z;
      quad_z_ += z_new.squaredNorm() - z_old[m].squaredNorm();
      sum_z_ += z_new - z_old[m];
    }
  }

  void recompute(const RunState& state) {
    loss_sum_ = 0.0;
    quad_x_ = 0.0;
    quad_z_ = 0.0;
    sum_x_.setZero();
    sum_z_.setZero();
    for (int i = 0; i < n_; ++i) {
      agent_loss_[i] = state.agents[i].model->eval_loss(state.agents[i].x);
      loss_sum_ += agent_loss_[i];
      quad_x_ += state.agents[i].x.squaredNorm();
      sum_x_ += state.agents[i].x;
    }
    for (const auto& token : state.tokens) {
      quad_z_ += token.z.squaredNorm();
      sum_z_ += token.z;
    }
  }

 private:
  double tau_;
  int n_ = 0, m_ = 0;
  double loss_sum_ = 0.0;
  double quad_x_ = 0.0;  // sum_i |x_i|^2
  double quad_z_ = 0.0;  // sum_m |z_m|^2
  Eigen::VectorXd sum_x_, sum_z_;
  std::vector<double> agent_loss_;
};

class Engine {
 public:
  Engine(const RunConfig& config, const Topology& topology, std::vector<LossModelPtr> models,
         const SimulationOptions& options)
      : config_(config), topology_(topology), options_(options) {
    config_.validate(topology.n_agents);
    if (options_.probe_interval < 1) {
      throw ValidationError("simulation: probe_interval must be >= 1");
    }
    if (options_.stopping.mode == StoppingMode::NmseTarget && options_.eval.test == nullptr) {
      throw ValidationError("simulation: nmse-target stopping requires test data");
    }
    state_ = init_run(config_, topology_, std::move(models));
    if (config_.selection == SelectionRule::Markov && !is_reference_algorithm(config_.algorithm)) {
      transition_ = build_transition_matrix(topology_, config_.transition_policy);
    }
    for (int w = 0; w < config_.n_walks; ++w) {
      streams_.push_back(walk_stream(config_.seed, w));
    }
    tracker_.emplace(state_, penalty_tau());
  }

  SimulationResult run() {
    if (is_reference_algorithm(config_.algorithm)) {
      run_reference();
    } else {
      run_token_walks();
    }
    finalize();
    SimulationResult out;
    out.trace = std::move(trace_);
    out.ledger = ledger_;
    out.state = std::move(state_);
    out.stop = stop_;
    out.events = processed_;
    out.error = error_;
    out.per_token_test_metric = std::move(per_token_test_metric_);
    out.final_parameter_nmse = final_parameter_nmse_;
    return out;
  }

 private:
  // WPG has no penalty; its traces report the M=1 objective with tau from the
  // config so curves stay comparable across algorithms.
  double penalty_tau() const { return config_.tau; }

  void run_token_walks() {
    std::priority_queue<Event, std::vector<Event>, EventLater> queue;
    std::int64_t tie = 0;
    for (int w = 0; w < config_.n_walks; ++w) {
      queue.push(Event{0.0, tie++, w});
    }
    while (processed_ < config_.max_events && !queue.empty()) {
      const Event ev = queue.top();
      queue.pop();
      const int walk = ev.walk_id;
      const int agent = state_.tokens[walk].location;

      const double f_before = tracker_->value();
      const Eigen::VectorXd x_old = state_.agents[agent].x;
      std::vector<Eigen::VectorXd> z_old;
      z_old.reserve(state_.tokens.size());
      for (const auto& token : state_.tokens) z_old.push_back(token.z);

      StepResult step;
      const auto wall_start = std::chrono::steady_clock::now();
      try {
        switch (config_.algorithm) {
          case AlgorithmKind::IBcd:
            step = ibcd_step(state_, agent, config_.tau, config_.inner_tol);
            break;
          case AlgorithmKind::ApiBcd:
            step = apibcd_step(state_, walk, agent, config_.tau, config_.inner_tol,
                               config_.fresh_tokens);
            break;
          case AlgorithmKind::GApiBcd:
            step = gapibcd_step(state_, walk, agent, config_.tau, config_.rho,
                                config_.fresh_tokens);
            break;
          case AlgorithmKind::Wpg:
            step = wpg_step(state_, agent, config_.alpha);
            break;
          default:
            throw ValidationError("simulation: unexpected algorithm");
        }
      } catch (const SolverError& err) {
        stop_ = StopReason::SolverFailure;
        error_ = err.what();
        return;
      }
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
      const double compute = compute_time(wall);

      tracker_->apply_step(state_, agent, x_old, z_old);
      ++processed_;

      if (options_.observer) {
        StepReport report;
        report.event = processed_;
        report.time = ev.time;
        report.walk_id = walk;
        report.agent = agent;
        report.objective_before = f_before;
        report.objective_after = tracker_->value();
        report.delta_x = &step.delta_x;
        report.delta_z = step.delta_z;
        options_.observer(report, state_);
      }

      if (options_.recompute_interval > 0 && processed_ % options_.recompute_interval == 0) {
        tracker_->recompute(state_);
        check_mean_consistency();
      }

      // Route the token onward and account for the transmission.
      const WalkDraw draw =
          advance_walk(streams_[walk], config_.selection, topology_,
                       transition_.n > 0 ? &transition_ : nullptr, agent);
      double latency = 0.0;
      if (draw.next != agent) {
        latency = options_.latency.low +
                  draw.latency_u * (options_.latency.high - options_.latency.low);
        ++ledger_.comm_units;
      }
      const double completion = ev.time + compute + latency;
      ledger_.sim_time = std::max(ledger_.sim_time, completion);
      ledger_.compute_time_total += compute;
      state_.tokens[walk].location = draw.next;
      queue.push(Event{completion, tie++, walk});

      if (handle_probe_and_stopping(walk, agent)) return;
    }
  }

  void run_reference() {
    RngStream& stream = streams_[0];
    while (processed_ < config_.max_events) {
      const auto wall_start = std::chrono::steady_clock::now();
      try {
        if (config_.algorithm == AlgorithmKind::Centralized) {
          centralized_step(state_, config_.tau, config_.inner_tol);
        } else {
          sync_multi_step(state_, config_.tau, config_.inner_tol);
        }
      } catch (const SolverError& err) {
        stop_ = StopReason::SolverFailure;
        error_ = err.what();
        return;
      }
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
      const double compute = compute_time(wall);
      // One synchronous round: every agent uploads its model and receives the
      // refreshed token (2N link uses), overlapping in one latency each way.
      const double latency = options_.latency.low +
                             stream.uniform01() * (options_.latency.high - options_.latency.low);
      ledger_.comm_units += 2 * state_.n_agents();
      ledger_.sim_time += compute + 2.0 * latency;
      ledger_.compute_time_total += compute;
      tracker_->recompute(state_);
      ++processed_;
      if (handle_probe_and_stopping(-1, -1)) return;
    }
  }

  double compute_time(double wall) const {
    switch (options_.compute.kind) {
      case ComputeModelKind::Measured:
        return std::max(wall, 1e-9);  // coarse clocks may report 0
      case ComputeModelKind::Constant:
        return options_.compute.constant;
      case ComputeModelKind::Zero:
        return 0.0;
    }
    return 0.0;
  }

  void check_mean_consistency() {
    if (!options_.check_consistency) return;
    // Every token absorbs every increment, so z_m tracks the model mean in
    // all modes (staleness lives in the local copies, not the tokens).
    const Eigen::VectorXd mean = state_.model_mean();
    const double scale = std::max(1.0, mean.norm());
    for (const auto& token : state_.tokens) {
      if ((token.z - mean).norm() > options_.consistency_rel_tol * scale) {
        throw std::logic_error("simulation: token diverged from the model mean (event " +
                               std::to_string(processed_) + ")");
      }
    }
  }

  /// Returns true when the run should stop.
  bool handle_probe_and_stopping(int walk, int agent) {
    const double objective = tracker_->value();
    bool stop = false;

    if (options_.stopping.mode == StoppingMode::ObjectiveTol) {
      objective_window_.push_back(objective);
      const std::size_t window = static_cast<std::size_t>(state_.n_agents());
      if (objective_window_.size() > window + 1) objective_window_.pop_front();
      if (objective_window_.size() == window + 1 &&
          std::abs(objective_window_.back() - objective_window_.front()) <
              options_.stopping.tol) {
        stop_ = StopReason::ObjectiveTol;
        stop = true;
      }
    }

    const bool probe_due = processed_ % options_.probe_interval == 0 ||
                           processed_ == config_.max_events || stop;
    if (probe_due) {
      const TraceRecord record = make_record(walk, agent, objective);
      if (options_.stopping.mode == StoppingMode::NmseTarget &&
          target_reached(record.test_metric, options_.stopping.target, options_.eval.test)) {
        stop_ = StopReason::NmseTarget;
        stop = true;
      }
      trace_.push_back(record);
    }
    return stop;
  }

  TraceRecord make_record(int walk, int agent, double objective) const {
    TraceRecord record;
    record.event = processed_;
    record.sim_time_s = ledger_.sim_time;
    record.comm_units = ledger_.comm_units;
    record.walk_id = walk;
    record.agent = agent;
    record.objective = objective;
    const Eigen::VectorXd z_bar = average_vector(state_.token_values());
    record.train_metric = metric_at(z_bar, options_.eval.train);
    record.test_metric = metric_at(z_bar, options_.eval.test);
    record.consensus_gap = consensus_gap(state_.local_models(), state_.token_values());
    return record;
  }

  void finalize() {
    const auto tokens = state_.token_values();
    for (const auto& z : tokens) {
      per_token_test_metric_.push_back(metric_at(z, options_.eval.test));
    }
    if (options_.eval.true_model != nullptr && !tokens.empty()) {
      final_parameter_nmse_ =
          parameter_nmse(average_vector(tokens), *options_.eval.true_model);
    }
  }

  RunConfig config_;
  const Topology& topology_;
  SimulationOptions options_;
  RunState state_;
  TransitionMatrix transition_;
  std::vector<RngStream> streams_;
  std::optional<ObjectiveTracker> tracker_;
  CostLedger ledger_;
  std::vector<TraceRecord> trace_;
  std::deque<double> objective_window_;
  std::int64_t processed_ = 0;
  StopReason stop_ = StopReason::MaxEvents;
  std::string error_;
  std::vector<double> per_token_test_metric_;
  double final_parameter_nmse_ = kNaN;
};

}  // namespace

WalkDraw advance_walk(RngStream& stream, SelectionRule rule, const Topology& topology,
                      const TransitionMatrix* matrix, int current) {
  WalkDraw draw;
  if (rule == SelectionRule::Cyclic) {
    draw.next = next_agent_cyclic(topology, current);
  } else {
    if (matrix == nullptr) throw ValidationError("advance_walk: missing transition matrix");
    draw.next = next_agent(*matrix, current, stream);
  }
  // Latency always consumes one draw so the path is invariant to the bounds.
  draw.latency_u = stream.uniform01();
  return draw;
}

SimulationResult run_simulation(const RunConfig& config, const Topology& topology,
                                std::vector<LossModelPtr> models,
                                const SimulationOptions& options) {
  Engine engine(config, topology, std::move(models), options);
  return engine.run();
}

void write_trace_csv(std::span<const TraceRecord> trace, std::ostream& out) {
  out << "event,sim_time_s,comm_units,walk_id,agent,objective,train_metric,test_metric\n";
  for (const auto& r : trace) {
    out << r.event << ',' << format_double(r.sim_time_s) << ',' << r.comm_units << ','
        << r.walk_id << ',' << r.agent << ',' << format_double(r.objective) << ','
        << format_double(r.train_metric) << ',' << format_double(r.test_metric) << '\n';
  }
}

std::string trace_csv(std::span<const TraceRecord> trace) {
  std::ostringstream out;
  write_trace_csv(trace, out);
  return out.str();
}

}  // namespace tokenwalk
