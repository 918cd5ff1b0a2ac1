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

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "tokenwalk/graph.hpp"
#include "tokenwalk/losses.hpp"

namespace tokenwalk {

enum class AlgorithmKind { IBcd, ApiBcd, GApiBcd, Wpg, Centralized, SyncMulti };
enum class SelectionRule { Cyclic, Markov };

/// Algorithm-level run parameters.
struct RunConfig {
  AlgorithmKind algorithm = AlgorithmKind::IBcd;
  double tau = 1.0;    // penalty weight
  double rho = 0.0;    // proximal weight of the gradient variant
  double alpha = 0.1;  // walk-proximal-gradient learning rate
  int n_walks = 1;
  /// Theorem-verification mode: the local update anchors on the live tokens
  /// instead of the possibly stale local copies, and every copy is kept
  /// synchronized. Off by default: stale copies are the algorithm as deployed.
  bool fresh_tokens = false;
  std::int64_t max_events = 1000;
  std::uint64_t seed = 0;
  SelectionRule selection = SelectionRule::Cyclic;
  TransitionPolicy transition_policy = TransitionPolicy::UniformNeighbors;
  double inner_tol = 1e-6;

  /// Throws ValidationError on inconsistent settings for the given network
  /// size (tau <= 0, alpha <= 0 for WPG, walk-count bounds, ...).
  void validate(int n_agents) const;
};

/// Agent i's state: local model x_i, one local copy of each walk's token, and
/// the local loss.
struct AgentState {
  Eigen::VectorXd x;
  std::vector<Eigen::VectorXd> local_copies;
  LossModelPtr model;
};

/// A walk's global-model vector together with its current location.
struct Token {
  int walk_id = 0;
  Eigen::VectorXd z;
  int location = -1;
};

struct RunState {
  std::vector<AgentState> agents;
  std::vector<Token> tokens;

  int n_agents() const { return static_cast<int>(agents.size()); }
  int n_walks() const { return static_cast<int>(tokens.size()); }
  Eigen::VectorXd model_mean() const;
  std::vector<Eigen::VectorXd> token_values() const;
  std::vector<Eigen::VectorXd> local_models() const;
};

/// All models and tokens start at zero (so every token equals the model mean);
/// token starting agents are evenly spaced on the cycle for cyclic selection
/// and distinct rng draws otherwise.
RunState init_run(const RunConfig& config, const Topology& topology,
                  std::vector<LossModelPtr> models);

/// What one event changed: the active agent's model displacement and each
/// token's displacement.
struct StepResult {
  Eigen::VectorXd delta_x;
  std::vector<Eigen::VectorXd> delta_z;
};

StepResult ibcd_step(RunState& state, int agent, double tau, double inner_tol);
StepResult apibcd_step(RunState& state, int walk_id, int agent, double tau, double inner_tol,
                       bool fresh_tokens);
StepResult gapibcd_step(RunState& state, int walk_id, int agent, double tau, double rho,
                        bool fresh_tokens);
StepResult wpg_step(RunState& state, int agent, double alpha);

/// Parameter-server reference round: every agent solves its prox against the
/// single token, which is then reset to the model mean.
void centralized_step(RunState& state, double tau, double inner_tol);

/// Synchronous multi-token reference round; all tokens coincide afterwards.
void sync_multi_step(RunState& state, double tau, double inner_tol);

/// F(x, z) = sum_i f_i(x_i) + (tau/2) sum_i sum_m |x_i - z_m|^2.
double eval_objective(const RunState& state, double tau);

enum class TheoremVariant { Thm1, Thm2, Thm3 };

struct DescentCheck {
  bool pass = false;
  double slack = 0.0;      // bound_rhs - delta_f; negative beyond tolerance fails
  double bound_rhs = 0.0;  // right-hand side of the descent inequality
  double delta_f = 0.0;
  double tolerance = 0.0;
};

/// Evaluates the per-iteration descent inequality:
///   Thm1: dF <= -(tau/2)    |dx|^2 - (tau N/2) sum_m |dz_m|^2
///   Thm2: dF <= -(tau M/2)  |dx|^2 - (tau N/2) sum_m |dz_m|^2
///   Thm3: dF <= -(tau M/2 + rho - L/2) |dx|^2 - (tau N/2) sum_m |dz_m|^2
/// within an additive tolerance of 1e-8 * (1 + |f_before|). The bound is
/// evaluated as stated even when the Thm3 coefficient is negative (the
/// inequality then permits ascent).
DescentCheck check_descent(double f_before, double f_after, const Eigen::VectorXd& delta_x,
                           std::span<const Eigen::VectorXd> delta_z, double tau, double rho,
                           double smoothness, int n_agents, TheoremVariant variant);

}  // namespace tokenwalk
