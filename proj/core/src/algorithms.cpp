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
#include "tokenwalk/algorithms.hpp"

#include <numeric>

#include "tokenwalk/errors.hpp"

namespace tokenwalk {

namespace {

bool needs_tau(AlgorithmKind a) { return a != AlgorithmKind::Wpg; }

bool is_token_walk(AlgorithmKind a) {
  return a == AlgorithmKind::IBcd || a == AlgorithmKind::ApiBcd ||
         a == AlgorithmKind::GApiBcd || a == AlgorithmKind::Wpg;
}

/// Applies the incremental token update z_m += delta/N to every walk, so each
/// token tracks the model mean exactly (the update rule quantifies over all
/// walks; it is also what makes the multi-walk descent analysis hold). The
/// modes differ only in copy bookkeeping: stale refreshes the active agent's
/// copy of the active walk, fresh synchronizes every copy everywhere.
std::vector<Eigen::VectorXd> update_tokens(RunState& state, int walk_id, int agent,
                                           const Eigen::VectorXd& delta_over_n,
                                           bool fresh_tokens) {
  const int m_total = state.n_walks();
  for (auto& token : state.tokens) token.z += delta_over_n;
  if (fresh_tokens) {
    for (auto& ag : state.agents) {
      for (int m = 0; m < m_total; ++m) ag.local_copies[m] = state.tokens[m].z;
    }
  } else {
    state.agents[agent].local_copies[walk_id] = state.tokens[walk_id].z;
  }
  return std::vector<Eigen::VectorXd>(m_total, delta_over_n);
}

}  // namespace

void RunConfig::validate(int n_agents) const {
  if (n_walks < 1) throw ValidationError("config: n_walks must be >= 1");
  if (max_events < 0) throw ValidationError("config: max_events must be >= 0");
  if (needs_tau(algorithm) && !(tau > 0.0)) {
    throw ValidationError("config: tau must be > 0 for penalty algorithms");
  }
  if (rho < 0.0) throw ValidationError("config: rho must be >= 0");
  if (algorithm == AlgorithmKind::Wpg) {
    if (!(alpha > 0.0)) throw ValidationError("config: alpha must be > 0 for wpg");
    if (selection != SelectionRule::Cyclic) {
      throw ValidationError("config: wpg requires cyclic selection");
    }
  }
  const bool single_token = algorithm == AlgorithmKind::IBcd ||
                            algorithm == AlgorithmKind::Wpg ||
                            algorithm == AlgorithmKind::Centralized;
  if (single_token && n_walks != 1) {
    throw ValidationError("config: this algorithm uses exactly one walk (n_walks=1)");
  }
  if (is_token_walk(algorithm) && n_walks > n_agents) {
    throw ValidationError("config: n_walks (" + std::to_string(n_walks) +
                          ") exceeds n_agents (" + std::to_string(n_agents) +
                          "); token starting agents must be distinct");
  }
  if (!(inner_tol > 0.0)) throw ValidationError("config: inner_tol must be > 0");
}

Eigen::VectorXd RunState::model_mean() const {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(agents.empty() ? 0 : agents[0].x.size());
  for (const auto& ag : agents) mean += ag.x;
  return mean / static_cast<double>(agents.size());
}

std::vector<Eigen::VectorXd> RunState::token_values() const {
  std::vector<Eigen::VectorXd> zs;
  zs.reserve(tokens.size());
  for (const auto& t : tokens) zs.push_back(t.z);
  return zs;
}

std::vector<Eigen::VectorXd> RunState::local_models() const {
  std::vector<Eigen::VectorXd> xs;
  xs.reserve(agents.size());
  for (const auto& ag : agents) xs.push_back(ag.x);
  return xs;
}

RunState init_run(const RunConfig& config, const Topology& topology,
                  std::vector<LossModelPtr> models) {
  const int n = topology.n_agents;
  if (static_cast<int>(models.size()) != n) {
    throw ValidationError("init_run: need one loss model per agent");
  }
  config.validate(n);
  const int p = models[0]->dim();
  for (const auto& model : models) {
    if (model->dim() != p) throw ValidationError("init_run: model dimension mismatch");
  }
  const int m = config.n_walks;

  RunState state;
  state.agents.reserve(n);
  for (int i = 0; i < n; ++i) {
    AgentState ag;
    ag.x = Eigen::VectorXd::Zero(p);
    ag.local_copies.assign(m, Eigen::VectorXd::Zero(p));
    ag.model = models[i];
    state.agents.push_back(std::move(ag));
  }

  std::vector<int> starts;
  if (!is_token_walk(config.algorithm)) {
    starts.assign(m, -1);  // reference algorithms: tokens are not located
  } else if (config.selection == SelectionRule::Cyclic) {
    if (!topology.cycle_order) {
      throw ValidationError("init_run: cyclic selection requires a Hamiltonian cycle");
    }
    for (int w = 0; w < m; ++w) {
      starts.push_back((*topology.cycle_order)[static_cast<std::size_t>(w) * n / m]);
    }
  } else {
    RngStream rng = derived_stream(config.seed, StreamId::TokenPlacement);
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (int w = 0; w < m; ++w) {
      const std::size_t j = w + rng.uniform_int(static_cast<std::uint64_t>(n - w));
      std::swap(pool[w], pool[j]);
      starts.push_back(pool[w]);
    }
  }
  for (int w = 0; w < m; ++w) {
    state.tokens.push_back(Token{w, Eigen::VectorXd::Zero(p), starts[w]});
  }
  return state;
}

StepResult ibcd_step(RunState& state, int agent, double tau, double inner_tol) {
  AgentState& ag = state.agents[agent];
  const Eigen::VectorXd anchors[1] = {state.tokens[0].z};
  Eigen::VectorXd x_new = ag.model->prox_solve(anchors, tau, inner_tol);

  StepResult result;
  result.delta_x = x_new - ag.x;
  const Eigen::VectorXd delta_over_n = result.delta_x / static_cast<double>(state.n_agents());
  ag.x = std::move(x_new);
  result.delta_z = update_tokens(state, 0, agent, delta_over_n, /*fresh_tokens=*/true);
  return result;
}

StepResult apibcd_step(RunState& state, int walk_id, int agent, double tau, double inner_tol,
                       bool fresh_tokens) {
  AgentState& ag = state.agents[agent];
  if (!fresh_tokens) ag.local_copies[walk_id] = state.tokens[walk_id].z;

  Eigen::VectorXd x_new =
      fresh_tokens
          ? ag.model->prox_solve(state.token_values(), tau, inner_tol)
          : ag.model->prox_solve(ag.local_copies, tau, inner_tol);

  StepResult result;
  result.delta_x = x_new - ag.x;
  const Eigen::VectorXd delta_over_n = result.delta_x / static_cast<double>(state.n_agents());
  ag.x = std::move(x_new);
  result.delta_z = update_tokens(state, walk_id, agent, delta_over_n, fresh_tokens);
  return result;
}

StepResult gapibcd_step(RunState& state, int walk_id, int agent, double tau, double rho,
                        bool fresh_tokens) {
  AgentState& ag = state.agents[agent];
  if (!fresh_tokens) ag.local_copies[walk_id] = state.tokens[walk_id].z;

  Eigen::VectorXd x_new =
      fresh_tokens ? ag.model->grad_prox_step(ag.x, state.token_values(), tau, rho)
                   : ag.model->grad_prox_step(ag.x, ag.local_copies, tau, rho);

  StepResult result;
  result.delta_x = x_new - ag.x;
  const Eigen::VectorXd delta_over_n = result.delta_x / static_cast<double>(state.n_agents());
  ag.x = std::move(x_new);
  result.delta_z = update_tokens(state, walk_id, agent, delta_over_n, fresh_tokens);
  return result;
}

StepResult wpg_step(RunState& state, int agent, double alpha) {
  AgentState& ag = state.agents[agent];
  Token& token = state.tokens[0];
  Eigen::VectorXd x_new = token.z - alpha * ag.model->eval_grad(token.z);

  StepResult result;
  result.delta_x = x_new - ag.x;
  const Eigen::VectorXd delta_over_n = result.delta_x / static_cast<double>(state.n_agents());
  ag.x = std::move(x_new);
  result.delta_z = update_tokens(state, 0, agent, delta_over_n, /*fresh_tokens=*/true);
  return result;
}

void centralized_step(RunState& state, double tau, double inner_tol) {
  const Eigen::VectorXd anchors[1] = {state.tokens[0].z};
  for (auto& ag : state.agents) {
    ag.x = ag.model->prox_solve(anchors, tau, inner_tol);
  }
  state.tokens[0].z = state.model_mean();
  for (auto& ag : state.agents) ag.local_copies[0] = state.tokens[0].z;
}

void sync_multi_step(RunState& state, double tau, double inner_tol) {
  const std::vector<Eigen::VectorXd> anchors = state.token_values();
  for (auto& ag : state.agents) {
    ag.x = ag.model->prox_solve(anchors, tau, inner_tol);
  }
  const Eigen::VectorXd mean = state.model_mean();
  for (auto& token : state.tokens) token.z = mean;
  for (auto& ag : state.agents) {
    for (auto& copy : ag.local_copies) copy = mean;
  }
}

double eval_objective(const RunState& state, double tau) {
  double f = 0.0;
  for (const auto& ag : state.agents) f += ag.model->eval_loss(ag.x);
  double penalty = 0.0;
  for (const auto& ag : state.agents) {
    for (const auto& token : state.tokens) {
      penalty += (ag.x - token.z).squaredNorm();
    }
  }
  return f + 0.5 * tau * penalty;
}

DescentCheck check_descent(double f_before, double f_after, const Eigen::VectorXd& delta_x,
                           std::span<const Eigen::VectorXd> delta_z, double tau, double rho,
                           double smoothness, int n_agents, TheoremVariant variant) {
  const double m = static_cast<double>(delta_z.size());
  double coeff_x = 0.0;
  switch (variant) {
    case TheoremVariant::Thm1:
      coeff_x = 0.5 * tau;
      break;
    case TheoremVariant::Thm2:
      coeff_x = 0.5 * tau * m;
      break;
    case TheoremVariant::Thm3:
      coeff_x = 0.5 * tau * m + rho - 0.5 * smoothness;
      break;
  }
  double z_term = 0.0;
  for (const auto& dz : delta_z) z_term += dz.squaredNorm();

  DescentCheck check;
  check.delta_f = f_after - f_before;
  check.bound_rhs = -coeff_x * delta_x.squaredNorm() -
                    0.5 * tau * static_cast<double>(n_agents) * z_term;
  check.tolerance = 1e-8 * (1.0 + std::abs(f_before));
  check.slack = check.bound_rhs - check.delta_f;
  check.pass = check.slack >= -check.tolerance;
  return check;
}

}  // namespace tokenwalk
