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

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tokenwalk/rng.hpp"

namespace tokenwalk {

/// Undirected edge, normalized so first < second.
using Edge = std::pair<int, int>;

/// Undirected connected agent network. Edges are kept sorted and unique.
/// When present, cycle_order is a permutation of the agents whose consecutive
/// pairs (wrapping around) are all edges, i.e. a Hamiltonian cycle.
struct Topology {
  int n_agents = 0;
  std::vector<Edge> edges;
  std::optional<std::vector<int>> cycle_order;

  /// Sorted neighbor lists.
  std::vector<std::vector<int>> adjacency() const;
  std::vector<int> degrees() const;
  bool has_edge(int i, int j) const;
  bool is_connected() const;

  /// Throws ValidationError if any structural invariant is broken.
  void validate() const;
};

enum class TransitionPolicy {
  UniformNeighbors,    // 1/deg(i) over neighbors, 0 on the diagonal
  MetropolisHastings,  // min(1/deg(i), 1/deg(j)) off-diagonal, residual on it
  IncludeSelf,         // uniform over neighbors plus the agent itself
};

/// Row-stochastic transition matrix over the closed neighborhoods of a
/// topology. Row-major storage.
struct TransitionMatrix {
  int n = 0;
  std::vector<double> probs;

  double operator()(int i, int j) const { return probs[static_cast<std::size_t>(i) * n + j]; }
  std::span<const double> row(int i) const {
    return {probs.data() + static_cast<std::size_t>(i) * n, static_cast<std::size_t>(n)};
  }
};

/// Generates a connected topology with round(zeta * n(n-1)/2) edges.
///
/// With require_cycle the construction seeds a random Hamiltonian ring (a
/// random permutation of the agents) and then adds distinct random edges up to
/// the target count; otherwise it starts from a random spanning tree.
/// Deterministic in seed. Throws ValidationError when n < 2, zeta is outside
/// (0, 1], or the target edge count is below the base structure's.
Topology generate_topology(int n, double zeta, std::uint64_t seed, bool require_cycle);

TransitionMatrix build_transition_matrix(const Topology& topology, TransitionPolicy policy);

/// Samples the next agent from probs[current], advancing only the caller's
/// stream.
int next_agent(const TransitionMatrix& p, int current, RngStream& stream);

/// Successor of current in the topology's Hamiltonian cycle. Throws
/// ValidationError when the topology has no cycle_order.
int next_agent_cyclic(const Topology& topology, int current);

/// Edge-list text format: first line "N M", then M lines "i j" in sorted
/// order. The cycle order, if any, is not part of the format.
std::string to_edge_list(const Topology& topology);
void write_edge_list(const Topology& topology, std::ostream& out);
Topology parse_edge_list(std::istream& in);

}  // namespace tokenwalk
