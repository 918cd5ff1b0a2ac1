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
#include "tokenwalk/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "tokenwalk/errors.hpp"

namespace tokenwalk {

namespace {

Edge make_edge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

}  // namespace

std::vector<std::vector<int>> Topology::adjacency() const {
  std::vector<std::vector<int>> adj(n_agents);
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& nbrs : adj) std::sort(nbrs.begin(), nbrs.end());
  return adj;
}

std::vector<int> Topology::degrees() const {
  std::vector<int> deg(n_agents, 0);
  for (const auto& [a, b] : edges) {
    ++deg[a];
    ++deg[b];
  }
  return deg;
}

bool Topology::has_edge(int i, int j) const {
  return std::binary_search(edges.begin(), edges.end(), make_edge(i, j));
}

bool Topology::is_connected() const {
  if (n_agents == 0) return false;
  const auto adj = adjacency();
  std::vector<char> seen(n_agents, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        stack.push_back(w);
      }
    }
  }
  return count == n_agents;
}

void Topology::validate() const {
  if (n_agents < 2) throw ValidationError("topology: need at least 2 agents");
  std::set<Edge> unique_edges;
  for (const auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n_agents || b >= n_agents) {
      throw ValidationError("topology: edge endpoint out of range");
    }
    if (a == b) throw ValidationError("topology: self-loop");
    if (a > b) throw ValidationError("topology: edge not normalized");
    if (!unique_edges.insert({a, b}).second) {
      throw ValidationError("topology: duplicate edge");
    }
  }
  if (!std::is_sorted(edges.begin(), edges.end())) {
    throw ValidationError("topology: edges not sorted");
  }
  if (!is_connected()) throw ValidationError("topology: graph is not connected");
  if (cycle_order) {
    const auto& order = *cycle_order;
    if (static_cast<int>(order.size()) != n_agents) {
      throw ValidationError("topology: cycle_order is not a permutation");
    }
    std::vector<char> seen(n_agents, 0);
    for (int v : order) {
      if (v < 0 || v >= n_agents || seen[v]) {
        throw ValidationError("topology: cycle_order is not a permutation");
      }
      seen[v] = 1;
    }
    for (int i = 0; i < n_agents; ++i) {
      int a = order[i];
      int b = order[(i + 1) % n_agents];
      if (!has_edge(a, b)) {
        throw ValidationError("topology: cycle_order uses a missing edge");
      }
    }
  }
}

Topology generate_topology(int n, double zeta, std::uint64_t seed, bool require_cycle) {
  if (n < 2) throw ValidationError("generate_topology: n must be >= 2");
  if (!(zeta > 0.0) || zeta > 1.0) {
    throw ValidationError("generate_topology: zeta must be in (0, 1]");
  }
  const long long max_edges = static_cast<long long>(n) * (n - 1) / 2;
  const long long target = std::llround(zeta * static_cast<double>(max_edges));

  RngStream rng = derived_stream(seed, StreamId::Topology);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);

  std::set<Edge> edge_set;
  Topology topo;
  topo.n_agents = n;
  if (require_cycle) {
    for (int i = 0; i < n; ++i) {
      edge_set.insert(make_edge(perm[i], perm[(i + 1) % n]));
    }
    topo.cycle_order = perm;
  } else {
    // Random recursive tree: attach each node to a random earlier one.
    for (int i = 1; i < n; ++i) {
      int parent = perm[rng.uniform_int(static_cast<std::uint64_t>(i))];
      edge_set.insert(make_edge(perm[i], parent));
    }
  }
  const long long base = static_cast<long long>(edge_set.size());
  if (target < base) {
    throw ValidationError(
        "generate_topology: zeta=" + std::to_string(zeta) + " gives " +
        std::to_string(target) + " edges, below the " + std::to_string(base) +
        " required by the " + (require_cycle ? "cycle" : "spanning tree"));
  }

  long long needed = target - base;
  const long long remaining = max_edges - base;
  if (needed > 0 && needed * 3 > remaining) {
    // Dense case: enumerate the missing pairs and take a random subset.
    std::vector<Edge> missing;
    missing.reserve(static_cast<std::size_t>(remaining));
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        if (!edge_set.count({a, b})) missing.push_back({a, b});
      }
    }
    rng.shuffle(missing);
    for (long long k = 0; k < needed; ++k) edge_set.insert(missing[k]);
  } else {
    while (needed > 0) {
      int a = static_cast<int>(rng.uniform_int(n));
      int b = static_cast<int>(rng.uniform_int(n));
      if (a == b) continue;
      if (edge_set.insert(make_edge(a, b)).second) --needed;
    }
  }

  topo.edges.assign(edge_set.begin(), edge_set.end());
  topo.validate();
  return topo;
}

TransitionMatrix build_transition_matrix(const Topology& topology, TransitionPolicy policy) {
  topology.validate();
  const int n = topology.n_agents;
  const auto adj = topology.adjacency();
  TransitionMatrix p;
  p.n = n;
  p.probs.assign(static_cast<std::size_t>(n) * n, 0.0);
  auto at = [&](int i, int j) -> double& {
    return p.probs[static_cast<std::size_t>(i) * n + j];
  };
  for (int i = 0; i < n; ++i) {
    const auto& nbrs = adj[i];
    const double deg = static_cast<double>(nbrs.size());
    switch (policy) {
      case TransitionPolicy::UniformNeighbors:
        for (int j : nbrs) at(i, j) = 1.0 / deg;
        break;
      case TransitionPolicy::IncludeSelf: {
        const double w = 1.0 / (deg + 1.0);
        for (int j : nbrs) at(i, j) = w;
        at(i, i) = w;
        break;
      }
      case TransitionPolicy::MetropolisHastings: {
        double off = 0.0;
        for (int j : nbrs) {
          const double q = std::min(1.0 / deg, 1.0 / static_cast<double>(adj[j].size()));
          at(i, j) = q;
          off += q;
        }
        // The residual can round to -1e-16 when the off-diagonal sum is 1.
        at(i, i) = std::max(0.0, 1.0 - off);
        break;
      }
    }
  }
  return p;
}

int next_agent(const TransitionMatrix& p, int current, RngStream& stream) {
  if (current < 0 || current >= p.n) {
    throw ValidationError("next_agent: current agent out of range");
  }
  return stream.sample_discrete(p.row(current));
}

int next_agent_cyclic(const Topology& topology, int current) {
  if (!topology.cycle_order) {
    throw ValidationError("next_agent_cyclic: topology has no Hamiltonian cycle");
  }
  const auto& order = *topology.cycle_order;
  const int n = static_cast<int>(order.size());
  for (int i = 0; i < n; ++i) {
    if (order[i] == current) return order[(i + 1) % n];
  }
  throw ValidationError("next_agent_cyclic: agent not in cycle order");
}

std::string to_edge_list(const Topology& topology) {
  std::ostringstream out;
  write_edge_list(topology, out);
  return out.str();
}

void write_edge_list(const Topology& topology, std::ostream& out) {
  out << topology.n_agents << ' ' << topology.edges.size() << '\n';
  for (const auto& [a, b] : topology.edges) out << a << ' ' << b << '\n';
}

Topology parse_edge_list(std::istream& in) {
  Topology topo;
  std::size_t m = 0;
  if (!(in >> topo.n_agents >> m)) {
    throw ParseError("expected header \"N M\"", 1);
  }
  topo.edges.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    int a = 0, b = 0;
    if (!(in >> a >> b)) {
      throw ParseError("expected edge \"i j\"", k + 2);
    }
    if (a == b) throw ParseError("self-loop", k + 2);
    topo.edges.push_back(a < b ? Edge{a, b} : Edge{b, a});
  }
  std::sort(topo.edges.begin(), topo.edges.end());
  topo.validate();
  return topo;
}

}  // namespace tokenwalk
