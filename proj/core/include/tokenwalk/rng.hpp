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
#include <random>
#include <span>
#include <vector>

namespace tokenwalk {

/// splitmix64 step; used to derive independent stream seeds from one master seed.
std::uint64_t splitmix64(std::uint64_t& state);

/// Stable combination of a master seed with a stream id.
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream_id);

/// Deterministic uniform sampling on top of mt19937_64.
///
/// The std:: distributions are implementation-defined, which would make traces
/// differ across standard libraries; these mappings are pinned so the same seed
/// produces the same draws everywhere.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

  /// Uniform integer in [0, n), unbiased via rejection. Requires n > 0.
  std::uint64_t uniform_int(std::uint64_t n);

  /// Index sampled proportionally to nonnegative weights (CDF inversion in
  /// index order). Weights need not be normalized but must not sum to zero.
  int sample_discrete(std::span<const double> weights);

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Standard normal via Box-Muller (uses two uniforms per pair, caches one).
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Fixed stream ids for the sub-generators derived from a run's master seed.
/// Adding a walk never perturbs another walk's stream.
enum class StreamId : std::uint64_t {
  Topology = 1,
  TokenPlacement = 2,
  Partition = 3,
  Split = 4,
  Synthesis = 5,
  WalkBase = 1000,
};

RngStream derived_stream(std::uint64_t master_seed, StreamId id);
RngStream walk_stream(std::uint64_t master_seed, int walk_id);

}  // namespace tokenwalk
