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
#include "tokenwalk/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tokenwalk {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream_id) {
  std::uint64_t state = master;
  std::uint64_t a = splitmix64(state);
  state ^= stream_id * 0x9e3779b97f4a7c15ull;
  std::uint64_t b = splitmix64(state);
  return a ^ (b + 0x165667b19e3779f9ull + (a << 6) + (a >> 2));
}

std::uint64_t RngStream::uniform_int(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return v % n;
}

int RngStream::sample_discrete(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) {
    throw std::invalid_argument("sample_discrete: weights sum to zero");
  }
  const double u = uniform01() * total;
  double cum = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    cum += weights[i];
    if (u < cum) return last_positive;
  }
  // Rounding pushed u past the accumulated total; the last supported index
  // is the correct inverse-CDF answer.
  return last_positive;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1, u2;
  do {
    u1 = uniform01();
  } while (u1 <= 0.0);
  u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

RngStream derived_stream(std::uint64_t master_seed, StreamId id) {
  return RngStream(mix_seed(master_seed, static_cast<std::uint64_t>(id)));
}

RngStream walk_stream(std::uint64_t master_seed, int walk_id) {
  return RngStream(mix_seed(
      master_seed, static_cast<std::uint64_t>(StreamId::WalkBase) +
                       static_cast<std::uint64_t>(walk_id)));
}

}  // namespace tokenwalk
