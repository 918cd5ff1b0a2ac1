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

#include "tokenwalk/data.hpp"

namespace tokenwalk {

/// One probe of a simulation run. walk_id/agent are -1 for the synchronous
/// reference algorithms (no token movement).
struct TraceRecord {
  std::int64_t event = 0;
  double sim_time_s = 0.0;
  std::int64_t comm_units = 0;
  int walk_id = -1;
  int agent = -1;
  double objective = 0.0;
  double train_metric = 0.0;
  double test_metric = 0.0;
  double consensus_gap = 0.0;
};

/// |A z - y|^2 / |y|^2 over the given split. Throws MetricError when the
/// label energy is zero.
double nmse(const Eigen::VectorXd& z, const Dataset& data);

/// Fraction of rows with sign(a.z) == label; ties (a.z == 0) count as wrong.
double accuracy(const Eigen::VectorXd& z, const Dataset& data);

/// max_i max_m |x_i - z_m|: violation of the consensus constraint.
double consensus_gap(std::span<const Eigen::VectorXd> local_models,
                     std::span<const Eigen::VectorXd> tokens);

/// |z - x_star|^2 / |x_star|^2 (synthetic runs where the truth is known).
double parameter_nmse(const Eigen::VectorXd& z, const Eigen::VectorXd& x_star);

Eigen::VectorXd average_vector(std::span<const Eigen::VectorXd> vectors);

}  // namespace tokenwalk
