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
#include "tokenwalk/metrics.hpp"

#include "tokenwalk/errors.hpp"

namespace tokenwalk {

double nmse(const Eigen::VectorXd& z, const Dataset& data) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t r = 0; r < data.rows.size(); ++r) {
    const double e = data.rows[r].dot(z) - data.labels[r];
    num += e * e;
    den += data.labels[r] * data.labels[r];
  }
  if (den == 0.0) throw MetricError("nmse: zero label energy");
  return num / den;
}

double accuracy(const Eigen::VectorXd& z, const Dataset& data) {
  if (data.rows.empty()) throw MetricError("accuracy: empty dataset");
  std::size_t correct = 0;
  for (std::size_t r = 0; r < data.rows.size(); ++r) {
    const double score = data.rows[r].dot(z);
    const double predicted = score > 0.0 ? 1.0 : (score < 0.0 ? -1.0 : 0.0);
    if (predicted == data.labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.rows.size());
}

double consensus_gap(std::span<const Eigen::VectorXd> local_models,
                     std::span<const Eigen::VectorXd> tokens) {
  double gap = 0.0;
  for (const auto& x : local_models) {
    for (const auto& z : tokens) {
      gap = std::max(gap, (x - z).norm());
    }
  }
  return gap;
}

double parameter_nmse(const Eigen::VectorXd& z, const Eigen::VectorXd& x_star) {
  const double den = x_star.squaredNorm();
  if (den == 0.0) throw MetricError("parameter_nmse: zero reference model");
  return (z - x_star).squaredNorm() / den;
}

Eigen::VectorXd average_vector(std::span<const Eigen::VectorXd> vectors) {
  if (vectors.empty()) throw MetricError("average_vector: empty input");
  Eigen::VectorXd avg = vectors[0];
  for (std::size_t i = 1; i < vectors.size(); ++i) avg += vectors[i];
  return avg / static_cast<double>(vectors.size());
}

}  // namespace tokenwalk
