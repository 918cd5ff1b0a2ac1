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
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace tokenwalk {

/// One sample's feature vector, stored as strictly increasing 0-based indices.
struct SparseRow {
  std::vector<int> idx;
  std::vector<double> val;

  double dot(const Eigen::VectorXd& x) const;
  /// out += s * row
  void add_scaled(Eigen::VectorXd& out, double s) const;
  double squared_norm() const;
};

enum class Task { Regression, Classification };

struct Dataset {
  std::vector<SparseRow> rows;
  std::vector<double> labels;
  int n_features = 0;
  Task task = Task::Regression;

  std::size_t size() const { return rows.size(); }
  /// Throws ValidationError on index-range or label-convention violations.
  void validate() const;
};

/// One agent's slice of the training data.
struct DataShard {
  std::vector<SparseRow> rows;
  std::vector<double> labels;
  int n_features = 0;
  int owner = -1;
  Task task = Task::Regression;

  std::size_t size() const { return rows.size(); }
};

/// LIBSVM text format: `label idx:val idx:val ...` with 1-based, strictly
/// increasing indices. Blank lines are skipped and `#` starts a comment.
/// Throws ParseError (with the line number) on malformed input.
Dataset parse_libsvm(std::istream& in, Task task = Task::Regression);
void write_libsvm(const Dataset& dataset, std::ostream& out);
std::string to_libsvm(const Dataset& dataset);

enum class PartitionScheme { IidEqual, Contiguous };

struct PartitionResult {
  std::vector<DataShard> shards;
  /// Per agent, the source-dataset row indices it received.
  std::vector<std::vector<int>> row_indices;
};

/// Splits a dataset into n_agents disjoint covering shards. IidEqual shuffles
/// with the seed then cuts near-equal pieces (sizes differ by at most one);
/// Contiguous cuts in file order.
PartitionResult partition(const Dataset& dataset, int n_agents, PartitionScheme scheme,
                          std::uint64_t seed);

struct RegressionData {
  Dataset dataset;
  Eigen::VectorXd true_model;
};

/// Standard-normal features, labels a.x* + noise_sigma * normal.
RegressionData synthesize_regression(int n_rows, int p, double noise_sigma, std::uint64_t seed);

struct ClassificationData {
  Dataset dataset;
  Eigen::VectorXd hyperplane;  // unit normal of the separating plane
};

/// Standard-normal features resampled until |a.w| >= margin; labels sign(a.w),
/// each flipped independently with probability flip_prob.
ClassificationData synthesize_classification(int n_rows, int p, double margin,
                                             std::uint64_t seed, double flip_prob = 0.0);

enum class NormalizeMode { None, PerFeatureStandardize, UnitRow };

struct NormalizeParams {
  NormalizeMode mode = NormalizeMode::None;
  Eigen::VectorXd mean;   // per feature (standardize only)
  Eigen::VectorXd scale;  // per feature (standardize only)
};

/// Normalizes a (train) dataset and returns the transformation parameters so
/// the same transform can be applied to a held-out split.
std::pair<Dataset, NormalizeParams> normalize(const Dataset& dataset, NormalizeMode mode);
Dataset apply_normalization(const Dataset& dataset, const NormalizeParams& params);

/// Seeded shuffle split; test gets round(test_fraction * n) rows.
std::pair<Dataset, Dataset> train_test_split(const Dataset& dataset, double test_fraction,
                                             std::uint64_t seed);

/// One-vs-rest reduction: rows matching positive_label get +1, all others -1.
Dataset to_binary_labels(const Dataset& dataset, double positive_label);

}  // namespace tokenwalk
