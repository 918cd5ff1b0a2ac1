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
#include "tokenwalk/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "tokenwalk/errors.hpp"
#include "tokenwalk/rng.hpp"

namespace tokenwalk {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool parse_double(const std::string& token, double& out) {
  std::size_t pos = 0;
  try {
    out = std::stod(token, &pos);
  } catch (const std::exception&) {
    return false;
  }
  return pos == token.size();
}

}  // namespace

double SparseRow::dot(const Eigen::VectorXd& x) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) acc += val[k] * x[idx[k]];
  return acc;
}

void SparseRow::add_scaled(Eigen::VectorXd& out, double s) const {
  for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] += s * val[k];
}

double SparseRow::squared_norm() const {
  double acc = 0.0;
  for (double v : val) acc += v * v;
  return acc;
}

void Dataset::validate() const {
  if (labels.size() != rows.size()) {
    throw ValidationError("dataset: label/row count mismatch");
  }
  for (const auto& row : rows) {
    if (row.idx.size() != row.val.size()) {
      throw ValidationError("dataset: index/value length mismatch");
    }
    int prev = -1;
    for (int i : row.idx) {
      if (i <= prev || i >= n_features) {
        throw ValidationError("dataset: feature index out of range or unordered");
      }
      prev = i;
    }
  }
  for (double y : labels) {
    if (!std::isfinite(y)) throw ValidationError("dataset: non-finite label");
    if (task == Task::Classification && y != 1.0 && y != -1.0) {
      throw ValidationError("dataset: classification labels must be -1 or +1");
    }
  }
}

Dataset parse_libsvm(std::istream& in, Task task) {
  Dataset ds;
  ds.task = task;
  std::string line;
  std::size_t line_no = 0;
  int max_index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string token;
    if (!(ss >> token)) continue;  // blank line

    double label = 0.0;
    if (!parse_double(token, label)) {
      throw ParseError("non-numeric label '" + token + "'", line_no);
    }
    SparseRow row;
    long prev_index = 0;
    while (ss >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos) {
        throw ParseError("expected idx:val, got '" + token + "'", line_no);
      }
      long index = 0;
      double value = 0.0;
      try {
        std::size_t pos = 0;
        index = std::stol(token.substr(0, colon), &pos);
        if (pos != colon) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError("non-numeric index in '" + token + "'", line_no);
      }
      if (!parse_double(token.substr(colon + 1), value)) {
        throw ParseError("non-numeric value in '" + token + "'", line_no);
      }
      if (index == 0) throw ParseError("indices are 1-based; got 0", line_no);
      if (index <= prev_index) {
        throw ParseError("indices must be strictly increasing", line_no);
      }
      prev_index = index;
      row.idx.push_back(static_cast<int>(index - 1));
      row.val.push_back(value);
    }
    max_index = std::max<long>(max_index, prev_index);
    ds.rows.push_back(std::move(row));
    ds.labels.push_back(label);
  }
  ds.n_features = max_index;
  return ds;
}

void write_libsvm(const Dataset& dataset, std::ostream& out) {
  for (std::size_t r = 0; r < dataset.rows.size(); ++r) {
    out << format_double(dataset.labels[r]);
    const auto& row = dataset.rows[r];
    for (std::size_t k = 0; k < row.idx.size(); ++k) {
      out << ' ' << (row.idx[k] + 1) << ':' << format_double(row.val[k]);
    }
    out << '\n';
  }
}

std::string to_libsvm(const Dataset& dataset) {
  std::ostringstream out;
  write_libsvm(dataset, out);
  return out.str();
}

PartitionResult partition(const Dataset& dataset, int n_agents, PartitionScheme scheme,
                          std::uint64_t seed) {
  const int n = static_cast<int>(dataset.size());
  if (n_agents < 1) throw ValidationError("partition: need at least one agent");
  if (n_agents > n) {
    throw ValidationError("partition: more agents (" + std::to_string(n_agents) +
                          ") than rows (" + std::to_string(n) + ")");
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (scheme == PartitionScheme::IidEqual) {
    RngStream rng = derived_stream(seed, StreamId::Partition);
    rng.shuffle(order);
  }
  PartitionResult result;
  result.shards.resize(n_agents);
  result.row_indices.resize(n_agents);
  const int base = n / n_agents;
  const int extra = n % n_agents;
  int cursor = 0;
  for (int a = 0; a < n_agents; ++a) {
    const int size = base + (a < extra ? 1 : 0);
    DataShard& shard = result.shards[a];
    shard.owner = a;
    shard.n_features = dataset.n_features;
    shard.task = dataset.task;
    for (int k = 0; k < size; ++k) {
      const int r = order[cursor++];
      result.row_indices[a].push_back(r);
      shard.rows.push_back(dataset.rows[r]);
      shard.labels.push_back(dataset.labels[r]);
    }
  }
  return result;
}

RegressionData synthesize_regression(int n_rows, int p, double noise_sigma, std::uint64_t seed) {
  if (n_rows < 0 || p < 1) throw ValidationError("synthesize_regression: bad shape");
  RngStream rng = derived_stream(seed, StreamId::Synthesis);
  Eigen::VectorXd x_star(p);
  for (int j = 0; j < p; ++j) x_star[j] = rng.normal();

  RegressionData out;
  out.true_model = x_star;
  out.dataset.task = Task::Regression;
  out.dataset.n_features = p;
  out.dataset.rows.reserve(n_rows);
  for (int r = 0; r < n_rows; ++r) {
    SparseRow row;
    row.idx.resize(p);
    row.val.resize(p);
    double y = 0.0;
    for (int j = 0; j < p; ++j) {
      row.idx[j] = j;
      row.val[j] = rng.normal();
      y += row.val[j] * x_star[j];
    }
    if (noise_sigma > 0.0) y += noise_sigma * rng.normal();
    out.dataset.rows.push_back(std::move(row));
    out.dataset.labels.push_back(y);
  }
  return out;
}

ClassificationData synthesize_classification(int n_rows, int p, double margin,
                                             std::uint64_t seed, double flip_prob) {
  if (n_rows < 0 || p < 1) throw ValidationError("synthesize_classification: bad shape");
  if (margin < 0.0) throw ValidationError("synthesize_classification: margin must be >= 0");
  if (flip_prob < 0.0 || flip_prob >= 0.5) {
    throw ValidationError("synthesize_classification: flip_prob must be in [0, 0.5)");
  }
  RngStream rng = derived_stream(seed, StreamId::Synthesis);
  Eigen::VectorXd w(p);
  double norm = 0.0;
  do {
    for (int j = 0; j < p; ++j) w[j] = rng.normal();
    norm = w.norm();
  } while (norm == 0.0);
  w /= norm;

  ClassificationData out;
  out.hyperplane = w;
  out.dataset.task = Task::Classification;
  out.dataset.n_features = p;
  for (int r = 0; r < n_rows; ++r) {
    SparseRow row;
    row.idx.resize(p);
    row.val.resize(p);
    double score = 0.0;
    do {
      score = 0.0;
      for (int j = 0; j < p; ++j) {
        row.idx[j] = j;
        row.val[j] = rng.normal();
        score += row.val[j] * w[j];
      }
    } while (std::abs(score) < margin);
    double label = score >= 0.0 ? 1.0 : -1.0;
    if (flip_prob > 0.0 && rng.uniform01() < flip_prob) label = -label;
    out.dataset.rows.push_back(std::move(row));
    out.dataset.labels.push_back(label);
  }
  return out;
}

std::pair<Dataset, NormalizeParams> normalize(const Dataset& dataset, NormalizeMode mode) {
  NormalizeParams params;
  params.mode = mode;
  if (mode == NormalizeMode::None) return {dataset, params};

  if (mode == NormalizeMode::UnitRow) {
    Dataset out = dataset;
    for (auto& row : out.rows) {
      const double norm = std::sqrt(row.squared_norm());
      if (norm > 0.0) {
        for (double& v : row.val) v /= norm;
      }
    }
    return {std::move(out), params};
  }

  // Per-feature standardization with the statistics of this (train) split.
  // Centering fills in the implicit zeros, so rows come out dense.
  const int p = dataset.n_features;
  const double n = static_cast<double>(dataset.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(p);
  for (const auto& row : dataset.rows) {
    for (std::size_t k = 0; k < row.idx.size(); ++k) {
      mean[row.idx[k]] += row.val[k];
      sq[row.idx[k]] += row.val[k] * row.val[k];
    }
  }
  if (n > 0) mean /= n;
  Eigen::VectorXd scale(p);
  for (int j = 0; j < p; ++j) {
    const double var = n > 0 ? sq[j] / n - mean[j] * mean[j] : 0.0;
    scale[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  params.mean = mean;
  params.scale = scale;
  return {apply_normalization(dataset, params), params};
}

Dataset apply_normalization(const Dataset& dataset, const NormalizeParams& params) {
  switch (params.mode) {
    case NormalizeMode::None:
      return dataset;
    case NormalizeMode::UnitRow: {
      auto [out, unused] = normalize(dataset, NormalizeMode::UnitRow);
      return out;
    }
    case NormalizeMode::PerFeatureStandardize:
      break;
  }
  const int p = dataset.n_features;
  if (params.mean.size() != p || params.scale.size() != p) {
    throw ValidationError("apply_normalization: parameter dimension mismatch");
  }
  Dataset out;
  out.task = dataset.task;
  out.n_features = p;
  out.labels = dataset.labels;
  out.rows.reserve(dataset.size());
  for (const auto& row : dataset.rows) {
    Eigen::VectorXd dense = Eigen::VectorXd::Zero(p);
    for (std::size_t k = 0; k < row.idx.size(); ++k) dense[row.idx[k]] = row.val[k];
    SparseRow r;
    r.idx.resize(p);
    r.val.resize(p);
    for (int j = 0; j < p; ++j) {
      r.idx[j] = j;
      r.val[j] = (dense[j] - params.mean[j]) / params.scale[j];
    }
    out.rows.push_back(std::move(r));
  }
  return out;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& dataset, double test_fraction,
                                             std::uint64_t seed) {
  if (test_fraction < 0.0 || test_fraction > 1.0) {
    throw ValidationError("train_test_split: test_fraction must be in [0, 1]");
  }
  const int n = static_cast<int>(dataset.size());
  const int n_test = static_cast<int>(std::llround(test_fraction * n));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng = derived_stream(seed, StreamId::Split);
  rng.shuffle(order);

  auto take = [&](int lo, int hi) {
    Dataset out;
    out.task = dataset.task;
    out.n_features = dataset.n_features;
    for (int k = lo; k < hi; ++k) {
      out.rows.push_back(dataset.rows[order[k]]);
      out.labels.push_back(dataset.labels[order[k]]);
    }
    return out;
  };
  return {take(n_test, n), take(0, n_test)};
}

Dataset to_binary_labels(const Dataset& dataset, double positive_label) {
  Dataset out = dataset;
  out.task = Task::Classification;
  for (double& y : out.labels) y = (y == positive_label) ? 1.0 : -1.0;
  return out;
}

}  // namespace tokenwalk
