#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "test_util.hpp"
#include "tokenwalk/data.hpp"
#include "tokenwalk/errors.hpp"

using namespace tokenwalk;

namespace {

Dataset random_dataset(RngStream& rng, int max_rows = 30, int max_features = 12) {
  Dataset ds;
  const int rows = 1 + static_cast<int>(rng.uniform_int(max_rows));
  int p = 0;
  for (int r = 0; r < rows; ++r) {
    SparseRow row;
    const int features = 1 + static_cast<int>(rng.uniform_int(max_features));
    for (int j = 0; j < features; ++j) {
      if (rng.uniform01() < 0.6) {
        row.idx.push_back(j);
        row.val.push_back(rng.normal() * std::pow(10.0, rng.uniform(-3, 3)));
      }
    }
    if (!row.idx.empty()) p = std::max(p, row.idx.back() + 1);
    ds.rows.push_back(std::move(row));
    ds.labels.push_back(rng.normal());
  }
  ds.n_features = p;
  return ds;
}

bool same_dataset(const Dataset& a, const Dataset& b) {
  if (a.size() != b.size() || a.n_features != b.n_features) return false;
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (a.labels[r] != b.labels[r]) return false;
    if (a.rows[r].idx != b.rows[r].idx) return false;
    if (a.rows[r].val != b.rows[r].val) return false;
  }
  return true;
}

std::string row_key(const SparseRow& row, double label) {
  std::ostringstream key;
  key << label << '|';
  for (std::size_t k = 0; k < row.idx.size(); ++k) {
    key << row.idx[k] << ':' << row.val[k] << ' ';
  }
  return key.str();
}

}  // namespace

TEST_CASE("libsvm parsing basics") {
  std::istringstream in("+1 1:0.5 3:2\n");
  const Dataset ds = parse_libsvm(in);
  REQUIRE(ds.size() == 1);
  CHECK(ds.labels[0] == 1.0);
  CHECK(ds.rows[0].idx == std::vector<int>{0, 2});
  CHECK(ds.rows[0].val == std::vector<double>{0.5, 2.0});
  CHECK(ds.n_features == 3);
}

TEST_CASE("libsvm empty input, blanks, comments") {
  std::istringstream empty("");
  const Dataset none = parse_libsvm(empty);
  CHECK(none.size() == 0);
  CHECK(none.n_features == 0);

  std::istringstream commented("# only a comment\n\n-1 2:4 # trailing\n");
  const Dataset ds = parse_libsvm(commented);
  REQUIRE(ds.size() == 1);
  CHECK(ds.labels[0] == -1.0);
  CHECK(ds.rows[0].idx == std::vector<int>{1});
}

TEST_CASE("libsvm parse errors carry line numbers") {
  std::istringstream zero_index("1 0:2\n");
  CHECK_THROWS_WITH_AS(parse_libsvm(zero_index), doctest::Contains("line 1"), ParseError);

  std::istringstream unordered("1 1:1\n-1 3:1 2:4\n");
  try {
    parse_libsvm(unordered);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }

  std::istringstream bad_label("abc 1:1\n");
  CHECK_THROWS_AS(parse_libsvm(bad_label), ParseError);
  std::istringstream bad_value("1 1:x\n");
  CHECK_THROWS_AS(parse_libsvm(bad_value), ParseError);
  std::istringstream bad_pair("1 11\n");
  CHECK_THROWS_AS(parse_libsvm(bad_pair), ParseError);
}

TEST_CASE("libsvm round trip is the identity") {
  RngStream rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    const Dataset ds = random_dataset(rng);
    std::istringstream in(to_libsvm(ds));
    const Dataset back = parse_libsvm(in);
    CHECK(same_dataset(ds, back));
  }
}

TEST_CASE("partition sizes and coverage") {
  RngStream rng(7);
  Dataset ten = random_dataset(rng);
  while (ten.size() != 10) ten = random_dataset(rng, 15);

  const PartitionResult whole = partition(ten, 1, PartitionScheme::Contiguous, 0);
  CHECK(whole.shards.size() == 1);
  CHECK(whole.shards[0].size() == 10);

  const PartitionResult thirds = partition(ten, 3, PartitionScheme::IidEqual, 5);
  REQUIRE(thirds.shards.size() == 3);
  CHECK(thirds.shards[0].size() == 4);
  CHECK(thirds.shards[1].size() == 3);
  CHECK(thirds.shards[2].size() == 3);

  CHECK_THROWS_AS(partition(ten, 11, PartitionScheme::IidEqual, 0), ValidationError);
}

TEST_CASE("partition shards are disjoint and cover the dataset") {
  RngStream rng(88);
  for (int trial = 0; trial < 100; ++trial) {
    const Dataset ds = random_dataset(rng);
    const int agents = 1 + static_cast<int>(rng.uniform_int(ds.size()));
    const PartitionScheme scheme =
        trial % 2 == 0 ? PartitionScheme::IidEqual : PartitionScheme::Contiguous;
    const PartitionResult part = partition(ds, agents, scheme, trial);

    std::vector<int> all_indices;
    for (int a = 0; a < agents; ++a) {
      const auto& idx = part.row_indices[a];
      REQUIRE(idx.size() == part.shards[a].size());
      for (std::size_t k = 0; k < idx.size(); ++k) {
        // Shard rows are the dataset rows they claim to be.
        CHECK(row_key(part.shards[a].rows[k], part.shards[a].labels[k]) ==
              row_key(ds.rows[idx[k]], ds.labels[idx[k]]));
        all_indices.push_back(idx[k]);
      }
    }
    std::sort(all_indices.begin(), all_indices.end());
    REQUIRE(all_indices.size() == ds.size());
    for (std::size_t k = 0; k < all_indices.size(); ++k) {
      CHECK(all_indices[k] == static_cast<int>(k));  // disjoint + covering
    }
  }
}

TEST_CASE("synthetic regression") {
  const RegressionData clean = synthesize_regression(50, 6, 0.0, 11);
  for (std::size_t r = 0; r < clean.dataset.size(); ++r) {
    CHECK(clean.dataset.rows[r].dot(clean.true_model) ==
          doctest::Approx(clean.dataset.labels[r]).epsilon(1e-12));
  }

  // The normal-equations solution sits at the noise floor.
  const double sigma = 0.3;
  const RegressionData noisy = synthesize_regression(600, 5, sigma, 12);
  Eigen::MatrixXd a(600, 5);
  Eigen::VectorXd y(600);
  for (int r = 0; r < 600; ++r) {
    Eigen::VectorXd dense = Eigen::VectorXd::Zero(5);
    noisy.dataset.rows[r].add_scaled(dense, 1.0);
    a.row(r) = dense.transpose();
    y[r] = noisy.dataset.labels[r];
  }
  const Eigen::VectorXd ls = (a.transpose() * a).ldlt().solve(a.transpose() * y);
  const double residual = (a * ls - y).squaredNorm() / y.squaredNorm();
  const double floor = sigma * sigma / (noisy.true_model.squaredNorm() + sigma * sigma);
  CHECK(residual > 0.3 * floor);
  CHECK(residual < 2.0 * floor);

  // Determinism.
  const RegressionData again = synthesize_regression(600, 5, sigma, 12);
  CHECK(again.dataset.labels == noisy.dataset.labels);
  CHECK(again.true_model == noisy.true_model);
}

TEST_CASE("synthetic classification") {
  const ClassificationData sep = synthesize_classification(200, 4, 0.4, 21, 0.0);
  for (std::size_t r = 0; r < sep.dataset.size(); ++r) {
    const double score = sep.dataset.rows[r].dot(sep.hyperplane);
    CHECK(std::abs(score) >= 0.4);  // margin enforced
    CHECK(sep.dataset.labels[r] == (score >= 0 ? 1.0 : -1.0));
  }

  const ClassificationData flipped = synthesize_classification(2000, 4, 0.4, 22, 0.1);
  int mismatches = 0;
  for (std::size_t r = 0; r < flipped.dataset.size(); ++r) {
    const double score = flipped.dataset.rows[r].dot(flipped.hyperplane);
    if (flipped.dataset.labels[r] != (score >= 0 ? 1.0 : -1.0)) ++mismatches;
  }
  CHECK(mismatches > 120);  // ~200 expected
  CHECK(mismatches < 280);

  const ClassificationData again = synthesize_classification(2000, 4, 0.4, 22, 0.1);
  CHECK(again.dataset.labels == flipped.dataset.labels);
}

TEST_CASE("normalization modes") {
  RngStream rng(31);
  const Dataset ds = random_dataset(rng);
  const auto [same, none_params] = normalize(ds, NormalizeMode::None);
  CHECK(same_dataset(ds, same));

  const auto [unit, unit_params] = normalize(ds, NormalizeMode::UnitRow);
  for (const auto& row : unit.rows) {
    if (!row.idx.empty()) CHECK(std::sqrt(row.squared_norm()) == doctest::Approx(1.0));
  }

  const auto [std_ds, params] = normalize(ds, NormalizeMode::PerFeatureStandardize);
  Eigen::VectorXd col_sum = Eigen::VectorXd::Zero(ds.n_features);
  for (const auto& row : std_ds.rows) row.add_scaled(col_sum, 1.0);
  for (int j = 0; j < ds.n_features; ++j) {
    CHECK(std::abs(col_sum[j] / static_cast<double>(ds.size())) <= 1e-12);
  }

  // Held-out rows are transformed with the train statistics.
  Dataset train;
  train.n_features = 1;
  for (double v : {2.0, 4.0}) {
    SparseRow row;
    row.idx = {0};
    row.val = {v};
    train.rows.push_back(row);
    train.labels.push_back(0.0);
  }
  const auto [unused, tp] = normalize(train, NormalizeMode::PerFeatureStandardize);
  Dataset test = train;
  test.rows[0].val = {5.0};
  const Dataset test_out = apply_normalization(test, tp);
  CHECK(test_out.rows[0].val[0] == doctest::Approx((5.0 - 3.0) / 1.0));  // mean 3, std 1
}

TEST_CASE("train/test split") {
  RngStream rng(3);
  const Dataset ds = random_dataset(rng, 40);
  const auto [train_none, test_none] = train_test_split(ds, 0.0, 1);
  CHECK(test_none.size() == 0);
  CHECK(train_none.size() == ds.size());

  const auto [train, test] = train_test_split(ds, 0.25, 1);
  CHECK(train.size() + test.size() == ds.size());
  CHECK(test.size() == static_cast<std::size_t>(std::llround(0.25 * ds.size())));

  std::multiset<std::string> original, pieces;
  for (std::size_t r = 0; r < ds.size(); ++r) original.insert(row_key(ds.rows[r], ds.labels[r]));
  for (std::size_t r = 0; r < train.size(); ++r) {
    pieces.insert(row_key(train.rows[r], train.labels[r]));
  }
  for (std::size_t r = 0; r < test.size(); ++r) {
    pieces.insert(row_key(test.rows[r], test.labels[r]));
  }
  CHECK(original == pieces);
}

TEST_CASE("one-vs-rest label reduction") {
  Dataset ds;
  ds.n_features = 1;
  for (double digit : {0.0, 3.0, 7.0, 3.0}) {
    SparseRow row;
    row.idx = {0};
    row.val = {1.0};
    ds.rows.push_back(row);
    ds.labels.push_back(digit);
  }
  const Dataset binary = to_binary_labels(ds, 3.0);
  CHECK(binary.labels == std::vector<double>{-1, 1, -1, 1});
  CHECK(binary.task == Task::Classification);
  binary.validate();
}
