#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>

#include "doctest.h"
#include "test_util.hpp"
#include "tokenwalk/errors.hpp"
#include "tokenwalk/metrics.hpp"

using namespace tokenwalk;
using namespace tokenwalk::testing;

namespace {

Dataset dataset_from_shard(const DataShard& shard) {
  Dataset ds;
  ds.rows = shard.rows;
  ds.labels = shard.labels;
  ds.n_features = shard.n_features;
  ds.task = shard.task;
  return ds;
}

}  // namespace

TEST_CASE("nmse endpoints") {
  const RegressionData data = synthesize_regression(40, 4, 0.0, 5);
  CHECK(nmse(data.true_model, data.dataset) == doctest::Approx(0.0));
  CHECK(nmse(Eigen::VectorXd::Zero(4), data.dataset) == doctest::Approx(1.0));

  Dataset zeros = data.dataset;
  std::fill(zeros.labels.begin(), zeros.labels.end(), 0.0);
  CHECK_THROWS_AS(nmse(Eigen::VectorXd::Zero(4), zeros), MetricError);
}

TEST_CASE("nmse of the normal-equations solution on noiseless data") {
  const RegressionData data = synthesize_regression(80, 6, 0.0, 6);
  Eigen::MatrixXd a(80, 6);
  Eigen::VectorXd y(80);
  for (int r = 0; r < 80; ++r) {
    Eigen::VectorXd dense = Eigen::VectorXd::Zero(6);
    data.dataset.rows[r].add_scaled(dense, 1.0);
    a.row(r) = dense.transpose();
    y[r] = data.dataset.labels[r];
  }
  const Eigen::VectorXd ls = (a.transpose() * a).ldlt().solve(a.transpose() * y);
  CHECK(nmse(ls, data.dataset) < 1e-10);
}

TEST_CASE("accuracy and the tie rule") {
  const ClassificationData data = synthesize_classification(60, 3, 0.2, 9, 0.0);
  CHECK(accuracy(data.hyperplane, data.dataset) == doctest::Approx(1.0));
  // z = 0 scores every row 0; ties count as wrong.
  CHECK(accuracy(Eigen::VectorXd::Zero(3), data.dataset) == doctest::Approx(0.0));

  // Matches an independent brute-force count on random models.
  RngStream rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd z = random_vector(rng, 3);
    int correct = 0;
    for (std::size_t r = 0; r < data.dataset.size(); ++r) {
      const double s = data.dataset.rows[r].dot(z);
      if ((s > 0 && data.dataset.labels[r] == 1.0) || (s < 0 && data.dataset.labels[r] == -1.0)) {
        ++correct;
      }
    }
    CHECK(accuracy(z, data.dataset) ==
          doctest::Approx(correct / static_cast<double>(data.dataset.size())));
  }
}

TEST_CASE("consensus gap") {
  RngStream rng(2);
  const Eigen::VectorXd v = random_vector(rng, 4);
  std::vector<Eigen::VectorXd> xs{v, v};
  std::vector<Eigen::VectorXd> zs{v};
  CHECK(consensus_gap(xs, zs) == 0.0);

  const Eigen::VectorXd w = random_vector(rng, 4);
  std::vector<Eigen::VectorXd> x1{v};
  std::vector<Eigen::VectorXd> z1{w};
  CHECK(consensus_gap(x1, z1) == doctest::Approx((v - w).norm()));

  std::vector<Eigen::VectorXd> many_x{v, w};
  std::vector<Eigen::VectorXd> many_z{v, w};
  CHECK(consensus_gap(many_x, many_z) == doctest::Approx((v - w).norm()));
}

TEST_CASE("parameter nmse and token averaging") {
  RngStream rng(3);
  const Eigen::VectorXd x_star = random_vector(rng, 5);
  CHECK(parameter_nmse(x_star, x_star) == 0.0);
  CHECK(parameter_nmse(Eigen::VectorXd::Zero(5), x_star) == doctest::Approx(1.0));
  CHECK_THROWS_AS(parameter_nmse(x_star, Eigen::VectorXd::Zero(5)), MetricError);

  std::vector<Eigen::VectorXd> tokens{x_star, Eigen::VectorXd::Zero(5)};
  CHECK((average_vector(tokens) - 0.5 * x_star).norm() <= 1e-15);
}
