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

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <memory>
#include <mutex>
#include <span>

#include "tokenwalk/data.hpp"

namespace tokenwalk {

enum class LossKind { LeastSquares, Logistic };

/// Local empirical loss over one agent's shard:
///
///   least-squares: (1/d) sum_l 0.5 (a_l.x - b_l)^2 + (l2/2)|x|^2
///   logistic:      (1/d) sum_l log(1 + exp(-b_l a_l.x)) + (l2/2)|x|^2
///
/// Immutable after construction; all operations are const and thread-safe
/// (internal factorization caches are mutex-guarded).
class LossModel {
 public:
  /// Direct factorization below this dimension, conjugate gradient above.
  static constexpr int kDenseLimit = 512;

  LossModel(LossKind kind, DataShard shard, double l2_reg = 0.0);

  LossModel(const LossModel&) = delete;
  LossModel& operator=(const LossModel&) = delete;

  LossKind kind() const { return kind_; }
  int dim() const { return p_; }
  const DataShard& shard() const { return shard_; }
  double l2_reg() const { return l2_; }

  double eval_loss(const Eigen::VectorXd& x) const;
  Eigen::VectorXd eval_grad(const Eigen::VectorXd& x) const;

  /// argmin_x f(x) + (tau/2) sum_m |x - anchor_m|^2.
  ///
  /// Least-squares solves the normal system exactly; logistic runs damped
  /// Newton until the subproblem gradient norm drops below inner_tol
  /// (SolverError after too many iterations). The subproblem is
  /// (tau*M)-strongly convex, so the minimizer is unique.
  Eigen::VectorXd prox_solve(std::span<const Eigen::VectorXd> anchors, double tau,
                             double inner_tol = 1e-10) const;

  /// Closed form of the linearized proximal update:
  ///   (tau * sum_m anchor_m + rho * x_prev - grad f(x_prev)) / (tau*M + rho).
  Eigen::VectorXd grad_prox_step(const Eigen::VectorXd& x_prev,
                                 std::span<const Eigen::VectorXd> anchors, double tau,
                                 double rho) const;

  /// Smoothness constant L: lambda_max(AtA)/d + l2 for least squares,
  /// lambda_max(AtA)/(4d) + l2 for logistic. Power iteration, cached.
  double estimate_smoothness() const;

  /// Value of the prox subobjective f(x) + (tau/2) sum_m |x - anchor_m|^2.
  double prox_objective(const Eigen::VectorXd& x, std::span<const Eigen::VectorXd> anchors,
                        double tau) const;

 private:
  void check_dim(const Eigen::VectorXd& x) const;
  /// out = (AtA/d) * v, computed through the rows when no dense cache exists.
  Eigen::VectorXd normal_apply(const Eigen::VectorXd& v) const;
  Eigen::VectorXd solve_ridge(double ridge, const Eigen::VectorXd& rhs) const;
  Eigen::VectorXd newton_prox(std::span<const Eigen::VectorXd> anchors, double tau,
                              double inner_tol) const;
  double lambda_max_normal() const;

  LossKind kind_;
  DataShard shard_;
  double l2_ = 0.0;
  int p_ = 0;
  double inv_d_ = 0.0;  // 1/d, or 0 for an empty shard

  bool has_dense_normal_ = false;
  Eigen::MatrixXd normal_matrix_;  // AtA / d
  Eigen::VectorXd normal_rhs_;     // Atb / d

  mutable std::mutex cache_mutex_;
  mutable double cached_ridge_ = -1.0;
  mutable Eigen::LLT<Eigen::MatrixXd> cached_llt_;
  mutable double cached_smoothness_ = -1.0;
};

using LossModelPtr = std::shared_ptr<const LossModel>;

LossModelPtr make_loss_model(LossKind kind, DataShard shard, double l2_reg = 0.0);

}  // namespace tokenwalk
