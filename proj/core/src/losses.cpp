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
#include "tokenwalk/losses.hpp"

#include <cmath>
#include <cstdio>

#include "tokenwalk/errors.hpp"

namespace tokenwalk {

namespace {

// log(1 + exp(t)) without overflow.
double softplus(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

// 1 / (1 + exp(-t))
double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

Eigen::VectorXd sum_anchors(std::span<const Eigen::VectorXd> anchors) {
  Eigen::VectorXd s = anchors[0];
  for (std::size_t m = 1; m < anchors.size(); ++m) s += anchors[m];
  return s;
}

}  // namespace

LossModel::LossModel(LossKind kind, DataShard shard, double l2_reg)
    : kind_(kind), shard_(std::move(shard)), l2_(l2_reg), p_(shard_.n_features) {
  if (l2_ < 0.0) throw ValidationError("loss model: l2_reg must be >= 0");
  if (p_ < 1) throw ValidationError("loss model: need at least one feature");
  if (shard_.labels.size() != shard_.rows.size()) {
    throw ValidationError("loss model: label/row count mismatch");
  }
  if (kind_ == LossKind::Logistic) {
    for (double y : shard_.labels) {
      if (y != 1.0 && y != -1.0) {
        throw ValidationError("loss model: logistic labels must be -1 or +1");
      }
    }
  }
  const std::size_t d = shard_.rows.size();
  inv_d_ = d > 0 ? 1.0 / static_cast<double>(d) : 0.0;

  if (p_ <= kDenseLimit) {
    has_dense_normal_ = true;
    normal_matrix_.setZero(p_, p_);
    normal_rhs_.setZero(p_);
    for (std::size_t r = 0; r < d; ++r) {
      const SparseRow& row = shard_.rows[r];
      for (std::size_t a = 0; a < row.idx.size(); ++a) {
        for (std::size_t b = 0; b < row.idx.size(); ++b) {
          normal_matrix_(row.idx[a], row.idx[b]) += row.val[a] * row.val[b];
        }
        normal_rhs_[row.idx[a]] += row.val[a] * shard_.labels[r];
      }
    }
    normal_matrix_ *= inv_d_;
    normal_rhs_ *= inv_d_;
  }
}

void LossModel::check_dim(const Eigen::VectorXd& x) const {
  if (x.size() != p_) {
    throw ValidationError("loss model: expected dimension " + std::to_string(p_) +
                          ", got " + std::to_string(x.size()));
  }
}

double LossModel::eval_loss(const Eigen::VectorXd& x) const {
  check_dim(x);
  double acc = 0.0;
  for (std::size_t r = 0; r < shard_.rows.size(); ++r) {
    const double margin = shard_.rows[r].dot(x);
    if (kind_ == LossKind::LeastSquares) {
      const double e = margin - shard_.labels[r];
      acc += 0.5 * e * e;
    } else {
      acc += softplus(-shard_.labels[r] * margin);
    }
  }
  return acc * inv_d_ + 0.5 * l2_ * x.squaredNorm();
}

Eigen::VectorXd LossModel::eval_grad(const Eigen::VectorXd& x) const {
  check_dim(x);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(p_);
  for (std::size_t r = 0; r < shard_.rows.size(); ++r) {
    const SparseRow& row = shard_.rows[r];
    const double margin = row.dot(x);
    if (kind_ == LossKind::LeastSquares) {
      row.add_scaled(g, margin - shard_.labels[r]);
    } else {
      const double y = shard_.labels[r];
      row.add_scaled(g, -y * sigmoid(-y * margin));
    }
  }
  g *= inv_d_;
  if (l2_ > 0.0) g += l2_ * x;
  return g;
}

Eigen::VectorXd LossModel::normal_apply(const Eigen::VectorXd& v) const {
  if (has_dense_normal_) return normal_matrix_ * v;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(p_);
  for (const SparseRow& row : shard_.rows) {
    row.add_scaled(out, row.dot(v));
  }
  return out * inv_d_;
}

Eigen::VectorXd LossModel::solve_ridge(double ridge, const Eigen::VectorXd& rhs) const {
  if (has_dense_normal_) {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    if (cached_ridge_ != ridge) {
      Eigen::MatrixXd system = normal_matrix_;
      system.diagonal().array() += ridge;
      cached_llt_.compute(system);
      cached_ridge_ = ridge;
    }
    return cached_llt_.solve(rhs);
  }
  // Conjugate gradient on (AtA/d + ridge I) x = rhs.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p_);
  Eigen::VectorXd r = rhs;
  Eigen::VectorXd d = r;
  double rr = r.squaredNorm();
  const double tol2 = 1e-28 * std::max(1.0, rhs.squaredNorm());
  for (int it = 0; it < 2 * p_ + 50 && rr > tol2; ++it) {
    Eigen::VectorXd hd = normal_apply(d) + ridge * d;
    const double alpha = rr / d.dot(hd);
    x += alpha * d;
    r -= alpha * hd;
    const double rr_new = r.squaredNorm();
    d = r + (rr_new / rr) * d;
    rr = rr_new;
  }
  return x;
}

Eigen::VectorXd LossModel::prox_solve(std::span<const Eigen::VectorXd> anchors, double tau,
                                      double inner_tol) const {
  if (anchors.empty()) throw ValidationError("prox_solve: anchors must be nonempty");
  if (!(tau > 0.0)) throw ValidationError("prox_solve: tau must be > 0");
  for (const auto& z : anchors) check_dim(z);

  if (kind_ == LossKind::LeastSquares) {
    const double m = static_cast<double>(anchors.size());
    const Eigen::VectorXd rhs =
        (has_dense_normal_ ? normal_rhs_
                           : [&] {
                               Eigen::VectorXd g = Eigen::VectorXd::Zero(p_);
                               for (std::size_t r = 0; r < shard_.rows.size(); ++r) {
                                 shard_.rows[r].add_scaled(g, shard_.labels[r]);
                               }
                               return Eigen::VectorXd(g * inv_d_);
                             }()) +
        tau * sum_anchors(anchors);
    return solve_ridge(l2_ + tau * m, rhs);
  }
  return newton_prox(anchors, tau, inner_tol);
}

double LossModel::prox_objective(const Eigen::VectorXd& x,
                                 std::span<const Eigen::VectorXd> anchors, double tau) const {
  double v = eval_loss(x);
  for (const auto& z : anchors) v += 0.5 * tau * (x - z).squaredNorm();
  return v;
}

Eigen::VectorXd LossModel::newton_prox(std::span<const Eigen::VectorXd> anchors, double tau,
                                       double inner_tol) const {
  const double m = static_cast<double>(anchors.size());
  const Eigen::VectorXd anchor_sum = sum_anchors(anchors);
  Eigen::VectorXd x = anchor_sum / m;  // warm start at the anchor mean

  auto subgrad = [&](const Eigen::VectorXd& v) {
    return Eigen::VectorXd(eval_grad(v) + tau * (m * v - anchor_sum));
  };
  auto subobj = [&](const Eigen::VectorXd& v) { return prox_objective(v, anchors, tau); };

  constexpr int kMaxIters = 100;
  Eigen::VectorXd g = subgrad(x);
  for (int it = 0; it < kMaxIters; ++it) {
    const double gnorm = g.norm();
    if (gnorm <= inner_tol) return x;

    // Hessian of the subobjective: (1/d) sum w_l a_l a_l' + (l2 + tau*M) I
    Eigen::VectorXd step;
    if (has_dense_normal_) {
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p_, p_);
      for (std::size_t r = 0; r < shard_.rows.size(); ++r) {
        const SparseRow& row = shard_.rows[r];
        const double margin = row.dot(x);
        const double s = sigmoid(shard_.labels[r] * margin);
        const double w = s * (1.0 - s) * inv_d_;
        for (std::size_t a = 0; a < row.idx.size(); ++a) {
          for (std::size_t b = 0; b < row.idx.size(); ++b) {
            h(row.idx[a], row.idx[b]) += w * row.val[a] * row.val[b];
          }
        }
      }
      h.diagonal().array() += l2_ + tau * m;
      step = Eigen::LLT<Eigen::MatrixXd>(h).solve(-g);
    } else {
      // Matrix-free Newton-CG for large dimensions.
      std::vector<double> weights(shard_.rows.size());
      for (std::size_t r = 0; r < shard_.rows.size(); ++r) {
        const double s = sigmoid(shard_.labels[r] * shard_.rows[r].dot(x));
        weights[r] = s * (1.0 - s) * inv_d_;
      }
      auto happly = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd out = (l2_ + tau * m) * v;
        for (std::size_t r = 0; r < shard_.rows.size(); ++r) {
          shard_.rows[r].add_scaled(out, weights[r] * shard_.rows[r].dot(v));
        }
        return out;
      };
      Eigen::VectorXd s = Eigen::VectorXd::Zero(p_);
      Eigen::VectorXd res = -g;
      Eigen::VectorXd dir = res;
      double rr = res.squaredNorm();
      const double tol2 = 1e-4 * rr;
      for (int cg = 0; cg < 2 * p_ + 50 && rr > tol2; ++cg) {
        Eigen::VectorXd hd = happly(dir);
        const double alpha = rr / dir.dot(hd);
        s += alpha * dir;
        res -= alpha * hd;
        const double rr_new = res.squaredNorm();
        dir = res + (rr_new / rr) * dir;
        rr = rr_new;
      }
      step = s;
    }

    // Backtracking on the gradient norm. The Newton direction descends the
    // merit 0.5*|grad|^2 (H is symmetric positive definite), and gradient
    // comparisons stay numerically meaningful where objective differences
    // fall below machine precision.
    double t = 1.0;
    Eigen::VectorXd trial = x + step;
    Eigen::VectorXd g_trial = subgrad(trial);
    while (t > 1e-12 && g_trial.squaredNorm() > (1.0 - 0.5 * t) * gnorm * gnorm) {
      t *= 0.5;
      trial = x + t * step;
      g_trial = subgrad(trial);
    }
    x = std::move(trial);
    g = std::move(g_trial);
  }
  char msg[96];
  std::snprintf(msg, sizeof(msg), "prox_solve: Newton did not reach inner_tol=%.3e", inner_tol);
  throw SolverError(msg, g.norm());
}

Eigen::VectorXd LossModel::grad_prox_step(const Eigen::VectorXd& x_prev,
                                          std::span<const Eigen::VectorXd> anchors, double tau,
                                          double rho) const {
  if (anchors.empty()) throw ValidationError("grad_prox_step: anchors must be nonempty");
  if (!(tau > 0.0)) throw ValidationError("grad_prox_step: tau must be > 0");
  if (rho < 0.0) throw ValidationError("grad_prox_step: rho must be >= 0");
  check_dim(x_prev);
  for (const auto& z : anchors) check_dim(z);
  const double m = static_cast<double>(anchors.size());
  return (tau * sum_anchors(anchors) + rho * x_prev - eval_grad(x_prev)) / (tau * m + rho);
}

double LossModel::lambda_max_normal() const {
  // Power iteration for lambda_max(AtA)/d with a deterministic start.
  Eigen::VectorXd v = Eigen::VectorXd::Ones(p_) / std::sqrt(static_cast<double>(p_));
  double lambda = 0.0;
  constexpr int kMaxIters = 1000;
  constexpr double kTol = 1e-8;
  int it = 0;
  for (; it < kMaxIters; ++it) {
    Eigen::VectorXd w = normal_apply(v);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;  // zero matrix (degenerate shard)
    const double estimate = v.dot(w);
    v = w / norm;
    if (it > 0 && std::abs(estimate - lambda) <= kTol * std::max(1.0, std::abs(estimate))) {
      return estimate;
    }
    lambda = estimate;
  }
  std::fprintf(stderr,
               "tokenwalk: warning: power iteration stagnated after %d iterations; "
               "using best estimate %.6g\n",
               kMaxIters, lambda);
  return lambda;
}

double LossModel::estimate_smoothness() const {
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    if (cached_smoothness_ >= 0.0) return cached_smoothness_;
  }
  const double lambda = lambda_max_normal();
  const double l = (kind_ == LossKind::LeastSquares ? lambda : lambda / 4.0) + l2_;
  std::lock_guard<std::mutex> lock(cache_mutex_);
  cached_smoothness_ = l;
  return l;
}

LossModelPtr make_loss_model(LossKind kind, DataShard shard, double l2_reg) {
  return std::make_shared<const LossModel>(kind, std::move(shard), l2_reg);
}

}  // namespace tokenwalk
