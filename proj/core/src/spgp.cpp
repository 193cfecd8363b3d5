/*
 * Copyright 2026 The Handover Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "handover/spgp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>

namespace handover {

void KernelParams::validate() const {
  if (!(lengthscale.x() > 0.0) || !(lengthscale.y() > 0.0) || !(signal_variance > 0.0) ||
      !(noise_variance > 0.0) || !lengthscale.allFinite() || !std::isfinite(signal_variance) ||
      !std::isfinite(noise_variance)) {
    throw std::invalid_argument("kernel hyperparameters must be finite and strictly positive");
  }
}

double se_kernel(const KernelParams& k, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d d = (a - b).cwiseQuotient(k.lengthscale);
  return k.signal_variance * std::exp(-0.5 * d.squaredNorm());
}

Eigen::Vector2d finite_difference_at(std::span<const ReceiverPose> poses, std::size_t i,
                                     double dt) {
  const std::size_t n = poses.size();
  if (i == 0) return (poses[1].vec() - poses[0].vec()) / dt;
  if (i + 1 == n) return (poses[n - 1].vec() - poses[n - 2].vec()) / dt;
  return (poses[i + 1].vec() - poses[i - 1].vec()) / (2.0 * dt);
}

std::vector<Eigen::Vector2d> finite_difference_velocities(std::span<const ReceiverPose> poses,
                                                          double dt) {
  const std::size_t n = poses.size();
  if (n < 2) throw std::invalid_argument("velocity estimate needs at least two poses");
  if (!(dt > 0.0)) throw std::invalid_argument("sample interval must be positive");
  std::vector<Eigen::Vector2d> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = finite_difference_at(poses, i, dt);
  return v;
}

std::vector<Eigen::Vector2d> finite_difference_velocities(const ReceiverTrajectory& traj) {
  const auto poses = traj.poses();
  return finite_difference_velocities(poses, traj.dt());
}

std::vector<std::size_t> time_uniform_indices(std::size_t n, double ratio) {
  if (!(ratio > 0.0) || ratio > 1.0) throw std::invalid_argument("inducing ratio must be in (0, 1]");
  if (n < 2) throw std::invalid_argument("need at least two inputs");
  const auto m = std::min(
      n, std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(ratio * static_cast<double>(n)))));
  std::vector<std::size_t> idx;
  idx.reserve(m);
  const double step = static_cast<double>(n - 1) / static_cast<double>(m - 1);
  for (std::size_t i = 0; i < m; ++i) {
    const auto j = static_cast<std::size_t>(std::lround(step * static_cast<double>(i)));
    if (idx.empty() || idx.back() != j) idx.push_back(j);
  }
  return idx;
}

namespace {

Eigen::MatrixXd kernel_matrix(const FlowModel::Inputs& a, const FlowModel::Inputs& b,
                              const KernelParams& k) {
  Eigen::MatrixXd out(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      out(i, j) = se_kernel(k, a.row(i).transpose(), b.row(j).transpose());
    }
  }
  return out;
}

// Lower Cholesky factor; retries with growing diagonal loading when the matrix is
// numerically singular.
Eigen::MatrixXd robust_cholesky(Eigen::MatrixXd a, double jitter) {
  const Eigen::Index n = a.rows();
  double extra = 0.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    Eigen::MatrixXd loaded = a;
    loaded.diagonal().array() += extra;
    Eigen::LLT<Eigen::MatrixXd> llt(loaded);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    extra = extra == 0.0 ? std::max(jitter, 1e-12) : extra * 10.0;
  }
  throw NumericalError("kernel matrix of size " + std::to_string(n) +
                       " is not positive definite even with jitter");
}

}  // namespace

FlowModel FlowModel::fit(const ReceiverTrajectory& traj, double inducing_ratio,
                         const KernelParams& kernel) {
  const auto vel = finite_difference_velocities(traj);
  Inputs x(static_cast<Eigen::Index>(traj.size()), 2);
  Inputs y(static_cast<Eigen::Index>(traj.size()), 2);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x.row(r) = traj.pose(i).vec().transpose();
    y.row(r) = vel[i].transpose();
  }
  return fit(x, y, inducing_ratio, kernel);
}

FlowModel FlowModel::fit(const Inputs& inputs, const Inputs& targets, double inducing_ratio,
                         const KernelParams& kernel) {
  kernel.validate();
  if (inputs.rows() != targets.rows()) throw std::invalid_argument("inputs/targets size mismatch");
  const auto n = static_cast<std::size_t>(inputs.rows());

  FlowModel model;
  model.inputs_ = inputs;
  model.targets_ = targets;
  model.ratio_ = inducing_ratio;
  model.kernel_ = kernel;
  model.inducing_index_ = time_uniform_indices(n, inducing_ratio);
  const auto m = static_cast<Eigen::Index>(model.inducing_index_.size());
  model.exact_ = model.inducing_index_.size() == n;

  Inputs xm(m, 2);
  for (Eigen::Index i = 0; i < m; ++i) {
    xm.row(i) = inputs.row(static_cast<Eigen::Index>(model.inducing_index_[static_cast<std::size_t>(i)]));
  }
  model.scaled_inducing_.resize(m, 2);
  model.scaled_inducing_.col(0) = xm.col(0) / kernel.lengthscale.x();
  model.scaled_inducing_.col(1) = xm.col(1) / kernel.lengthscale.y();

  const double jitter = kRelativeJitter * kernel.signal_variance;

  if (model.exact_) {
    // Exact GP. The noise term already keeps K + noise*I positive definite; jitter only
    // matters when the noise is below it.
    Eigen::MatrixXd k = kernel_matrix(inputs, inputs, kernel);
    k.diagonal().array() += std::max(kernel.noise_variance, jitter);
    model.chol_m_ = robust_cholesky(std::move(k), jitter);
    const auto llt = model.chol_m_.triangularView<Eigen::Lower>();
    Inputs alpha = llt.solve(targets);
    model.alpha_ = model.chol_m_.transpose().triangularView<Eigen::Upper>().solve(alpha);
    return model;
  }

  Eigen::MatrixXd kmm = kernel_matrix(xm, xm, kernel);
  kmm.diagonal().array() += jitter;
  model.chol_m_ = robust_cholesky(std::move(kmm), jitter);
  const auto lm = model.chol_m_.triangularView<Eigen::Lower>();

  const Eigen::MatrixXd kmn = kernel_matrix(xm, inputs, kernel);
  const Eigen::MatrixXd v = lm.solve(kmn);  // m x n

  // FITC diagonal: Lambda = diag(Knn - Qnn) + noise.
  Eigen::VectorXd lambda(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    const double q = v.col(i).squaredNorm();
    lambda(i) = std::max(0.0, kernel.signal_variance - q) + kernel.noise_variance;
  }
  const Eigen::VectorXd inv_sqrt_lambda = lambda.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd vs = v * inv_sqrt_lambda.asDiagonal();
  Eigen::MatrixXd b = Eigen::MatrixXd::Identity(m, m);
  b.selfadjointView<Eigen::Lower>().rankUpdate(vs);
  b.triangularView<Eigen::StrictlyUpper>() = b.transpose();
  const Eigen::MatrixXd chol_b = robust_cholesky(std::move(b), 0.0);
  const auto lb = chol_b.triangularView<Eigen::Lower>();

  const Inputs weighted = lambda.cwiseInverse().asDiagonal() * targets;  // n x 2
  Inputs rhs = v * weighted;                                               // m x 2
  rhs = lb.solve(rhs);
  rhs = chol_b.transpose().triangularView<Eigen::Upper>().solve(rhs);
  model.alpha_ = model.chol_m_.transpose().triangularView<Eigen::Upper>().solve(rhs);

  const Eigen::MatrixXd lm_inv = lm.solve(Eigen::MatrixXd::Identity(m, m));
  const Eigen::MatrixXd r = lb.solve(lm_inv);
  Eigen::MatrixXd q = lm_inv.transpose() * lm_inv - r.transpose() * r;
  model.variance_form_ = 0.5 * (q + q.transpose());
  model.chol_m_.resize(0, 0);
  return model;
}

FlowPrediction FlowModel::predict(const Eigen::Vector2d& query) const {
  const double qx = query.x() / kernel_.lengthscale.x();
  const double qy = query.y() / kernel_.lengthscale.y();
  Eigen::VectorXd k = ((scaled_inducing_.col(0).array() - qx).square() +
                       (scaled_inducing_.col(1).array() - qy).square())
                          .operator*(-0.5)
                          .exp()
                          .matrix() *
                      kernel_.signal_variance;

  FlowPrediction out;
  out.mean = alpha_.transpose() * k;

  double var = kernel_.signal_variance;
  if (exact_) {
    chol_m_.triangularView<Eigen::Lower>().solveInPlace(k);
    var -= k.squaredNorm();
  } else {
    var -= k.dot(variance_form_.selfadjointView<Eigen::Lower>() * k);
  }
  if (var < -1e-10 * std::max(1.0, kernel_.signal_variance)) {
    throw NumericalError("negative predictive variance " + std::to_string(var));
  }
  out.variance = std::max(0.0, var);
  return out;
}

std::vector<FlowPrediction> FlowModel::predict_batch(const Inputs& queries) const {
  const Eigen::Index q = queries.rows();
  const Eigen::Index m = scaled_inducing_.rows();
  Eigen::MatrixXd k(m, q);
  for (Eigen::Index j = 0; j < q; ++j) {
    const double qx = queries(j, 0) / kernel_.lengthscale.x();
    const double qy = queries(j, 1) / kernel_.lengthscale.y();
    k.col(j) = ((scaled_inducing_.col(0).array() - qx).square() +
                (scaled_inducing_.col(1).array() - qy).square())
                   .operator*(-0.5)
                   .exp()
                   .matrix() *
               kernel_.signal_variance;
  }
  const Eigen::MatrixXd mean = alpha_.transpose() * k;  // 2 x q

  Eigen::VectorXd var = Eigen::VectorXd::Constant(q, kernel_.signal_variance);
  if (exact_) {
    chol_m_.triangularView<Eigen::Lower>().solveInPlace(k);
    var -= k.colwise().squaredNorm().transpose();
  } else {
    const Eigen::MatrixXd qk = variance_form_.selfadjointView<Eigen::Lower>() * k;
    var -= k.cwiseProduct(qk).colwise().sum().transpose();
  }
  std::vector<FlowPrediction> out(static_cast<std::size_t>(q));
  for (Eigen::Index j = 0; j < q; ++j) {
    if (var(j) < -1e-10 * std::max(1.0, kernel_.signal_variance)) {
      throw NumericalError("negative predictive variance " + std::to_string(var(j)));
    }
    out[static_cast<std::size_t>(j)] = {mean.col(j), std::max(0.0, var(j))};
  }
  return out;
}

}  // namespace handover
