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

// Independent reference implementations used as test oracles. Nothing here calls
// into the library's numerics.

#pragma once

#include <cmath>
#include <numbers>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace handover::testing {

/// Direct full-GP regression: inverts (K + noise I) by full-pivot LU in extended
/// precision rather than by a Cholesky factorization.
struct NaiveGp {
  using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

  Eigen::MatrixXd x;  // n x 2
  Eigen::MatrixXd y;  // n x 2
  double lx, ly, signal, noise;
  MatL system_inverse;

  NaiveGp(Eigen::MatrixXd inputs, Eigen::MatrixXd targets, double lengthscale_x,
          double lengthscale_y, double signal_variance, double noise_variance)
      : x(std::move(inputs)), y(std::move(targets)), lx(lengthscale_x), ly(lengthscale_y),
        signal(signal_variance), noise(noise_variance) {
    const Eigen::Index n = x.rows();
    MatL k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) k(i, j) = cov_l(x.row(i), x.row(j));
    }
    k += static_cast<long double>(noise) * MatL::Identity(n, n);
    system_inverse = k.fullPivLu().inverse();
  }

  long double cov_l(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) const {
    const long double dx = (static_cast<long double>(a(0)) - b(0)) / lx;
    const long double dy = (static_cast<long double>(a(1)) - b(1)) / ly;
    return signal * std::exp(-0.5L * (dx * dx + dy * dy));
  }
  double cov(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) const {
    return static_cast<double>(cov_l(a, b));
  }

  VecL cross(double qx, double qy) const {
    Eigen::RowVectorXd q(2);
    q << qx, qy;
    VecL k(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) k(i) = cov_l(x.row(i), q);
    return k;
  }

  Eigen::Vector2d mean(double qx, double qy) const {
    const VecL k = cross(qx, qy);
    return (k.transpose() * system_inverse * y.cast<long double>()).transpose().cast<double>();
  }

  double variance(double qx, double qy) const {
    const VecL k = cross(qx, qy);
    return static_cast<double>(signal - k.dot(system_inverse * k));
  }
};

/// FITC by its textbook dense formulas: Q = Knm Kmm^-1 Kmn, Lambda = diag(K - Q) +
/// noise, Sigma = (Kmm + Kmn Lambda^-1 Knm)^-1.
struct NaiveFitc {
  NaiveGp base;  // only for the covariance function
  Eigen::MatrixXd xm;
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> kmm_inv, sigma;
  Eigen::MatrixXd weights;  // Sigma Kmn Lambda^-1 Y

  NaiveFitc(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
            const std::vector<std::size_t>& inducing, double lx, double ly, double signal,
            double noise, double jitter)
      : base(inputs.topRows(1), targets.topRows(1), lx, ly, signal, noise) {
    const Eigen::Index n = inputs.rows();
    const auto m = static_cast<Eigen::Index>(inducing.size());
    xm.resize(m, 2);
    for (Eigen::Index i = 0; i < m; ++i) xm.row(i) = inputs.row(static_cast<Eigen::Index>(inducing[static_cast<std::size_t>(i)]));
    Eigen::MatrixXd kmm(m, m), kmn(m, n);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) kmm(i, j) = base.cov(xm.row(i), xm.row(j));
      for (Eigen::Index j = 0; j < n; ++j) kmn(i, j) = base.cov(xm.row(i), inputs.row(j));
    }
    // The textbook form squares the conditioning of Kmm, so solve it in extended precision.
    using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    MatL kmm_l = kmm.cast<long double>();
    kmm_l += static_cast<long double>(jitter) * MatL::Identity(m, m);
    const MatL kmn_l = kmn.cast<long double>();
    const MatL kmm_inv_l = kmm_l.fullPivLu().inverse();
    Eigen::Matrix<long double, Eigen::Dynamic, 1> lambda(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const long double q = kmn_l.col(j).dot(kmm_inv_l * kmn_l.col(j));
      lambda(j) = std::max(0.0L, static_cast<long double>(signal) - q) + noise;
    }
    const MatL scaled = kmn_l * lambda.cwiseInverse().asDiagonal();
    const MatL sigma_l = (kmm_l + scaled * kmn_l.transpose()).fullPivLu().inverse();
    kmm_inv = kmm_inv_l;
    sigma = sigma_l;
    weights = (sigma_l * scaled * targets.cast<long double>()).cast<double>();
  }

  Eigen::VectorXd cross(double qx, double qy) const {
    Eigen::RowVectorXd q(2);
    q << qx, qy;
    Eigen::VectorXd k(xm.rows());
    for (Eigen::Index i = 0; i < xm.rows(); ++i) k(i) = base.cov(xm.row(i), q);
    return k;
  }

  Eigen::Vector2d mean(double qx, double qy) const { return (cross(qx, qy).transpose() * weights).transpose(); }

  double variance(double qx, double qy) const {
    const Eigen::Matrix<long double, Eigen::Dynamic, 1> k = cross(qx, qy).cast<long double>();
    return static_cast<double>(base.signal - k.dot(kmm_inv * k) + k.dot(sigma * k));
  }
};

/// Φ(z) from the Maclaurin series of erf, summed until terms vanish.
inline double normal_cdf_series(double z) {
  const double x = z / std::sqrt(2.0);
  double term = x;
  double sum = x;
  for (int n = 1; n < 200; ++n) {
    term *= -x * x / n;
    const double add = term / (2 * n + 1);
    sum += add;
    if (std::abs(add) < 1e-18 * std::abs(sum)) break;
  }
  return 0.5 + sum / std::sqrt(std::numbers::pi);
}

}  // namespace handover::testing
