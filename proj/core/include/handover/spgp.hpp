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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "handover/dataset.hpp"

namespace handover {

/// Squared-exponential kernel hyperparameters shared by both velocity outputs.
struct KernelParams {
  Eigen::Vector2d lengthscale{0.5, 0.5};  // m, per input dimension
  double signal_variance = 1.0;           // (m/s)^2
  double noise_variance = 1e-2;           // (m/s)^2

  void validate() const;
  bool operator==(const KernelParams&) const = default;
};

double se_kernel(const KernelParams& k, const Eigen::Vector2d& a, const Eigen::Vector2d& b);

// Relative jitter added to kernel diagonals before factorization.
inline constexpr double kRelativeJitter = 1e-8;

/// Velocity at sample i: central difference in the interior, one-sided at both ends.
Eigen::Vector2d finite_difference_at(std::span<const ReceiverPose> poses, std::size_t i,
                                     double dt);

/// finite_difference_at for every sample.
std::vector<Eigen::Vector2d> finite_difference_velocities(std::span<const ReceiverPose> poses,
                                                          double dt);
std::vector<Eigen::Vector2d> finite_difference_velocities(const ReceiverTrajectory& traj);

/// max(2, round(ratio * n)) indices spread uniformly over [0, n - 1], deduplicated.
std::vector<std::size_t> time_uniform_indices(std::size_t n, double ratio);

struct FlowPrediction {
  Eigen::Vector2d mean;
  double variance;  // latent variance, averaged over the two outputs
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flow function pose -> velocity for one trajectory, fitted as a FITC sparse GP on
/// time-uniform inducing inputs. Both velocity components share the kernel and the
/// inducing set, so their predictive variances coincide. With every input used as an
/// inducing point the model is the exact GP.
///
/// Immutable after fit; predict() is safe to call concurrently.
class FlowModel {
 public:
  using Inputs = Eigen::Matrix<double, Eigen::Dynamic, 2>;

  static FlowModel fit(const ReceiverTrajectory& traj, double inducing_ratio,
                       const KernelParams& kernel);
  static FlowModel fit(const Inputs& inputs, const Inputs& targets, double inducing_ratio,
                       const KernelParams& kernel);

  FlowPrediction predict(const Eigen::Vector2d& query) const;
  FlowPrediction predict(const ReceiverPose& query) const { return predict(query.vec()); }
  /// Many queries (one per row) at once; agrees with predict() up to rounding.
  std::vector<FlowPrediction> predict_batch(const Inputs& queries) const;

  bool exact() const { return exact_; }
  double inducing_ratio() const { return ratio_; }
  const KernelParams& kernel() const { return kernel_; }
  std::size_t num_inputs() const { return static_cast<std::size_t>(inputs_.rows()); }
  std::size_t num_inducing() const { return inducing_index_.size(); }
  const std::vector<std::size_t>& inducing_indices() const { return inducing_index_; }
  const Inputs& inputs() const { return inputs_; }
  const Inputs& targets() const { return targets_; }

 private:
  FlowModel() = default;

  Inputs inputs_;
  Inputs targets_;
  std::vector<std::size_t> inducing_index_;
  double ratio_ = 0.0;
  KernelParams kernel_;
  bool exact_ = false;

  Inputs scaled_inducing_;   // inducing inputs divided by the lengthscales
  Eigen::MatrixXd chol_m_;   // chol(K + noise), exact mode only
  // Sparse mode: Kmm^-1 - (Kmm + Kmn Lambda^-1 Knm)^-1, lower triangle, so the
  // latent variance is s^2 - k^T Q k in one pass over the matrix.
  Eigen::MatrixXd variance_form_;
  Inputs alpha_;             // predictive mean weights, m x 2
};

/// Maximum-marginal-likelihood kernel hyperparameters from a seeded subsample of the
/// dataset's receiver trajectories (exact GP per trajectory, both outputs).
KernelParams fit_kernel_hyperparameters(const HandoverDataset& dataset, std::size_t subsample,
                                        std::uint64_t seed,
                                        const KernelParams& initial = KernelParams{});

/// Negative log marginal likelihood summed over trajectories and output dimensions.
double flow_negative_log_likelihood(const HandoverDataset& dataset,
                                    const std::vector<std::size_t>& indices,
                                    const KernelParams& kernel);

}  // namespace handover
