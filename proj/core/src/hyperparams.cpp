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

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <random>

#include <Eigen/Cholesky>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include "handover/spgp.hpp"

namespace handover {

namespace {

// Search box in natural units; the simplex moves in log space and the objective
// clamps into the box.
constexpr double kMinLengthscale = 0.05, kMaxLengthscale = 10.0;
constexpr double kMinSignal = 1e-3, kMaxSignal = 10.0;
constexpr double kMinNoise = 1e-6, kMaxNoise = 1.0;

KernelParams from_log(const gsl_vector* v) {
  KernelParams k;
  k.lengthscale.x() = std::clamp(std::exp(gsl_vector_get(v, 0)), kMinLengthscale, kMaxLengthscale);
  k.lengthscale.y() = std::clamp(std::exp(gsl_vector_get(v, 1)), kMinLengthscale, kMaxLengthscale);
  k.signal_variance = std::clamp(std::exp(gsl_vector_get(v, 2)), kMinSignal, kMaxSignal);
  k.noise_variance = std::clamp(std::exp(gsl_vector_get(v, 3)), kMinNoise, kMaxNoise);
  return k;
}

struct Problem {
  const HandoverDataset* dataset;
  const std::vector<std::size_t>* indices;
};

double objective(const gsl_vector* v, void* params) {
  const auto* p = static_cast<const Problem*>(params);
  const double nll = flow_negative_log_likelihood(*p->dataset, *p->indices, from_log(v));
  return std::isfinite(nll) ? nll : 1e300;
}

}  // namespace

double flow_negative_log_likelihood(const HandoverDataset& dataset,
                                    const std::vector<std::size_t>& indices,
                                    const KernelParams& kernel) {
  double total = 0.0;
  for (auto idx : indices) {
    const auto& traj = dataset[idx].receiver;
    const auto vel = finite_difference_velocities(traj);
    const auto n = static_cast<Eigen::Index>(traj.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = j; i < n; ++i) {
        k(i, j) = se_kernel(kernel, traj.pose(static_cast<std::size_t>(i)).vec(),
                            traj.pose(static_cast<std::size_t>(j)).vec());
      }
    }
    k.diagonal().array() +=
        std::max(kernel.noise_variance, kRelativeJitter * kernel.signal_variance);
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    Eigen::MatrixXd y(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) y.row(i) = vel[static_cast<std::size_t>(i)].transpose();
    const Eigen::MatrixXd alpha = llt.matrixL().solve(y);
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    total += 0.5 * alpha.squaredNorm() + log_det +
             static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  }
  return total;
}

KernelParams fit_kernel_hyperparameters(const HandoverDataset& dataset, std::size_t subsample,
                                        std::uint64_t seed, const KernelParams& initial) {
  initial.validate();
  if (dataset.empty()) throw std::invalid_argument("cannot fit hyperparameters on an empty dataset");
  std::vector<std::size_t> indices(dataset.size());
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(indices.begin(), indices.end(), rng);
  indices.resize(std::min(subsample, indices.size()));
  std::sort(indices.begin(), indices.end());

  Problem problem{&dataset, &indices};
  gsl_multimin_function fn{&objective, 4, &problem};

  using VectorPtr = std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)>;
  using SolverPtr = std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)>;
  VectorPtr xp(gsl_vector_alloc(4), &gsl_vector_free);
  VectorPtr stepp(gsl_vector_alloc(4), &gsl_vector_free);
  SolverPtr solverp(gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 4),
                    &gsl_multimin_fminimizer_free);
  if (!xp || !stepp || !solverp) throw std::bad_alloc();
  gsl_vector* x = xp.get();
  gsl_vector* step = stepp.get();
  gsl_multimin_fminimizer* solver = solverp.get();
  gsl_vector_set(x, 0, std::log(initial.lengthscale.x()));
  gsl_vector_set(x, 1, std::log(initial.lengthscale.y()));
  gsl_vector_set(x, 2, std::log(initial.signal_variance));
  gsl_vector_set(x, 3, std::log(initial.noise_variance));
  gsl_vector_set_all(step, 0.5);

  gsl_multimin_fminimizer_set(solver, &fn, x, step);
  for (int iter = 0; iter < 400; ++iter) {
    if (gsl_multimin_fminimizer_iterate(solver) != 0) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(solver), 1e-3) == GSL_SUCCESS) break;
  }
  return from_log(gsl_multimin_fminimizer_x(solver));
}

}  // namespace handover
