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

// Small synthetic inputs shared by unit and acceptance tests.

#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "handover/dataset.hpp"
#include "handover/spgp.hpp"

namespace handover::testing {

/// Smooth random walk: random start, heading drifting with random curvature.
inline ReceiverTrajectory random_walk(std::mt19937_64& rng, std::size_t n, double rate = 30.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double x = 2.0 * u(rng), y = 2.0 * u(rng);
  double heading = 3.2 * u(rng);
  const double speed = 1.0 + 0.4 * u(rng);
  const double curvature = 0.8 * u(rng);
  const double wobble = 0.5 * u(rng);
  std::vector<ReceiverPose> poses;
  for (std::size_t i = 0; i < n; ++i) {
    poses.push_back({x, y});
    const double t = static_cast<double>(i) / rate;
    heading += (curvature + wobble * std::sin(2.0 * t)) / rate;
    x += speed * std::cos(heading) / rate;
    y += speed * std::sin(heading) / rate;
  }
  return ReceiverTrajectory::uniform(poses, rate);
}

inline KernelParams random_kernel(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  KernelParams k;
  k.lengthscale = {0.1 + 0.5 * u(rng), 0.1 + 0.5 * u(rng)};
  k.signal_variance = 0.2 + 1.3 * u(rng);
  k.noise_variance = std::pow(10.0, -3.0 + 1.7 * u(rng));
  return k;
}

/// Trajectory inputs and finite-difference targets as row matrices.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> training_data(const ReceiverTrajectory& t) {
  const auto v = finite_difference_velocities(t);
  Eigen::MatrixXd x(t.size(), 2), y(t.size(), 2);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x.row(r) = t.pose(i).vec().transpose();
    y.row(r) = v[i].transpose();
  }
  return {x, y};
}

/// Straight constant-speed walk with a giver wrist rising linearly from `z0`.
inline HandoverPair straight_pair(const std::string& id, Eigen::Vector2d start, double heading,
                                  std::size_t n, double speed = 1.0, double z0 = 0.8,
                                  double rate = 30.0) {
  std::vector<ReceiverPose> r;
  std::vector<GiverPose> g;
  const Eigen::Vector2d dir(std::cos(heading), std::sin(heading));
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    r.push_back(ReceiverPose::from(start + speed * t * dir));
    g.push_back({0.1 * t, -0.05 * t, z0 + 0.2 * t});
  }
  return HandoverPair(id, Label::kID, ReceiverTrajectory::uniform(r, rate),
                      GiverTrajectory::uniform(g, rate));
}

/// |a - b| <= tol * (1 + |b|), the relative criterion used against oracles.
inline double relative_gap(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

}  // namespace handover::testing
