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
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "handover/dataset.hpp"
#include "handover/spgp.hpp"

namespace handover {

inline constexpr std::size_t kFullHistory = std::numeric_limits<std::size_t>::max();

struct SimilarityConfig {
  double kappa = 1.0;
  // Velocities slower than this carry no direction; cosine distance is neutral.
  double min_speed = 0.05;
  // Trailing samples entering the distance; kFullHistory uses the whole observation.
  std::size_t window = 90;

  void validate() const;
};

/// Receiver poses observed so far with velocities from the same finite-difference
/// operator used for training. A single pose gets a zero velocity.
class ObservedTrajectory {
 public:
  ObservedTrajectory(std::vector<ReceiverPose> poses, double dt);
  ObservedTrajectory(std::vector<ReceiverPose> poses, std::vector<Eigen::Vector2d> velocities);

  /// First `count` samples of a stored trajectory.
  static ObservedTrajectory prefix(const ReceiverTrajectory& traj, std::size_t count);

  std::size_t size() const { return poses_.size(); }
  const ReceiverPose& pose(std::size_t i) const { return poses_[i]; }
  const Eigen::Vector2d& velocity(std::size_t i) const { return velocities_[i]; }
  const ReceiverPose& current() const { return poses_.back(); }
  const std::vector<ReceiverPose>& poses() const { return poses_; }
  const std::vector<Eigen::Vector2d>& velocities() const { return velocities_; }

  /// Index of the first sample inside the distance window.
  std::size_t window_begin(std::size_t window) const {
    return window >= size() ? 0 : size() - window;
  }

 private:
  std::vector<ReceiverPose> poses_;
  std::vector<Eigen::Vector2d> velocities_;
};

/// 1 - cos of the angle between a and b, in [0, 2]; 1 when either is slower than
/// min_speed.
double cosine_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double min_speed);

/// Per-sample summand of the trajectory distance.
inline double distance_term(const Eigen::Vector2d& observed_velocity, const FlowPrediction& pred,
                            const SimilarityConfig& config) {
  return config.kappa * cosine_distance(observed_velocity, pred.mean, config.min_speed) +
         pred.variance;
}

/// Mean of per-sample terms; shared by the stateless and cached evaluation paths.
inline double mean_of_terms(std::span<const double> terms) {
  double sum = 0.0;
  for (double t : terms) sum += t;
  return sum / static_cast<double>(terms.size());
}

/// Average over the observation window of kappa * d_cos(observed velocity, flow mean)
/// plus flow variance, both evaluated at the observed pose.
double trajectory_distance(const ObservedTrajectory& obs, const FlowModel& model,
                           const SimilarityConfig& config);

inline double similarity_from_distance(double distance) { return std::exp(-distance); }

double similarity(const ObservedTrajectory& obs, const FlowModel& model,
                  const SimilarityConfig& config);

struct RankedTrajectory {
  std::size_t index;
  double similarity;
};

struct Ranking {
  std::vector<RankedTrajectory> entries;  // descending similarity, ties by index
  double latency_seconds = 0.0;
};

/// Sorts (index, similarity) pairs by descending similarity, stable on index.
void sort_ranking(std::vector<RankedTrajectory>& entries);

Ranking rank_all(const ObservedTrajectory& obs, std::span<const FlowModel> models,
                 const SimilarityConfig& config);

}  // namespace handover
