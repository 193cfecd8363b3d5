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

#include "handover/similarity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace handover {

void SimilarityConfig::validate() const {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw std::invalid_argument("kappa must be >= 0");
  if (!(min_speed > 0.0)) throw std::invalid_argument("min_speed must be > 0");
  if (window == 0) throw std::invalid_argument("distance window must be positive");
}

ObservedTrajectory::ObservedTrajectory(std::vector<ReceiverPose> poses, double dt)
    : poses_(std::move(poses)) {
  if (poses_.empty()) throw std::invalid_argument("observation is empty");
  if (poses_.size() == 1) {
    velocities_.assign(1, Eigen::Vector2d::Zero());
  } else {
    velocities_ = finite_difference_velocities(poses_, dt);
  }
}

ObservedTrajectory::ObservedTrajectory(std::vector<ReceiverPose> poses,
                                       std::vector<Eigen::Vector2d> velocities)
    : poses_(std::move(poses)), velocities_(std::move(velocities)) {
  if (poses_.empty()) throw std::invalid_argument("observation is empty");
  if (poses_.size() != velocities_.size()) {
    throw std::invalid_argument("observation poses and velocities differ in length");
  }
}

ObservedTrajectory ObservedTrajectory::prefix(const ReceiverTrajectory& traj, std::size_t count) {
  if (count == 0 || count > traj.size()) throw std::out_of_range("prefix length out of range");
  std::vector<ReceiverPose> poses;
  poses.reserve(count);
  for (std::size_t i = 0; i < count; ++i) poses.push_back(traj.pose(i));
  return ObservedTrajectory(std::move(poses), traj.dt());
}

double cosine_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double min_speed) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na < min_speed || nb < min_speed) return 1.0;
  const double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  return 1.0 - c;
}

double trajectory_distance(const ObservedTrajectory& obs, const FlowModel& model,
                           const SimilarityConfig& config) {
  const std::size_t begin = obs.window_begin(config.window);
  std::vector<double> terms;
  terms.reserve(obs.size() - begin);
  for (std::size_t i = begin; i < obs.size(); ++i) {
    terms.push_back(distance_term(obs.velocity(i), model.predict(obs.pose(i)), config));
  }
  return mean_of_terms(terms);
}

double similarity(const ObservedTrajectory& obs, const FlowModel& model,
                  const SimilarityConfig& config) {
  return similarity_from_distance(trajectory_distance(obs, model, config));
}

void sort_ranking(std::vector<RankedTrajectory>& entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const RankedTrajectory& a, const RankedTrajectory& b) {
                     if (a.similarity != b.similarity) return a.similarity > b.similarity;
                     return a.index < b.index;
                   });
}

Ranking rank_all(const ObservedTrajectory& obs, std::span<const FlowModel> models,
                 const SimilarityConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  Ranking out;
  out.entries.reserve(models.size());
  for (std::size_t k = 0; k < models.size(); ++k) {
    out.entries.push_back({k, similarity(obs, models[k], config)});
  }
  sort_ranking(out.entries);
  out.latency_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace handover
