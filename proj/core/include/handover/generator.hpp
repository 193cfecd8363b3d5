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

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "handover/dataset.hpp"
#include "handover/similarity.hpp"
#include "handover/spgp.hpp"

namespace handover {

struct PredictorConfig {
  double inducing_ratio = 0.4;
  SimilarityConfig similarity;
  std::size_t k_neighbors = 10;
};

/// Stored handovers with one fitted flow model per receiver trajectory. Immutable and
/// cheap to copy; share freely across threads.
class PredictionContext {
 public:
  PredictionContext(HandoverDataset dataset, std::vector<FlowModel> models,
                    SimilarityConfig similarity, std::size_t k_neighbors);

  /// Fits a flow model for every pair with the shared kernel.
  static PredictionContext fit(HandoverDataset dataset, const KernelParams& kernel,
                               const PredictorConfig& config);

  const HandoverDataset& dataset() const { return *dataset_; }
  std::span<const FlowModel> models() const { return *models_; }
  const SimilarityConfig& similarity() const { return similarity_; }
  std::size_t k_neighbors() const { return k_neighbors_; }
  std::size_t size() const { return dataset_->size(); }
  double sample_rate_hz() const;

  /// Mean of the stored giver trajectories' first poses.
  GiverPose rest_pose() const;

 private:
  std::shared_ptr<const HandoverDataset> dataset_;
  std::shared_ptr<const std::vector<FlowModel>> models_;
  SimilarityConfig similarity_;
  std::size_t k_neighbors_;
};

struct PredictOptions {
  // Stored pair left out of the ranking (leave-one-out replays).
  std::optional<std::size_t> exclude;
};

struct NeighborContribution {
  std::size_t index;
  double similarity;
  double weight;
  std::size_t aligned_index;  // sample of the stored receiver closest to the current pose
};

/// Blended giver poses from the current tick forward; poses[0] is the target for now.
struct PredictedTrajectory {
  std::vector<GiverPose> poses;
  std::vector<NeighborContribution> sources;  // in ranking order

  std::size_t horizon() const { return poses.size(); }
  /// No selected neighbour has samples left beyond its aligned one.
  bool handover_complete() const { return poses.size() <= 1; }
  /// Pose at `offset`, clamped to the last available one.
  const GiverPose& at(std::size_t offset) const {
    return poses[std::min(offset, poses.size() - 1)];
  }

  bool operator==(const PredictedTrajectory& o) const;
};

/// First index of the stored trajectory closest (Euclidean) to `pose`.
std::size_t align_time(const ReceiverPose& pose, const ReceiverTrajectory& stored);

/// Weighted blend of the aligned giver segments of the best `k_neighbors` entries of
/// a descending ranking. Weights are similarities normalized over the selection.
PredictedTrajectory blend_neighbors(const PredictionContext& ctx,
                                    std::span<const RankedTrajectory> ranking,
                                    const ReceiverPose& current);

PredictedTrajectory predict_trajectory(const PredictionContext& ctx, const ObservedTrajectory& obs,
                                       const PredictOptions& options = {});

/// Incremental replay of one receiver stream. Flow predictions at each observed pose
/// and the distance terms of samples whose velocity can no longer change are cached,
/// so a tick costs one flow query per stored trajectory. predict() returns exactly
/// what predict_trajectory() returns for the same observation.
class PredictionSession {
 public:
  explicit PredictionSession(const PredictionContext& ctx, PredictOptions options = {});

  void observe(const ReceiverPose& pose);
  /// Appends many poses at once with one batched flow query per stored trajectory.
  /// Offline replays use this with predict(prefix); results match per-pose observe()
  /// up to rounding.
  void observe_batch(std::span<const ReceiverPose> poses);
  std::size_t observed() const { return poses_.size(); }
  ObservedTrajectory observation() const;
  PredictedTrajectory predict() const { return predict(poses_.size()); }
  /// Prediction as it was after the first `prefix` observations.
  PredictedTrajectory predict(std::size_t prefix) const;

 private:
  const PredictionContext* ctx_;
  PredictOptions options_;
  double dt_;
  std::vector<ReceiverPose> poses_;
  std::vector<std::vector<FlowPrediction>> predictions_;  // [model][sample]
  std::vector<std::vector<double>> terms_;                // [model][sample], final only

  void finalize_terms();
};

/// Temporal ensemble over recent predictions. Each query averages every buffered
/// prediction at the same absolute target tick, weighting the one issued i ticks ago
/// by decay^i.
class EnsembleBuffer {
 public:
  explicit EnsembleBuffer(std::size_t chunk_size = 30, double decay = 0.8);

  /// Ticks must strictly increase.
  void push(PredictedTrajectory prediction, std::int64_t tick);

  /// Ensemble pose at latest tick + offset. Predictions that end earlier contribute
  /// their last pose.
  GiverPose query(std::size_t offset) const;

  GiverPose push_and_query(PredictedTrajectory prediction, std::int64_t tick,
                           std::size_t offset) {
    push(std::move(prediction), tick);
    return query(offset);
  }

  bool empty() const { return entries_.empty(); }
  std::size_t depth() const { return entries_.size(); }
  std::size_t chunk_size() const { return chunk_size_; }
  double decay() const { return decay_; }
  /// Horizon of the newest prediction.
  std::size_t horizon() const;
  std::int64_t latest_tick() const;

 private:
  struct Entry {
    PredictedTrajectory prediction;
    std::int64_t tick;
  };
  std::deque<Entry> entries_;
  std::size_t chunk_size_;
  double decay_;
};

/// Sample offset round(t_f * rate).
std::size_t forecast_offset(double forecast_time, double sample_rate_hz);

/// Pose forecast_time ahead, clamped to the horizon.
GiverPose forecast_pose(const PredictedTrajectory& prediction, double forecast_time,
                        double sample_rate_hz);
GiverPose forecast_pose(const EnsembleBuffer& buffer, double forecast_time,
                        double sample_rate_hz);

}  // namespace handover
