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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace handover {

/// Receiver base position in the global frame (meters).
struct ReceiverPose {
  double x = 0.0;
  double y = 0.0;

  Eigen::Vector2d vec() const { return {x, y}; }
  static ReceiverPose from(const Eigen::Vector2d& v) { return {v.x(), v.y()}; }
  bool operator==(const ReceiverPose&) const = default;
};

/// Giver wrist position in the global frame (meters, z measured from the floor).
struct GiverPose {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Eigen::Vector3d vec() const { return {x, y, z}; }
  static GiverPose from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
  bool operator==(const GiverPose&) const = default;
};

// Desk-scale sanity bound on planar coordinates.
inline constexpr double kMaxCoordinate = 100.0;

void validate_pose(const ReceiverPose& p);
void validate_pose(const GiverPose& p);

template <typename Pose>
struct TimedPose {
  double t = 0.0;
  Pose pose;
  bool operator==(const TimedPose&) const = default;
};

// Maximum deviation of a sample interval from 1 / rate.
inline constexpr double kSpacingTolerance = 1e-9;

/// Uniformly sampled, strictly increasing pose sequence of at least two samples.
template <typename Pose>
class Trajectory {
 public:
  Trajectory(std::vector<TimedPose<Pose>> samples, double sample_rate_hz)
      : samples_(std::move(samples)), rate_hz_(sample_rate_hz) {
    if (!(rate_hz_ > 0.0) || !std::isfinite(rate_hz_)) {
      throw std::invalid_argument("trajectory sample rate must be positive");
    }
    if (samples_.size() < 2) {
      throw std::invalid_argument("trajectory needs at least two samples");
    }
    const double dt = 1.0 / rate_hz_;
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      if (!std::isfinite(samples_[i].t)) {
        throw std::invalid_argument("non-finite timestamp at sample " + std::to_string(i));
      }
      validate_pose(samples_[i].pose);
      if (i == 0) continue;
      const double step = samples_[i].t - samples_[i - 1].t;
      if (!(step > 0.0)) {
        throw std::invalid_argument("timestamps not strictly increasing at sample " +
                                    std::to_string(i));
      }
      if (std::abs(step - dt) > kSpacingTolerance) {
        throw std::invalid_argument("non-uniform sample spacing at sample " + std::to_string(i));
      }
    }
  }

  /// Builds a trajectory with timestamps t0 + i / rate.
  static Trajectory uniform(const std::vector<Pose>& poses, double sample_rate_hz,
                            double t0 = 0.0) {
    std::vector<TimedPose<Pose>> samples;
    samples.reserve(poses.size());
    for (std::size_t i = 0; i < poses.size(); ++i) {
      samples.push_back({t0 + static_cast<double>(i) / sample_rate_hz, poses[i]});
    }
    return Trajectory(std::move(samples), sample_rate_hz);
  }

  std::size_t size() const { return samples_.size(); }
  double rate_hz() const { return rate_hz_; }
  double dt() const { return 1.0 / rate_hz_; }
  const TimedPose<Pose>& operator[](std::size_t i) const { return samples_[i]; }
  const Pose& pose(std::size_t i) const { return samples_[i].pose; }
  double time(std::size_t i) const { return samples_[i].t; }
  const std::vector<TimedPose<Pose>>& samples() const { return samples_; }
  auto begin() const { return samples_.begin(); }
  auto end() const { return samples_.end(); }

  std::vector<Pose> poses() const {
    std::vector<Pose> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.pose);
    return out;
  }

  bool operator==(const Trajectory&) const = default;

 private:
  std::vector<TimedPose<Pose>> samples_;
  double rate_hz_;
};

using ReceiverTrajectory = Trajectory<ReceiverPose>;
using GiverTrajectory = Trajectory<GiverPose>;

enum class Label { kID, kOOD };

const char* to_string(Label label);
Label label_from_string(const std::string& s);

/// One recorded human-to-human handover: receiver base path and giver wrist path on
/// a shared clock.
struct HandoverPair {
  HandoverPair(std::string id, Label label, ReceiverTrajectory receiver, GiverTrajectory giver);

  std::string id;
  Label label;
  ReceiverTrajectory receiver;
  GiverTrajectory giver;

  std::size_t length() const { return receiver.size(); }
  bool operator==(const HandoverPair&) const = default;
};

class HandoverDataset {
 public:
  HandoverDataset() = default;
  explicit HandoverDataset(std::vector<HandoverPair> pairs);

  /// Throws if the id is already present.
  void add(HandoverPair pair);

  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  const HandoverPair& operator[](std::size_t i) const { return pairs_[i]; }
  const std::vector<HandoverPair>& pairs() const { return pairs_; }
  auto begin() const { return pairs_.begin(); }
  auto end() const { return pairs_.end(); }

  std::size_t count(Label label) const;

  /// Dataset restricted to the given pair indices, in the given order.
  HandoverDataset subset(const std::vector<std::size_t>& indices) const;

  bool operator==(const HandoverDataset&) const = default;

 private:
  std::vector<HandoverPair> pairs_;
};

// ---------------------------------------------------------------------------
// Synthetic generation

struct Range {
  double lo;
  double hi;
};

/// Scene and noise model for synthetic handovers. The giver stands at
/// giver_position facing receivers that start in an annular sector in front of it.
struct GeneratorConfig {
  int n_id = 900;
  int n_ood = 100;
  double rate_hz = 30.0;

  Eigen::Vector2d giver_position{0.0, 0.0};
  Range start_distance{2.8, 3.6};       // m from the giver
  Range start_bearing_deg{-30.0, 30.0};
  Range walk_speed{0.8, 1.4};           // m/s
  Range end_bearing_jitter_deg{-12.0, 12.0};

  // Receiver hand reaches this far ahead of the base toward the giver.
  double hand_offset = 0.15;
  // Horizontal distance of the exchange point from the giver body.
  Range handoff_distance{0.15, 0.33};
  Range handoff_height{1.02, 1.18};
  double rest_height = 0.65;
  double rest_setback = 0.10;
  // The giver starts reaching once the receiver is this close.
  Range reach_trigger_distance{1.6, 2.2};
  double min_reach_duration = 0.6;      // s
  Range hold_duration{0.3, 0.6};        // receiver stands still after arrival

  double lateral_amplitude = 0.10;      // m, smooth sway perpendicular to the path
  double receiver_noise = 0.001;        // m, per-sample position noise
  double giver_noise = 0.002;

  // OOD behaviour.
  Range pause_duration{0.5, 2.0};
  Range pause_fraction{0.25, 0.7};
  Range wander_turn_deg{70.0, 110.0};
  Range wander_length{0.6, 1.0};
  Range wander_fraction{0.2, 0.45};
};

/// Generates n_id direct approaches followed by n_ood wandering or pausing ones.
/// Identical (config, seed) produce identical datasets.
HandoverDataset generate_synthetic(const GeneratorConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Persistence (JSONL: header line followed by one pair per line)

class DatasetFormatError : public std::runtime_error {
 public:
  DatasetFormatError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

void save_dataset(const HandoverDataset& dataset, const std::filesystem::path& path);
HandoverDataset load_dataset(const std::filesystem::path& path);

std::string serialize_dataset(const HandoverDataset& dataset);
HandoverDataset parse_dataset(std::istream& in);

// ---------------------------------------------------------------------------
// Cross-validation

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// k folds stratified by label; every pair is tested exactly once. Labels that are
/// present must have at least k members.
std::vector<Fold> stratified_kfold(const HandoverDataset& dataset, int k, std::uint64_t seed);

/// Label-stratified random subset of `indices` keeping round(ratio * n_label) of each
/// label (at least one of every label present).
std::vector<std::size_t> stratified_subsample(const HandoverDataset& dataset,
                                              const std::vector<std::size_t>& indices,
                                              double ratio, std::uint64_t seed);

}  // namespace handover
