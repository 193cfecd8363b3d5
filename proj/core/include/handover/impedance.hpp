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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "handover/generator.hpp"
#include "handover/scenario.hpp"

namespace handover {

/// Translational impedance: scalar inertia, damping and stiffness applied per axis.
struct ImpedanceGains {
  double mass = 2.0;       // kg
  double damping = 17.1;   // N s / m
  double stiffness = 114.3;  // N / m

  void validate() const;
};

/// The four jointly tuned handover parameters.
struct HandoverParams {
  double stiffness = 114.3;     // N / m
  double damping = 17.1;        // N s / m
  double forecast_time = 0.14;  // s
  double release_force = 7.1;   // N

  static constexpr double kStiffnessMin = 80.0, kStiffnessMax = 140.0;
  static constexpr double kDampingMin = 10.0, kDampingMax = 20.0;
  static constexpr double kForecastMin = 0.0, kForecastMax = 1.0;
  static constexpr double kReleaseMin = 5.0, kReleaseMax = 20.0;

  /// Values reported after preference fine-tuning on the real system.
  static HandoverParams learned() { return {114.3, 17.1, 0.14, 7.1}; }

  /// Parses "K=114.3,B=17.1,tf=0.14,fr=7.1" (any order, all four keys required).
  static HandoverParams parse(const std::string& text);

  void validate() const;
  ImpedanceGains gains(double mass) const { return {mass, damping, stiffness}; }
  bool operator==(const HandoverParams&) const = default;
};

void to_json(nlohmann::json& j, const HandoverParams& p);
void from_json(const nlohmann::json& j, HandoverParams& p);

enum class Gripper { kHolding, kReleased };

struct EndEffectorState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Gripper gripper = Gripper::kHolding;
  Eigen::Vector3d external_force = Eigen::Vector3d::Zero();
};

struct ImpedanceTarget {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d acceleration = Eigen::Vector3d::Zero();
};

/// F = M (a_d - a) + B (v_d - v) + K (x_d - x). `measured_acceleration` is the
/// end-effector acceleration estimate entering the inertial error term; the closed
/// loop in rollout() leaves it at zero because the simulated plant realizes M a itself.
Eigen::Vector3d impedance_force(const ImpedanceGains& gains, const ImpedanceTarget& target,
                                const EndEffectorState& state,
                                const Eigen::Vector3d& measured_acceleration =
                                    Eigen::Vector3d::Zero());

/// Semi-implicit Euler on a point mass: v += dt (F + f_ext) / M, then x += dt v.
EndEffectorState step(const EndEffectorState& state, const Eigen::Vector3d& commanded_force,
                      const Eigen::Vector3d& external_force, double mass, double dt);

/// Opens the gripper when |f_ext| > release_force (strict). The transition latches;
/// calling this after release is a logic error.
bool check_release(EndEffectorState& state, double release_force);

struct RolloutConfig {
  double control_rate_hz = 200.0;
  double mass = 2.0;
  std::size_t chunk_size = 30;
  double ensemble_decay = 0.8;
  double observation_noise = 0.002;  // m, camera noise on receiver poses
  std::optional<double> timeout;     // overrides the scenario timeout
};

struct RolloutSample {
  double t;
  Eigen::Vector3d target;   // forecast target x_d
  Eigen::Vector3d nominal;  // ensemble pose for the current time (no forecast)
  Eigen::Vector3d position;
  Eigen::Vector3d velocity;
  Eigen::Vector3d force;
  Eigen::Vector3d external_force;
  ReceiverPose receiver;
  Gripper gripper;
};

struct RolloutResult {
  std::vector<RolloutSample> samples;
  bool released = false;
  std::optional<double> handover_time;  // s, set iff released
  double tracking_rmse = 0.0;           // m, |target - position| over the rollout
  double max_force = 0.0;               // N, commanded
  HandoverParams params;
  std::string scenario;
  std::uint64_t seed = 0;

  bool operator==(const RolloutResult& o) const;
};

/// Closed-loop handover: 30 Hz perception feeds the prediction session and the
/// temporal ensemble, the 200 Hz impedance loop tracks the forecast target, and the
/// gripper opens on the release rule. Ends on release or timeout.
RolloutResult rollout(const PredictionContext& ctx, const HandoverParams& params,
                      const ReceiverScenario& scenario, std::uint64_t seed,
                      const RolloutConfig& config = {});

/// {"t", "target", "ee", "receiver", "release_t", "params", ...}; all arrays share
/// one length.
nlohmann::json rollout_to_json(const RolloutResult& result);

/// Time shift s (seconds, negative when the end-effector leads) minimizing the mean
/// squared distance between position(t + s) and nominal(t), searched on the control
/// grid over [min_shift, max_shift].
double tracking_lag(const RolloutResult& result, double min_shift = -0.5,
                    double max_shift = 1.0);

}  // namespace handover
