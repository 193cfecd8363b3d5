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
#include <string>

#include <Eigen/Core>

#include "handover/dataset.hpp"

namespace handover {

/// Receiver grasp behaviour: once the end-effector stays within `radius` of the
/// receiver's hand for `dwell` seconds, the receiver pulls toward its body with a
/// force ramping from 0 to `peak_force` over `ramp_duration`.
struct GraspModel {
  bool enabled = true;
  double radius = 0.15;        // m
  double dwell = 0.2;          // s
  double ramp_duration = 0.3;  // s
  double peak_force = 20.0;    // N
  double hand_offset = 0.15;   // m ahead of the base, toward the giver
  double hand_height = 1.10;   // m
};

/// Receiver motion for a closed-loop rollout, sampled at the perception rate. The
/// receiver holds its last pose once the trajectory runs out.
struct ReceiverScenario {
  std::string name;
  ReceiverTrajectory receiver;
  Eigen::Vector2d giver_position{0.0, 0.0};
  GraspModel grasp;
  double timeout = 15.0;  // s

  ReceiverPose receiver_at(double t) const;
  Eigen::Vector3d hand_at(double t) const;
};

enum class ScenarioKind {
  kInDistribution,    // fresh synthetic direct approach
  kOutOfDistribution, // fresh synthetic wander/pause approach
  kStatic,            // receiver already standing at the exchange spot
  kAbsent,            // receiver stays far away
  kConstantVelocity,  // straight constant-speed walk that stops at the exchange spot
};

ScenarioKind scenario_kind_from_string(const std::string& s);
const char* to_string(ScenarioKind kind);

/// Builds a scenario in the scene described by `scene` (giver position, rate).
ReceiverScenario make_scenario(ScenarioKind kind, std::uint64_t seed,
                               const GeneratorConfig& scene = GeneratorConfig{});

}  // namespace handover
