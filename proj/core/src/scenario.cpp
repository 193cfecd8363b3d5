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

#include "handover/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace handover {

ReceiverPose ReceiverScenario::receiver_at(double t) const {
  const double rel = (t - receiver.time(0)) * receiver.rate_hz();
  const auto i = static_cast<std::size_t>(std::clamp(std::floor(rel + 1e-9), 0.0,
                                                     static_cast<double>(receiver.size() - 1)));
  return receiver.pose(i);
}

Eigen::Vector3d ReceiverScenario::hand_at(double t) const {
  const Eigen::Vector2d base = receiver_at(t).vec();
  Eigen::Vector2d toward = giver_position - base;
  const double d = toward.norm();
  toward = d > 1e-9 ? Eigen::Vector2d(toward / d) : Eigen::Vector2d(-1.0, 0.0);
  const Eigen::Vector2d hand = base + std::min(grasp.hand_offset, d) * toward;
  return {hand.x(), hand.y(), grasp.hand_height};
}

ScenarioKind scenario_kind_from_string(const std::string& s) {
  if (s == "id") return ScenarioKind::kInDistribution;
  if (s == "ood") return ScenarioKind::kOutOfDistribution;
  if (s == "static") return ScenarioKind::kStatic;
  if (s == "absent") return ScenarioKind::kAbsent;
  if (s == "constant-velocity") return ScenarioKind::kConstantVelocity;
  throw std::invalid_argument("unknown scenario '" + s + "'");
}

const char* to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kInDistribution: return "id";
    case ScenarioKind::kOutOfDistribution: return "ood";
    case ScenarioKind::kStatic: return "static";
    case ScenarioKind::kAbsent: return "absent";
    case ScenarioKind::kConstantVelocity: return "constant-velocity";
  }
  return "unknown";
}

namespace {

ReceiverTrajectory standing(const Eigen::Vector2d& at, double duration, double rate) {
  const auto n = static_cast<std::size_t>(std::ceil(duration * rate)) + 1;
  return ReceiverTrajectory::uniform(std::vector<ReceiverPose>(n, ReceiverPose::from(at)), rate);
}

}  // namespace

ReceiverScenario make_scenario(ScenarioKind kind, std::uint64_t seed,
                               const GeneratorConfig& scene) {
  const double rate = scene.rate_hz;
  const Eigen::Vector2d giver = scene.giver_position;
  const double mid_handoff = 0.5 * (scene.handoff_distance.lo + scene.handoff_distance.hi);
  const Eigen::Vector2d exchange_spot = giver + Eigen::Vector2d(mid_handoff + scene.hand_offset, 0.0);
  ReceiverScenario s{to_string(kind), standing(exchange_spot, 1.0, rate), giver, {}, 15.0};
  s.grasp.hand_offset = scene.hand_offset;

  switch (kind) {
    case ScenarioKind::kInDistribution:
    case ScenarioKind::kOutOfDistribution: {
      GeneratorConfig one = scene;
      const bool id = kind == ScenarioKind::kInDistribution;
      one.n_id = id ? 1 : 0;
      one.n_ood = id ? 0 : 1;
      // Decorrelate from datasets generated with the same seed.
      s.receiver = generate_synthetic(one, seed * 0x9e3779b97f4a7c15ULL + 0x5ce4a1ULL)[0].receiver;
      break;
    }
    case ScenarioKind::kStatic:
      s.receiver = standing(exchange_spot, s.timeout, rate);
      break;
    case ScenarioKind::kAbsent:
      s.receiver = standing(giver + Eigen::Vector2d(4.5, 0.0), s.timeout, rate);
      break;
    case ScenarioKind::kConstantVelocity: {
      const double speed = 1.0;
      const Eigen::Vector2d start = giver + Eigen::Vector2d(3.2, 0.0);
      const double distance = (start - exchange_spot).norm();
      const auto walk = static_cast<std::size_t>(std::ceil(distance / speed * rate));
      std::vector<ReceiverPose> poses;
      for (std::size_t i = 0; i <= walk; ++i) {
        const double travelled = std::min(distance, speed * static_cast<double>(i) / rate);
        poses.push_back(ReceiverPose::from(start + travelled * (exchange_spot - start) / distance));
      }
      s.receiver = ReceiverTrajectory::uniform(poses, rate);
      s.timeout = static_cast<double>(walk) / rate + 1.5;
      break;
    }
  }
  return s;
}

}  // namespace handover
