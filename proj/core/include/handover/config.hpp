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
#include <stdexcept>
#include <string>

#include "handover/cospar.hpp"
#include "handover/dataset.hpp"
#include "handover/generator.hpp"
#include "handover/impedance.hpp"
#include "handover/scenario.hpp"
#include "handover/spgp.hpp"

namespace handover {

/// Every tunable default in one place. Loaded from an INI file:
///
///   [generator]  n_id, n_ood, rate_hz, seed, start_distance = lo,hi, walk_speed = lo,hi,
///                handoff_distance, handoff_height, reach_trigger_distance, hold_duration,
///                lateral_amplitude, receiver_noise, giver_noise
///   [kernel]     lengthscale = x,y, signal_variance, noise_variance   (fitted if absent)
///   [predictor]  inducing_ratio, kappa, min_speed, window (integer or "full"), k_neighbors,
///                hyper_subsample
///   [ensemble]   chunk_size, decay
///   [rollout]    control_rate_hz, mass, observation_noise, timeout
///   [grasp]      enabled, radius, dwell, ramp_duration, peak_force, hand_height
///   [cospar]     levels = 7,6,6,7, lengthscale, signal_variance, sigma, iterations
///
/// Unknown sections or keys are errors.
struct ToolkitConfig {
  GeneratorConfig generator;
  std::uint64_t data_seed = 7;
  std::optional<KernelParams> kernel;
  PredictorConfig predictor;
  std::size_t hyper_subsample = 32;
  RolloutConfig rollout;
  GraspModel grasp;
  CosparConfig cospar;

  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ToolkitConfig parse_config(const std::string& text);
ToolkitConfig load_config(const std::string& path);

}  // namespace handover
