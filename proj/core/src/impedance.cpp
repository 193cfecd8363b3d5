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

#include "handover/impedance.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace handover {

namespace {

void check_range(const char* name, double value, double lo, double hi) {
  if (!std::isfinite(value) || value < lo || value > hi) {
    std::ostringstream os;
    os << name << " = " << value << " outside [" << lo << ", " << hi << "]";
    throw std::invalid_argument(os.str());
  }
}

nlohmann::json vec_json(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

}  // namespace

void ImpedanceGains::validate() const {
  if (!(mass > 0.0) || !std::isfinite(mass)) throw std::invalid_argument("mass must be positive");
  if (!(damping >= 0.0) || !std::isfinite(damping)) {
    throw std::invalid_argument("damping must be non-negative");
  }
  if (!(stiffness >= 0.0) || !std::isfinite(stiffness)) {
    throw std::invalid_argument("stiffness must be non-negative");
  }
}

void HandoverParams::validate() const {
  check_range("K", stiffness, kStiffnessMin, kStiffnessMax);
  check_range("B", damping, kDampingMin, kDampingMax);
  check_range("tf", forecast_time, kForecastMin, kForecastMax);
  check_range("fr", release_force, kReleaseMin, kReleaseMax);
}

HandoverParams HandoverParams::parse(const std::string& text) {
  std::map<std::string, double> values;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    item = first == std::string::npos ? std::string() : item.substr(first, last - first + 1);
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("expected key=value, got '" + item + "'");
    std::string key = item.substr(0, eq);
    key.erase(key.find_last_not_of(" \t") + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item.substr(eq + 1), &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad number for '" + key + "'");
    }
    if (used != item.size() - eq - 1) throw std::invalid_argument("bad number for '" + key + "'");
    if (!values.emplace(key, v).second) throw std::invalid_argument("duplicate key '" + key + "'");
  }
  HandoverParams p;
  const std::array<std::pair<const char*, double*>, 4> slots{{{"K", &p.stiffness},
                                                              {"B", &p.damping},
                                                              {"tf", &p.forecast_time},
                                                              {"fr", &p.release_force}}};
  for (const auto& [key, slot] : slots) {
    const auto it = values.find(key);
    if (it == values.end()) throw std::invalid_argument(std::string("missing key '") + key + "'");
    *slot = it->second;
    values.erase(it);
  }
  if (!values.empty()) throw std::invalid_argument("unknown key '" + values.begin()->first + "'");
  p.validate();
  return p;
}

void to_json(nlohmann::json& j, const HandoverParams& p) {
  j = {{"K", p.stiffness}, {"B", p.damping}, {"tf", p.forecast_time}, {"fr", p.release_force}};
}

void from_json(const nlohmann::json& j, HandoverParams& p) {
  p.stiffness = j.at("K").get<double>();
  p.damping = j.at("B").get<double>();
  p.forecast_time = j.at("tf").get<double>();
  p.release_force = j.at("fr").get<double>();
}

Eigen::Vector3d impedance_force(const ImpedanceGains& gains, const ImpedanceTarget& target,
                                const EndEffectorState& state,
                                const Eigen::Vector3d& measured_acceleration) {
  return gains.mass * (target.acceleration - measured_acceleration) +
         gains.damping * (target.velocity - state.velocity) +
         gains.stiffness * (target.position - state.position);
}

EndEffectorState step(const EndEffectorState& state, const Eigen::Vector3d& commanded_force,
                      const Eigen::Vector3d& external_force, double mass, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(mass > 0.0)) throw std::invalid_argument("mass must be positive");
  if (!commanded_force.allFinite() || !external_force.allFinite()) {
    throw std::invalid_argument("non-finite force");
  }
  EndEffectorState next = state;
  next.external_force = external_force;
  next.velocity += dt * (commanded_force + external_force) / mass;
  next.position += dt * next.velocity;
  return next;
}

bool check_release(EndEffectorState& state, double release_force) {
  if (state.gripper == Gripper::kReleased) {
    throw std::logic_error("release check after the gripper opened");
  }
  if (state.external_force.norm() > release_force) {
    state.gripper = Gripper::kReleased;
    return true;
  }
  return false;
}

bool RolloutResult::operator==(const RolloutResult& o) const {
  if (released != o.released || handover_time != o.handover_time ||
      tracking_rmse != o.tracking_rmse || max_force != o.max_force || !(params == o.params) ||
      scenario != o.scenario || seed != o.seed || samples.size() != o.samples.size()) {
    return false;
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& a = samples[i];
    const auto& b = o.samples[i];
    if (a.t != b.t || a.target != b.target || a.nominal != b.nominal || a.position != b.position ||
        a.velocity != b.velocity || a.force != b.force || a.external_force != b.external_force ||
        !(a.receiver == b.receiver) || a.gripper != b.gripper) {
      return false;
    }
  }
  return true;
}

namespace {

// Ensemble poses at offsets 0..n-1 from the newest perception tick.
std::vector<Eigen::Vector3d> ensemble_path(const EnsembleBuffer& buffer, std::size_t n) {
  std::vector<Eigen::Vector3d> path(n);
  for (std::size_t i = 0; i < n; ++i) path[i] = buffer.query(i).vec();
  return path;
}

Eigen::Vector3d lerp(const std::vector<Eigen::Vector3d>& path, double u) {
  const double top = static_cast<double>(path.size() - 1);
  u = std::clamp(u, 0.0, top);
  const auto i = std::min(static_cast<std::size_t>(u), path.size() - 2);
  const double f = u - static_cast<double>(i);
  return (1.0 - f) * path[i] + f * path[i + 1];
}

class Grasp {
 public:
  explicit Grasp(const GraspModel& model) : model_(model) {}

  Eigen::Vector3d force(double t, double dt, const Eigen::Vector3d& ee,
                        const ReceiverScenario& scenario) {
    if (!model_.enabled) return Eigen::Vector3d::Zero();
    if (!grasped_at_) {
      if ((ee - scenario.hand_at(t)).norm() <= model_.radius) {
        dwell_ += dt;
        if (dwell_ >= model_.dwell - 1e-12) grasped_at_ = t;
      } else {
        dwell_ = 0.0;
      }
      if (!grasped_at_) return Eigen::Vector3d::Zero();
    }
    const double ramp = model_.ramp_duration > 0.0
                            ? std::clamp((t - *grasped_at_) / model_.ramp_duration, 0.0, 1.0)
                            : 1.0;
    Eigen::Vector2d pull = scenario.receiver_at(t).vec() - ee.head<2>();
    const double d = pull.norm();
    pull = d > 1e-9 ? Eigen::Vector2d(pull / d) : Eigen::Vector2d(1.0, 0.0);
    return model_.peak_force * ramp * Eigen::Vector3d(pull.x(), pull.y(), 0.0);
  }

 private:
  GraspModel model_;
  double dwell_ = 0.0;
  std::optional<double> grasped_at_;
};

}  // namespace

RolloutResult rollout(const PredictionContext& ctx, const HandoverParams& params,
                      const ReceiverScenario& scenario, std::uint64_t seed,
                      const RolloutConfig& config) {
  params.validate();
  if (!(config.control_rate_hz > 0.0)) throw std::invalid_argument("control rate must be positive");
  if (!(config.observation_noise >= 0.0)) throw std::invalid_argument("noise must be >= 0");
  const double perception_rate = scenario.receiver.rate_hz();
  if (std::abs(perception_rate - ctx.sample_rate_hz()) > 1e-9) {
    throw std::invalid_argument("scenario and context sample rates differ");
  }
  const double dt = 1.0 / config.control_rate_hz;
  const double timeout = config.timeout.value_or(scenario.timeout);
  const auto control_ticks = static_cast<std::int64_t>(std::floor(timeout * config.control_rate_hz + 1e-9));
  const ImpedanceGains gains = params.gains(config.mass);
  gains.validate();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  PredictionSession session(ctx);
  EnsembleBuffer buffer(config.chunk_size, config.ensemble_decay);
  Grasp grasp(scenario.grasp);

  RolloutResult result;
  result.params = params;
  result.scenario = scenario.name;
  result.seed = seed;

  EndEffectorState state;
  state.position = ctx.rest_pose().vec();
  const Eigen::Vector3d rest = state.position;

  std::vector<Eigen::Vector3d> path(4, rest);
  std::size_t offset = 0;
  double perception_time = 0.0;
  std::int64_t next_perception = 0;
  double sq_error = 0.0;

  for (std::int64_t c = 0; c <= control_ticks; ++c) {
    const double t = static_cast<double>(c) * dt;
    // Perception: every 1/30 s, on the first control tick at or after the camera frame.
    if (t + 1e-9 >= static_cast<double>(next_perception) / perception_rate) {
      perception_time = static_cast<double>(next_perception) / perception_rate;
      ReceiverPose seen = scenario.receiver_at(perception_time);
      if (config.observation_noise > 0.0) {
        seen.x += config.observation_noise * noise(rng);
        seen.y += config.observation_noise * noise(rng);
      }
      session.observe(seen);
      buffer.push(session.predict(), next_perception);
      const std::size_t horizon = buffer.horizon();
      offset = std::min(forecast_offset(params.forecast_time, perception_rate), horizon - 1);
      path = ensemble_path(buffer, offset + 4);
      ++next_perception;
    }

    const double u = (t - perception_time) * perception_rate;
    ImpedanceTarget target;
    target.position = lerp(path, static_cast<double>(offset) + u);
    {
      const auto i = std::min(static_cast<std::size_t>(static_cast<double>(offset) + u),
                              path.size() - 3);
      target.velocity = (path[i + 1] - path[i]) * perception_rate;
      target.acceleration = (path[i + 2] - 2.0 * path[i + 1] + path[i]) * perception_rate * perception_rate;
    }
    const Eigen::Vector3d nominal = lerp(path, u);

    const Eigen::Vector3d f_ext = grasp.force(t, dt, state.position, scenario);
    state.external_force = f_ext;
    const bool released = check_release(state, params.release_force);
    const Eigen::Vector3d force =
        released ? Eigen::Vector3d::Zero() : impedance_force(gains, target, state);

    result.samples.push_back({t, target.position, nominal, state.position, state.velocity, force,
                              f_ext, scenario.receiver_at(t), state.gripper});
    sq_error += (target.position - state.position).squaredNorm();
    result.max_force = std::max(result.max_force, force.norm());
    if (released) {
      result.released = true;
      result.handover_time = t;
      break;
    }
    state = step(state, force, f_ext, gains.mass, dt);
  }
  result.tracking_rmse = std::sqrt(sq_error / static_cast<double>(result.samples.size()));
  return result;
}

nlohmann::json rollout_to_json(const RolloutResult& r) {
  nlohmann::json t = nlohmann::json::array(), target = nlohmann::json::array(),
                 ee = nlohmann::json::array(), receiver = nlohmann::json::array(),
                 force = nlohmann::json::array(), f_ext = nlohmann::json::array();
  for (const auto& s : r.samples) {
    t.push_back(s.t);
    target.push_back(vec_json(s.target));
    ee.push_back(vec_json(s.position));
    receiver.push_back({s.receiver.x, s.receiver.y});
    force.push_back(vec_json(s.force));
    f_ext.push_back(vec_json(s.external_force));
  }
  return {{"t", std::move(t)},
          {"target", std::move(target)},
          {"ee", std::move(ee)},
          {"receiver", std::move(receiver)},
          {"force", std::move(force)},
          {"f_ext", std::move(f_ext)},
          {"release_t", r.handover_time ? nlohmann::json(*r.handover_time) : nlohmann::json()},
          {"released", r.released},
          {"tracking_rmse", r.tracking_rmse},
          {"max_force", r.max_force},
          {"params", r.params},
          {"scenario", r.scenario},
          {"seed", r.seed}};
}

double tracking_lag(const RolloutResult& r, double min_shift, double max_shift) {
  if (r.samples.size() < 3) throw std::invalid_argument("rollout too short for a lag estimate");
  if (!(min_shift <= max_shift)) throw std::invalid_argument("empty shift range");
  const double dt = r.samples[1].t - r.samples[0].t;
  const auto lo = static_cast<std::int64_t>(std::lround(min_shift / dt));
  const auto hi = static_cast<std::int64_t>(std::lround(max_shift / dt));
  const auto n = static_cast<std::int64_t>(r.samples.size());
  double best = std::numeric_limits<double>::infinity();
  std::int64_t best_shift = 0;
  for (std::int64_t s = lo; s <= hi; ++s) {
    double sum = 0.0;
    std::int64_t count = 0;
    for (std::int64_t i = std::max<std::int64_t>(0, -s); i < n && i + s < n; ++i) {
      sum += (r.samples[static_cast<std::size_t>(i + s)].position -
              r.samples[static_cast<std::size_t>(i)].nominal).squaredNorm();
      ++count;
    }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    if (mean < best) {
      best = mean;
      best_shift = s;
    }
  }
  return static_cast<double>(best_shift) * dt;
}

}  // namespace handover
