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

#include "handover/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace handover {

using nlohmann::json;

void validate_pose(const ReceiverPose& p) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
    throw std::invalid_argument("receiver pose is not finite");
  }
  if (std::abs(p.x) > kMaxCoordinate || std::abs(p.y) > kMaxCoordinate) {
    throw std::invalid_argument("receiver pose outside the 100 m scene bound");
  }
}

void validate_pose(const GiverPose& p) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
    throw std::invalid_argument("giver pose is not finite");
  }
  if (std::abs(p.x) > kMaxCoordinate || std::abs(p.y) > kMaxCoordinate ||
      p.z > kMaxCoordinate) {
    throw std::invalid_argument("giver pose outside the 100 m scene bound");
  }
  if (p.z < 0.0) throw std::invalid_argument("giver pose below the floor");
}

const char* to_string(Label label) { return label == Label::kID ? "ID" : "OOD"; }

Label label_from_string(const std::string& s) {
  if (s == "ID") return Label::kID;
  if (s == "OOD") return Label::kOOD;
  throw std::invalid_argument("unknown label '" + s + "'");
}

HandoverPair::HandoverPair(std::string id_, Label label_, ReceiverTrajectory receiver_,
                           GiverTrajectory giver_)
    : id(std::move(id_)),
      label(label_),
      receiver(std::move(receiver_)),
      giver(std::move(giver_)) {
  if (receiver.size() != giver.size()) {
    throw std::invalid_argument("pair " + id + ": receiver and giver lengths differ");
  }
  for (std::size_t i = 0; i < receiver.size(); ++i) {
    if (receiver.time(i) != giver.time(i)) {
      throw std::invalid_argument("pair " + id + ": timestamps not aligned at sample " +
                                  std::to_string(i));
    }
  }
}

HandoverDataset::HandoverDataset(std::vector<HandoverPair> pairs) {
  pairs_.reserve(pairs.size());
  for (auto& p : pairs) add(std::move(p));
}

void HandoverDataset::add(HandoverPair pair) {
  for (const auto& p : pairs_) {
    if (p.id == pair.id) throw std::invalid_argument("duplicate pair id " + pair.id);
  }
  pairs_.push_back(std::move(pair));
}

std::size_t HandoverDataset::count(Label label) const {
  return static_cast<std::size_t>(
      std::count_if(pairs_.begin(), pairs_.end(), [&](const auto& p) { return p.label == label; }));
}

HandoverDataset HandoverDataset::subset(const std::vector<std::size_t>& indices) const {
  HandoverDataset out;
  out.pairs_.reserve(indices.size());
  std::set<std::size_t> seen;
  for (auto i : indices) {
    if (i >= pairs_.size()) throw std::out_of_range("subset index out of range");
    if (!seen.insert(i).second) throw std::invalid_argument("subset index repeated");
    out.pairs_.push_back(pairs_[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generation

namespace {

double uniform(std::mt19937_64& rng, Range r) {
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

Eigen::Vector2d unit_at(double angle) { return {std::cos(angle), std::sin(angle)}; }

Eigen::Vector2d rotate(const Eigen::Vector2d& v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

double deg(double d) { return d * std::numbers::pi / 180.0; }

class Polyline {
 public:
  explicit Polyline(std::vector<Eigen::Vector2d> pts) : pts_(std::move(pts)) {
    cumulative_.push_back(0.0);
    for (std::size_t i = 1; i < pts_.size(); ++i) {
      cumulative_.push_back(cumulative_.back() + (pts_[i] - pts_[i - 1]).norm());
    }
  }

  double length() const { return cumulative_.back(); }

  Eigen::Vector2d at(double s) const {
    s = std::clamp(s, 0.0, length());
    std::size_t seg = 1;
    while (seg + 1 < pts_.size() && cumulative_[seg] < s) ++seg;
    const double span = cumulative_[seg] - cumulative_[seg - 1];
    const double u = span > 0.0 ? (s - cumulative_[seg - 1]) / span : 0.0;
    return pts_[seg - 1] + u * (pts_[seg] - pts_[seg - 1]);
  }

 private:
  std::vector<Eigen::Vector2d> pts_;
  std::vector<double> cumulative_;
};

double min_jerk(double tau) {
  tau = std::clamp(tau, 0.0, 1.0);
  const double t3 = tau * tau * tau;
  return t3 * (10.0 - 15.0 * tau + 6.0 * tau * tau);
}

enum class OodKind { kNone, kWander, kPause, kBoth };

HandoverPair generate_pair(const GeneratorConfig& cfg, std::size_t index, Label label,
                           std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), 0x68616e64u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const Eigen::Vector2d giver = cfg.giver_position;
  const double bearing = deg(uniform(rng, cfg.start_bearing_deg));
  const Eigen::Vector2d start = giver + uniform(rng, cfg.start_distance) * unit_at(bearing);
  const double end_bearing = bearing + deg(uniform(rng, cfg.end_bearing_jitter_deg));
  const double handoff = uniform(rng, cfg.handoff_distance);
  const Eigen::Vector2d dir = unit_at(end_bearing);  // giver -> receiver at the exchange
  const Eigen::Vector2d end = giver + (handoff + cfg.hand_offset) * dir;
  const double speed = uniform(rng, cfg.walk_speed);

  OodKind kind = OodKind::kNone;
  if (label == Label::kOOD) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    kind = u < 0.45 ? OodKind::kWander : (u < 0.8 ? OodKind::kPause : OodKind::kBoth);
  }

  std::vector<Eigen::Vector2d> waypoints{start};
  if (kind == OodKind::kWander || kind == OodKind::kBoth) {
    const Eigen::Vector2d forward = (end - start).normalized();
    const Eigen::Vector2d corner = start + uniform(rng, cfg.wander_fraction) * (end - start);
    const double side = std::uniform_int_distribution<int>(0, 1)(rng) == 0 ? -1.0 : 1.0;
    const double turn = side * deg(uniform(rng, cfg.wander_turn_deg));
    const Eigen::Vector2d detour = corner + uniform(rng, cfg.wander_length) * rotate(forward, turn);
    waypoints.push_back(corner);
    waypoints.push_back(detour);
  }
  waypoints.push_back(end);
  const Polyline path(waypoints);

  double pause_at = -1.0, pause_len = 0.0;
  if (kind == OodKind::kPause || kind == OodKind::kBoth) {
    pause_at = uniform(rng, cfg.pause_fraction) * path.length();
    pause_len = uniform(rng, cfg.pause_duration);
  }

  // Smooth sway that vanishes at both ends of the path.
  const double sway = std::uniform_real_distribution<double>(-1.0, 1.0)(rng) * cfg.lateral_amplitude;
  const double sway_cycles = std::uniform_int_distribution<int>(1, 2)(rng);
  const double hold = uniform(rng, cfg.hold_duration);
  const double trigger = uniform(rng, cfg.reach_trigger_distance);
  const double handoff_height = uniform(rng, cfg.handoff_height);

  // Walk along the path.
  const Eigen::Vector2d chord = (end - start).normalized();
  const double dt = 1.0 / cfg.rate_hz;
  std::vector<Eigen::Vector2d> base;
  double s = 0.0, paused = 0.0;
  bool pause_done = pause_at < 0.0;
  base.push_back(path.at(0.0));
  std::size_t arrival = 0;
  while (true) {
    if (!pause_done && s >= pause_at) {
      paused += dt;
      if (paused >= pause_len) pause_done = true;
    } else {
      const double remaining = path.length() - s;
      const double ramp_up = std::min(1.0, 0.4 + 0.6 * s / 0.5);
      const double ramp_down = std::clamp(remaining / 0.6, 0.25, 1.0);
      s = std::min(path.length(), s + dt * speed * std::min(ramp_up, ramp_down));
    }
    const double u = s / path.length();
    // Sway across the overall heading; segment normals would jump at wander corners.
    const Eigen::Vector2d normal(-chord.y(), chord.x());
    const double lateral = sway * std::sin(std::numbers::pi * u) *
                           std::sin(sway_cycles * std::numbers::pi * u);
    base.push_back(path.at(s) + lateral * normal);
    if (s >= path.length()) {
      arrival = base.size() - 1;
      break;
    }
  }
  const auto hold_samples = static_cast<std::size_t>(std::lround(hold * cfg.rate_hz));
  for (std::size_t i = 0; i < hold_samples; ++i) base.push_back(end);

  // Giver: minimum-jerk reach from rest to the exchange point, triggered by the
  // receiver closing in and finishing on arrival.
  const double t_end = static_cast<double>(arrival) * dt;
  double t_start = t_end - cfg.min_reach_duration;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if ((base[i] - giver).norm() < trigger) {
      t_start = std::min(t_start, static_cast<double>(i) * dt);
      break;
    }
  }
  const Eigen::Vector3d rest(giver.x() - cfg.rest_setback * dir.x(),
                             giver.y() - cfg.rest_setback * dir.y(), cfg.rest_height);
  const Eigen::Vector3d target(giver.x() + handoff * dir.x(), giver.y() + handoff * dir.y(),
                               handoff_height);

  std::vector<ReceiverPose> receiver_poses;
  std::vector<GiverPose> giver_poses;
  receiver_poses.reserve(base.size());
  giver_poses.reserve(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    const Eigen::Vector2d noisy = base[i] + cfg.receiver_noise * Eigen::Vector2d(gauss(rng), gauss(rng));
    receiver_poses.push_back(ReceiverPose::from(noisy));
    const double t = static_cast<double>(i) * dt;
    const double phase = min_jerk((t - t_start) / (t_end - t_start));
    Eigen::Vector3d wrist = rest + phase * (target - rest);
    wrist += cfg.giver_noise * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    wrist.z() = std::max(0.0, wrist.z());
    giver_poses.push_back(GiverPose::from(wrist));
  }

  char id[32];
  std::snprintf(id, sizeof(id), "%s-%04zu", label == Label::kID ? "id" : "ood", index);
  return HandoverPair(id, label, ReceiverTrajectory::uniform(receiver_poses, cfg.rate_hz),
                      GiverTrajectory::uniform(giver_poses, cfg.rate_hz));
}

}  // namespace

HandoverDataset generate_synthetic(const GeneratorConfig& config, std::uint64_t seed) {
  if (config.n_id < 0 || config.n_ood < 0 || config.n_id + config.n_ood <= 0) {
    throw std::invalid_argument("generator counts must be non-negative with a positive total");
  }
  if (!(config.rate_hz > 0.0)) throw std::invalid_argument("sample rate must be positive");

  HandoverDataset out;
  std::size_t index = 0;
  for (int i = 0; i < config.n_id; ++i) out.add(generate_pair(config, index++, Label::kID, seed));
  for (int i = 0; i < config.n_ood; ++i) out.add(generate_pair(config, index++, Label::kOOD, seed));
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

DatasetFormatError::DatasetFormatError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

constexpr const char* kFormatName = "handover-dataset";
constexpr int kFormatVersion = 1;

json pair_to_json(const HandoverPair& p) {
  json receiver = json::array();
  for (const auto& s : p.receiver) receiver.push_back({s.t, s.pose.x, s.pose.y});
  json giver = json::array();
  for (const auto& s : p.giver) giver.push_back({s.t, s.pose.x, s.pose.y, s.pose.z});
  return {{"id", p.id},
          {"label", to_string(p.label)},
          {"rate_hz", p.receiver.rate_hz()},
          {"receiver", std::move(receiver)},
          {"giver", std::move(giver)}};
}

HandoverPair pair_from_json(const json& j, std::size_t line) {
  std::string id;
  try {
    id = j.at("id").get<std::string>();
    const Label label = label_from_string(j.at("label").get<std::string>());
    const double rate = j.at("rate_hz").get<double>();
    std::vector<TimedPose<ReceiverPose>> receiver;
    for (const auto& row : j.at("receiver")) {
      if (row.size() != 3) throw std::invalid_argument("receiver rows need [t,x,y]");
      receiver.push_back({row[0].get<double>(), {row[1].get<double>(), row[2].get<double>()}});
    }
    std::vector<TimedPose<GiverPose>> giver;
    for (const auto& row : j.at("giver")) {
      if (row.size() != 4) throw std::invalid_argument("giver rows need [t,x,y,z]");
      giver.push_back({row[0].get<double>(),
                       {row[1].get<double>(), row[2].get<double>(), row[3].get<double>()}});
    }
    return HandoverPair(id, label, ReceiverTrajectory(std::move(receiver), rate),
                        GiverTrajectory(std::move(giver), rate));
  } catch (const json::exception& e) {
    throw DatasetFormatError(line, "malformed record" + (id.empty() ? "" : " '" + id + "'") +
                                       ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DatasetFormatError(line, "pair '" + id + "': " + e.what());
  }
}

}  // namespace

std::string serialize_dataset(const HandoverDataset& dataset) {
  std::string out;
  json header = {{"format", kFormatName}, {"version", kFormatVersion}, {"count", dataset.size()}};
  out += header.dump();
  out += '\n';
  for (const auto& p : dataset) {
    out += pair_to_json(p).dump();
    out += '\n';
  }
  return out;
}

void save_dataset(const HandoverDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << serialize_dataset(dataset);
  out.flush();
  if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

HandoverDataset parse_dataset(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected = 0;
  bool have_header = false;
  HandoverDataset out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DatasetFormatError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!have_header) {
      if (!j.is_object() || j.value("format", "") != kFormatName) {
        throw DatasetFormatError(line_no, "missing dataset header");
      }
      if (j.value("version", 0) != kFormatVersion) {
        throw DatasetFormatError(line_no, "unsupported dataset version");
      }
      expected = j.value("count", std::size_t{0});
      have_header = true;
      continue;
    }
    auto pair = pair_from_json(j, line_no);
    try {
      out.add(std::move(pair));
    } catch (const std::invalid_argument& e) {
      throw DatasetFormatError(line_no, e.what());
    }
  }
  if (!have_header) throw DatasetFormatError(line_no, "empty file, header expected");
  if (out.size() != expected) {
    throw DatasetFormatError(line_no, "header announces " + std::to_string(expected) +
                                          " pairs, found " + std::to_string(out.size()));
  }
  return out;
}

HandoverDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_dataset(in);
}

// ---------------------------------------------------------------------------
// Cross-validation

namespace {

std::vector<std::vector<std::size_t>> strata(const HandoverDataset& dataset,
                                             const std::vector<std::size_t>& indices) {
  std::vector<std::vector<std::size_t>> out(2);
  for (auto i : indices) out[dataset[i].label == Label::kID ? 0 : 1].push_back(i);
  return out;
}

}  // namespace

std::vector<Fold> stratified_kfold(const HandoverDataset& dataset, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("k-fold needs k >= 2");
  std::vector<std::size_t> all(dataset.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  auto groups = strata(dataset, all);
  const auto folds_n = static_cast<std::size_t>(k);
  for (const auto& g : groups) {
    if (!g.empty() && g.size() < folds_n) {
      throw std::invalid_argument("stratum has fewer than k pairs");
    }
  }
  if (dataset.size() < folds_n) throw std::invalid_argument("dataset has fewer than k pairs");

  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> tests(folds_n);
  // Continue the round-robin across strata so fold sizes stay balanced overall.
  std::size_t next = 0;
  for (auto& g : groups) {
    std::shuffle(g.begin(), g.end(), rng);
    for (auto i : g) tests[next++ % folds_n].push_back(i);
  }
  std::vector<Fold> folds(folds_n);
  for (std::size_t f = 0; f < folds_n; ++f) {
    std::sort(tests[f].begin(), tests[f].end());
    std::vector<bool> in_test(dataset.size(), false);
    for (auto i : tests[f]) in_test[i] = true;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (!in_test[i]) folds[f].train.push_back(i);
    }
    folds[f].test = std::move(tests[f]);
  }
  return folds;
}

std::vector<std::size_t> stratified_subsample(const HandoverDataset& dataset,
                                              const std::vector<std::size_t>& indices,
                                              double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0) || ratio > 1.0) throw std::invalid_argument("subsample ratio must be in (0, 1]");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out;
  for (auto& g : strata(dataset, indices)) {
    if (g.empty()) continue;
    std::shuffle(g.begin(), g.end(), rng);
    const auto keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(ratio * static_cast<double>(g.size()))));
    out.insert(out.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace handover
