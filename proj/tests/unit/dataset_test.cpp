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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "handover/dataset.hpp"

namespace handover {
namespace {

GeneratorConfig small_config(int n_id = 18, int n_ood = 6) {
  GeneratorConfig cfg;
  cfg.n_id = n_id;
  cfg.n_ood = n_ood;
  return cfg;
}

ReceiverTrajectory line(std::size_t n, double rate = 30.0) {
  std::vector<ReceiverPose> poses;
  for (std::size_t i = 0; i < n; ++i) poses.push_back({0.1 * static_cast<double>(i), 0.0});
  return ReceiverTrajectory::uniform(poses, rate);
}

GiverTrajectory still_giver(std::size_t n, double rate = 30.0) {
  return GiverTrajectory::uniform(std::vector<GiverPose>(n, GiverPose{0.0, 0.0, 1.0}), rate);
}

TEST(Pose, RejectsNonFiniteAndOutOfScene) {
  EXPECT_THROW(validate_pose(ReceiverPose{std::nan(""), 0.0}), std::invalid_argument);
  EXPECT_THROW(validate_pose(ReceiverPose{0.0, 100.5}), std::invalid_argument);
  EXPECT_NO_THROW(validate_pose(ReceiverPose{-100.0, 100.0}));
  EXPECT_THROW(validate_pose(GiverPose{0.0, 0.0, -1e-9}), std::invalid_argument);
  EXPECT_NO_THROW(validate_pose(GiverPose{0.0, 0.0, 0.0}));
}

TEST(Trajectory, EnforcesSpacingAndOrder) {
  EXPECT_THROW(ReceiverTrajectory({{0.0, {}}}, 30.0), std::invalid_argument);
  EXPECT_THROW(ReceiverTrajectory({{0.0, {}}, {0.0, {}}}, 30.0), std::invalid_argument);
  EXPECT_THROW(ReceiverTrajectory({{0.0, {}}, {0.05, {}}}, 30.0), std::invalid_argument);
  EXPECT_THROW(ReceiverTrajectory({{0.0, {}}, {1.0 / 30.0, {}}}, 0.0), std::invalid_argument);
  const ReceiverTrajectory t({{0.0, {}}, {1.0 / 30.0 + 5e-10, {}}}, 30.0);
  EXPECT_EQ(t.size(), 2u);
}

TEST(HandoverPair, RequiresEqualAlignedLengths) {
  EXPECT_THROW(HandoverPair("p", Label::kID, line(5), still_giver(6)), std::invalid_argument);
  EXPECT_THROW(HandoverPair("p", Label::kID, line(5), GiverTrajectory::uniform(
                                                        std::vector<GiverPose>(5), 30.0, 0.5)),
               std::invalid_argument);
  EXPECT_NO_THROW(HandoverPair("p", Label::kID, line(5), still_giver(5)));
}

TEST(HandoverDataset, RejectsDuplicateIds) {
  HandoverDataset d;
  d.add(HandoverPair("a", Label::kID, line(3), still_giver(3)));
  EXPECT_THROW(d.add(HandoverPair("a", Label::kOOD, line(3), still_giver(3))),
               std::invalid_argument);
  EXPECT_EQ(d.size(), 1u);
}

TEST(Generator, DefaultDatasetHasNineHundredId) {
  const HandoverDataset d = generate_synthetic(GeneratorConfig{}, 7);
  EXPECT_EQ(d.size(), 1000u);
  EXPECT_EQ(d.count(Label::kID), 900u);
  EXPECT_EQ(d.count(Label::kOOD), 100u);
}

TEST(Generator, RejectsDegenerateConfig) {
  EXPECT_THROW(generate_synthetic(small_config(0, 0), 1), std::invalid_argument);
  EXPECT_THROW(generate_synthetic(small_config(-1, 5), 1), std::invalid_argument);
  GeneratorConfig cfg = small_config();
  cfg.rate_hz = 0.0;
  EXPECT_THROW(generate_synthetic(cfg, 1), std::invalid_argument);
}

TEST(Generator, SameSeedSameBytes) {
  const auto a = serialize_dataset(generate_synthetic(small_config(), 3));
  const auto b = serialize_dataset(generate_synthetic(small_config(), 3));
  const auto c = serialize_dataset(generate_synthetic(small_config(), 4));
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Generator, IdApproachesEndNearTheGiver) {
  const GeneratorConfig cfg = small_config(60, 0);
  for (const auto& pair : generate_synthetic(cfg, 11)) {
    const Eigen::Vector2d last = pair.receiver.pose(pair.length() - 1).vec();
    EXPECT_LT((last - cfg.giver_position).norm(), 0.5) << pair.id;
  }
}

double heading(const Eigen::Vector2d& v) { return std::atan2(v.y(), v.x()); }

// Average speed and heading over windows of w samples.
bool has_pause_or_turn(const ReceiverTrajectory& r, std::size_t arrival_guard) {
  const std::size_t w = 10;
  const double span = static_cast<double>(w) * r.dt();
  const std::size_t n = r.size() - arrival_guard;
  for (std::size_t i = 0; i + 2 * w < n; ++i) {
    const Eigen::Vector2d a = r.pose(i + w).vec() - r.pose(i).vec();
    const Eigen::Vector2d b = r.pose(i + 2 * w).vec() - r.pose(i + w).vec();
    if (a.norm() / span < 0.05) return true;
    if (a.norm() / span > 0.2 && b.norm() / span > 0.2) {
      double turn = std::abs(heading(b) - heading(a));
      if (turn > std::numbers::pi) turn = 2.0 * std::numbers::pi - turn;
      if (turn > std::numbers::pi / 3.0) return true;
    }
  }
  return false;
}

TEST(Generator, OodApproachesPauseOrWander) {
  const GeneratorConfig cfg = small_config(0, 60);
  for (const auto& pair : generate_synthetic(cfg, 5)) {
    EXPECT_EQ(pair.label, Label::kOOD);
    // The trailing hold is a stop every approach has; look before it.
    EXPECT_TRUE(has_pause_or_turn(pair.receiver, 25)) << pair.id;
  }
}

TEST(Generator, IdApproachesNeitherPauseNorWander) {
  const GeneratorConfig cfg = small_config(60, 0);
  std::size_t flagged = 0;
  for (const auto& pair : generate_synthetic(cfg, 5)) flagged += has_pause_or_turn(pair.receiver, 25);
  EXPECT_EQ(flagged, 0u);
}

TEST(Generator, WalkSpeedAndReachArePlausible) {
  const GeneratorConfig cfg = small_config(40, 20);
  for (const auto& pair : generate_synthetic(cfg, 2)) {
    for (std::size_t i = 0; i + 1 < pair.length(); ++i) {
      const double v = (pair.receiver.pose(i + 1).vec() - pair.receiver.pose(i).vec()).norm() *
                       cfg.rate_hz;
      ASSERT_LT(v, 2.0) << pair.id << " sample " << i;
    }
    const Eigen::Vector3d first = pair.giver.pose(0).vec();
    const Eigen::Vector3d last = pair.giver.pose(pair.length() - 1).vec();
    EXPECT_GT((last - first).norm(), 0.35) << pair.id;
    EXPECT_LT((last - first).norm(), 0.85) << pair.id;
  }
}

TEST(Persistence, EmptyDatasetRoundTrips) {
  const std::string text = serialize_dataset(HandoverDataset{});
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
  std::istringstream in(text);
  EXPECT_TRUE(parse_dataset(in).empty());
}

TEST(Persistence, FullDatasetRoundTripsExactly) {
  const HandoverDataset d = generate_synthetic(GeneratorConfig{}, 7);
  const auto path = std::filesystem::temp_directory_path() / "handover_roundtrip.jsonl";
  save_dataset(d, path);
  const HandoverDataset back = load_dataset(path);
  std::filesystem::remove(path);
  EXPECT_TRUE(back == d);
}

TEST(Persistence, NonMonotonicTimestampsNameThePair) {
  std::istringstream in(
      "{\"format\":\"handover-dataset\",\"version\":1,\"count\":1}\n"
      "{\"id\":\"walk-17\",\"label\":\"ID\",\"rate_hz\":30,"
      "\"receiver\":[[0.1,0,0],[0.0,0,0]],\"giver\":[[0.1,0,0,1],[0.0,0,0,1]]}\n");
  try {
    parse_dataset(in);
    FAIL() << "expected a format error";
  } catch (const DatasetFormatError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("walk-17"), std::string::npos) << e.what();
  }
}

TEST(Persistence, MalformedLinesReportLineNumbers) {
  std::istringstream missing_header("{\"id\":\"x\"}\n");
  EXPECT_THROW(parse_dataset(missing_header), DatasetFormatError);
  std::istringstream bad_json(
      "{\"format\":\"handover-dataset\",\"version\":1,\"count\":1}\n{nope\n");
  try {
    parse_dataset(bad_json);
    FAIL();
  } catch (const DatasetFormatError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(load_dataset("/nonexistent/handover.jsonl"), std::runtime_error);
}

TEST(KFold, DefaultSplitHasNinetyIdAndTenOodPerFold) {
  const HandoverDataset d = generate_synthetic(GeneratorConfig{}, 7);
  const auto folds = stratified_kfold(d, 10, 7);
  ASSERT_EQ(folds.size(), 10u);
  std::multiset<std::size_t> tested;
  for (const auto& f : folds) {
    std::size_t id = 0;
    for (auto i : f.test) id += d[i].label == Label::kID;
    EXPECT_EQ(id, 90u);
    EXPECT_EQ(f.test.size() - id, 10u);
    EXPECT_EQ(f.train.size() + f.test.size(), d.size());
    tested.insert(f.test.begin(), f.test.end());
  }
  ASSERT_EQ(tested.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(tested.count(i), 1u);
}

TEST(KFold, DeterministicAndPartitioning) {
  const HandoverDataset d = generate_synthetic(small_config(23, 7), 1);
  const auto a = stratified_kfold(d, 4, 99);
  const auto b = stratified_kfold(d, 4, 99);
  for (std::size_t f = 0; f < a.size(); ++f) {
    EXPECT_EQ(a[f].test, b[f].test);
    std::set<std::size_t> all(a[f].train.begin(), a[f].train.end());
    for (auto i : a[f].test) EXPECT_TRUE(all.insert(i).second);
    EXPECT_EQ(all.size(), d.size());
    // Proportions within one item of the global ratio.
    std::size_t ood = 0;
    for (auto i : a[f].test) ood += d[i].label == Label::kOOD;
    const double expected = 7.0 * static_cast<double>(a[f].test.size()) / 30.0;
    EXPECT_LE(std::abs(static_cast<double>(ood) - expected), 1.0);
  }
}

TEST(KFold, SingletonFoldsAndPreconditions) {
  const HandoverDataset d = generate_synthetic(small_config(10, 0), 1);
  const auto folds = stratified_kfold(d, 10, 1);
  for (const auto& f : folds) EXPECT_EQ(f.test.size(), 1u);
  EXPECT_THROW(stratified_kfold(d, 11, 1), std::invalid_argument);
  EXPECT_THROW(stratified_kfold(d, 1, 1), std::invalid_argument);
  const HandoverDataset skewed = generate_synthetic(small_config(20, 3), 1);
  EXPECT_THROW(stratified_kfold(skewed, 4, 1), std::invalid_argument);
}

TEST(Subsample, KeepsEveryLabelAndRounds) {
  const HandoverDataset d = generate_synthetic(small_config(40, 10), 1);
  std::vector<std::size_t> all(d.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto s = stratified_subsample(d, all, 0.25, 3);
  std::size_t id = 0;
  for (auto i : s) id += d[i].label == Label::kID;
  EXPECT_EQ(id, 10u);
  EXPECT_EQ(s.size() - id, 3u);  // round(2.5) away from zero
  const auto tiny = stratified_subsample(d, all, 0.01, 3);
  EXPECT_EQ(tiny.size(), 2u);
  EXPECT_EQ(stratified_subsample(d, all, 0.25, 3), s);
  EXPECT_THROW(stratified_subsample(d, all, 0.0, 3), std::invalid_argument);
}

}  // namespace
}  // namespace handover
