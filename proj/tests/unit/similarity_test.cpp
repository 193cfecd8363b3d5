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

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "handover/similarity.hpp"

namespace handover {
namespace {

using testing::random_walk;
using testing::straight_pair;

constexpr double kPi = std::numbers::pi;

SimilarityConfig literal(double kappa = 1.0) {
  SimilarityConfig c;
  c.kappa = kappa;
  c.window = kFullHistory;
  return c;
}

TEST(CosineDistance, WorkedExamples) {
  EXPECT_DOUBLE_EQ(cosine_distance({1, 0}, {2, 0}, 0.05), 0.0);
  EXPECT_DOUBLE_EQ(cosine_distance({1, 0}, {-1, 0}, 0.05), 2.0);
  EXPECT_DOUBLE_EQ(cosine_distance({1, 0}, {0, 3}, 0.05), 1.0);
  EXPECT_DOUBLE_EQ(cosine_distance({1, 0}, {0, 0}, 0.05), 1.0);
  EXPECT_DOUBLE_EQ(cosine_distance({0.04, 0}, {1, 0}, 0.05), 1.0);
}

TEST(CosineDistance, StaysInRange) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 100000; ++i) {
    const double d = cosine_distance({n(rng), n(rng)}, {n(rng), n(rng)}, 0.05);
    ASSERT_GE(d, 0.0);
    ASSERT_LE(d, 2.0);
  }
}

TEST(SimilarityConfig, Validates) {
  SimilarityConfig c;
  c.kappa = -0.1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.min_speed = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.window = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(ObservedTrajectory, VelocitiesMatchTraining) {
  std::mt19937_64 rng(2);
  const auto traj = random_walk(rng, 50);
  const auto obs = ObservedTrajectory::prefix(traj, 50);
  const auto v = finite_difference_velocities(traj);
  for (std::size_t i = 0; i < obs.size(); ++i) EXPECT_EQ(obs.velocity(i), v[i]);
  const ObservedTrajectory one({ReceiverPose{1, 1}}, 1.0 / 30.0);
  EXPECT_EQ(one.velocity(0), Eigen::Vector2d::Zero());
  EXPECT_THROW(ObservedTrajectory({}, 1.0 / 30.0), std::invalid_argument);
  EXPECT_THROW(ObservedTrajectory::prefix(traj, 51), std::out_of_range);
}

TEST(TrajectoryDistance, SelfDistanceSitsOnTheNoiseFloor) {
  std::mt19937_64 rng(3);
  const auto traj = random_walk(rng, 90);
  KernelParams k;
  k.lengthscale = {0.3, 0.3};
  k.noise_variance = 1e-6;
  const auto model = FlowModel::fit(traj, 1.0, k);
  for (std::size_t n : {10, 45, 90}) {
    const auto obs = ObservedTrajectory::prefix(traj, n);
    // Variance at training inputs is below the noise; the one-sided velocity of the
    // newest sample leaves a tiny cosine residue.
    EXPECT_LE(trajectory_distance(obs, model, literal()), k.noise_variance + 1e-4) << n;
  }
}

TEST(TrajectoryDistance, ZeroKappaIsMeanVariance) {
  std::mt19937_64 rng(4);
  const auto traj = random_walk(rng, 60);
  const auto other = random_walk(rng, 40);
  const auto model = FlowModel::fit(traj, 0.4, KernelParams{});
  const auto obs = ObservedTrajectory::prefix(other, 40);
  double sum = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) sum += model.predict(obs.pose(i)).variance;
  EXPECT_NEAR(trajectory_distance(obs, model, literal(0.0)), sum / 40.0, 1e-14);
}

TEST(TrajectoryDistance, ReversedWalkPaysTheFullCosineTerm) {
  const auto forward = straight_pair("f", {0.0, 0.0}, 0.0, 60).receiver;
  const auto backward = straight_pair("b", {59.0 / 30.0, 0.0}, kPi, 60).receiver;
  KernelParams k;
  k.noise_variance = 1e-4;
  const auto model = FlowModel::fit(forward, 1.0, k);
  const auto obs = ObservedTrajectory::prefix(backward, 60);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    EXPECT_NEAR(cosine_distance(obs.velocity(i), model.predict(obs.pose(i)).mean, 0.05), 2.0, 1e-6);
  }
  const double kappa = 25.0;
  EXPECT_GE(trajectory_distance(obs, model, literal(kappa)), kappa);
}

TEST(TrajectoryDistance, WindowKeepsTrailingSamples) {
  std::mt19937_64 rng(5);
  const auto traj = random_walk(rng, 120);
  const auto model = FlowModel::fit(traj, 0.4, KernelParams{});
  const auto obs = ObservedTrajectory::prefix(random_walk(rng, 120), 120);
  SimilarityConfig windowed = literal();
  windowed.window = 30;
  double sum = 0.0;
  for (std::size_t i = 90; i < 120; ++i) {
    sum += distance_term(obs.velocity(i), model.predict(obs.pose(i)), windowed);
  }
  EXPECT_NEAR(trajectory_distance(obs, model, windowed), sum / 30.0, 1e-14);
  windowed.window = 500;
  EXPECT_EQ(trajectory_distance(obs, model, windowed), trajectory_distance(obs, model, literal()));
}

TEST(Similarity, ExponentialOfDistance) {
  EXPECT_EQ(similarity_from_distance(0.0), 1.0);
  EXPECT_NEAR(similarity_from_distance(std::log(2.0)), 0.5, 1e-15);
  double prev = 1.0;
  for (double d = 1e-3; d < 800.0; d *= 1.5) {
    const double s = similarity_from_distance(d);
    EXPECT_LT(s, prev);
    EXPECT_GT(s, 0.0);
    prev = s;
  }
}

TEST(Similarity, SelfModelBeatsTurnedFlowFields) {
  // Every stored walk heads at least 90 degrees away from the observed one.
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> turn(kPi / 2.0, 3.0 * kPi / 2.0);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const KernelParams k;
  for (int trial = 0; trial < 20; ++trial) {
    const double heading = 2.0 * kPi * (u(rng) + 0.5);
    const auto self = straight_pair("s", {u(rng), u(rng)}, heading, 60).receiver;
    const auto own = FlowModel::fit(self, 0.4, k);
    const auto obs = ObservedTrajectory::prefix(self, 40);
    const double d_self = trajectory_distance(obs, own, literal());
    for (int j = 0; j < 5; ++j) {
      const auto other = straight_pair("o", {u(rng), u(rng)}, heading + turn(rng), 60).receiver;
      EXPECT_LE(d_self, trajectory_distance(obs, FlowModel::fit(other, 0.4, k), literal()));
    }
  }
}

TEST(RankAll, PrefixOfStoredWalkRanksItFirst) {
  std::vector<FlowModel> models;
  std::vector<ReceiverTrajectory> walks;
  for (int j = 0; j < 8; ++j) {
    walks.push_back(straight_pair("w", {0.0, 0.0}, j * kPi / 4.0, 60).receiver);
    models.push_back(FlowModel::fit(walks.back(), 0.4, KernelParams{}));
  }
  for (std::size_t j = 0; j < walks.size(); ++j) {
    const auto ranking = rank_all(ObservedTrajectory::prefix(walks[j], 30), models, literal());
    EXPECT_EQ(ranking.entries.front().index, j);
    EXPECT_GE(ranking.latency_seconds, 0.0);
    std::set<std::size_t> seen;
    for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
      seen.insert(ranking.entries[i].index);
      if (i > 0) EXPECT_LE(ranking.entries[i].similarity, ranking.entries[i - 1].similarity);
      EXPECT_GT(ranking.entries[i].similarity, 0.0);
      EXPECT_LE(ranking.entries[i].similarity, 1.0);
    }
    EXPECT_EQ(seen.size(), walks.size());
  }
}

TEST(RankAll, SingleModelAndTies) {
  const auto walk = straight_pair("w", {0.0, 0.0}, 0.3, 50).receiver;
  const auto obs = ObservedTrajectory::prefix(walk, 20);
  const std::vector<FlowModel> one{FlowModel::fit(walk, 0.4, KernelParams{})};
  EXPECT_EQ(rank_all(obs, one, literal()).entries.size(), 1u);
  const auto other = straight_pair("o", {1.0, 1.0}, 2.0, 50).receiver;
  const std::vector<FlowModel> twins{FlowModel::fit(other, 0.4, KernelParams{}),
                                     FlowModel::fit(walk, 0.4, KernelParams{}),
                                     FlowModel::fit(walk, 0.4, KernelParams{})};
  const auto r = rank_all(obs, twins, literal());
  EXPECT_EQ(r.entries[0].index, 1u);
  EXPECT_EQ(r.entries[1].index, 2u);
  EXPECT_EQ(r.entries[0].similarity, r.entries[1].similarity);
}

TEST(SortRanking, StableOnIndex) {
  std::vector<RankedTrajectory> e{{4, 0.5}, {1, 0.9}, {3, 0.5}, {0, 0.5}};
  sort_ranking(e);
  ASSERT_EQ(e.size(), 4u);
  EXPECT_EQ(e[0].index, 1u);
  EXPECT_EQ(e[1].index, 0u);
  EXPECT_EQ(e[2].index, 3u);
  EXPECT_EQ(e[3].index, 4u);
}

}  // namespace
}  // namespace handover
