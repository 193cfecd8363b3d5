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

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "handover/generator.hpp"

namespace handover {
namespace {

using testing::straight_pair;

constexpr double kPi = std::numbers::pi;

// Eight walks fanning out from the origin, each with its own giver height.
PredictionContext fan_context(std::size_t k_neighbors, double kappa = 1.0,
                              std::size_t window = kFullHistory) {
  HandoverDataset d;
  for (int j = 0; j < 8; ++j) {
    d.add(straight_pair("w" + std::to_string(j), {0.0, 0.0}, j * kPi / 4.0, 50 + 5 * j, 1.0,
                        0.6 + 0.05 * j));
  }
  PredictorConfig cfg;
  cfg.k_neighbors = k_neighbors;
  cfg.similarity.kappa = kappa;
  cfg.similarity.window = window;
  return PredictionContext::fit(std::move(d), KernelParams{}, cfg);
}

PredictionContext generated_context(std::size_t k_neighbors, std::uint64_t seed = 3) {
  GeneratorConfig g;
  g.n_id = 27;
  g.n_ood = 3;
  PredictorConfig cfg;
  cfg.k_neighbors = k_neighbors;
  KernelParams k;
  k.lengthscale = {0.22, 0.09};
  k.signal_variance = 0.36;
  k.noise_variance = 0.0044;
  return PredictionContext::fit(generate_synthetic(g, seed), k, cfg);
}

TEST(PredictionContext, ValidatesInputs) {
  const auto ctx = fan_context(3);
  EXPECT_EQ(ctx.size(), 8u);
  EXPECT_EQ(ctx.sample_rate_hz(), 30.0);
  EXPECT_THROW(PredictionContext(ctx.dataset(), {}, {}, 3), std::invalid_argument);
  EXPECT_THROW(PredictionContext(HandoverDataset{}, {}, {}, 3), std::invalid_argument);
  std::vector<FlowModel> models(ctx.models().begin(), ctx.models().end());
  EXPECT_THROW(PredictionContext(ctx.dataset(), models, {}, 0), std::invalid_argument);
  const auto rest = ctx.rest_pose();
  EXPECT_NEAR(rest.z, 0.6 + 0.05 * 3.5, 1e-12);
}

TEST(AlignTime, ExactMatchTiesAndBruteForce) {
  const auto walk = straight_pair("w", {0.0, 0.0}, 0.0, 40).receiver;
  EXPECT_EQ(align_time(walk.pose(17), walk), 17u);
  std::vector<ReceiverPose> v{{0, 0}, {0, 0}, {1, 0}, {2, 0}, {1, 0}};
  const auto bounce = ReceiverTrajectory::uniform(v, 30.0);
  EXPECT_EQ(align_time(ReceiverPose{1.0, 3.0}, bounce), 2u);
  EXPECT_EQ(align_time(ReceiverPose{0.0, 0.0}, bounce), 0u);

  std::mt19937_64 rng(1);
  const auto wander = testing::random_walk(rng, 200);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int i = 0; i < 200; ++i) {
    const ReceiverPose q{u(rng), u(rng)};
    std::size_t best = 0;
    for (std::size_t t = 1; t < wander.size(); ++t) {
      if ((wander.pose(t).vec() - q.vec()).norm() < (wander.pose(best).vec() - q.vec()).norm()) best = t;
    }
    EXPECT_EQ(align_time(q, wander), best);
  }
}

TEST(AlignTime, EquidistantPicksEarlier) {
  std::vector<ReceiverPose> v;
  for (int i = 0; i < 12; ++i) v.push_back({static_cast<double>(i), 0.0});
  const auto t = ReceiverTrajectory::uniform(v, 30.0);
  EXPECT_EQ(align_time(ReceiverPose{6.0, 5.0}, t), 6u);
  EXPECT_EQ(align_time(ReceiverPose{6.0, 0.0}, ReceiverTrajectory::uniform(
                                                  std::vector<ReceiverPose>{{3, 0}, {9, 0}, {3, 0}}, 30.0)),
            0u);
}

TEST(Blend, SingleNeighbourReturnsItsSegment) {
  const auto ctx = fan_context(1);
  const auto& stored = ctx.dataset()[2];
  const auto obs = ObservedTrajectory::prefix(stored.receiver, 20);
  const auto pred = predict_trajectory(ctx, obs);
  ASSERT_EQ(pred.sources.size(), 1u);
  EXPECT_EQ(pred.sources[0].index, 2u);
  EXPECT_EQ(pred.sources[0].weight, 1.0);
  ASSERT_EQ(pred.horizon(), stored.length() - 19);
  for (std::size_t o = 0; o < pred.horizon(); ++o) EXPECT_EQ(pred.poses[o], stored.giver.pose(19 + o));
}

TEST(Blend, IsolatedNeighbourDominates) {
  // With a large kappa the other walks' cosine penalty drives their weight to zero.
  const auto ctx = fan_context(5, 60.0);
  const auto& stored = ctx.dataset()[5];
  const auto pred = predict_trajectory(ctx, ObservedTrajectory::prefix(stored.receiver, 25));
  ASSERT_GE(pred.sources[0].weight, 0.99);
  EXPECT_EQ(pred.sources[0].index, 5u);
  for (std::size_t o = 0; o < pred.horizon(); ++o) {
    EXPECT_LE((pred.poses[o].vec() - stored.giver.pose(24 + o).vec()).norm(), 1e-6);
  }
}

TEST(Blend, IdenticalSegmentsBlendToThemselves) {
  HandoverDataset d;
  d.add(straight_pair("a", {0.0, 0.0}, 0.0, 40));
  d.add(straight_pair("b", {0.0, 0.0}, 0.0, 40));
  PredictorConfig cfg;
  cfg.k_neighbors = 2;
  const auto ctx = PredictionContext::fit(std::move(d), KernelParams{}, cfg);
  const auto pred = predict_trajectory(ctx, ObservedTrajectory::prefix(ctx.dataset()[0].receiver, 10));
  EXPECT_EQ(pred.sources[0].weight, 0.5);
  for (std::size_t o = 0; o < pred.horizon(); ++o) {
    EXPECT_NEAR((pred.poses[o].vec() - ctx.dataset()[0].giver.pose(9 + o).vec()).norm(), 0.0, 1e-15);
  }
}

TEST(Blend, WeightsHorizonAndConvexity) {
  const auto ctx = generated_context(10);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto& pair = ctx.dataset()[rng() % ctx.size()];
    const std::size_t n = 2 + rng() % (pair.length() - 2);
    const auto pred = predict_trajectory(ctx, ObservedTrajectory::prefix(pair.receiver, n));
    ASSERT_EQ(pred.sources.size(), 10u);
    double total = 0.0;
    std::size_t horizon = 1u << 30;
    for (std::size_t i = 0; i < pred.sources.size(); ++i) {
      const auto& s = pred.sources[i];
      EXPECT_GE(s.weight, 0.0);
      if (i > 0) EXPECT_LE(s.weight, pred.sources[i - 1].weight);
      total += s.weight;
      horizon = std::min(horizon, ctx.dataset()[s.index].length() - s.aligned_index);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    ASSERT_EQ(pred.horizon(), horizon);
    for (std::size_t o = 0; o < pred.horizon(); ++o) {
      Eigen::Vector3d lo = Eigen::Vector3d::Constant(1e9), hi = -lo;
      for (const auto& s : pred.sources) {
        const auto p = ctx.dataset()[s.index].giver.pose(s.aligned_index + o).vec();
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
      const auto p = pred.poses[o].vec();
      EXPECT_TRUE(((p.array() >= lo.array() - 1e-12) && (p.array() <= hi.array() + 1e-12)).all());
    }
  }
}

TEST(Blend, NeighbourCountSweep) {
  for (std::size_t k : {1u, 5u, 10u, 20u}) {
    const auto ctx = generated_context(k);
    const auto& pair = ctx.dataset()[4];
    const auto pred = predict_trajectory(ctx, ObservedTrajectory::prefix(pair.receiver, 30));
    EXPECT_EQ(pred.sources.size(), k);
    EXPECT_GE(pred.horizon(), 1u);
  }
  // Fewer stored pairs than k: all of them are used.
  const auto ctx = fan_context(20);
  EXPECT_EQ(predict_trajectory(ctx, ObservedTrajectory::prefix(ctx.dataset()[0].receiver, 5)).sources.size(), 8u);
}

TEST(Blend, HandoverCompleteAtTrajectoryEnds) {
  const auto ctx = fan_context(1);
  const auto& stored = ctx.dataset()[0];
  const auto pred = predict_trajectory(ctx, ObservedTrajectory::prefix(stored.receiver, stored.length()));
  EXPECT_EQ(pred.horizon(), 1u);
  EXPECT_TRUE(pred.handover_complete());
  EXPECT_EQ(pred.at(50), pred.poses.back());
}

TEST(Predict, PureFunctionOfTheObservation) {
  const auto ctx = generated_context(10);
  const auto obs = ObservedTrajectory::prefix(ctx.dataset()[7].receiver, 40);
  EXPECT_TRUE(predict_trajectory(ctx, obs) == predict_trajectory(ctx, obs));
}

TEST(Predict, ExcludeDropsThePair) {
  const auto ctx = generated_context(10);
  const auto obs = ObservedTrajectory::prefix(ctx.dataset()[7].receiver, 40);
  const auto with = predict_trajectory(ctx, obs);
  EXPECT_EQ(with.sources[0].index, 7u);
  const auto without = predict_trajectory(ctx, obs, {.exclude = 7});
  for (const auto& s : without.sources) EXPECT_NE(s.index, 7u);
}

TEST(Session, MatchesStatelessPrediction) {
  for (std::size_t window : {std::size_t{12}, kFullHistory}) {
    auto ctx = generated_context(10);
    PredictorConfig cfg;
    cfg.similarity.window = window;
    ctx = PredictionContext(ctx.dataset(), {ctx.models().begin(), ctx.models().end()}, cfg.similarity, 10);
    const auto& pair = ctx.dataset()[11];
    PredictionSession session(ctx, {.exclude = 11});
    for (std::size_t n = 1; n <= pair.length(); n += 1) {
      session.observe(pair.receiver.pose(n - 1));
      if (n % 7 != 0 && n != 1) continue;
      const auto expected = predict_trajectory(ctx, ObservedTrajectory::prefix(pair.receiver, n), {.exclude = 11});
      const auto got = session.predict();
      ASSERT_EQ(got.horizon(), expected.horizon()) << n;
      for (std::size_t i = 0; i < got.sources.size(); ++i) {
        EXPECT_EQ(got.sources[i].index, expected.sources[i].index);
        EXPECT_NEAR(got.sources[i].similarity, expected.sources[i].similarity, 1e-12);
      }
      for (std::size_t o = 0; o < got.horizon(); ++o) {
        EXPECT_NEAR((got.poses[o].vec() - expected.poses[o].vec()).norm(), 0.0, 1e-12);
      }
    }
  }
}

TEST(Session, BatchedReplayMatchesPerPose) {
  const auto ctx = generated_context(10);
  const auto& pair = ctx.dataset()[20];
  const auto poses = pair.receiver.poses();
  PredictionSession one(ctx), many(ctx);
  for (const auto& p : poses) one.observe(p);
  many.observe_batch(std::span<const ReceiverPose>(poses).first(10));
  many.observe_batch(std::span<const ReceiverPose>(poses).subspan(10));
  ASSERT_EQ(many.observed(), poses.size());
  for (std::size_t n : {std::size_t{1}, std::size_t{15}, poses.size()}) {
    const auto a = one.predict(n);
    const auto b = many.predict(n);
    ASSERT_EQ(a.horizon(), b.horizon());
    for (std::size_t i = 0; i < a.sources.size(); ++i) {
      EXPECT_EQ(a.sources[i].index, b.sources[i].index);
      EXPECT_NEAR(a.sources[i].similarity, b.sources[i].similarity, 1e-12);
    }
  }
  EXPECT_THROW(one.predict(poses.size() + 1), std::out_of_range);
  EXPECT_THROW(PredictionSession(ctx).predict(), std::logic_error);
}

PredictedTrajectory constant(double x, std::size_t n) {
  PredictedTrajectory p;
  for (std::size_t i = 0; i < n; ++i) p.poses.push_back({x + static_cast<double>(i), 0.0, 1.0});
  return p;
}

TEST(Ensemble, SinglePredictionPassesThrough) {
  EnsembleBuffer buf;
  const auto p = constant(0.0, 10);
  EXPECT_EQ(buf.push_and_query(p, 0, 0), p.poses[0]);
  EXPECT_EQ(buf.query(4), p.poses[4]);
  EXPECT_EQ(buf.query(40), p.poses[9]);
}

TEST(Ensemble, UndecayedIsArithmeticMeanAtTheSameTarget) {
  EnsembleBuffer buf(30, 1.0);
  buf.push(constant(0.0, 10), 0);
  buf.push(constant(5.0, 10), 1);
  // Target tick 3: first prediction's offset 3 (x = 3), second's offset 2 (x = 7).
  EXPECT_DOUBLE_EQ(buf.query(2).x, 5.0);
}

TEST(Ensemble, DecayWeightsOlderPredictions) {
  EnsembleBuffer buf(30, 0.5);
  buf.push(constant(0.0, 10), 0);
  buf.push(constant(10.0, 10), 1);
  // Newest weight 1, older 0.5: (1 * 10 + 0.5 * 1) / 1.5 at target tick 1.
  EXPECT_DOUBLE_EQ(buf.query(0).x, (10.0 + 0.5 * 1.0) / 1.5);
}

TEST(Ensemble, ConstantPredictionsAreAFixedPoint) {
  for (double decay : {0.1, 0.8, 1.0}) {
    EnsembleBuffer buf(30, decay);
    PredictedTrajectory p;
    p.poses.assign(100, GiverPose{0.3, -0.2, 1.1});
    for (int t = 0; t < 50; ++t) {
      const auto q = buf.push_and_query(p, t, 3);
      EXPECT_NEAR(q.x, 0.3, 1e-15);
      EXPECT_NEAR(q.y, -0.2, 1e-15);
      EXPECT_NEAR(q.z, 1.1, 1e-15);
    }
  }
}

TEST(Ensemble, DepthBoundedAndTicksIncrease) {
  EnsembleBuffer buf(4, 0.8);
  for (int t = 0; t < 10; ++t) {
    buf.push(constant(0.0, 5), t);
    EXPECT_LE(buf.depth(), 4u);
  }
  EXPECT_EQ(buf.latest_tick(), 9);
  EXPECT_THROW(buf.push(constant(0.0, 5), 9), std::invalid_argument);
  EXPECT_THROW(EnsembleBuffer(0, 0.8), std::invalid_argument);
  EXPECT_THROW(EnsembleBuffer(4, 0.0), std::invalid_argument);
  EXPECT_THROW(EnsembleBuffer().query(0), std::logic_error);
  EXPECT_THROW(buf.push(PredictedTrajectory{}, 10), std::invalid_argument);
}

TEST(Ensemble, ShortPredictionsContributeTheirLastPose) {
  EnsembleBuffer buf(30, 1.0);
  buf.push(constant(0.0, 2), 0);   // poses x = 0, 1
  buf.push(constant(10.0, 10), 1);
  // Target tick 5: old one clamps to x = 1, new offset 4 is x = 14.
  EXPECT_DOUBLE_EQ(buf.query(4).x, 7.5);
}

TEST(Forecast, OffsetArithmetic) {
  EXPECT_EQ(forecast_offset(0.0, 30.0), 0u);
  EXPECT_EQ(forecast_offset(0.14, 30.0), 4u);
  EXPECT_EQ(forecast_offset(1.0, 30.0), 30u);
  const auto p = constant(0.0, 10);
  EXPECT_EQ(forecast_pose(p, 0.0, 30.0), p.poses[0]);
  EXPECT_EQ(forecast_pose(p, 0.14, 30.0), p.poses[4]);
  EXPECT_EQ(forecast_pose(p, 5.0, 30.0), p.poses[9]);
  EXPECT_THROW(forecast_pose(p, -0.1, 30.0), std::invalid_argument);
  EnsembleBuffer buf;
  buf.push(p, 0);
  EXPECT_EQ(forecast_pose(buf, 0.14, 30.0), p.poses[4]);
}

}  // namespace
}  // namespace handover
