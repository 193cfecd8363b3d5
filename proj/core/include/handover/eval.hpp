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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "handover/dataset.hpp"
#include "handover/generator.hpp"
#include "handover/spgp.hpp"

namespace handover {

/// sqrt(mean |pred - truth|²) over the overlapping samples, in millimetres.
double rms_error(std::span<const GiverPose> predicted, std::span<const GiverPose> truth);
double rms_error(const PredictedTrajectory& predicted, std::span<const GiverPose> truth);

struct EvalConfig {
  PredictorConfig predictor;
  std::optional<KernelParams> kernel;  // fitted once on the dataset when absent
  std::size_t hyper_subsample = 32;
  double warmup = 0.5;      // s of observation before the first prediction
  std::size_t threads = 0;  // 0: HANDOVER_THREADS, else hardware concurrency
};

/// HANDOVER_THREADS when set to a positive integer, else the hardware concurrency.
std::size_t default_thread_count();

/// Replays one pair tick by tick through a prediction session and returns the mean
/// per-tick RMS (mm) against the giver's remaining trajectory.
double evaluate_pair(const PredictionContext& ctx, const HandoverPair& pair,
                     const PredictOptions& options = {}, double warmup = 0.5);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // over folds, Bessel-corrected
};

struct PairScore {
  std::size_t index;
  std::string id;
  Label label;
  double rms_mm;
};

struct FoldScore {
  std::size_t fold;
  std::size_t train_size;
  std::vector<PairScore> pairs;
  double id_rms = 0.0;   // mean over ID test pairs
  double ood_rms = 0.0;  // mean over OOD test pairs
  double all_rms = 0.0;
};

struct KFoldReport {
  std::size_t k;
  std::uint64_t seed;
  KernelParams kernel;
  std::vector<FoldScore> folds;
  MeanStd id;
  MeanStd ood;
  MeanStd all;
};

KFoldReport run_kfold_eval(const HandoverDataset& dataset, const EvalConfig& config, int k,
                           std::uint64_t seed);

struct SampleEfficiencyPoint {
  double ratio;
  std::size_t mean_train_size;
  MeanStd id;
  MeanStd ood;
  MeanStd all;
};

struct SampleEfficiencyReport {
  std::size_t k;
  std::uint64_t seed;
  KernelParams kernel;
  std::vector<SampleEfficiencyPoint> points;
};

/// Each fold's training split is subsampled (stratified) to every ratio and the fold's
/// test split evaluated as in run_kfold_eval.
SampleEfficiencyReport run_sample_efficiency(const HandoverDataset& dataset,
                                             const EvalConfig& config,
                                             const std::vector<double>& ratios, int k,
                                             std::uint64_t seed);

struct TradeoffOptions {
  std::vector<double> inducing_ratios{0.1, 0.2, 0.4, 0.7, 1.0};
  int k = 10;
  std::size_t folds = 1;            // folds evaluated for RMS, starting at the first
  std::size_t latency_ticks = 1000;  // timed ticks per ratio
  std::size_t discard_ticks = 3;     // warm-up queries excluded from timing
};

struct TradeoffPoint {
  double inducing_ratio;
  MeanStd rms;  // over the evaluated folds
  double median_latency_s;
  double mean_latency_s;
  std::size_t timed_ticks;
};

struct TradeoffReport {
  std::uint64_t seed;
  KernelParams kernel;
  std::vector<TradeoffPoint> points;
};

/// RMS and per-tick prediction latency for each inducing ratio. A tick is one
/// observation plus one prediction in a session, timed single-threaded.
TradeoffReport run_tradeoff(const HandoverDataset& dataset, const EvalConfig& config,
                            const TradeoffOptions& options, std::uint64_t seed);

/// Machine and build description attached to every report.
nlohmann::json environment_metadata(std::size_t threads);

nlohmann::json to_json(const KFoldReport& r);
nlohmann::json to_json(const SampleEfficiencyReport& r);
nlohmann::json to_json(const TradeoffReport& r);

/// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the first error.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace handover
