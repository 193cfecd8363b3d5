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

#include "handover/eval.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#ifndef HANDOVER_BUILD_TYPE
#define HANDOVER_BUILD_TYPE "unknown"
#endif
#ifndef HANDOVER_CXX_FLAGS
#define HANDOVER_CXX_FLAGS ""
#endif

namespace handover {

namespace {

constexpr double kMillimetres = 1000.0;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), 0x65766cu};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// Mean and Bessel-corrected std of the finite entries.
MeanStd summarize(const std::vector<double>& values) {
  std::vector<double> v;
  for (const double x : values) {
    if (std::isfinite(x)) v.push_back(x);
  }
  MeanStd s{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) {
    s.std = 0.0;
    return s;
  }
  double ss = 0.0;
  for (const double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return s;
}

double mean_or_nan(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

nlohmann::json mean_std_json(const MeanStd& m) { return {{"mean", number(m.mean)}, {"std", number(m.std)}}; }

nlohmann::json kernel_json(const KernelParams& k) {
  return {{"lengthscale", {k.lengthscale.x(), k.lengthscale.y()}},
          {"signal_variance", k.signal_variance},
          {"noise_variance", k.noise_variance}};
}

KernelParams resolve_kernel(const HandoverDataset& dataset, const EvalConfig& config,
                            std::uint64_t seed) {
  if (config.kernel) return *config.kernel;
  return fit_kernel_hyperparameters(dataset, config.hyper_subsample, seed);
}

std::size_t resolve_threads(const EvalConfig& config) {
  return config.threads > 0 ? config.threads : default_thread_count();
}

FoldScore score_fold(const HandoverDataset& dataset, const std::vector<std::size_t>& train,
                     const std::vector<std::size_t>& test, const KernelParams& kernel,
                     const EvalConfig& config, std::size_t fold, std::size_t threads) {
  if (train.size() < config.predictor.k_neighbors) {
    throw std::invalid_argument("training split smaller than k_neighbors");
  }
  const auto ctx = PredictionContext::fit(dataset.subset(train), kernel, config.predictor);
  FoldScore score{fold, train.size(), std::vector<PairScore>(test.size()), 0.0, 0.0, 0.0};
  parallel_for(test.size(), threads, [&](std::size_t j) {
    const auto& pair = dataset[test[j]];
    score.pairs[j] = {test[j], pair.id, pair.label, evaluate_pair(ctx, pair, {}, config.warmup)};
  });
  std::vector<double> id, ood, all;
  for (const auto& p : score.pairs) {
    (p.label == Label::kID ? id : ood).push_back(p.rms_mm);
    all.push_back(p.rms_mm);
  }
  score.id_rms = mean_or_nan(id);
  score.ood_rms = mean_or_nan(ood);
  score.all_rms = mean_or_nan(all);
  return score;
}

}  // namespace

double rms_error(std::span<const GiverPose> predicted, std::span<const GiverPose> truth) {
  const std::size_t n = std::min(predicted.size(), truth.size());
  if (n == 0) throw std::invalid_argument("rms over an empty overlap");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += (predicted[i].vec() - truth[i].vec()).squaredNorm();
  return kMillimetres * std::sqrt(sum / static_cast<double>(n));
}

double rms_error(const PredictedTrajectory& predicted, std::span<const GiverPose> truth) {
  return rms_error(std::span<const GiverPose>(predicted.poses), truth);
}

std::size_t default_thread_count() {
  if (const char* env = std::getenv("HANDOVER_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::min(std::max<std::size_t>(threads, 1), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n && !failed; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            failed = true;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

double evaluate_pair(const PredictionContext& ctx, const HandoverPair& pair,
                     const PredictOptions& options, double warmup) {
  if (!(warmup >= 0.0)) throw std::invalid_argument("warm-up must be non-negative");
  const std::size_t n = pair.receiver.size();
  const auto warm = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::lround(warmup * pair.receiver.rate_hz())));
  if (n < warm) throw std::invalid_argument("pair '" + pair.id + "' shorter than the warm-up");
  const std::vector<GiverPose> giver_poses = pair.giver.poses();
  const std::span<const GiverPose> giver(giver_poses);
  PredictionSession session(ctx, options);
  const std::vector<ReceiverPose> receiver = pair.receiver.poses();
  session.observe_batch(receiver);
  double sum = 0.0;
  std::size_t ticks = 0;
  for (std::size_t t = warm - 1; t < n; ++t) {
    sum += rms_error(session.predict(t + 1), giver.subspan(t));
    ++ticks;
  }
  return sum / static_cast<double>(ticks);
}

KFoldReport run_kfold_eval(const HandoverDataset& dataset, const EvalConfig& config, int k,
                           std::uint64_t seed) {
  const auto folds = stratified_kfold(dataset, k, seed);
  KFoldReport report{static_cast<std::size_t>(k), seed, resolve_kernel(dataset, config, seed), {}, {}, {}, {}};
  report.folds.resize(folds.size());
  const std::size_t threads = resolve_threads(config);
  // Folds in parallel; each fold's pairs run serially on its worker.
  parallel_for(folds.size(), threads, [&](std::size_t f) {
    report.folds[f] = score_fold(dataset, folds[f].train, folds[f].test, report.kernel, config, f, 1);
  });
  std::vector<double> id, ood, all;
  for (const auto& f : report.folds) {
    id.push_back(f.id_rms);
    ood.push_back(f.ood_rms);
    all.push_back(f.all_rms);
  }
  report.id = summarize(id);
  report.ood = summarize(ood);
  report.all = summarize(all);
  return report;
}

SampleEfficiencyReport run_sample_efficiency(const HandoverDataset& dataset,
                                             const EvalConfig& config,
                                             const std::vector<double>& ratios, int k,
                                             std::uint64_t seed) {
  if (ratios.empty()) throw std::invalid_argument("no data ratios given");
  for (const double r : ratios) {
    if (!(r > 0.0) || r > 1.0) throw std::invalid_argument("data ratio must be in (0, 1]");
  }
  const auto folds = stratified_kfold(dataset, k, seed);
  SampleEfficiencyReport report{static_cast<std::size_t>(k), seed, resolve_kernel(dataset, config, seed), {}};

  // Check every subsample is large enough before spending time on any of them.
  std::vector<std::vector<std::vector<std::size_t>>> trains(ratios.size());
  for (std::size_t r = 0; r < ratios.size(); ++r) {
    for (std::size_t f = 0; f < folds.size(); ++f) {
      auto train = stratified_subsample(dataset, folds[f].train, ratios[r], mix_seed(seed, f, r));
      if (train.size() < config.predictor.k_neighbors) {
        throw std::invalid_argument("data ratio " + std::to_string(ratios[r]) +
                                    " leaves fewer training pairs than k_neighbors");
      }
      trains[r].push_back(std::move(train));
    }
  }

  const std::size_t jobs = ratios.size() * folds.size();
  std::vector<FoldScore> scores(jobs);
  parallel_for(jobs, resolve_threads(config), [&](std::size_t j) {
    const std::size_t r = j / folds.size();
    const std::size_t f = j % folds.size();
    scores[j] = score_fold(dataset, trains[r][f], folds[f].test, report.kernel, config, f, 1);
  });
  for (std::size_t r = 0; r < ratios.size(); ++r) {
    std::vector<double> id, ood, all;
    std::size_t train_total = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const auto& s = scores[r * folds.size() + f];
      id.push_back(s.id_rms);
      ood.push_back(s.ood_rms);
      all.push_back(s.all_rms);
      train_total += s.train_size;
    }
    report.points.push_back({ratios[r], train_total / folds.size(), summarize(id), summarize(ood),
                             summarize(all)});
  }
  return report;
}

TradeoffReport run_tradeoff(const HandoverDataset& dataset, const EvalConfig& config,
                            const TradeoffOptions& options, std::uint64_t seed) {
  if (options.inducing_ratios.empty()) throw std::invalid_argument("no inducing ratios given");
  if (options.folds == 0 || options.folds > static_cast<std::size_t>(options.k)) {
    throw std::invalid_argument("folds must be in [1, k]");
  }
  if (options.latency_ticks == 0) throw std::invalid_argument("latency_ticks must be positive");
  const auto folds = stratified_kfold(dataset, options.k, seed);
  TradeoffReport report{seed, resolve_kernel(dataset, config, seed), {}};
  const std::size_t threads = resolve_threads(config);

  for (const double ratio : options.inducing_ratios) {
    EvalConfig cfg = config;
    cfg.predictor.inducing_ratio = ratio;
    std::vector<double> rms;
    for (std::size_t f = 0; f < options.folds; ++f) {
      rms.push_back(score_fold(dataset, folds[f].train, folds[f].test, report.kernel, cfg, f, threads).all_rms);
    }

    // Latency: replay the first fold's test pairs until enough ticks are timed.
    const auto ctx = PredictionContext::fit(dataset.subset(folds[0].train), report.kernel, cfg.predictor);
    const auto warm = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::lround(cfg.warmup * ctx.sample_rate_hz())));
    std::vector<double> times;
    const std::size_t wanted = options.latency_ticks + options.discard_ticks;
    for (std::size_t p = 0; times.size() < wanted; p = (p + 1) % folds[0].test.size()) {
      const auto& pair = dataset[folds[0].test[p]];
      PredictionSession session(ctx);
      for (std::size_t t = 0; t < pair.receiver.size() && times.size() < wanted; ++t) {
        const auto start = std::chrono::steady_clock::now();
        session.observe(pair.receiver.pose(t));
        if (t + 1 >= warm) {
          const auto prediction = session.predict();
          const auto stop = std::chrono::steady_clock::now();
          if (prediction.poses.empty()) throw std::logic_error("empty prediction");
          times.push_back(std::chrono::duration<double>(stop - start).count());
        }
      }
    }
    times.erase(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(options.discard_ticks));
    const double mean = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
    const auto mid = times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2);
    std::nth_element(times.begin(), mid, times.end());
    double median = *mid;
    if (times.size() % 2 == 0) median = 0.5 * (median + *std::max_element(times.begin(), mid));
    report.points.push_back({ratio, summarize(rms), median, mean, times.size()});
  }
  return report;
}

nlohmann::json environment_metadata(std::size_t threads) {
  char host[256] = {0};
  if (gethostname(host, sizeof(host) - 1) != 0) host[0] = '\0';
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32] = {0};
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return {{"host", host},
          {"hardware_threads", std::thread::hardware_concurrency()},
          {"threads", threads},
          {"compiler", __VERSION__},
          {"build_type", HANDOVER_BUILD_TYPE},
          {"cxx_flags", HANDOVER_CXX_FLAGS},
          {"clock", "steady_clock"},
          {"generated_at", stamp}};
}

namespace {

nlohmann::json fold_json(const FoldScore& f) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : f.pairs) {
    pairs.push_back({{"index", p.index}, {"id", p.id}, {"label", to_string(p.label)}, {"rms_mm", p.rms_mm}});
  }
  return {{"fold", f.fold},
          {"train_size", f.train_size},
          {"test_size", f.pairs.size()},
          {"id_rms_mm", number(f.id_rms)},
          {"ood_rms_mm", number(f.ood_rms)},
          {"all_rms_mm", number(f.all_rms)},
          {"pairs", pairs}};
}

}  // namespace

nlohmann::json to_json(const KFoldReport& r) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.folds) folds.push_back(fold_json(f));
  return {{"kind", "kfold"},
          {"k", r.k},
          {"seed", r.seed},
          {"kernel", kernel_json(r.kernel)},
          {"folds", folds},
          {"rms_mm", {{"id", mean_std_json(r.id)}, {"ood", mean_std_json(r.ood)}, {"all", mean_std_json(r.all)}}}};
}

nlohmann::json to_json(const SampleEfficiencyReport& r) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : r.points) {
    points.push_back({{"ratio", p.ratio},
                      {"mean_train_size", p.mean_train_size},
                      {"rms_mm", {{"id", mean_std_json(p.id)}, {"ood", mean_std_json(p.ood)}, {"all", mean_std_json(p.all)}}}});
  }
  return {{"kind", "sample-efficiency"}, {"k", r.k}, {"seed", r.seed}, {"kernel", kernel_json(r.kernel)}, {"points", points}};
}

nlohmann::json to_json(const TradeoffReport& r) {
  nlohmann::json points = nlohmann::json::array();
  nlohmann::json timing = nlohmann::json::array();
  for (const auto& p : r.points) {
    points.push_back({{"inducing_ratio", p.inducing_ratio}, {"rms_mm", mean_std_json(p.rms)}});
    timing.push_back({{"inducing_ratio", p.inducing_ratio},
                      {"median_latency_s", p.median_latency_s},
                      {"mean_latency_s", p.mean_latency_s},
                      {"timed_ticks", p.timed_ticks}});
  }
  return {{"kind", "tradeoff"}, {"seed", r.seed}, {"kernel", kernel_json(r.kernel)}, {"points", points}, {"timing", timing}};
}

}  // namespace handover
