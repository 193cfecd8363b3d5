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

#include "handover/generator.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace handover {

PredictionContext::PredictionContext(HandoverDataset dataset, std::vector<FlowModel> models,
                                     SimilarityConfig similarity, std::size_t k_neighbors)
    : dataset_(std::make_shared<const HandoverDataset>(std::move(dataset))),
      models_(std::make_shared<const std::vector<FlowModel>>(std::move(models))),
      similarity_(similarity),
      k_neighbors_(k_neighbors) {
  similarity_.validate();
  if (dataset_->empty()) throw std::invalid_argument("prediction context needs stored pairs");
  if (models_->size() != dataset_->size()) {
    throw std::invalid_argument("one flow model per stored pair required");
  }
  if (k_neighbors_ == 0) throw std::invalid_argument("k_neighbors must be positive");
  const double rate = (*dataset_)[0].receiver.rate_hz();
  for (const auto& p : *dataset_) {
    if (p.receiver.rate_hz() != rate) throw std::invalid_argument("mixed sample rates in context");
  }
}

PredictionContext PredictionContext::fit(HandoverDataset dataset, const KernelParams& kernel,
                                         const PredictorConfig& config) {
  std::vector<FlowModel> models;
  models.reserve(dataset.size());
  for (const auto& p : dataset) {
    models.push_back(FlowModel::fit(p.receiver, config.inducing_ratio, kernel));
  }
  return PredictionContext(std::move(dataset), std::move(models), config.similarity,
                           config.k_neighbors);
}

double PredictionContext::sample_rate_hz() const { return (*dataset_)[0].receiver.rate_hz(); }

GiverPose PredictionContext::rest_pose() const {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (const auto& p : *dataset_) sum += p.giver.pose(0).vec();
  return GiverPose::from(sum / static_cast<double>(dataset_->size()));
}

bool PredictedTrajectory::operator==(const PredictedTrajectory& o) const {
  if (poses != o.poses || sources.size() != o.sources.size()) return false;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto& a = sources[i];
    const auto& b = o.sources[i];
    if (a.index != b.index || a.similarity != b.similarity || a.weight != b.weight ||
        a.aligned_index != b.aligned_index) {
      return false;
    }
  }
  return true;
}

std::size_t align_time(const ReceiverPose& pose, const ReceiverTrajectory& stored) {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  const Eigen::Vector2d q = pose.vec();
  for (std::size_t t = 0; t < stored.size(); ++t) {
    const double d2 = (stored.pose(t).vec() - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = t;
    }
  }
  return best;
}

PredictedTrajectory blend_neighbors(const PredictionContext& ctx,
                                    std::span<const RankedTrajectory> ranking,
                                    const ReceiverPose& current) {
  if (ranking.empty()) throw std::invalid_argument("empty ranking");
  const std::size_t k = std::min(ctx.k_neighbors(), ranking.size());

  PredictedTrajectory out;
  out.sources.reserve(k);
  double total = 0.0;
  std::size_t horizon = std::numeric_limits<std::size_t>::max();
  for (std::size_t i = 0; i < k; ++i) {
    const auto& r = ranking[i];
    const auto& pair = ctx.dataset()[r.index];
    const std::size_t aligned = align_time(current, pair.receiver);
    horizon = std::min(horizon, pair.length() - aligned);
    out.sources.push_back({r.index, r.similarity, 0.0, aligned});
    total += r.similarity;
  }
  for (auto& s : out.sources) {
    s.weight = total > 0.0 ? s.similarity / total : 1.0 / static_cast<double>(k);
  }

  out.poses.resize(horizon);
  for (std::size_t offset = 0; offset < horizon; ++offset) {
    Eigen::Vector3d p = Eigen::Vector3d::Zero();
    for (const auto& s : out.sources) {
      p += s.weight * ctx.dataset()[s.index].giver.pose(s.aligned_index + offset).vec();
    }
    out.poses[offset] = GiverPose::from(p);
  }
  return out;
}

PredictedTrajectory predict_trajectory(const PredictionContext& ctx, const ObservedTrajectory& obs,
                                       const PredictOptions& options) {
  const auto& cfg = ctx.similarity();
  const auto models = ctx.models();
  const std::size_t begin = obs.window_begin(cfg.window);

  std::vector<RankedTrajectory> ranking;
  ranking.reserve(models.size());
  std::vector<double> terms(obs.size() - begin);
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (options.exclude && *options.exclude == k) continue;
    for (std::size_t i = begin; i < obs.size(); ++i) {
      terms[i - begin] = distance_term(obs.velocity(i), models[k].predict(obs.pose(i)), cfg);
    }
    ranking.push_back({k, similarity_from_distance(mean_of_terms(terms))});
  }
  sort_ranking(ranking);
  return blend_neighbors(ctx, ranking, obs.current());
}

// ---------------------------------------------------------------------------

PredictionSession::PredictionSession(const PredictionContext& ctx, PredictOptions options)
    : ctx_(&ctx),
      options_(options),
      dt_(1.0 / ctx.sample_rate_hz()),
      predictions_(ctx.size()),
      terms_(ctx.size()) {}

void PredictionSession::observe(const ReceiverPose& pose) {
  validate_pose(pose);
  poses_.push_back(pose);
  const auto models = ctx_->models();
  for (std::size_t k = 0; k < models.size(); ++k) {
    predictions_[k].push_back(models[k].predict(pose));
  }
  finalize_terms();
}

void PredictionSession::observe_batch(std::span<const ReceiverPose> poses) {
  if (poses.empty()) return;
  for (const auto& p : poses) validate_pose(p);
  FlowModel::Inputs queries(static_cast<Eigen::Index>(poses.size()), 2);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    queries.row(static_cast<Eigen::Index>(i)) = poses[i].vec().transpose();
  }
  poses_.insert(poses_.end(), poses.begin(), poses.end());
  const auto models = ctx_->models();
  for (std::size_t k = 0; k < models.size(); ++k) {
    const auto batch = models[k].predict_batch(queries);
    predictions_[k].insert(predictions_[k].end(), batch.begin(), batch.end());
  }
  finalize_terms();
}

void PredictionSession::finalize_terms() {
  // With n poses, velocities of samples 0..n-2 are final.
  const std::size_t n = poses_.size();
  if (n < 2) return;
  const std::size_t finalized = n - 1;
  const auto models = ctx_->models();
  const auto& cfg = ctx_->similarity();
  for (std::size_t i = terms_[0].size(); i < finalized; ++i) {
    const Eigen::Vector2d v = finite_difference_at(poses_, i, dt_);
    for (std::size_t k = 0; k < models.size(); ++k) {
      terms_[k].push_back(distance_term(v, predictions_[k][i], cfg));
    }
  }
}

ObservedTrajectory PredictionSession::observation() const {
  return ObservedTrajectory(poses_, dt_);
}

PredictedTrajectory PredictionSession::predict(std::size_t n) const {
  if (n == 0) throw std::logic_error("no observation yet");
  if (n > poses_.size()) throw std::out_of_range("prefix longer than the observation");
  const auto& cfg = ctx_->similarity();
  const std::size_t begin = cfg.window >= n ? 0 : n - cfg.window;
  const std::span<const ReceiverPose> seen(poses_.data(), n);
  const Eigen::Vector2d last_velocity =
      n == 1 ? Eigen::Vector2d::Zero() : finite_difference_at(seen, n - 1, dt_);

  std::vector<RankedTrajectory> ranking;
  ranking.reserve(ctx_->size());
  std::vector<double> terms(n - begin);
  for (std::size_t k = 0; k < ctx_->size(); ++k) {
    if (options_.exclude && *options_.exclude == k) continue;
    const auto& cached = terms_[k];
    for (std::size_t i = begin; i + 1 < n; ++i) terms[i - begin] = cached[i];
    terms[n - 1 - begin] = distance_term(last_velocity, predictions_[k][n - 1], cfg);
    ranking.push_back({k, similarity_from_distance(mean_of_terms(terms))});
  }
  sort_ranking(ranking);
  return blend_neighbors(*ctx_, ranking, poses_[n - 1]);
}

// ---------------------------------------------------------------------------

EnsembleBuffer::EnsembleBuffer(std::size_t chunk_size, double decay)
    : chunk_size_(chunk_size), decay_(decay) {
  if (chunk_size_ == 0) throw std::invalid_argument("chunk size must be positive");
  if (!(decay_ > 0.0) || decay_ > 1.0) throw std::invalid_argument("decay must be in (0, 1]");
}

void EnsembleBuffer::push(PredictedTrajectory prediction, std::int64_t tick) {
  if (prediction.poses.empty()) throw std::invalid_argument("empty prediction");
  if (!entries_.empty() && tick <= entries_.back().tick) {
    throw std::invalid_argument("ensemble ticks must increase");
  }
  entries_.push_back({std::move(prediction), tick});
  while (entries_.size() > chunk_size_) entries_.pop_front();
}

GiverPose EnsembleBuffer::query(std::size_t offset) const {
  if (entries_.empty()) throw std::logic_error("ensemble query on an empty buffer");
  const std::int64_t target = entries_.back().tick + static_cast<std::int64_t>(offset);
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  double weight_sum = 0.0;
  for (const auto& e : entries_) {
    const auto age = static_cast<double>(entries_.back().tick - e.tick);
    const double w = std::pow(decay_, age);
    const auto index = static_cast<std::size_t>(target - e.tick);
    sum += w * e.prediction.at(index).vec();
    weight_sum += w;
  }
  return GiverPose::from(sum / weight_sum);
}

std::size_t EnsembleBuffer::horizon() const {
  if (entries_.empty()) return 0;
  return entries_.back().prediction.horizon();
}

std::int64_t EnsembleBuffer::latest_tick() const {
  if (entries_.empty()) throw std::logic_error("empty ensemble buffer");
  return entries_.back().tick;
}

std::size_t forecast_offset(double forecast_time, double sample_rate_hz) {
  if (!(forecast_time >= 0.0)) throw std::invalid_argument("forecast time must be >= 0");
  return static_cast<std::size_t>(std::lround(forecast_time * sample_rate_hz));
}

GiverPose forecast_pose(const PredictedTrajectory& prediction, double forecast_time,
                        double sample_rate_hz) {
  return prediction.at(forecast_offset(forecast_time, sample_rate_hz));
}

GiverPose forecast_pose(const EnsembleBuffer& buffer, double forecast_time,
                        double sample_rate_hz) {
  const std::size_t offset = forecast_offset(forecast_time, sample_rate_hz);
  return buffer.query(std::min(offset, buffer.horizon() - 1));
}

}  // namespace handover
