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
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "handover/cospar.hpp"
#include "handover/generator.hpp"
#include "handover/impedance.hpp"
#include "handover/scenario.hpp"

namespace handover {

/// Request failure carrying the HTTP status it maps to.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct ServiceConfig {
  CosparConfig cospar;
  RolloutConfig rollout;
  GraspModel grasp;
  GeneratorConfig scene;
  ScenarioKind scenario = ScenarioKind::kInDistribution;
  bool simulate_rollouts = true;
  std::uint64_t seed = 1;
  std::optional<std::string> log_path;  // JSONL append log of session events
};

/// Preference sessions, independent of any transport. Each session alternates
/// between an open query (two candidate actions rolled out on the same scenario and
/// seed) and the refit after the human's answer, until the iteration budget is spent.
/// Calls on different sessions run concurrently; calls on one session serialize.
class SessionManager {
 public:
  /// `context` may be null; session creation then fails with 503 when rollouts are on.
  SessionManager(std::shared_ptr<const PredictionContext> context, ServiceConfig config);

  /// {"session_id", "iteration", "budget", "query": {"id", "a", "b"}}. `seed` pins the
  /// session's random stream; otherwise one is derived from the manager seed.
  nlohmann::json create_session(std::optional<std::uint64_t> seed = std::nullopt);

  /// Body {"winner": "a"|"b", "query_id"?: int}. Returns the next query, or
  /// {"done": true, "incumbent", "posterior_summary"} once the budget is used up.
  nlohmann::json submit_preference(const std::string& session_id, const nlohmann::json& body);

  nlohmann::json session_state(const std::string& session_id) const;
  nlohmann::json rollout(const std::string& rollout_id) const;

  /// Current posterior of a session (copy).
  PreferencePosterior posterior(const std::string& session_id) const;

  /// Rebuilds sessions from an append log. Rollouts are only recomputed for queries
  /// that are still open.
  void replay(const std::string& log_path);

  bool context_loaded() const { return context_ != nullptr; }
  const ServiceConfig& config() const { return config_; }

 private:
  struct Query {
    std::size_t id;
    std::size_t a;
    std::size_t b;
    std::uint64_t scenario_seed;
    std::string rollout_a;
    std::string rollout_b;
  };
  struct Session {
    std::mutex mutex;
    std::string id;
    std::uint64_t seed;
    std::optional<PreferencePosterior> posterior;
    std::optional<Query> query;
    bool done = false;
  };

  std::shared_ptr<Session> find(const std::string& id) const;
  std::shared_ptr<Session> start(const std::string& id, std::uint64_t seed);
  void open_query(Session& s, bool simulate);
  std::string store_rollout(const std::string& id, nlohmann::json rollout);
  nlohmann::json query_json(const Session& s) const;
  nlohmann::json final_json(const Session& s) const;
  void record_answer(Session& s, const std::string& winner, bool simulate);
  void log(const nlohmann::json& event);

  std::shared_ptr<const PredictionContext> context_;
  ServiceConfig config_;
  std::shared_ptr<const GridPrior> prior_;

  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t created_ = 0;

  mutable std::mutex rollouts_mutex_;
  std::map<std::string, nlohmann::json> rollouts_;

  std::mutex log_mutex_;
  bool replaying_ = false;
};

/// HTTP front end for a SessionManager:
///   POST /sessions                       201 new session with its first query
///   GET  /sessions/{id}                  200 session state
///   POST /sessions/{id}/preference       200 next query or final report
///   GET  /rollouts/{id}                  200 serialized rollout
///   GET  /health                         200
/// Errors are {"error": message} with 400, 404, 409 or 503. CORS is open to
/// `allowed_origin`.
class HttpService {
 public:
  explicit HttpService(SessionManager& manager, std::string allowed_origin = "*");
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds to `port` (0 picks a free one) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace handover
