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

#include "handover/service.hpp"

#include <cstdio>
#include <fstream>
#include <utility>

#include <httplib.h>

namespace handover {

namespace {

constexpr std::uint64_t kScenarioStream = 3;
constexpr std::uint64_t kSessionStream = 7;

// Parsed JSON stores non-negative literals as unsigned, built JSON as signed.
bool is_non_negative_integer(const nlohmann::json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

std::string session_name(std::uint64_t counter, std::uint64_t seed) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "s%06llu-%08llx", static_cast<unsigned long long>(counter),
                static_cast<unsigned long long>(seed & 0xffffffffULL));
  return buf;
}

}  // namespace

SessionManager::SessionManager(std::shared_ptr<const PredictionContext> context, ServiceConfig config)
    : context_(std::move(context)), config_(std::move(config)) {
  config_.cospar.validate();
  prior_ = std::make_shared<const GridPrior>(ActionGrid(config_.cospar.levels), config_.cospar.lengthscale,
                                             config_.cospar.signal_variance);
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown session '" + id + "'");
  return it->second;
}

std::shared_ptr<SessionManager::Session> SessionManager::start(const std::string& id, std::uint64_t seed) {
  auto s = std::make_shared<Session>();
  s->id = id;
  s->seed = seed;
  s->posterior = laplace_posterior({}, prior_, config_.cospar.sigma);
  std::lock_guard lock(sessions_mutex_);
  if (!sessions_.emplace(id, s).second) throw ServiceError(409, "session '" + id + "' exists");
  ++created_;
  return s;
}

std::string SessionManager::store_rollout(const std::string& id, nlohmann::json rollout) {
  rollout["rollout_id"] = id;
  std::lock_guard lock(rollouts_mutex_);
  rollouts_[id] = std::move(rollout);
  return id;
}

void SessionManager::open_query(Session& s, bool simulate) {
  const std::size_t it = s.posterior->records().size();
  const auto [a, b] = select_query(*s.posterior, query_seed(s.seed, it));
  Query q{it, a, b, derive_seed(s.seed, it, kScenarioStream), {}, {}};
  if (simulate && config_.simulate_rollouts) {
    ReceiverScenario scenario = make_scenario(config_.scenario, q.scenario_seed, config_.scene);
    scenario.grasp = config_.grasp;
    scenario.grasp.hand_offset = config_.scene.hand_offset;
    const auto grid = s.posterior->grid();
    for (const auto& [action, slot, tag] :
         {std::tuple{a, &q.rollout_a, "a"}, std::tuple{b, &q.rollout_b, "b"}}) {
      auto json = rollout_to_json(handover::rollout(*context_, grid.params(action), scenario, q.scenario_seed, config_.rollout));
      json["action"] = action;
      *slot = store_rollout(s.id + "-q" + std::to_string(it) + "-" + tag, std::move(json));
    }
  }
  s.query = std::move(q);
}

nlohmann::json SessionManager::query_json(const Session& s) const {
  const auto& q = *s.query;
  const auto& grid = s.posterior->grid();
  const auto candidate = [&](std::size_t action, const std::string& rollout_id) {
    nlohmann::json c{{"action", action}, {"params", grid.params(action)}};
    if (!rollout_id.empty()) {
      c["rollout_id"] = rollout_id;
      std::lock_guard lock(rollouts_mutex_);
      c["rollout"] = rollouts_.at(rollout_id);
    }
    return c;
  };
  return {{"id", q.id},
          {"scenario", to_string(config_.scenario)},
          {"scenario_seed", q.scenario_seed},
          {"a", candidate(q.a, q.rollout_a)},
          {"b", candidate(q.b, q.rollout_b)}};
}

nlohmann::json SessionManager::final_json(const Session& s) const {
  const std::size_t best = s.posterior->incumbent();
  return {{"session_id", s.id},
          {"done", true},
          {"iteration", s.posterior->records().size()},
          {"budget", config_.cospar.iterations},
          {"incumbent", {{"action", best}, {"params", s.posterior->grid().params(best)}}},
          {"posterior_summary", posterior_summary(*s.posterior)}};
}

nlohmann::json SessionManager::create_session(std::optional<std::uint64_t> seed) {
  if (config_.simulate_rollouts && !context_) throw ServiceError(503, "prediction context not loaded");
  std::uint64_t counter = 0;
  {
    std::lock_guard lock(sessions_mutex_);
    counter = created_;
  }
  const std::uint64_t session_seed = seed.value_or(derive_seed(config_.seed, counter, kSessionStream));
  std::string id = session_name(counter, session_seed);
  std::shared_ptr<Session> s;
  for (;;) {
    try {
      s = start(id, session_seed);
      break;
    } catch (const ServiceError&) {
      // Raced with another creation; take the next counter value.
      std::lock_guard lock(sessions_mutex_);
      id = session_name(created_++, session_seed);
    }
  }
  std::lock_guard lock(s->mutex);
  open_query(*s, true);
  log({{"event", "create"}, {"session", s->id}, {"seed", s->seed}});
  return {{"session_id", s->id},
          {"done", false},
          {"iteration", 0},
          {"budget", config_.cospar.iterations},
          {"query", query_json(*s)}};
}

void SessionManager::record_answer(Session& s, const std::string& winner, bool simulate) {
  const auto& q = *s.query;
  const PreferenceRecord record = winner == "a" ? PreferenceRecord{q.a, q.b} : PreferenceRecord{q.b, q.a};
  s.posterior = update(*s.posterior, record);
  s.query.reset();
  if (s.posterior->records().size() >= config_.cospar.iterations) {
    s.done = true;
  } else {
    open_query(s, simulate);
  }
}

nlohmann::json SessionManager::submit_preference(const std::string& session_id, const nlohmann::json& body) {
  const auto s = find(session_id);
  if (!body.is_object()) throw ServiceError(400, "body must be a JSON object");
  const auto w = body.find("winner");
  if (w == body.end() || !w->is_string() || (*w != "a" && *w != "b")) {
    throw ServiceError(400, "winner must be \"a\" or \"b\"");
  }
  std::optional<std::size_t> query_id;
  if (const auto qi = body.find("query_id"); qi != body.end()) {
    if (!is_non_negative_integer(*qi)) throw ServiceError(400, "query_id must be a non-negative integer");
    query_id = qi->get<std::size_t>();
  }
  const std::string winner = w->get<std::string>();

  std::lock_guard lock(s->mutex);
  if (s->done || !s->query) throw ServiceError(409, "session already complete");
  if (query_id && *query_id != s->query->id) {
    throw ServiceError(409, "query " + std::to_string(*query_id) + " is not open (current " +
                                std::to_string(s->query->id) + ")");
  }
  const std::size_t answered = s->query->id;
  record_answer(*s, winner, true);
  log({{"event", "preference"}, {"session", s->id}, {"query_id", answered}, {"winner", winner}});
  if (s->done) return final_json(*s);
  return {{"session_id", s->id},
          {"done", false},
          {"iteration", s->posterior->records().size()},
          {"budget", config_.cospar.iterations},
          {"query", query_json(*s)}};
}

nlohmann::json SessionManager::session_state(const std::string& session_id) const {
  const auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  if (s->done) return final_json(*s);
  const std::size_t best = s->posterior->incumbent();
  return {{"session_id", s->id},
          {"done", false},
          {"iteration", s->posterior->records().size()},
          {"budget", config_.cospar.iterations},
          {"records", s->posterior->records()},
          {"incumbent", {{"action", best}, {"params", s->posterior->grid().params(best)}}},
          {"query", query_json(*s)}};
}

nlohmann::json SessionManager::rollout(const std::string& rollout_id) const {
  std::lock_guard lock(rollouts_mutex_);
  const auto it = rollouts_.find(rollout_id);
  if (it == rollouts_.end()) throw ServiceError(404, "unknown rollout '" + rollout_id + "'");
  return it->second;
}

PreferencePosterior SessionManager::posterior(const std::string& session_id) const {
  const auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  return *s->posterior;
}

void SessionManager::log(const nlohmann::json& event) {
  if (!config_.log_path || replaying_) return;
  std::lock_guard lock(log_mutex_);
  std::ofstream out(*config_.log_path, std::ios::app);
  if (!out) throw ServiceError(500, "cannot append to session log");
  out << event.dump() << '\n';
}

void SessionManager::replay(const std::string& log_path) {
  std::ifstream in(log_path);
  if (!in) throw std::runtime_error("cannot open session log '" + log_path + "'");
  replaying_ = true;
  std::string line;
  std::size_t number = 0;
  try {
    while (std::getline(in, line)) {
      ++number;
      if (line.empty()) continue;
      const auto event = nlohmann::json::parse(line);
      const std::string kind = event.at("event").get<std::string>();
      const std::string id = event.at("session").get<std::string>();
      if (kind == "create") {
        const auto s = start(id, event.at("seed").get<std::uint64_t>());
        std::lock_guard lock(s->mutex);
        open_query(*s, false);
      } else if (kind == "preference") {
        const auto s = find(id);
        std::lock_guard lock(s->mutex);
        if (s->done || !s->query || s->query->id != event.at("query_id").get<std::size_t>()) {
          throw std::runtime_error("preference out of order");
        }
        const std::string winner = event.at("winner").get<std::string>();
        if (winner != "a" && winner != "b") throw std::runtime_error("bad winner");
        record_answer(*s, winner, false);
      } else {
        throw std::runtime_error("unknown event '" + kind + "'");
      }
    }
  } catch (const std::exception& e) {
    replaying_ = false;
    throw std::runtime_error("session log line " + std::to_string(number) + ": " + e.what());
  }
  replaying_ = false;

  // Open queries need their rollouts for the UI.
  std::vector<std::shared_ptr<Session>> open;
  {
    std::lock_guard lock(sessions_mutex_);
    for (const auto& [id, s] : sessions_) open.push_back(s);
  }
  for (const auto& s : open) {
    std::lock_guard lock(s->mutex);
    if (!s->done && s->query && s->query->rollout_a.empty() && config_.simulate_rollouts && context_) {
      open_query(*s, true);
    }
  }
}

// ---------------------------------------------------------------------------

struct HttpService::Impl {
  SessionManager& manager;
  httplib::Server server;

  static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <typename F>
  static void guarded(httplib::Response& res, F&& fn) {
    try {
      fn();
    } catch (const ServiceError& e) {
      reply(res, e.status(), {{"error", e.what()}});
    } catch (const nlohmann::json::exception& e) {
      reply(res, 400, {{"error", std::string("malformed JSON: ") + e.what()}});
    } catch (const std::exception& e) {
      reply(res, 500, {{"error", e.what()}});
    }
  }

  Impl(SessionManager& m, const std::string& origin) : manager(m) {
    server.set_default_headers({{"Access-Control-Allow-Origin", origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, {{"status", "ok"}, {"context_loaded", manager.context_loaded()}});
    });
    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        std::optional<std::uint64_t> seed;
        if (!req.body.empty()) {
          const auto body = nlohmann::json::parse(req.body);
          if (!body.is_object()) throw ServiceError(400, "body must be a JSON object");
          if (const auto it = body.find("seed"); it != body.end()) {
            if (!is_non_negative_integer(*it)) throw ServiceError(400, "seed must be a non-negative integer");
            seed = it->get<std::uint64_t>();
          }
        }
        reply(res, 201, manager.create_session(seed));
      });
    });
    server.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, manager.session_state(req.matches[1])); });
    });
    server.Post(R"(/sessions/([^/]+)/preference)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = req.matches[1];
        nlohmann::json body;
        try {
          body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception&) {
          manager.session_state(id);  // unknown session wins over a bad body
          throw ServiceError(400, "body is not valid JSON");
        }
        reply(res, 200, manager.submit_preference(id, body));
      });
    });
    server.Get(R"(/rollouts/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, manager.rollout(req.matches[1])); });
    });
  }
};

HttpService::HttpService(SessionManager& manager, std::string allowed_origin)
    : impl_(std::make_unique<Impl>(manager, allowed_origin)) {}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host.c_str());
  return impl_->server.bind_to_port(host.c_str(), port) ? port : -1;
}

bool HttpService::listen() { return impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace handover
