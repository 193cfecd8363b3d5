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

// handover: dataset generation, evaluation, rollouts, preference simulation and the
// preference service. Every subcommand writes a JSON report (to --out or stdout) and
// exits nonzero on error.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "handover/config.hpp"
#include "handover/cospar.hpp"
#include "handover/dataset.hpp"
#include "handover/eval.hpp"
#include "handover/generator.hpp"
#include "handover/impedance.hpp"
#include "handover/scenario.hpp"
#include "handover/service.hpp"

namespace {

using handover::ToolkitConfig;
using nlohmann::json;

struct Common {
  std::string config_path;
  std::string out;
  std::size_t threads = 0;
};

ToolkitConfig load(const Common& c) {
  return c.config_path.empty() ? ToolkitConfig{} : handover::load_config(c.config_path);
}

void emit(const Common& c, const json& report) {
  if (c.out.empty() || c.out == "-") {
    std::cout << report.dump(2) << '\n';
    return;
  }
  std::ofstream out(c.out);
  if (!out) throw std::runtime_error("cannot write '" + c.out + "'");
  out << report.dump(2) << '\n';
  if (!out) throw std::runtime_error("write to '" + c.out + "' failed");
}

handover::HandoverDataset dataset_for(const std::string& path, const ToolkitConfig& cfg) {
  if (!path.empty()) return handover::load_dataset(path);
  return handover::generate_synthetic(cfg.generator, cfg.data_seed);
}

handover::EvalConfig eval_config(const ToolkitConfig& cfg, const Common& c) {
  handover::EvalConfig e;
  e.predictor = cfg.predictor;
  e.kernel = cfg.kernel;
  e.hyper_subsample = cfg.hyper_subsample;
  e.threads = c.threads;
  return e;
}

handover::PredictionContext context_for(const std::string& data, const ToolkitConfig& cfg,
                                        std::uint64_t seed) {
  auto dataset = dataset_for(data, cfg);
  const auto kernel = cfg.kernel ? *cfg.kernel
                                 : handover::fit_kernel_hyperparameters(dataset, cfg.hyper_subsample, seed);
  return handover::PredictionContext::fit(std::move(dataset), kernel, cfg.predictor);
}

void add_common(CLI::App* app, Common& c, bool threads) {
  app->add_option("--config", c.config_path, "INI configuration file")->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "report path (default stdout)");
  if (threads) app->add_option("--threads", c.threads, "worker threads (default HANDOVER_THREADS or all cores)");
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    std::size_t used = 0;
    out.push_back(std::stod(item, &used));
    if (used != item.size()) throw std::invalid_argument("bad number '" + item + "'");
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

handover::HttpService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic robot-to-human handover toolkit"};
  app.require_subcommand(1);

  // gen-data
  Common gen_common;
  int n_id = -1, n_ood = -1;
  std::uint64_t gen_seed = 7;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic handover dataset (JSONL)");
  // Here --out names the dataset; the short summary always goes to stdout.
  gen->add_option("--config", gen_common.config_path, "INI configuration file")->check(CLI::ExistingFile);
  std::string gen_data;
  std::optional<double> gen_rate;
  gen->add_option("--out,--data", gen_data, "output dataset path")->required();
  gen->add_option("--rate", gen_rate, "sample rate in Hz")->check(CLI::PositiveNumber);
  gen->add_option("--n-id", n_id, "in-distribution pairs");
  gen->add_option("--n-ood", n_ood, "out-of-distribution pairs");
  gen->add_option("--seed", gen_seed, "generator seed");

  // eval
  auto* eval = app.add_subcommand("eval", "offline evaluation of the trajectory generator");
  eval->require_subcommand(1);
  Common eval_common;
  std::string eval_data;
  std::uint64_t eval_seed = 7;
  int k = 10;
  std::optional<double> inducing, kappa;
  std::optional<std::size_t> neighbors;
  std::string ratios_text;
  std::size_t tradeoff_folds = 1, latency_ticks = 1000;
  auto* kfold = eval->add_subcommand("kfold", "stratified k-fold RMS (ID / OOD)");
  auto* sample_eff = eval->add_subcommand("sample-eff", "RMS against training-set size");
  auto* tradeoff = eval->add_subcommand("tradeoff", "RMS and latency against inducing ratio");
  for (auto* sub : {kfold, sample_eff, tradeoff}) {
    add_common(sub, eval_common, true);
    sub->add_option("--data", eval_data, "dataset (JSONL); generated from the config when omitted");
    sub->add_option("--k", k, "folds")->check(CLI::Range(2, 1000));
    sub->add_option("--inducing", inducing, "inducing ratio in (0, 1]");
    sub->add_option("--kappa", kappa, "velocity-direction weight");
    sub->add_option("--neighbors", neighbors, "neighbours blended per prediction");
    sub->add_option("--seed", eval_seed, "fold / subsample seed");
  }
  sample_eff->add_option("--ratios", ratios_text, "training-data ratios")->default_val("0.1,0.25,0.5,1.0");
  tradeoff->add_option("--ratios", ratios_text, "inducing ratios")->default_val("0.1,0.2,0.4,0.7,1.0");
  tradeoff->add_option("--folds", tradeoff_folds, "folds evaluated for RMS");
  tradeoff->add_option("--latency-ticks", latency_ticks, "timed prediction ticks per ratio");

  // rollout
  Common roll_common;
  std::string params_text = "K=114.3,B=17.1,tf=0.14,fr=7.1";
  std::string scenario_text = "id";
  std::string roll_data;
  std::uint64_t roll_seed = 1;
  auto* roll = app.add_subcommand("rollout", "simulate one closed-loop handover");
  add_common(roll, roll_common, false);
  roll->add_option("--params", params_text, "K=..,B=..,tf=..,fr=..");
  roll->add_option("--scenario", scenario_text, "id | ood | static | absent | constant-velocity");
  roll->add_option("--seed", roll_seed, "scenario and noise seed");
  roll->add_option("--data", roll_data, "dataset (JSONL); generated from the config when omitted");

  // prefs simulate
  auto* prefs = app.add_subcommand("prefs", "preference learning");
  prefs->require_subcommand(1);
  Common prefs_common;
  std::size_t iters = 20, seeds = 50;
  std::uint64_t first_seed = 1;
  std::optional<double> pref_sigma;
  auto* simulate = prefs->add_subcommand("simulate", "preference sessions against a synthetic oracle");
  add_common(simulate, prefs_common, false);
  simulate->add_option("--iters", iters, "preferences per session")->check(CLI::PositiveNumber);
  simulate->add_option("--seeds", seeds, "number of seeded sessions")->check(CLI::PositiveNumber);
  simulate->add_option("--first-seed", first_seed, "seed of the first session");
  simulate->add_option("--sigma", pref_sigma, "preference noise");

  // serve
  Common serve_common;
  int port = 8080;
  std::string host = "127.0.0.1", serve_data, log_path, origin = "*";
  bool replay = false;
  auto* serve = app.add_subcommand("serve", "HTTP service for interactive preference sessions");
  add_common(serve, serve_common, false);
  serve->add_option("--port", port, "listen port (0 picks one)");
  serve->add_option("--host", host, "listen address");
  serve->add_option("--data", serve_data, "dataset (JSONL); generated from the config when omitted");
  serve->add_option("--log", log_path, "session append log (JSONL)");
  serve->add_flag("--replay", replay, "rebuild sessions from --log before serving");
  serve->add_option("--origin", origin, "allowed CORS origin");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      auto cfg = load(gen_common);
      if (n_id >= 0) cfg.generator.n_id = n_id;
      if (n_ood >= 0) cfg.generator.n_ood = n_ood;
      if (gen_rate) cfg.generator.rate_hz = *gen_rate;
      const auto dataset = handover::generate_synthetic(cfg.generator, gen_seed);
      handover::save_dataset(dataset, gen_data);
      emit(gen_common, {{"dataset", gen_data},
                        {"pairs", dataset.size()},
                        {"id", dataset.count(handover::Label::kID)},
                        {"ood", dataset.count(handover::Label::kOOD)},
                        {"seed", gen_seed}});
    } else if (*eval) {
      auto cfg = load(eval_common);
      if (inducing) cfg.predictor.inducing_ratio = *inducing;
      if (kappa) cfg.predictor.similarity.kappa = *kappa;
      if (neighbors) cfg.predictor.k_neighbors = *neighbors;
      cfg.validate();
      const auto dataset = dataset_for(eval_data, cfg);
      const auto ecfg = eval_config(cfg, eval_common);
      const std::size_t threads = eval_common.threads ? eval_common.threads : handover::default_thread_count();
      json report;
      if (*kfold) {
        report = handover::to_json(handover::run_kfold_eval(dataset, ecfg, k, eval_seed));
      } else if (*sample_eff) {
        report = handover::to_json(handover::run_sample_efficiency(dataset, ecfg, parse_list(ratios_text), k, eval_seed));
      } else {
        handover::TradeoffOptions opts;
        opts.inducing_ratios = parse_list(ratios_text);
        opts.k = k;
        opts.folds = tradeoff_folds;
        opts.latency_ticks = latency_ticks;
        report = handover::to_json(handover::run_tradeoff(dataset, ecfg, opts, eval_seed));
      }
      report["dataset"] = eval_data.empty() ? json("generated") : json(eval_data);
      report["predictor"] = {{"inducing_ratio", cfg.predictor.inducing_ratio},
                             {"kappa", cfg.predictor.similarity.kappa},
                             {"k_neighbors", cfg.predictor.k_neighbors},
                             {"window", cfg.predictor.similarity.window}};
      report["environment"] = handover::environment_metadata(threads);
      emit(eval_common, report);
    } else if (*roll) {
      const auto cfg = load(roll_common);
      const auto params = handover::HandoverParams::parse(params_text);
      const auto ctx = context_for(roll_data, cfg, cfg.data_seed);
      auto scenario = handover::make_scenario(handover::scenario_kind_from_string(scenario_text), roll_seed, cfg.generator);
      scenario.grasp = cfg.grasp;
      const auto result = handover::rollout(ctx, params, scenario, roll_seed, cfg.rollout);
      emit(roll_common, handover::rollout_to_json(result));
    } else if (*prefs) {
      auto cfg = load(prefs_common);
      cfg.cospar.iterations = iters;
      if (pref_sigma) cfg.cospar.sigma = *pref_sigma;
      cfg.validate();
      handover::ServiceConfig scfg;
      scfg.cospar = cfg.cospar;
      scfg.simulate_rollouts = false;
      handover::SessionManager manager(nullptr, scfg);
      const handover::ActionGrid grid(cfg.cospar.levels);
      const auto utility = handover::scale_to_prior(
          handover::peaked_utility(grid, handover::HandoverParams::learned()), cfg.cospar.signal_variance);
      const handover::Utility u = [&](std::size_t i) { return utility[i]; };
      json runs = json::array();
      std::size_t hits = 0;
      for (std::size_t r = 0; r < seeds; ++r) {
        const std::uint64_t seed = first_seed + r;
        json state = manager.create_session(seed);
        const std::string id = state["session_id"];
        for (std::size_t it = 0; !state["done"].get<bool>(); ++it) {
          const std::size_t a = state["query"]["a"]["action"];
          const std::size_t b = state["query"]["b"]["action"];
          const auto rec = handover::synthetic_oracle(a, b, u, cfg.cospar.sigma, handover::oracle_seed(seed, it));
          state = manager.submit_preference(id, {{"winner", rec.winner == a ? "a" : "b"}, {"query_id", it}});
        }
        const std::size_t best = state["incumbent"]["action"];
        std::size_t above = 0;
        for (const double v : utility) above += v > utility[best] ? 1 : 0;
        const bool top = above + 1 <= utility.size() / 10;
        hits += top ? 1 : 0;
        runs.push_back({{"seed", seed},
                        {"incumbent", state["incumbent"]},
                        {"utility", utility[best]},
                        {"rank", above + 1},
                        {"top_decile", top}});
      }
      emit(prefs_common, {{"iterations", iters},
                          {"sessions", seeds},
                          {"grid", grid},
                          {"peak", handover::HandoverParams::learned()},
                          {"top_decile_rate", static_cast<double>(hits) / static_cast<double>(seeds)},
                          {"runs", runs}});
    } else if (*serve) {
      const auto cfg = load(serve_common);
      auto ctx = std::make_shared<const handover::PredictionContext>(context_for(serve_data, cfg, cfg.data_seed));
      handover::ServiceConfig scfg;
      scfg.cospar = cfg.cospar;
      scfg.rollout = cfg.rollout;
      scfg.grasp = cfg.grasp;
      scfg.scene = cfg.generator;
      if (!log_path.empty()) scfg.log_path = log_path;
      handover::SessionManager manager(ctx, scfg);
      if (replay) {
        if (log_path.empty()) throw std::invalid_argument("--replay needs --log");
        if (std::ifstream(log_path)) manager.replay(log_path);
      }
      handover::HttpService service(manager, origin);
      const int bound = service.bind(host, port);
      if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << json{{"listening", host + ":" + std::to_string(bound)}}.dump() << std::endl;
      if (!service.listen()) throw std::runtime_error("server stopped with an error");
      g_service = nullptr;
    }
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}
