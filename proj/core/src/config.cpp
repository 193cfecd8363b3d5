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

#include "handover/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace handover {

namespace {

std::vector<double> numbers(const std::string& key, const std::string& value, std::size_t count) {
  std::vector<double> out;
  std::istringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(key + ": '" + value + "' is not a number list");
    }
  }
  if (out.size() != count) {
    throw ConfigError(key + ": expected " + std::to_string(count) + " values, got " + std::to_string(out.size()));
  }
  return out;
}

double number(const std::string& key, const std::string& value) { return numbers(key, value, 1)[0]; }

std::size_t count(const std::string& key, const std::string& value) {
  const double v = number(key, value);
  if (v < 0.0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
    throw ConfigError(key + ": expected a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

bool boolean(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(key + ": expected true or false");
}

using Setter = std::function<void(ToolkitConfig&, const std::string& key, const std::string& value)>;

Setter range(Range GeneratorConfig::*field) {
  return [field](ToolkitConfig& c, const std::string& k, const std::string& v) {
    const auto r = numbers(k, v, 2);
    c.generator.*field = {r[0], r[1]};
  };
}

Setter real(double GeneratorConfig::*field) {
  return [field](ToolkitConfig& c, const std::string& k, const std::string& v) { c.generator.*field = number(k, v); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"generator.n_id", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.generator.n_id = static_cast<int>(count(k, v)); }},
      {"generator.n_ood", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.generator.n_ood = static_cast<int>(count(k, v)); }},
      {"generator.rate_hz", real(&GeneratorConfig::rate_hz)},
      {"generator.seed", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.data_seed = count(k, v); }},
      {"generator.start_distance", range(&GeneratorConfig::start_distance)},
      {"generator.walk_speed", range(&GeneratorConfig::walk_speed)},
      {"generator.handoff_distance", range(&GeneratorConfig::handoff_distance)},
      {"generator.handoff_height", range(&GeneratorConfig::handoff_height)},
      {"generator.reach_trigger_distance", range(&GeneratorConfig::reach_trigger_distance)},
      {"generator.hold_duration", range(&GeneratorConfig::hold_duration)},
      {"generator.lateral_amplitude", real(&GeneratorConfig::lateral_amplitude)},
      {"generator.receiver_noise", real(&GeneratorConfig::receiver_noise)},
      {"generator.giver_noise", real(&GeneratorConfig::giver_noise)},
      {"kernel.lengthscale", [](ToolkitConfig& c, const std::string& k, const std::string& v) {
         const auto l = numbers(k, v, 2);
         if (!c.kernel) c.kernel = KernelParams{};
         c.kernel->lengthscale = {l[0], l[1]};
       }},
      {"kernel.signal_variance", [](ToolkitConfig& c, const std::string& k, const std::string& v) {
         if (!c.kernel) c.kernel = KernelParams{};
         c.kernel->signal_variance = number(k, v);
       }},
      {"kernel.noise_variance", [](ToolkitConfig& c, const std::string& k, const std::string& v) {
         if (!c.kernel) c.kernel = KernelParams{};
         c.kernel->noise_variance = number(k, v);
       }},
      {"predictor.inducing_ratio", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.predictor.inducing_ratio = number(k, v); }},
      {"predictor.kappa", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.predictor.similarity.kappa = number(k, v); }},
      {"predictor.min_speed", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.predictor.similarity.min_speed = number(k, v); }},
      {"predictor.window", [](ToolkitConfig& c, const std::string& k, const std::string& v) {
         c.predictor.similarity.window = v == "full" ? kFullHistory : count(k, v);
       }},
      {"predictor.k_neighbors", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.predictor.k_neighbors = count(k, v); }},
      {"predictor.hyper_subsample", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.hyper_subsample = count(k, v); }},
      {"ensemble.chunk_size", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.rollout.chunk_size = count(k, v); }},
      {"ensemble.decay", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.rollout.ensemble_decay = number(k, v); }},
      {"rollout.control_rate_hz", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.rollout.control_rate_hz = number(k, v); }},
      {"rollout.mass", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.rollout.mass = number(k, v); }},
      {"rollout.observation_noise", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.rollout.observation_noise = number(k, v); }},
      {"rollout.timeout", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.rollout.timeout = number(k, v); }},
      {"grasp.enabled", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.grasp.enabled = boolean(k, v); }},
      {"grasp.radius", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.grasp.radius = number(k, v); }},
      {"grasp.dwell", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.grasp.dwell = number(k, v); }},
      {"grasp.ramp_duration", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.grasp.ramp_duration = number(k, v); }},
      {"grasp.peak_force", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.grasp.peak_force = number(k, v); }},
      {"grasp.hand_height", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.grasp.hand_height = number(k, v); }},
      {"cospar.levels", [](ToolkitConfig& c, const std::string& k, const std::string& v) {
         const auto l = numbers(k, v, 4);
         for (std::size_t d = 0; d < 4; ++d) c.cospar.levels[d] = count(k, std::to_string(l[d]));
       }},
      {"cospar.lengthscale", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.cospar.lengthscale = number(k, v); }},
      {"cospar.signal_variance", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.cospar.signal_variance = number(k, v); }},
      {"cospar.sigma", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.cospar.sigma = number(k, v); }},
      {"cospar.iterations", [](ToolkitConfig& c, const std::string& k, const std::string& v) { c.cospar.iterations = count(k, v); }},
  };
  return table;
}

}  // namespace

void ToolkitConfig::validate() const {
  try {
    if (generator.n_id < 0 || generator.n_ood < 0) throw std::invalid_argument("negative pair count");
    if (!(generator.rate_hz > 0.0)) throw std::invalid_argument("rate_hz must be positive");
    if (kernel) kernel->validate();
    if (!(predictor.inducing_ratio > 0.0) || predictor.inducing_ratio > 1.0) {
      throw std::invalid_argument("inducing_ratio must be in (0, 1]");
    }
    predictor.similarity.validate();
    if (predictor.k_neighbors == 0) throw std::invalid_argument("k_neighbors must be positive");
    if (hyper_subsample == 0) throw std::invalid_argument("hyper_subsample must be positive");
    if (rollout.chunk_size == 0) throw std::invalid_argument("chunk_size must be positive");
    if (!(rollout.ensemble_decay > 0.0) || rollout.ensemble_decay > 1.0) {
      throw std::invalid_argument("decay must be in (0, 1]");
    }
    if (!(rollout.control_rate_hz > 0.0) || !(rollout.mass > 0.0)) {
      throw std::invalid_argument("control rate and mass must be positive");
    }
    if (!(rollout.observation_noise >= 0.0)) throw std::invalid_argument("observation_noise must be >= 0");
    if (rollout.timeout && !(*rollout.timeout > 0.0)) throw std::invalid_argument("timeout must be positive");
    if (!(grasp.radius > 0.0) || !(grasp.dwell >= 0.0) || !(grasp.ramp_duration >= 0.0) ||
        !(grasp.peak_force >= 0.0)) {
      throw std::invalid_argument("invalid grasp model");
    }
    cospar.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

ToolkitConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  ToolkitConfig config;
  const auto& table = setters();
  const auto check_section = [&](const std::string& section) {
    const auto known = table.lower_bound(section + ".");
    if (known == table.end() || known->first.rfind(section + ".", 0) != 0) {
      throw ConfigError("unknown config section [" + section + "]");
    }
  };
  // read_ini drops sections without keys, so headers are checked from the raw text.
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    const auto first = line.find_first_not_of(" \t");
    const auto last = line.find_last_not_of(" \t\r");
    if (first != std::string::npos && line[first] == '[' && line[last] == ']') {
      std::string name = line.substr(first + 1, last - first - 1);
      const auto a = name.find_first_not_of(" \t");
      name = a == std::string::npos ? "" : name.substr(a, name.find_last_not_of(" \t") - a + 1);
      check_section(name);
    }
  }
  for (const auto& [section, entries] : tree) {
    if (entries.empty() && !entries.data().empty()) throw ConfigError("key '" + section + "' outside a section");
    check_section(section);
    for (const auto& [key, value] : entries) {
      const std::string name = section + "." + key;
      const auto it = table.find(name);
      if (it == table.end()) throw ConfigError("unknown config key '" + name + "'");
      it->second(config, name, value.data());
    }
  }
  config.grasp.hand_offset = config.generator.hand_offset;
  config.validate();
  return config;
}

ToolkitConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

}  // namespace handover
