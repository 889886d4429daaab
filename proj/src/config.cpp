#include "fairsignal/config.hpp"

#include <fstream>
#include <functional>

#include <fmt/format.h>

namespace fairsignal {

RunConfig::RunConfig() {
  for (FlowLevel level : kFlowLevels) baseline_schedules.emplace(level, schedule_for_level(level));
}

void RunConfig::validate() const {
  sim.validate();
  env.validate();
  train.validate();
  if (eval_ticks < 3) throw ConfigError("eval.ticks must be at least 3");
  for (const auto& [level, schedule] : baseline_schedules) schedule.validate();
}

EvalConfig RunConfig::eval_config() const {
  EvalConfig e;
  e.ticks = eval_ticks;
  e.sim = sim;
  e.env = env;
  return e;
}

namespace {

using Binder = std::function<void(RunConfig&, nlohmann::json&, bool)>;

// One binder per key: load (store=false) copies json -> config, dump
// (store=true) copies config -> json.
template <typename T>
Binder field(T RunConfig::*group, auto member) {
  return [group, member](RunConfig& cfg, nlohmann::json& value, bool store) {
    auto& target = (cfg.*group).*member;
    if (store) {
      value = target;
    } else {
      target = value.get<std::remove_reference_t<decltype(target)>>();
    }
  };
}

Binder schedule_field(FlowLevel level) {
  return [level](RunConfig& cfg, nlohmann::json& value, bool store) {
    if (store) {
      value = cfg.baseline_schedules.at(level).durations();
    } else {
      const auto durations = value.get<std::array<int, 6>>();
      cfg.baseline_schedules[level] = FixedTimeSchedule::from_durations(level, durations);
    }
  };
}

const std::map<std::string, Binder>& binders() {
  static const std::map<std::string, Binder> table = [] {
    std::map<std::string, Binder> t;
    t["sim.lane_length"] = field(&RunConfig::sim, &SimConfig::lane_length);
    t["sim.vehicle_length"] = field(&RunConfig::sim, &SimConfig::vehicle_length);
    t["sim.min_gap"] = field(&RunConfig::sim, &SimConfig::min_gap);
    t["sim.free_flow_speed"] = field(&RunConfig::sim, &SimConfig::free_flow_speed);
    t["sim.saturation_headway"] = field(&RunConfig::sim, &SimConfig::saturation_headway);
    t["sim.queue_speed_threshold"] = field(&RunConfig::sim, &SimConfig::queue_speed_threshold);
    t["sim.yellow_duration"] = field(&RunConfig::sim, &SimConfig::yellow_duration);
    t["sim.crossing_time"] = field(&RunConfig::sim, &SimConfig::crossing_time);

    t["env.beta"] = field(&RunConfig::env, &EnvConfig::beta);
    t["env.stability_k"] = field(&RunConfig::env, &EnvConfig::stability_penalty);
    t["env.stability_tau"] = field(&RunConfig::env, &EnvConfig::stability_window);
    t["env.elapsed_cap"] = field(&RunConfig::env, &EnvConfig::elapsed_cap);
    t["env.ped_cap"] = field(&RunConfig::env, &EnvConfig::ped_cap);
    t["env.reward_scale"] = field(&RunConfig::env, &EnvConfig::reward_scale);
    t["env.control_interval"] = field(&RunConfig::env, &EnvConfig::control_interval);

    t["train.gamma"] = field(&RunConfig::train, &TrainConfig::gamma);
    t["train.learning_rate"] = field(&RunConfig::train, &TrainConfig::learning_rate);
    t["train.batch_size"] = field(&RunConfig::train, &TrainConfig::batch_size);
    t["train.target_sync_period"] = field(&RunConfig::train, &TrainConfig::target_sync_period);
    t["train.total_steps"] = field(&RunConfig::train, &TrainConfig::total_steps);
    t["train.flow_change_steps"] = field(&RunConfig::train, &TrainConfig::flow_change_steps);
    t["train.replay_capacity"] = field(&RunConfig::train, &TrainConfig::replay_capacity);
    t["train.warmup_steps"] = field(&RunConfig::train, &TrainConfig::warmup_steps);
    t["train.episode_length"] = field(&RunConfig::train, &TrainConfig::episode_length);
    t["train.hidden_layers"] = field(&RunConfig::train, &TrainConfig::hidden_layers);
    t["train.epsilon_start"] = [](RunConfig& c, nlohmann::json& v, bool store) {
      if (store) v = c.train.epsilon.start; else c.train.epsilon.start = v.get<double>();
    };
    t["train.epsilon_end"] = [](RunConfig& c, nlohmann::json& v, bool store) {
      if (store) v = c.train.epsilon.end; else c.train.epsilon.end = v.get<double>();
    };
    t["train.epsilon_decay_steps"] = [](RunConfig& c, nlohmann::json& v, bool store) {
      if (store) v = c.train.epsilon.decay_steps; else c.train.epsilon.decay_steps = v.get<std::int64_t>();
    };

    t["eval.ticks"] = [](RunConfig& c, nlohmann::json& v, bool store) {
      if (store) v = c.eval_ticks; else c.eval_ticks = v.get<std::int64_t>();
    };
    t["seed"] = [](RunConfig& c, nlohmann::json& v, bool store) {
      if (store) v = c.seed; else c.seed = v.get<std::uint64_t>();
    };
    for (FlowLevel level : kFlowLevels) {
      t[fmt::format("baseline.{}", to_string(level))] = schedule_field(level);
    }
    return t;
  }();
  return table;
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& flat) {
  if (!flat.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig cfg;
  for (const auto& [key, value] : flat.items()) {
    const auto it = binders().find(key);
    if (it == binders().end()) throw ConfigError(fmt::format("unknown config key '{}'", key));
    nlohmann::json copy = value;
    try {
      it->second(cfg, copy, false);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(fmt::format("bad value for '{}': {}", key, e.what()));
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("config '{}' is not valid JSON: {}", path, e.what()));
  }
  return config_from_json(j);
}

nlohmann::json config_to_json(const RunConfig& config) {
  nlohmann::json out = nlohmann::json::object();
  RunConfig copy = config;
  for (const auto& [key, bind] : binders()) {
    nlohmann::json value;
    bind(copy, value, true);
    out[key] = value;
  }
  return out;
}

}  // namespace fairsignal
