#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "fairsignal/agent.hpp"
#include "fairsignal/baseline.hpp"
#include "fairsignal/env.hpp"
#include "fairsignal/eval.hpp"
#include "fairsignal/sim_core.hpp"

namespace fairsignal {

/// Everything a run depends on. Defaults reproduce the reference setup.
struct RunConfig {
  SimConfig sim;
  EnvConfig env;
  TrainConfig train;
  std::int64_t eval_ticks = 20000;
  std::map<FlowLevel, FixedTimeSchedule> baseline_schedules;
  std::uint64_t seed = 1;

  RunConfig();
  void validate() const;
  EvalConfig eval_config() const;
};

/// Flat JSON object; keys are dotted names such as "sim.lane_length",
/// "env.beta", "train.gamma", "baseline.light" (array of 6 durations).
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& flat);
RunConfig load_config(const std::string& path);
/// Every key with its effective value, in the same flat schema.
nlohmann::json config_to_json(const RunConfig& config);

}  // namespace fairsignal
