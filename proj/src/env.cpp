#include "fairsignal/env.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

namespace fairsignal {

void EnvConfig::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  if (!(stability_penalty >= 0.0)) throw ConfigError("stability penalty k must be >= 0");
  if (stability_window < kPhaseCount) {
    throw ConfigError("stability window tau must be at least the number of phases");
  }
  if (!(elapsed_cap > 0.0)) throw ConfigError("elapsed_cap must be positive");
  if (!(ped_cap > 0.0)) throw ConfigError("ped_cap must be positive");
  if (!(reward_scale > 0.0)) throw ConfigError("reward_scale must be positive");
  if (control_interval < 1) throw ConfigError("control_interval must be >= 1");
}

ObservationVector Observation::flatten() const {
  ObservationVector out{};
  std::size_t i = 0;
  for (double v : phase_onehot) out[i++] = v;
  out[i++] = elapsed_norm;
  for (const auto& row : density) {
    for (double v : row) out[i++] = v;
  }
  for (const auto& row : queue) {
    for (double v : row) out[i++] = v;
  }
  out[i++] = ped_norm;
  return out;
}

bool Observation::valid() const {
  const auto flat = flatten();
  if (!std::all_of(flat.begin(), flat.end(), [](double v) { return v >= 0.0 && v <= 1.0; })) {
    return false;
  }
  const auto ones = std::count(phase_onehot.begin(), phase_onehot.end(), 1.0);
  const auto zeros = std::count(phase_onehot.begin(), phase_onehot.end(), 0.0);
  return ones == 1 && zeros == kPhaseCount - 1;
}

ActionHistory::ActionHistory(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw ConfigError("action history capacity must be >= 1");
}

void ActionHistory::push(Phase action) {
  actions_.push_back(action);
  while (static_cast<int>(actions_.size()) > capacity_) actions_.pop_front();
}

Observation encode_observation(const SimState& sim, const EnvConfig& config) {
  Observation obs;
  obs.phase_onehot[static_cast<int>(sim.signal.active_phase)] = 1.0;
  obs.elapsed_norm =
      std::min(static_cast<double>(sim.signal.time_in_phase), config.elapsed_cap) /
      config.elapsed_cap;
  for (int a = 0; a < kApproachCount; ++a) {
    for (int i = 0; i < kLanesPerApproach; ++i) {
      const LaneState& lane = sim.lane(static_cast<Approach>(a), i);
      obs.density[a][i] = lane_density(lane);
      obs.queue[a][i] = lane_queue(lane, sim.config.queue_speed_threshold);
    }
  }
  obs.ped_norm = std::min(static_cast<double>(sim.pedestrians_waiting()), config.ped_cap) /
                 config.ped_cap;
  return obs;
}

double stability_penalty(const ActionHistory& history, double k, int window) {
  if (history.size() < window) return 0.0;
  std::array<bool, kPhaseCount> seen{};
  const auto& actions = history.actions();
  for (auto it = actions.end() - window; it != actions.end(); ++it) {
    seen[static_cast<int>(*it)] = true;
  }
  const bool all = std::all_of(seen.begin(), seen.end(), [](bool s) { return s; });
  return all ? -k : 0.0;
}

RewardBreakdown compute_reward(const SimState& sim, const ActionHistory& history, double beta,
                               double k, int window) {
  RewardBreakdown r;
  r.beta = beta;

  std::int64_t veh_wait = 0;
  std::int64_t veh_count = 0;
  for (const auto& lane : sim.lanes) {
    for (const auto& v : lane.vehicles) veh_wait += v.accumulated_wait;
    veh_count += lane.count();
  }
  if (veh_count > 0) r.r_veh = -static_cast<double>(veh_wait) / static_cast<double>(veh_count);

  std::int64_t ped_wait = 0;
  std::int64_t ped_count = 0;
  for (const auto& group : sim.ped_groups) {
    for (const auto& p : group.members) ped_wait += p.accumulated_wait;
    ped_count += static_cast<std::int64_t>(group.members.size());
  }
  if (ped_count > 0) r.r_ped = -static_cast<double>(ped_wait) / static_cast<double>(ped_count);

  r.r_stab = stability_penalty(history, k, window);
  r.total = (1.0 - beta) * r.r_veh + beta * r.r_ped + r.r_stab;
  return r;
}

TrafficEnv::TrafficEnv(SimConfig sim_config, EnvConfig env_config, FlowProfile profile)
    : sim_config_(sim_config),
      env_config_(env_config),
      profile_(profile),
      history_(env_config.stability_window) {
  sim_config_.validate();
  env_config_.validate();
  profile_.validate();
}

Observation TrafficEnv::reset(std::uint64_t seed) {
  sim_ = make_sim_state(sim_config_, profile_, seed);
  history_.clear();
  return encode_observation(*sim_, env_config_);
}

StepResult TrafficEnv::step(Phase action) {
  if (!sim_) throw UsageError("TrafficEnv::step called before reset");
  SimState& sim = *sim_;

  StepResult result;
  result.info.flow_level = sim.profile.level;
  set_phase(sim, action);
  for (int t = 0; t < env_config_.control_interval; ++t) {
    const TickReport tick = advance_tick(sim);
    result.info.vehicle_departures += tick.vehicle_departures;
    result.info.pedestrian_departures += tick.pedestrian_departures;
    result.info.blocked_arrivals += tick.arrivals.blocked_vehicles;
    result.info.yellow_ticks += tick.yellow ? 1 : 0;
  }
  history_.push(action);

  result.observation = encode_observation(sim, env_config_);
  result.reward = compute_reward(sim, history_, env_config_.beta, env_config_.stability_penalty,
                                 env_config_.stability_window);
  if (trace_ != nullptr) {
    *trace_ << fmt::format("{},{},{},{},{},{}\n", sim.clock, static_cast<int>(action),
                           result.reward.r_veh, result.reward.r_ped, result.reward.r_stab,
                           result.reward.total);
  }
  return result;
}

void TrafficEnv::set_profile(const FlowProfile& profile) {
  profile.validate();
  profile_ = profile;
  if (sim_) sim_->profile = profile;
}

void TrafficEnv::set_trace(std::ostream* trace) {
  trace_ = trace;
  if (trace_ != nullptr) *trace_ << "tick,action,r_veh,r_ped,r_stab,total\n";
}

const SimState& TrafficEnv::sim() const {
  if (!sim_) throw UsageError("environment not initialized; call reset first");
  return *sim_;
}

SimState& TrafficEnv::mutable_sim() {
  if (!sim_) throw UsageError("environment not initialized; call reset first");
  return *sim_;
}

}  // namespace fairsignal
