#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <stdexcept>

#include "fairsignal/sim_core.hpp"

namespace fairsignal {

inline constexpr int kObservationSize = 29;

using ObservationVector = std::array<double, kObservationSize>;

/// Raised when the environment is driven out of order (e.g. step before reset).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct EnvConfig {
  double beta = 0.5;               // fairness coefficient
  double stability_penalty = 20.0; // k
  int stability_window = 3;        // tau
  double elapsed_cap = 120.0;      // s, normalizer for time in phase
  double ped_cap = 30.0;           // pedestrians, normalizer for the waiting count
  double reward_scale = 0.01;      // applied before rewards enter replay
  int control_interval = 10;       // simulator ticks per agent decision

  void validate() const;
  bool operator==(const EnvConfig&) const = default;
};

struct Observation {
  std::array<double, kPhaseCount> phase_onehot{};
  double elapsed_norm = 0.0;
  std::array<std::array<double, kLanesPerApproach>, kApproachCount> density{};
  std::array<std::array<double, kLanesPerApproach>, kApproachCount> queue{};
  double ped_norm = 0.0;

  /// Layout: onehot(3), elapsed(1), density N0..W2 (12), queue N0..W2 (12), peds(1).
  ObservationVector flatten() const;
  bool valid() const;
  bool operator==(const Observation&) const = default;
};

/// The last `capacity` actions, oldest first.
class ActionHistory {
 public:
  explicit ActionHistory(int capacity = 3);

  void push(Phase action);
  void clear() { actions_.clear(); }
  int size() const { return static_cast<int>(actions_.size()); }
  int capacity() const { return capacity_; }
  const std::deque<Phase>& actions() const { return actions_; }

  bool operator==(const ActionHistory&) const = default;

 private:
  int capacity_;
  std::deque<Phase> actions_;
};

struct RewardBreakdown {
  double r_veh = 0.0;
  double r_ped = 0.0;
  double r_stab = 0.0;
  double beta = 0.0;
  double total = 0.0;

  bool operator==(const RewardBreakdown&) const = default;
};

Observation encode_observation(const SimState& sim, const EnvConfig& config);

/// -k when every phase occurs among the last `window` actions, else 0.
/// Histories shorter than the window never fire.
double stability_penalty(const ActionHistory& history, double k, int window);

/// Mean accumulated waits of vehicles present and pedestrians waiting, combined
/// with the stability term as (1 - beta) r_veh + beta r_ped + r_stab.
RewardBreakdown compute_reward(const SimState& sim, const ActionHistory& history, double beta,
                               double k, int window);

struct StepInfo {
  int vehicle_departures = 0;
  int pedestrian_departures = 0;
  int blocked_arrivals = 0;
  int yellow_ticks = 0;
  FlowLevel flow_level = FlowLevel::Light;
};

struct StepResult {
  Observation observation;
  RewardBreakdown reward;
  StepInfo info;
};

/// MDP wrapper: one step applies the chosen phase and runs `control_interval` ticks.
class TrafficEnv {
 public:
  TrafficEnv(SimConfig sim_config, EnvConfig env_config, FlowProfile profile);

  Observation reset(std::uint64_t seed);
  StepResult step(Phase action);

  /// Takes effect from the next tick; persists across resets.
  void set_profile(const FlowProfile& profile);

  /// Optional per-step CSV trace: tick,action,r_veh,r_ped,r_stab,total.
  void set_trace(std::ostream* trace);

  bool initialized() const { return sim_.has_value(); }
  const SimState& sim() const;
  SimState& mutable_sim();
  const ActionHistory& history() const { return history_; }
  const EnvConfig& config() const { return env_config_; }
  const FlowProfile& profile() const { return profile_; }

 private:
  SimConfig sim_config_;
  EnvConfig env_config_;
  FlowProfile profile_;
  std::optional<SimState> sim_;
  ActionHistory history_;
  std::ostream* trace_ = nullptr;
};

}  // namespace fairsignal
