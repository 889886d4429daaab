#include "fairsignal/sim_core.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace fairsignal {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::NSGreen: return "NSGreen";
    case Phase::EWGreen: return "EWGreen";
    case Phase::PedScramble: return "PedScramble";
  }
  return "?";
}

std::string_view to_string(FlowLevel level) {
  switch (level) {
    case FlowLevel::Light: return "light";
    case FlowLevel::Moderate: return "moderate";
    case FlowLevel::Heavy: return "heavy";
  }
  return "?";
}

std::string_view to_string(UserClass user_class) {
  return user_class == UserClass::Vehicle ? "vehicle" : "pedestrian";
}

FlowLevel flow_level_from_string(std::string_view name) {
  for (FlowLevel level : kFlowLevels) {
    if (to_string(level) == name) return level;
  }
  throw ConfigError("unknown flow level '" + std::string(name) + "'");
}

FlowProfile FlowProfile::named(FlowLevel level) {
  switch (level) {
    case FlowLevel::Light: return {level, 750.0, 400.0, 500.0, 300.0};
    case FlowLevel::Moderate: return {level, 850.0, 500.0, 500.0, 300.0};
    case FlowLevel::Heavy: return {level, 1000.0, 600.0, 500.0, 300.0};
  }
  throw ConfigError("unknown flow level");
}

void FlowProfile::validate() const {
  for (double rate : {ns_veh_rate, ew_veh_rate, ns_ped_rate, ew_ped_rate}) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) {
      throw ConfigError("flow rates must be finite and non-negative");
    }
  }
}

int SimConfig::lane_capacity() const {
  return static_cast<int>(std::floor(lane_length / spacing() + 1e-9));
}

void SimConfig::validate() const {
  if (!(lane_length > 0.0)) throw ConfigError("lane_length must be positive");
  if (!(vehicle_length > 0.0)) throw ConfigError("vehicle_length must be positive");
  if (!(min_gap >= 0.0)) throw ConfigError("min_gap must be non-negative");
  if (!(free_flow_speed > 0.0)) throw ConfigError("free_flow_speed must be positive");
  if (!(saturation_headway > 0.0)) throw ConfigError("saturation_headway must be positive");
  if (!(queue_speed_threshold > 0.0)) {
    throw ConfigError("queue_speed_threshold must be positive");
  }
  if (yellow_duration < 0) throw ConfigError("yellow_duration must be non-negative");
  if (crossing_time < 1) throw ConfigError("crossing_time must be at least 1 s");
  if (lane_capacity() < 1) throw ConfigError("lane geometry yields zero capacity");
}

std::int64_t SimState::vehicles_present() const {
  std::int64_t n = 0;
  for (const auto& lane : lanes) n += lane.count();
  return n;
}

std::int64_t SimState::pedestrians_waiting() const {
  return static_cast<std::int64_t>(ped_groups[0].members.size() + ped_groups[1].members.size());
}

std::int64_t SimState::pedestrians_present() const {
  return pedestrians_waiting() + static_cast<std::int64_t>(crossing.size());
}

SimState make_sim_state(const SimConfig& config, const FlowProfile& profile, std::uint64_t seed) {
  config.validate();
  profile.validate();
  SimState state;
  state.config = config;
  state.profile = profile;
  state.rng.seed(seed);
  for (int a = 0; a < kApproachCount; ++a) {
    for (int i = 0; i < kLanesPerApproach; ++i) {
      LaneState& lane = state.lane(static_cast<Approach>(a), i);
      lane.approach = static_cast<Approach>(a);
      lane.lane_index = i;
      lane.length = config.lane_length;
      lane.capacity = config.lane_capacity();
    }
  }
  state.ped_groups[0].axis = CrossingAxis::NS;
  state.ped_groups[1].axis = CrossingAxis::EW;
  return state;
}

void check_invariants(const SimState& state) {
  const SimConfig& cfg = state.config;
  const double tol = 1e-9;
  for (const auto& lane : state.lanes) {
    if (lane.capacity <= 0) throw InvariantViolation("lane capacity must be positive");
    if (lane.count() > lane.capacity) throw InvariantViolation("lane holds more than capacity");
    for (std::size_t i = 0; i < lane.vehicles.size(); ++i) {
      const Vehicle& v = lane.vehicles[i];
      if (v.position < -tol || v.position > lane.length + tol) {
        throw InvariantViolation("vehicle position outside lane");
      }
      if (v.speed < -tol || v.speed > cfg.free_flow_speed + tol) {
        throw InvariantViolation("vehicle speed outside [0, free-flow]");
      }
      if (v.accumulated_wait < 0) throw InvariantViolation("negative vehicle wait");
      if (i > 0 && lane.vehicles[i - 1].position - v.position < cfg.spacing() - tol) {
        throw InvariantViolation("vehicles closer than minimum spacing");
      }
    }
  }
  const SignalState& sig = state.signal;
  if (sig.in_yellow && (sig.yellow_remaining <= 0 || sig.yellow_remaining > cfg.yellow_duration)) {
    throw InvariantViolation("yellow countdown outside (0, yellow_duration]");
  }
  if (sig.time_in_phase < 0) throw InvariantViolation("negative time in phase");
  const auto& vc = state.vehicle_counts;
  if (vc.spawned != state.vehicles_present() + vc.departed + vc.blocked) {
    throw InvariantViolation("vehicle conservation broken");
  }
  const auto& pc = state.pedestrian_counts;
  if (pc.spawned != state.pedestrians_present() + pc.departed + pc.blocked) {
    throw InvariantViolation("pedestrian conservation broken");
  }
}

bool phase_serves(Phase phase, Approach approach) {
  switch (phase) {
    case Phase::NSGreen: return approach == Approach::North || approach == Approach::South;
    case Phase::EWGreen: return approach == Approach::East || approach == Approach::West;
    case Phase::PedScramble: return false;
  }
  return false;
}

namespace {

bool is_ns(Approach approach) {
  return approach == Approach::North || approach == Approach::South;
}

void record_departure(SimState& state, UserClass user_class, std::int64_t spawn_tick,
                      std::int64_t wait) {
  if (!state.record_ledger) return;
  state.ledger.push_back({user_class, spawn_tick, state.clock + 1, wait});
}

}  // namespace

ArrivalCounts spawn_arrivals(SimState& state, int dt) {
  ArrivalCounts counts;
  const double spacing = state.config.spacing();
  std::uniform_int_distribution<int> pick_lane(0, kLanesPerApproach - 1);

  for (int a = 0; a < kApproachCount; ++a) {
    const auto approach = static_cast<Approach>(a);
    const double rate = is_ns(approach) ? state.profile.ns_veh_rate : state.profile.ew_veh_rate;
    if (rate <= 0.0) continue;
    std::poisson_distribution<int> arrivals(rate * dt / 3600.0);
    const int n = arrivals(state.rng);
    counts.per_approach[a] += n;
    for (int k = 0; k < n; ++k) {
      LaneState& lane = state.lane(approach, pick_lane(state.rng));
      ++state.vehicle_counts.spawned;
      const bool entry_clear = lane.vehicles.empty() || lane.vehicles.back().position >= spacing;
      if (lane.count() >= lane.capacity || !entry_clear) {
        ++state.vehicle_counts.blocked;
        ++counts.blocked_vehicles;
        continue;
      }
      lane.vehicles.push_back(
          {state.next_id++, state.clock, 0.0, state.config.free_flow_speed, 0});
      ++counts.vehicles;
    }
  }

  const std::array<double, 2> ped_rates = {state.profile.ns_ped_rate, state.profile.ew_ped_rate};
  for (int g = 0; g < 2; ++g) {
    if (ped_rates[g] <= 0.0) continue;
    std::poisson_distribution<int> arrivals(ped_rates[g] * dt / 3600.0);
    const int n = arrivals(state.rng);
    counts.per_crossing[g] += n;
    for (int k = 0; k < n; ++k) {
      state.ped_groups[g].members.push_back({state.next_id++, state.clock, 0});
      ++state.pedestrian_counts.spawned;
      ++counts.pedestrians;
    }
  }
  return counts;
}

void set_phase(SimState& state, Phase target) {
  SignalState& sig = state.signal;
  if (sig.in_yellow) {
    sig.pending_phase = target;
    return;
  }
  if (target == sig.active_phase) return;
  if (state.config.yellow_duration == 0) {
    sig.active_phase = target;
    sig.time_in_phase = 0;
    return;
  }
  sig.in_yellow = true;
  sig.yellow_remaining = state.config.yellow_duration;
  sig.pending_phase = target;
}

TickReport advance_tick(SimState& state) {
  check_invariants(state);
  const SimConfig& cfg = state.config;
  TickReport report;

  // (1) signal bookkeeping; the phase in force for this tick is captured first
  SignalState& sig = state.signal;
  report.phase = sig.active_phase;
  report.yellow = sig.in_yellow;
  if (sig.in_yellow) {
    if (--sig.yellow_remaining == 0) {
      sig.in_yellow = false;
      sig.active_phase = sig.pending_phase;
      sig.time_in_phase = 0;
    }
  } else {
    ++sig.time_in_phase;
  }

  // (2) arrivals
  report.arrivals = spawn_arrivals(state, 1);

  // (3) point-queue movement toward the stop line
  const double spacing = cfg.spacing();
  for (auto& lane : state.lanes) {
    double limit = lane.length;
    for (auto& v : lane.vehicles) {
      const double next = std::max(v.position, std::min(v.position + cfg.free_flow_speed, limit));
      v.speed = next - v.position;
      v.position = next;
      limit = next - spacing;
    }
  }

  // (4) saturation-headway discharge on non-yellow green
  for (int l = 0; l < kLaneCount; ++l) {
    LaneState& lane = state.lanes[l];
    const bool green = !report.yellow && phase_serves(report.phase, lane.approach);
    if (!green) {
      lane.discharge_credit = 0.0;
      continue;
    }
    lane.discharge_credit = std::min(lane.discharge_credit + 1.0, cfg.saturation_headway);
    while (!lane.vehicles.empty() && lane.discharge_credit >= cfg.saturation_headway - 1e-12 &&
           lane.vehicles.front().position >= lane.length - 1e-9) {
      const Vehicle& v = lane.vehicles.front();
      record_departure(state, UserClass::Vehicle, v.spawn_tick, v.accumulated_wait);
      lane.vehicles.pop_front();
      lane.discharge_credit -= cfg.saturation_headway;
      ++state.vehicle_counts.departed;
      ++report.lane_departures[l];
      ++report.vehicle_departures;
    }
  }

  // (5) pedestrians: walk on non-yellow scramble, leave after the crossing time
  if (!report.yellow && report.phase == Phase::PedScramble) {
    for (auto& group : state.ped_groups) {
      for (const auto& p : group.members) {
        state.crossing.push_back({p, state.clock + cfg.crossing_time});
        ++report.pedestrians_started_crossing;
      }
      group.members.clear();
    }
  }
  std::erase_if(state.crossing, [&](const CrossingPedestrian& c) {
    if (c.finish_tick > state.clock + 1) return false;
    record_departure(state, UserClass::Pedestrian, c.pedestrian.spawn_tick,
                     c.pedestrian.accumulated_wait);
    ++state.pedestrian_counts.departed;
    ++report.pedestrian_departures;
    return true;
  });

  // (6) waiting-time accounting
  for (auto& lane : state.lanes) {
    for (auto& v : lane.vehicles) {
      if (v.speed < cfg.queue_speed_threshold) ++v.accumulated_wait;
    }
  }
  for (auto& group : state.ped_groups) {
    for (auto& p : group.members) ++p.accumulated_wait;
  }

  // (7)
  ++state.clock;
  return report;
}

double lane_density(const LaneState& lane) {
  return static_cast<double>(lane.count()) / lane.capacity;
}

double lane_queue(const LaneState& lane, double speed_threshold) {
  const auto stopped = std::count_if(lane.vehicles.begin(), lane.vehicles.end(),
                                     [&](const Vehicle& v) { return v.speed < speed_threshold; });
  return static_cast<double>(stopped) / lane.capacity;
}

void write_ledger_csv(std::ostream& out, const std::vector<DepartureRecord>& ledger) {
  out << "user_class,spawn_tick,depart_tick,accumulated_wait\n";
  for (const auto& r : ledger) {
    out << to_string(r.user_class) << ',' << r.spawn_tick << ',' << r.depart_tick << ','
        << r.accumulated_wait << '\n';
  }
}

}  // namespace fairsignal
