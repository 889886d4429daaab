#include "fairsignal/baseline.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace fairsignal {

namespace {

constexpr std::array<Phase, 3> kCycleOrder = {Phase::NSGreen, Phase::EWGreen, Phase::PedScramble};

}  // namespace

FixedTimeSchedule FixedTimeSchedule::from_durations(FlowLevel level,
                                                    const std::array<int, 6>& durations) {
  FixedTimeSchedule s;
  s.level = level;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    s.entries.push_back({{kCycleOrder[i / 2], i % 2 == 1}, durations[i]});
  }
  s.validate();
  return s;
}

int FixedTimeSchedule::cycle_length() const {
  return std::accumulate(entries.begin(), entries.end(), 0,
                         [](int acc, const ScheduleEntry& e) { return acc + e.duration; });
}

std::array<int, 6> FixedTimeSchedule::durations() const {
  validate();
  std::array<int, 6> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = entries[i].duration;
  return out;
}

void FixedTimeSchedule::validate() const {
  if (entries.size() != 6) throw ConfigError("a fixed-time schedule has exactly 6 rows");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const ScheduleEntry& e = entries[i];
    if (e.duration <= 0) throw ConfigError("schedule durations must be positive");
    if (e.signal.phase != kCycleOrder[i / 2] || e.signal.yellow != (i % 2 == 1)) {
      throw ConfigError("schedule rows must alternate NS/yellow/EW/yellow/Ped/yellow");
    }
  }
}

FixedTimeSchedule schedule_for_level(FlowLevel level) {
  switch (level) {
    case FlowLevel::Light: return FixedTimeSchedule::from_durations(level, {35, 5, 20, 5, 15, 5});
    case FlowLevel::Moderate:
      return FixedTimeSchedule::from_durations(level, {40, 5, 25, 5, 15, 5});
    case FlowLevel::Heavy: return FixedTimeSchedule::from_durations(level, {45, 5, 30, 5, 15, 5});
  }
  throw ConfigError(fmt::format("unknown flow level {}", static_cast<int>(level)));
}

FixedTimeSchedule schedule_for_level(std::string_view level) {
  return schedule_for_level(flow_level_from_string(level));
}

SignalConfiguration fixed_time_action(const FixedTimeSchedule& schedule, std::int64_t clock) {
  const std::int64_t cycle = schedule.cycle_length();
  std::int64_t offset = ((clock % cycle) + cycle) % cycle;
  for (const auto& entry : schedule.entries) {
    if (offset < entry.duration) return entry.signal;
    offset -= entry.duration;
  }
  return schedule.entries.back().signal;
}

WebsterTiming webster_cycle(std::span<const double> critical_flows, double lost_time,
                            double sat_flow, double fixed_green) {
  if (critical_flows.empty()) throw std::invalid_argument("at least one critical flow needed");
  if (!(sat_flow > 0.0)) throw std::invalid_argument("saturation flow must be positive");
  if (!(lost_time >= 0.0) || !(fixed_green >= 0.0)) {
    throw std::invalid_argument("lost time and fixed green must be non-negative");
  }
  std::vector<double> ratios;
  double y_sum = 0.0;
  for (double q : critical_flows) {
    if (!(q >= 0.0)) throw std::invalid_argument("flows must be non-negative");
    ratios.push_back(q / sat_flow);
    y_sum += q / sat_flow;
  }
  if (y_sum >= 1.0) {
    throw OversaturationError(fmt::format("flow ratio sum {} >= 1: intersection oversaturated", y_sum));
  }
  WebsterTiming t;
  t.flow_ratio = y_sum;
  t.cycle_exact = (1.5 * lost_time + 5.0) / (1.0 - y_sum);
  t.cycle = static_cast<int>(std::lround(t.cycle_exact));
  const double effective = std::max(0.0, t.cycle_exact - lost_time - fixed_green);
  for (double y : ratios) {
    const double share = y_sum > 0.0 ? y / y_sum : 1.0 / static_cast<double>(ratios.size());
    t.greens.push_back(static_cast<int>(std::lround(effective * share)));
  }
  return t;
}

FixedTimeController::FixedTimeController() {
  for (FlowLevel level : kFlowLevels) schedules_.emplace(level, schedule_for_level(level));
}

FixedTimeController::FixedTimeController(std::map<FlowLevel, FixedTimeSchedule> schedules)
    : schedules_(std::move(schedules)) {
  for (FlowLevel level : kFlowLevels) {
    if (!schedules_.contains(level)) {
      throw ConfigError(fmt::format("no fixed-time schedule for level {}", to_string(level)));
    }
    schedules_.at(level).validate();
  }
}

const FixedTimeSchedule& FixedTimeController::schedule(FlowLevel level) const {
  return schedules_.at(level);
}

void FixedTimeController::apply(SimState& sim, FlowLevel level, std::int64_t cycle_clock) const {
  const SignalConfiguration wanted = fixed_time_action(schedule(level), cycle_clock);
  if (!wanted.yellow) {
    set_phase(sim, wanted.phase);
    return;
  }
  // A yellow row hands over to the next main phase; the simulator's own
  // yellow interval realises the row.
  const auto idx = static_cast<std::size_t>(wanted.phase);
  set_phase(sim, kCycleOrder[(idx + 1) % kCycleOrder.size()]);
}

}  // namespace fairsignal
