#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "fairsignal/sim_core.hpp"

namespace fairsignal {

/// Signal heads in force: the phase holding right of way, and whether it is
/// showing yellow.
struct SignalConfiguration {
  Phase phase = Phase::NSGreen;
  bool yellow = false;

  bool operator==(const SignalConfiguration&) const = default;
};

struct ScheduleEntry {
  SignalConfiguration signal;
  int duration = 0;  // s

  bool operator==(const ScheduleEntry&) const = default;
};

/// Fixed-time cycle: NS green, NS yellow, EW green, EW yellow, ped green, ped yellow.
struct FixedTimeSchedule {
  FlowLevel level = FlowLevel::Light;
  std::vector<ScheduleEntry> entries;

  /// Durations in row order {NS, yellow, EW, yellow, Ped, yellow}.
  static FixedTimeSchedule from_durations(FlowLevel level, const std::array<int, 6>& durations);

  int cycle_length() const;
  std::array<int, 6> durations() const;
  void validate() const;

  bool operator==(const FixedTimeSchedule&) const = default;
};

FixedTimeSchedule schedule_for_level(FlowLevel level);
FixedTimeSchedule schedule_for_level(std::string_view level);

/// Configuration at (clock mod cycle length).
SignalConfiguration fixed_time_action(const FixedTimeSchedule& schedule, std::int64_t clock);

class OversaturationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct WebsterTiming {
  double cycle_exact = 0.0;
  int cycle = 0;            // rounded
  std::vector<int> greens;  // rounded, one per critical flow
  double flow_ratio = 0.0;  // Y
};

/// Webster's delay-minimising cycle C = (1.5 L + 5) / (1 - Y), Y the sum of
/// critical flow ratios. The green left after lost time and any exclusive
/// `fixed_green` (e.g. a pedestrian phase) is split in proportion to the
/// flow ratios. Flows and saturation flow in veh/h per lane.
WebsterTiming webster_cycle(std::span<const double> critical_flows, double lost_time,
                            double sat_flow, double fixed_green = 0.0);

/// Drives a SimState through the schedule matching each flow level.
class FixedTimeController {
 public:
  FixedTimeController();
  explicit FixedTimeController(std::map<FlowLevel, FixedTimeSchedule> schedules);

  const FixedTimeSchedule& schedule(FlowLevel level) const;

  /// `cycle_clock` counts seconds since this level's schedule took over.
  void apply(SimState& sim, FlowLevel level, std::int64_t cycle_clock) const;

 private:
  std::map<FlowLevel, FixedTimeSchedule> schedules_;
};

}  // namespace fairsignal
