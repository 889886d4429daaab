#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fairsignal {

inline constexpr int kApproachCount = 4;
inline constexpr int kLanesPerApproach = 3;
inline constexpr int kLaneCount = kApproachCount * kLanesPerApproach;
inline constexpr int kPhaseCount = 3;

enum class Approach : std::uint8_t { North, East, South, West };
enum class Phase : std::uint8_t { NSGreen, EWGreen, PedScramble };
enum class FlowLevel : std::uint8_t { Light, Moderate, Heavy };
enum class UserClass : std::uint8_t { Vehicle, Pedestrian };
enum class CrossingAxis : std::uint8_t { NS, EW };

std::string_view to_string(Phase phase);
std::string_view to_string(FlowLevel level);
std::string_view to_string(UserClass user_class);
FlowLevel flow_level_from_string(std::string_view name);

inline constexpr std::array<FlowLevel, 3> kFlowLevels = {FlowLevel::Light, FlowLevel::Moderate,
                                                         FlowLevel::Heavy};

/// Raised for out-of-range scenario parameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a SimState no longer satisfies its structural invariants.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Arrival rates per hour. N and S approaches each receive `ns_veh_rate`,
/// E and W approaches each receive `ew_veh_rate`.
struct FlowProfile {
  FlowLevel level = FlowLevel::Light;
  double ns_veh_rate = 0.0;
  double ew_veh_rate = 0.0;
  double ns_ped_rate = 0.0;
  double ew_ped_rate = 0.0;

  static FlowProfile named(FlowLevel level);
  void validate() const;

  bool operator==(const FlowProfile&) const = default;
};

struct SimConfig {
  double lane_length = 150.0;           // m
  double vehicle_length = 5.0;          // m
  double min_gap = 2.5;                 // m
  double free_flow_speed = 13.9;        // m/s
  double saturation_headway = 2.0;      // s per vehicle per lane
  double queue_speed_threshold = 0.1;   // m/s
  int yellow_duration = 5;              // s
  int crossing_time = 12;               // s

  double spacing() const { return vehicle_length + min_gap; }
  int lane_capacity() const;
  void validate() const;

  bool operator==(const SimConfig&) const = default;
};

struct Vehicle {
  std::uint64_t id = 0;
  std::int64_t spawn_tick = 0;
  double position = 0.0;  // m from lane entry, stop line at lane length
  double speed = 0.0;
  std::int64_t accumulated_wait = 0;  // s

  bool operator==(const Vehicle&) const = default;
};

struct LaneState {
  Approach approach = Approach::North;
  int lane_index = 0;
  double length = 0.0;
  int capacity = 0;
  std::deque<Vehicle> vehicles;  // front (closest to stop line) first
  double discharge_credit = 0.0;

  int count() const { return static_cast<int>(vehicles.size()); }
  bool operator==(const LaneState&) const = default;
};

struct Pedestrian {
  std::uint64_t id = 0;
  std::int64_t spawn_tick = 0;
  std::int64_t accumulated_wait = 0;

  bool operator==(const Pedestrian&) const = default;
};

struct PedestrianGroup {
  CrossingAxis axis = CrossingAxis::NS;
  std::vector<Pedestrian> members;  // waiting at the curb

  bool operator==(const PedestrianGroup&) const = default;
};

/// A pedestrian that has left the curb and leaves the network at `finish_tick`.
struct CrossingPedestrian {
  Pedestrian pedestrian;
  std::int64_t finish_tick = 0;

  bool operator==(const CrossingPedestrian&) const = default;
};

struct SignalState {
  Phase active_phase = Phase::NSGreen;
  bool in_yellow = false;
  int yellow_remaining = 0;
  int time_in_phase = 0;
  Phase pending_phase = Phase::NSGreen;  // meaningful only while in_yellow

  bool operator==(const SignalState&) const = default;
};

struct DepartureRecord {
  UserClass user_class = UserClass::Vehicle;
  std::int64_t spawn_tick = 0;
  std::int64_t depart_tick = 0;
  std::int64_t accumulated_wait = 0;

  bool operator==(const DepartureRecord&) const = default;
};

struct ClassCounters {
  std::int64_t spawned = 0;
  std::int64_t departed = 0;
  std::int64_t blocked = 0;

  bool operator==(const ClassCounters&) const = default;
};

struct SimState {
  SimConfig config;
  FlowProfile profile;
  std::int64_t clock = 0;
  std::array<LaneState, kLaneCount> lanes;  // (N,E,S,W) x (0,1,2)
  std::array<PedestrianGroup, 2> ped_groups;
  std::vector<CrossingPedestrian> crossing;
  SignalState signal;
  std::mt19937_64 rng;
  std::uint64_t next_id = 1;
  ClassCounters vehicle_counts;
  ClassCounters pedestrian_counts;
  std::vector<DepartureRecord> ledger;
  bool record_ledger = true;

  bool operator==(const SimState&) const = default;

  LaneState& lane(Approach approach, int index) {
    return lanes[static_cast<int>(approach) * kLanesPerApproach + index];
  }
  const LaneState& lane(Approach approach, int index) const {
    return lanes[static_cast<int>(approach) * kLanesPerApproach + index];
  }

  std::int64_t vehicles_present() const;
  std::int64_t pedestrians_waiting() const;
  std::int64_t pedestrians_present() const;
};

struct ArrivalCounts {
  int vehicles = 0;  // admitted to a lane
  int blocked_vehicles = 0;
  int pedestrians = 0;
  std::array<int, kApproachCount> per_approach{};  // generated, admitted or blocked
  std::array<int, 2> per_crossing{};              // NS, EW

  bool operator==(const ArrivalCounts&) const = default;
};

/// Per-tick diagnostics produced by advance_tick.
struct TickReport {
  Phase phase = Phase::NSGreen;  // phase whose signal heads applied this tick
  bool yellow = false;
  ArrivalCounts arrivals;
  std::array<int, kLaneCount> lane_departures{};
  int vehicle_departures = 0;
  int pedestrians_started_crossing = 0;
  int pedestrian_departures = 0;

  bool operator==(const TickReport&) const = default;
};

/// Builds an empty intersection at clock 0 with NSGreen active.
SimState make_sim_state(const SimConfig& config, const FlowProfile& profile, std::uint64_t seed);

/// Throws InvariantViolation describing the first broken invariant.
void check_invariants(const SimState& state);

bool phase_serves(Phase phase, Approach approach);

ArrivalCounts spawn_arrivals(SimState& state, int dt = 1);

TickReport advance_tick(SimState& state);

void set_phase(SimState& state, Phase target);

double lane_density(const LaneState& lane);
double lane_queue(const LaneState& lane, double speed_threshold);

/// CSV with header user_class,spawn_tick,depart_tick,accumulated_wait.
void write_ledger_csv(std::ostream& out, const std::vector<DepartureRecord>& ledger);

}  // namespace fairsignal
