#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairsignal/agent.hpp"
#include "fairsignal/baseline.hpp"
#include "fairsignal/env.hpp"
#include "fairsignal/sim_core.hpp"

namespace fairsignal {

struct AgentPolicy {
  MlpParams params;
  std::string id = "agent";
  std::optional<double> beta;
};

struct FixedTimePolicy {
  FixedTimeController controller;
  std::string id = "webster";
};

using Controller = std::variant<AgentPolicy, FixedTimePolicy>;

struct EvalConfig {
  std::int64_t ticks = 20000;
  SimConfig sim;
  EnvConfig env;
  /// Replaces the rotating named profiles for every segment when set.
  std::optional<FlowProfile> profile_override;
};

struct WaitSample {
  FlowLevel level = FlowLevel::Light;  // regime in force when the user arrived
  double wait = 0.0;                   // s

  bool operator==(const WaitSample&) const = default;
};

struct SummaryStats {
  std::size_t n = 0;
  double mean = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;

  bool operator==(const SummaryStats&) const = default;
};

/// Linear-interpolation quantiles (inclusive). Empty input yields nullopt.
std::optional<SummaryStats> summarize_samples(std::vector<double> samples);
double quantile_sorted(const std::vector<double>& sorted, double p);

struct EvalReport {
  std::string controller_id;
  std::optional<double> beta;
  std::uint64_t seed = 0;
  std::int64_t ticks = 0;
  std::vector<WaitSample> vehicle_samples;
  std::vector<WaitSample> pedestrian_samples;
  std::map<FlowLevel, std::int64_t> blocked_vehicles;
  std::int64_t vehicles_in_network = 0;
  std::int64_t pedestrians_in_network = 0;
  ClassCounters vehicle_counts;
  ClassCounters pedestrian_counts;

  const std::vector<WaitSample>& samples(UserClass user_class) const {
    return user_class == UserClass::Vehicle ? vehicle_samples : pedestrian_samples;
  }
  bool operator==(const EvalReport&) const = default;
};

/// First tick of each of the three equal contiguous rotation segments.
std::array<std::int64_t, 3> segment_starts(std::int64_t ticks);
FlowLevel level_at_tick(std::int64_t tick, std::int64_t ticks);

EvalReport run_eval(const Controller& controller, std::uint64_t seed, const EvalConfig& config);

double mean_wait(const EvalReport& report, UserClass user_class);
double mean_wait(const EvalReport& report, UserClass user_class, FlowLevel level);

struct SummaryRow {
  std::string controller;
  FlowLevel level = FlowLevel::Light;
  UserClass user_class = UserClass::Vehicle;
  std::optional<SummaryStats> stats;
};

/// One row per (flow level, user class).
std::vector<SummaryRow> summarize(const EvalReport& report);

void write_samples_csv(std::ostream& out, const EvalReport& report);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
nlohmann::json report_to_json(const EvalReport& report);

struct ParetoPoint {
  double beta = 0.0;
  double mean_ped_wait = 0.0;
  double mean_veh_wait = 0.0;
  bool nondominated = true;

  bool operator==(const ParetoPoint&) const = default;
};

/// True when `a` is no worse on both means and strictly better on one.
bool dominates(const ParetoPoint& a, const ParetoPoint& b);
void flag_nondominated(std::vector<ParetoPoint>& points);

/// One evaluation per agent, sorted by beta, with dominance flags.
std::vector<ParetoPoint> pareto_sweep(const std::map<double, MlpParams>& agents,
                                      std::uint64_t seed, const EvalConfig& config);

void write_pareto_csv(std::ostream& out, const std::vector<ParetoPoint>& points);
/// Whitespace-separated columns for gnuplot.
void write_pareto_plot_data(std::ostream& out, const std::vector<ParetoPoint>& points);

}  // namespace fairsignal
