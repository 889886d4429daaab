#include "fairsignal/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

namespace fairsignal {

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::optional<SummaryStats> summarize_samples(std::vector<double> samples) {
  if (samples.empty()) return std::nullopt;
  std::sort(samples.begin(), samples.end());
  SummaryStats s;
  s.n = samples.size();
  s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(s.n);
  s.q1 = quantile_sorted(samples, 0.25);
  s.median = quantile_sorted(samples, 0.5);
  s.q3 = quantile_sorted(samples, 0.75);
  s.max = samples.back();
  return s;
}

std::array<std::int64_t, 3> segment_starts(std::int64_t ticks) {
  return {0, ticks / 3, ticks / 3 + (ticks - ticks / 3) / 2};
}

FlowLevel level_at_tick(std::int64_t tick, std::int64_t ticks) {
  const auto starts = segment_starts(ticks);
  if (tick >= starts[2]) return FlowLevel::Heavy;
  if (tick >= starts[1]) return FlowLevel::Moderate;
  return FlowLevel::Light;
}

namespace {

void check_agent(const AgentPolicy& agent) {
  agent.params.validate();
  if (agent.params.input_dim() != kObservationSize || agent.params.output_dim() != kPhaseCount) {
    throw ShapeError(fmt::format("agent network maps {} -> {}, expected {} -> {}",
                                 agent.params.input_dim(), agent.params.output_dim(),
                                 kObservationSize, kPhaseCount));
  }
  if (!agent.params.all_finite()) throw ShapeError("agent network has non-finite parameters");
}

}  // namespace

EvalReport run_eval(const Controller& controller, std::uint64_t seed, const EvalConfig& config) {
  if (config.ticks < 3) throw ConfigError("evaluation needs at least 3 ticks");
  config.env.validate();
  if (const auto* agent = std::get_if<AgentPolicy>(&controller)) check_agent(*agent);

  auto profile_for = [&](FlowLevel level) {
    if (!config.profile_override) return FlowProfile::named(level);
    FlowProfile p = *config.profile_override;
    p.level = level;
    return p;
  };

  EvalReport report;
  report.seed = seed;
  report.ticks = config.ticks;
  std::visit([&](const auto& c) { report.controller_id = c.id; }, controller);
  if (const auto* agent = std::get_if<AgentPolicy>(&controller)) report.beta = agent->beta;
  for (FlowLevel level : kFlowLevels) report.blocked_vehicles[level] = 0;

  SimState sim = make_sim_state(config.sim, profile_for(FlowLevel::Light), seed);
  const auto starts = segment_starts(config.ticks);
  std::int64_t segment_start = 0;

  for (std::int64_t t = 0; t < config.ticks; ++t) {
    const FlowLevel level = level_at_tick(t, config.ticks);
    if (level != sim.profile.level || t == 0) {
      sim.profile = profile_for(level);
      segment_start = starts[static_cast<std::size_t>(level)];
    }
    if (const auto* agent = std::get_if<AgentPolicy>(&controller)) {
      if (t % config.env.control_interval == 0) {
        const ObservationVector obs = encode_observation(sim, config.env).flatten();
        const Eigen::VectorXd q = forward(agent->params, obs);
        set_phase(sim, static_cast<Phase>(argmax(std::span<const double>(q.data(), kPhaseCount))));
      }
    } else {
      std::get<FixedTimePolicy>(controller).controller.apply(sim, level, t - segment_start);
    }
    const TickReport tick = advance_tick(sim);
    report.blocked_vehicles[level] += tick.arrivals.blocked_vehicles;
  }

  for (const auto& rec : sim.ledger) {
    WaitSample sample{level_at_tick(rec.spawn_tick, config.ticks),
                      static_cast<double>(rec.accumulated_wait)};
    (rec.user_class == UserClass::Vehicle ? report.vehicle_samples : report.pedestrian_samples)
        .push_back(sample);
  }
  report.vehicles_in_network = sim.vehicles_present();
  report.pedestrians_in_network = sim.pedestrians_present();
  report.vehicle_counts = sim.vehicle_counts;
  report.pedestrian_counts = sim.pedestrian_counts;
  return report;
}

double mean_wait(const EvalReport& report, UserClass user_class) {
  const auto& samples = report.samples(user_class);
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : samples) sum += s.wait;
  return sum / static_cast<double>(samples.size());
}

double mean_wait(const EvalReport& report, UserClass user_class, FlowLevel level) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : report.samples(user_class)) {
    if (s.level != level) continue;
    sum += s.wait;
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::vector<SummaryRow> summarize(const EvalReport& report) {
  std::vector<SummaryRow> rows;
  for (FlowLevel level : kFlowLevels) {
    for (UserClass cls : {UserClass::Vehicle, UserClass::Pedestrian}) {
      std::vector<double> waits;
      for (const auto& s : report.samples(cls)) {
        if (s.level == level) waits.push_back(s.wait);
      }
      rows.push_back({report.controller_id, level, cls, summarize_samples(std::move(waits))});
    }
  }
  return rows;
}

void write_samples_csv(std::ostream& out, const EvalReport& report) {
  out << "controller,class,level,wait_s\n";
  for (UserClass cls : {UserClass::Vehicle, UserClass::Pedestrian}) {
    for (const auto& s : report.samples(cls)) {
      out << fmt::format("{},{},{},{}\n", report.controller_id, to_string(cls),
                         to_string(s.level), s.wait);
    }
  }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "controller,level,class,n,mean,q1,median,q3,max\n";
  for (const auto& r : rows) {
    if (r.stats) {
      const auto& s = *r.stats;
      out << fmt::format("{},{},{},{},{},{},{},{},{}\n", r.controller, to_string(r.level),
                         to_string(r.user_class), s.n, s.mean, s.q1, s.median, s.q3, s.max);
    } else {
      out << fmt::format("{},{},{},0,,,,,\n", r.controller, to_string(r.level),
                         to_string(r.user_class));
    }
  }
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["controller"] = report.controller_id;
  j["beta"] = report.beta ? nlohmann::json(*report.beta) : nlohmann::json(nullptr);
  j["seed"] = report.seed;
  j["ticks"] = report.ticks;
  for (UserClass cls : {UserClass::Vehicle, UserClass::Pedestrian}) {
    nlohmann::json c;
    const auto& samples = report.samples(cls);
    c["departed"] = samples.size();
    c["mean_wait"] = samples.empty() ? nlohmann::json(nullptr) : nlohmann::json(mean_wait(report, cls));
    for (FlowLevel level : kFlowLevels) {
      const bool any = std::any_of(samples.begin(), samples.end(),
                                   [&](const WaitSample& s) { return s.level == level; });
      c["mean_wait_by_level"][std::string(to_string(level))] =
          any ? nlohmann::json(mean_wait(report, cls, level)) : nlohmann::json(nullptr);
    }
    const ClassCounters& counts =
        cls == UserClass::Vehicle ? report.vehicle_counts : report.pedestrian_counts;
    c["spawned"] = counts.spawned;
    c["blocked"] = counts.blocked;
    c["in_network_at_end"] =
        cls == UserClass::Vehicle ? report.vehicles_in_network : report.pedestrians_in_network;
    j[std::string(to_string(cls))] = c;
  }
  for (const auto& [level, n] : report.blocked_vehicles) {
    j["blocked_vehicles_by_level"][std::string(to_string(level))] = n;
  }
  return j;
}

bool dominates(const ParetoPoint& a, const ParetoPoint& b) {
  const bool no_worse = a.mean_ped_wait <= b.mean_ped_wait && a.mean_veh_wait <= b.mean_veh_wait;
  const bool better = a.mean_ped_wait < b.mean_ped_wait || a.mean_veh_wait < b.mean_veh_wait;
  return no_worse && better;
}

void flag_nondominated(std::vector<ParetoPoint>& points) {
  for (auto& p : points) {
    p.nondominated = std::none_of(points.begin(), points.end(),
                                  [&](const ParetoPoint& q) { return dominates(q, p); });
  }
}

std::vector<ParetoPoint> pareto_sweep(const std::map<double, MlpParams>& agents,
                                      std::uint64_t seed, const EvalConfig& config) {
  std::vector<ParetoPoint> points;
  for (const auto& [beta, params] : agents) {
    AgentPolicy agent{params, fmt::format("agent_beta_{}", beta), beta};
    const EvalReport report = run_eval(agent, seed, config);
    points.push_back({beta, mean_wait(report, UserClass::Pedestrian),
                      mean_wait(report, UserClass::Vehicle), true});
  }
  flag_nondominated(points);
  return points;
}

void write_pareto_csv(std::ostream& out, const std::vector<ParetoPoint>& points) {
  out << "beta,mean_ped_wait,mean_veh_wait,nondominated\n";
  for (const auto& p : points) {
    out << fmt::format("{},{},{},{}\n", p.beta, p.mean_ped_wait, p.mean_veh_wait,
                       p.nondominated ? 1 : 0);
  }
}

void write_pareto_plot_data(std::ostream& out, const std::vector<ParetoPoint>& points) {
  out << "# mean_ped_wait mean_veh_wait beta nondominated\n";
  for (const auto& p : points) {
    out << fmt::format("{} {} {} {}\n", p.mean_ped_wait, p.mean_veh_wait, p.beta,
                       p.nondominated ? 1 : 0);
  }
}

}  // namespace fairsignal
