// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
// The training criteria run full desk-scale DDQN training and take minutes.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "fairsignal/agent.hpp"
#include "fairsignal/baseline.hpp"
#include "fairsignal/checkpoint.hpp"
#include "fairsignal/cli.hpp"
#include "fairsignal/env.hpp"
#include "fairsignal/eval.hpp"
#include "fairsignal/sim_core.hpp"

namespace fs = std::filesystem;
using namespace fairsignal;

namespace {

constexpr std::uint64_t kTrainSeed = 1;
constexpr std::uint64_t kEvalSeed = 1;
constexpr std::int64_t kTrainSteps = 200000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int number, const std::string& name, const Outcome& o) {
  std::cout << fmt::format("{} criterion {:>2} {}: {}", o.pass ? "PASS" : "FAIL", number, name, o.detail)
            << std::endl;
  if (!o.pass) ++failures;
}

void guarded(int number, const std::string& name, const std::function<Outcome()>& body) {
  try {
    report(number, name, body());
  } catch (const std::exception& e) {
    report(number, name, {false, fmt::format("exception: {}", e.what())});
  }
}

Outcome table_exactness() {
  const std::map<FlowLevel, std::array<int, 6>> table = {
      {FlowLevel::Light, {35, 5, 20, 5, 15, 5}},
      {FlowLevel::Moderate, {40, 5, 25, 5, 15, 5}},
      {FlowLevel::Heavy, {45, 5, 30, 5, 15, 5}}};
  const std::map<FlowLevel, int> cycles = {
      {FlowLevel::Light, 85}, {FlowLevel::Moderate, 95}, {FlowLevel::Heavy, 105}};
  int matched = 0;
  bool ok = true;
  for (const auto& [level, durations] : table) {
    const auto got = schedule_for_level(level).durations();
    for (std::size_t i = 0; i < durations.size(); ++i) matched += got[i] == durations[i];
    ok = ok && got == durations && schedule_for_level(level).cycle_length() == cycles.at(level);
  }
  return {ok && matched == 18, fmt::format("{}/18 durations, cycles 85/95/105 {}", matched,
                                           ok ? "match" : "differ")};
}

Outcome stability_truth_table() {
  int fired = 0;
  int wrong = 0;
  for (int code = 0; code < 27; ++code) {
    const std::array<int, 3> h = {code / 9, (code / 3) % 3, code % 3};
    ActionHistory hist(3);
    for (int a : h) hist.push(static_cast<Phase>(a));
    const std::set<int> distinct(h.begin(), h.end());
    const double expected = distinct.size() == 3 ? -20.0 : 0.0;
    const double got = stability_penalty(hist, 20.0, 3);
    fired += got != 0.0;
    wrong += got != expected;
  }
  return {fired == 6 && wrong == 0, fmt::format("fired on {} of 27 histories, {} mismatches", fired, wrong)};
}

Outcome reward_algebra() {
  int fixtures = 0;
  int mismatches = 0;
  double worst_affine = 0.0;
  const std::array<double, 5> betas = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (int f = 0; f < 25; ++f) {
    SimState sim = make_sim_state(SimConfig{}, {FlowLevel::Light, 0, 0, 0, 0}, 1);
    // deterministic waits: f-dependent counts and values
    std::vector<std::int64_t> veh_waits;
    std::vector<std::int64_t> ped_waits;
    for (int i = 0; i < f % 7; ++i) veh_waits.push_back((f * 13 + i * 7) % 50);
    for (int i = 0; i < f % 5; ++i) ped_waits.push_back((f * 11 + i * 5) % 40);
    for (std::size_t i = 0; i < veh_waits.size(); ++i) {
      const auto lane = static_cast<int>(i % kLaneCount);
      LaneState& l = sim.lanes[static_cast<std::size_t>(lane)];
      const double pos = 150.0 - 7.5 * static_cast<double>(l.vehicles.size());
      l.vehicles.push_back({sim.next_id++, 0, pos, 0.0, veh_waits[i]});
      ++sim.vehicle_counts.spawned;
    }
    for (std::size_t i = 0; i < ped_waits.size(); ++i) {
      sim.ped_groups[i % 2].members.push_back({sim.next_id++, 0, ped_waits[i]});
      ++sim.pedestrian_counts.spawned;
    }
    ActionHistory hist(3);
    for (int k = 0; k < 3; ++k) hist.push(static_cast<Phase>((f / (k + 1)) % 3));
    const std::array<int, 3> acts = {(f / 1) % 3, (f / 2) % 3, (f / 3) % 3};
    const bool all_phases = std::set<int>(acts.begin(), acts.end()).size() == 3;

    auto mean = [](const std::vector<std::int64_t>& v) {
      if (v.empty()) return 0.0;
      double s = 0.0;
      for (auto x : v) s += static_cast<double>(x);
      return s / static_cast<double>(v.size());
    };
    const double r_veh = -mean(veh_waits);
    const double r_ped = -mean(ped_waits);
    const double r_stab = all_phases ? -20.0 : 0.0;
    const double beta = betas[static_cast<std::size_t>(f) % betas.size()];
    const double expected = (1.0 - beta) * r_veh + beta * r_ped + r_stab;

    const RewardBreakdown got = compute_reward(sim, hist, beta, 20.0, 3);
    ++fixtures;
    if (std::abs(got.total - expected) > 1e-12 || std::abs(got.r_veh - r_veh) > 1e-12 ||
        std::abs(got.r_ped - r_ped) > 1e-12 || got.r_stab != r_stab) {
      ++mismatches;
    }
    const double r0 = compute_reward(sim, hist, 0.0, 20.0, 3).total;
    const double r1 = compute_reward(sim, hist, 1.0, 20.0, 3).total;
    const double rh = compute_reward(sim, hist, 0.5, 20.0, 3).total;
    worst_affine = std::max(worst_affine, std::abs(rh - 0.5 * (r0 + r1)));
  }
  return {mismatches == 0 && worst_affine <= 1e-12,
          fmt::format("{} fixtures, {} mismatches, max beta-affinity deviation {:.3g}", fixtures,
                      mismatches, worst_affine)};
}

std::vector<double> naive_forward(const MlpParams& p, const ObservationVector& obs) {
  std::vector<double> h(obs.begin(), obs.end());
  for (int l = 0; l < p.layer_count(); ++l) {
    std::vector<double> z(static_cast<std::size_t>(p.weights[l].rows()));
    for (Eigen::Index i = 0; i < p.weights[l].rows(); ++i) {
      double acc = p.biases[l](i);
      for (Eigen::Index j = 0; j < p.weights[l].cols(); ++j) {
        acc += p.weights[l](i, j) * h[static_cast<std::size_t>(j)];
      }
      z[static_cast<std::size_t>(i)] = l + 1 < p.layer_count() ? std::max(0.0, acc) : acc;
    }
    h = std::move(z);
  }
  return h;
}

Outcome gradient_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> width(2, 10);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double h = 1e-6;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    MlpParams net = MlpParams::initialized({29, width(rng), width(rng), 3}, rng);
    for (auto& b : net.biases) {
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.1 * normal(rng);
    }
    std::vector<ReplayTransition> batch(5);
    std::vector<double> targets;
    for (auto& t : batch) {
      for (double& v : t.state) v = unit(rng);
      t.action = static_cast<int>(rng() % 3);
      targets.push_back(normal(rng));
    }
    auto loss = [&](const MlpParams& p) {
      double s = 0.0;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const double e = naive_forward(p, batch[i].state)[static_cast<std::size_t>(batch[i].action)] - targets[i];
        s += e * e;
      }
      return s / static_cast<double>(batch.size());
    };
    LossAndGrads lg = loss_and_grads(net, batch, targets);
    double num = 0.0;
    double den = 0.0;
    for (int l = 0; l < net.layer_count(); ++l) {
      auto probe = [&](auto select) {
        MlpParams plus = net;
        MlpParams minus = net;
        select(plus) += h;
        select(minus) -= h;
        const double fd = (loss(plus) - loss(minus)) / (2.0 * h);
        const double an = select(lg.grads);
        num += (fd - an) * (fd - an);
        den += fd * fd + an * an;
      };
      for (Eigen::Index k = 0; k < net.weights[l].size(); ++k) {
        probe([&](MlpParams& p) -> double& { return p.weights[l].data()[k]; });
      }
      for (Eigen::Index k = 0; k < net.biases[l].size(); ++k) {
        probe([&](MlpParams& p) -> double& { return p.biases[l](k); });
      }
    }
    worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-12));
  }
  return {worst < 1e-4, fmt::format("100 networks, worst relative error {:.3g}", worst)};
}

Outcome ddqn_tabular_oracle() {
  // states s0..s2 are one-hot at inputs 0..2; a linear net is then a Q table
  const double q_online[3][2] = {{0.3, -1.2}, {2.0, 2.5}, {-0.7, -0.1}};
  const double q_target[3][2] = {{1.1, 0.4}, {-3.0, 6.0}, {0.9, 0.2}};
  MlpParams online = MlpParams::zeros({29, 2});
  MlpParams target = MlpParams::zeros({29, 2});
  for (int s = 0; s < 3; ++s) {
    for (int a = 0; a < 2; ++a) {
      online.weights[0](a, s) = q_online[s][a];
      target.weights[0](a, s) = q_target[s][a];
    }
  }
  const double gamma = 0.9;
  std::vector<ReplayTransition> batch;
  std::vector<double> expected;
  for (int s = 0; s < 3; ++s) {
    for (int a = 0; a < 2; ++a) {
      for (int s2 = 0; s2 < 3; ++s2) {
        for (bool done : {false, true}) {
          ReplayTransition t;
          t.state[static_cast<std::size_t>(s)] = 1.0;
          t.action = a;
          t.reward = 0.25 * s - 0.5 * a + 0.1 * s2;
          t.next_state[static_cast<std::size_t>(s2)] = 1.0;
          t.done = done;
          batch.push_back(t);
          const int best = q_online[s2][1] > q_online[s2][0] ? 1 : 0;
          expected.push_back(done ? t.reward : t.reward + gamma * q_target[s2][best]);
        }
      }
    }
  }
  const auto got = double_q_targets(batch, online, target, gamma);
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - expected[i]));
  return {worst <= 1e-10, fmt::format("{} transitions, max deviation {:.3g}", got.size(), worst)};
}

Outcome conservation_and_determinism() {
  int violations = 0;
  int nondeterministic = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const FlowProfile profile = FlowProfile::named(kFlowLevels[seed % 3]);
    auto run = [&](std::vector<TickReport>* trace) {
      SimState sim = make_sim_state(SimConfig{}, profile, seed);
      std::mt19937_64 actions(seed * 7919);
      std::int64_t arrivals = 0;
      std::int64_t blocked = 0;
      std::int64_t departures = 0;
      for (int t = 0; t < 10000; ++t) {
        if (t % 10 == 0) set_phase(sim, static_cast<Phase>(actions() % 3));
        const TickReport r = advance_tick(sim);
        arrivals += r.arrivals.vehicles;
        blocked += r.arrivals.blocked_vehicles;
        departures += r.vehicle_departures;
        if (trace) trace->push_back(r);
      }
      std::int64_t present = 0;
      for (const auto& lane : sim.lanes) present += static_cast<std::int64_t>(lane.vehicles.size());
      const auto& c = sim.vehicle_counts;
      if (c.spawned != present + c.departed + c.blocked || c.departed != departures ||
          c.blocked != blocked || c.spawned != arrivals + blocked ||
          sim.pedestrian_counts.spawned != sim.pedestrians_present() + sim.pedestrian_counts.departed) {
        ++violations;
      }
      return sim;
    };
    std::vector<TickReport> ta;
    std::vector<TickReport> tb;
    const SimState a = run(&ta);
    const SimState b = run(&tb);
    if (!(a == b) || ta != tb) ++nondeterministic;
  }
  return {violations == 0 && nondeterministic == 0,
          fmt::format("50 seeds x 10000 ticks: {} conservation violations in 100 runs, {} non-reproducible runs",
                      violations, nondeterministic)};
}

Outcome arrival_calibration() {
  constexpr int kTicks = 36000;  // 10 h
  std::vector<std::string> misses;
  int checks = 0;
  double worst_z = 0.0;
  auto check = [&](const std::string& what, double rate_per_hour, std::int64_t count) {
    const double expected = rate_per_hour * kTicks / 3600.0;
    const double z = (static_cast<double>(count) - expected) / std::sqrt(expected);
    worst_z = std::max(worst_z, std::abs(z));
    ++checks;
    if (std::abs(z) > 3.0) misses.push_back(fmt::format("{} z={:.2f}", what, z));
  };
  for (FlowLevel level : kFlowLevels) {
    const FlowProfile profile = FlowProfile::named(level);
    SimState sim = make_sim_state(SimConfig{}, profile, 100 + static_cast<std::uint64_t>(level));
    std::array<std::int64_t, 4> per_approach{};
    std::array<std::int64_t, 2> per_crossing{};
    for (int t = 0; t < kTicks; ++t) {
      const ArrivalCounts c = spawn_arrivals(sim, 1);
      for (int a = 0; a < 4; ++a) per_approach[a] += c.per_approach[a];
      for (int g = 0; g < 2; ++g) per_crossing[g] += c.per_crossing[g];
      // keep lanes and crossings empty so every attempt is an arrival
      for (auto& lane : sim.lanes) lane.vehicles.clear();
      for (auto& g : sim.ped_groups) g.members.clear();
    }
    const std::string lv(to_string(level));
    check(lv + " N", profile.ns_veh_rate, per_approach[0]);
    check(lv + " S", profile.ns_veh_rate, per_approach[2]);
    check(lv + " E", profile.ew_veh_rate, per_approach[1]);
    check(lv + " W", profile.ew_veh_rate, per_approach[3]);
    check(lv + " ped NS", profile.ns_ped_rate, per_crossing[0]);
    check(lv + " ped EW", profile.ew_ped_rate, per_crossing[1]);
  }
  std::string detail = fmt::format("{} rate checks over 10 h, worst |z| {:.2f}", checks, worst_z);
  for (const auto& m : misses) detail += "; " + m;
  return {misses.empty(), detail};
}

fs::path work_dir() {
  if (const char* d = std::getenv("FAIRSIGNAL_ACCEPTANCE_DIR"); d != nullptr && *d != '\0') return d;
  return fs::temp_directory_path() / "fairsignal_acceptance";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path train_agent(double beta) {
  const fs::path out = work_dir() / fmt::format("train_beta_{}", beta);
  cli::CommonOptions o;
  o.seed = kTrainSeed;
  o.steps = kTrainSteps;
  o.beta = beta;
  o.out_dir = out.string();
  std::ostringstream log;
  cli::cmd_train(o, log);
  std::cout << "  " << log.str() << std::flush;
  return out;
}

struct TrainedTrio {
  std::map<double, fs::path> dirs;
};

TrainedTrio& trio() {
  static TrainedTrio t = [] {
    TrainedTrio out;
    for (double beta : {0.4, 0.5, 0.6}) out.dirs[beta] = train_agent(beta);
    return out;
  }();
  return t;
}

Outcome beats_baseline() {
  const MlpParams params = load_checkpoint((trio().dirs.at(0.5) / "checkpoint.bin").string());
  const EvalConfig cfg;
  const EvalReport agent = run_eval(AgentPolicy{params, "agent", 0.5}, kEvalSeed, cfg);
  const EvalReport webster = run_eval(FixedTimePolicy{}, kEvalSeed, cfg);
  std::string detail;
  bool ok = true;
  for (UserClass cls : {UserClass::Vehicle, UserClass::Pedestrian}) {
    int wins = 0;
    detail += fmt::format("{}:", to_string(cls));
    for (FlowLevel level : kFlowLevels) {
      const double a = mean_wait(agent, cls, level);
      const double w = mean_wait(webster, cls, level);
      wins += a < w;
      detail += fmt::format(" {} {:.1f}/{:.1f}", to_string(level), a, w);
    }
    const double a = mean_wait(agent, cls);
    const double w = mean_wait(webster, cls);
    detail += fmt::format(" all {:.1f}/{:.1f} ({} of 3 levels won); ", a, w, wins);
    ok = ok && wins >= 2 && a < w;
  }
  return {ok, detail + "agent/webster mean wait s"};
}

Outcome pareto_trend() {
  std::map<double, MlpParams> agents;
  for (const auto& [beta, dir] : trio().dirs) agents[beta] = load_checkpoint((dir / "checkpoint.bin").string());
  const auto points = pareto_sweep(agents, kEvalSeed, EvalConfig{});
  constexpr double kSlack = 0.05;
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    detail += fmt::format("beta {} ped {:.2f} veh {:.2f}{}; ", p.beta, p.mean_ped_wait, p.mean_veh_wait,
                          p.nondominated ? "" : " DOMINATED");
    ok = ok && p.nondominated;
    if (i > 0) {
      const auto& q = points[i - 1];
      const bool ped_ok = p.mean_ped_wait <= q.mean_ped_wait * (1.0 + kSlack);
      const bool veh_ok = p.mean_veh_wait >= q.mean_veh_wait * (1.0 - kSlack);
      if (!ped_ok) detail += fmt::format("ped wait rises {} -> {}; ", q.beta, p.beta);
      if (!veh_ok) detail += fmt::format("veh wait falls {} -> {}; ", q.beta, p.beta);
      ok = ok && ped_ok && veh_ok;
    }
  }
  return {ok, detail + "5% slack"};
}

Outcome reproducible_manifests() {
  // Re-run the beta 0.5 training into the same directory and compare.
  const fs::path dir = trio().dirs.at(0.5);
  const std::string first_train = slurp(dir / "manifest.json");
  train_agent(0.5);
  const std::string second_train = slurp(dir / "manifest.json");

  cli::EvalOptions e;
  e.common.seed = kEvalSeed;
  e.common.out_dir = (work_dir() / "eval_beta_0.5").string();
  e.checkpoint = (dir / "checkpoint.bin").string();
  std::ostringstream log;
  cli::cmd_eval(e, log);
  const std::string first_eval = slurp(fs::path(*e.common.out_dir) / "manifest.json");
  cli::cmd_eval(e, log);
  const std::string second_eval = slurp(fs::path(*e.common.out_dir) / "manifest.json");

  const bool train_same = !first_train.empty() && first_train == second_train;
  const bool eval_same = !first_eval.empty() && first_eval == second_eval;
  return {train_same && eval_same,
          fmt::format("train manifest {}, eval manifest {}", train_same ? "identical" : "differs",
                      eval_same ? "identical" : "differs")};
}

}  // namespace

int main() {
  std::cout << "fairsignal acceptance suite (work dir " << work_dir().string() << ")" << std::endl;
  guarded(1, "schedule table exactness", table_exactness);
  guarded(2, "stability penalty truth table", stability_truth_table);
  guarded(3, "reward algebra", reward_algebra);
  guarded(4, "gradient oracle", gradient_oracle);
  guarded(5, "double-Q target oracle", ddqn_tabular_oracle);
  guarded(6, "simulator conservation and determinism", conservation_and_determinism);
  guarded(7, "arrival calibration", arrival_calibration);
  guarded(8, "agent beats fixed-time baseline", beats_baseline);
  guarded(9, "beta trade-off trend", pareto_trend);
  guarded(10, "end-to-end manifest reproducibility", reproducible_manifests);
  std::cout << fmt::format("{} of 10 criteria passed", 10 - failures) << std::endl;
  return failures == 0 ? 0 : 1;
}
