#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairsignal/env.hpp"

namespace fairsignal {

/// Training produced a non-finite loss or parameter.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Fully connected ReLU network with a linear head. weights[l] maps layer l
/// (dims[l]) to layer l + 1 (dims[l + 1]).
struct MlpParams {
  std::vector<int> layer_dims;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static MlpParams zeros(std::vector<int> dims);
  /// He-uniform weights, zero biases.
  static MlpParams initialized(std::vector<int> dims, std::mt19937_64& rng);

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  int layer_count() const { return static_cast<int>(weights.size()); }
  std::size_t parameter_count() const;
  bool all_finite() const;
  /// Throws ShapeError when the tensors do not chain through layer_dims.
  void validate() const;

  bool operator==(const MlpParams& other) const;
};

Eigen::VectorXd forward(const MlpParams& params, std::span<const double> x);
/// Columns of `inputs` are samples.
Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs);

/// Lowest index wins ties.
int argmax(std::span<const double> values);

/// Uniform random action with probability epsilon, greedy otherwise.
int select_action(std::span<const double> q_values, double epsilon, std::mt19937_64& rng);

struct ReplayTransition {
  ObservationVector state{};
  int action = 0;
  double reward = 0.0;  // already scaled
  ObservationVector next_state{};
  bool done = false;

  bool operator==(const ReplayTransition&) const = default;
};

/// Fixed-capacity FIFO of transitions with uniform sampling.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  void push(const ReplayTransition& transition);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return storage_.size(); }
  /// Index 0 is the oldest retained transition.
  const ReplayTransition& at(std::size_t index) const;
  /// Uniform with replacement.
  void sample(std::size_t count, std::mt19937_64& rng, std::vector<ReplayTransition>& out) const;

 private:
  std::vector<ReplayTransition> storage_;
  std::size_t head_ = 0;  // next write slot
  std::size_t size_ = 0;
};

/// y_i = r_i for terminal transitions, otherwise
/// r_i + gamma * Q_target(s'_i, argmax_a Q_online(s'_i, a)).
std::vector<double> double_q_targets(std::span<const ReplayTransition> batch,
                                     const MlpParams& online, const MlpParams& target,
                                     double gamma);

struct LossAndGrads {
  double loss = 0.0;
  MlpParams grads;  // same shapes as the network
};

/// Mean squared TD error over the batch and its gradient with respect to the
/// online parameters. Targets are constants.
LossAndGrads loss_and_grads(const MlpParams& online, std::span<const ReplayTransition> batch,
                            std::span<const double> targets);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamOptimizer {
 public:
  AdamOptimizer(const MlpParams& shape, AdamConfig config);
  void step(MlpParams& params, const MlpParams& grads);
  std::int64_t steps() const { return t_; }

 private:
  AdamConfig config_;
  MlpParams m_;
  MlpParams v_;
  std::int64_t t_ = 0;
};

/// Linear decay from start to end over decay_steps, constant afterwards.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  std::int64_t decay_steps = 100000;

  double at(std::int64_t step) const;
};

struct TrainConfig {
  double gamma = 0.99;
  double learning_rate = 1e-3;
  int batch_size = 64;
  EpsilonSchedule epsilon;
  std::int64_t target_sync_period = 1000;
  std::int64_t total_steps = 2000000;
  std::int64_t flow_change_steps = 2000;
  std::size_t replay_capacity = 100000;
  std::int64_t warmup_steps = 1000;
  std::int64_t episode_length = 1000;
  std::vector<int> hidden_layers = {64, 64};

  void validate() const;
  std::vector<int> layer_dims() const;
};

/// Online/target network pair with replay and optimizer state. The target
/// network only changes through sync_target().
class DdqnLearner {
 public:
  DdqnLearner(const TrainConfig& config, std::mt19937_64& rng);

  int act(const ObservationVector& state, double epsilon, std::mt19937_64& rng) const;
  void remember(const ReplayTransition& transition) { memory_.push(transition); }
  bool ready() const;
  /// One minibatch update; returns the TD loss before the step.
  double learn(std::mt19937_64& rng);
  void sync_target() { target_ = online_; }

  const MlpParams& online() const { return online_; }
  const MlpParams& target() const { return target_; }
  const ReplayMemory& memory() const { return memory_; }

 private:
  TrainConfig config_;
  MlpParams online_;
  MlpParams target_;
  AdamOptimizer optimizer_;
  ReplayMemory memory_;
  std::vector<ReplayTransition> batch_;
};

struct TrainLogRow {
  std::int64_t step = 0;
  double mean_reward = 0.0;  // unscaled per-step total, averaged over the episode
  double loss = 0.0;         // mean over updates in the episode
  double epsilon = 0.0;
  FlowLevel flow_level = FlowLevel::Light;
};

struct TrainResult {
  MlpParams params;
  std::vector<TrainLogRow> log;
};

using EnvFactory = std::function<TrafficEnv()>;

/// Single-threaded DDQN loop; deterministic for a given seed. The flow profile
/// rotates Light -> Moderate -> Heavy every flow_change_steps agent steps. On
/// divergence the last finite parameters are written to `divergence_checkpoint`
/// (when non-empty) before DivergenceError propagates.
TrainResult train(const EnvFactory& make_env, const TrainConfig& config, std::uint64_t seed,
                  const std::string& divergence_checkpoint = {});

void write_train_log_csv(std::ostream& out, const std::vector<TrainLogRow>& log);

}  // namespace fairsignal
