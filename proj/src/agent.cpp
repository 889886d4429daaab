#include "fairsignal/agent.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "fairsignal/checkpoint.hpp"

namespace fairsignal {

MlpParams MlpParams::zeros(std::vector<int> dims) {
  if (dims.size() < 2) throw ShapeError("an MLP needs at least input and output dims");
  for (int d : dims) {
    if (d < 1) throw ShapeError("layer dims must be positive");
  }
  MlpParams p;
  p.layer_dims = std::move(dims);
  for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
    p.weights.push_back(Eigen::MatrixXd::Zero(p.layer_dims[l + 1], p.layer_dims[l]));
    p.biases.push_back(Eigen::VectorXd::Zero(p.layer_dims[l + 1]));
  }
  return p;
}

MlpParams MlpParams::initialized(std::vector<int> dims, std::mt19937_64& rng) {
  MlpParams p = zeros(std::move(dims));
  for (auto& w : p.weights) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
    }
  }
  return p;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  }
  return n;
}

bool MlpParams::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return true;
}

void MlpParams::validate() const {
  if (layer_dims.size() < 2) throw ShapeError("an MLP needs at least two layer dims");
  if (weights.size() != layer_dims.size() - 1 || biases.size() != weights.size()) {
    throw ShapeError("layer count does not match layer dims");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != layer_dims[l + 1] || weights[l].cols() != layer_dims[l] ||
        biases[l].size() != layer_dims[l + 1]) {
      throw ShapeError(fmt::format("layer {} tensors do not match dims {}x{}", l,
                                   layer_dims[l + 1], layer_dims[l]));
    }
  }
}

bool MlpParams::operator==(const MlpParams& other) const {
  if (layer_dims != other.layer_dims || weights.size() != other.weights.size()) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l] != other.weights[l] || biases[l] != other.biases[l]) return false;
  }
  return true;
}

Eigen::VectorXd forward(const MlpParams& params, std::span<const double> x) {
  if (static_cast<int>(x.size()) != params.input_dim()) {
    throw ShapeError(fmt::format("input has {} entries, network expects {}", x.size(),
                                 params.input_dim()));
  }
  Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  const int last = params.layer_count() - 1;
  for (int l = 0; l <= last; ++l) {
    h = params.weights[l] * h + params.biases[l];
    if (l < last) h = h.cwiseMax(0.0);
  }
  return h;
}

Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != params.input_dim()) throw ShapeError("batch input rows != input dim");
  Eigen::MatrixXd h = inputs;
  const int last = params.layer_count() - 1;
  for (int l = 0; l <= last; ++l) {
    Eigen::MatrixXd z = params.weights[l] * h;
    z.colwise() += params.biases[l];
    h = (l < last) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return h;
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

int select_action(std::span<const double> q_values, double epsilon, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (epsilon > 0.0 && coin(rng) < epsilon) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(q_values.size()) - 1);
    return pick(rng);
  }
  return argmax(q_values);
}

ReplayMemory::ReplayMemory(std::size_t capacity) : storage_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayMemory::push(const ReplayTransition& transition) {
  storage_[head_] = transition;
  head_ = (head_ + 1) % storage_.size();
  size_ = std::min(size_ + 1, storage_.size());
}

const ReplayTransition& ReplayMemory::at(std::size_t index) const {
  if (index >= size_) throw std::out_of_range("replay index out of range");
  const std::size_t oldest = (head_ + storage_.size() - size_) % storage_.size();
  return storage_[(oldest + index) % storage_.size()];
}

void ReplayMemory::sample(std::size_t count, std::mt19937_64& rng,
                          std::vector<ReplayTransition>& out) const {
  if (size_ == 0) throw std::logic_error("cannot sample an empty replay memory");
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  out.resize(count);
  for (auto& t : out) t = at(pick(rng));
}

namespace {

Eigen::MatrixXd stack_columns(std::span<const ReplayTransition> batch, bool next) {
  Eigen::MatrixXd m(kObservationSize, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& obs = next ? batch[i].next_state : batch[i].state;
    m.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(obs.data(), kObservationSize);
  }
  return m;
}

}  // namespace

std::vector<double> double_q_targets(std::span<const ReplayTransition> batch,
                                     const MlpParams& online, const MlpParams& target,
                                     double gamma) {
  if (batch.empty()) throw std::invalid_argument("double_q_targets needs a non-empty batch");
  const Eigen::MatrixXd next = stack_columns(batch, true);
  const Eigen::MatrixXd q_online = forward_batch(online, next);
  const Eigen::MatrixXd q_target = forward_batch(target, next);

  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].done) {
      y[i] = batch[i].reward;
      continue;
    }
    const auto col = static_cast<Eigen::Index>(i);
    const int best = argmax(std::span<const double>(q_online.col(col).data(),
                                                    static_cast<std::size_t>(q_online.rows())));
    y[i] = batch[i].reward + gamma * q_target(best, col);
  }
  return y;
}

LossAndGrads loss_and_grads(const MlpParams& online, std::span<const ReplayTransition> batch,
                            std::span<const double> targets) {
  if (batch.empty() || targets.size() != batch.size()) {
    throw std::invalid_argument("batch and targets must be non-empty and of equal size");
  }
  const auto n = static_cast<Eigen::Index>(batch.size());
  const int layers = online.layer_count();

  // activations[0] is the input; activations[l + 1] the output of layer l
  std::vector<Eigen::MatrixXd> activations;
  activations.reserve(static_cast<std::size_t>(layers) + 1);
  activations.push_back(stack_columns(batch, false));
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = online.weights[l] * activations.back();
    z.colwise() += online.biases[l];
    if (l < layers - 1) z = z.cwiseMax(0.0);
    activations.push_back(std::move(z));
  }

  const Eigen::MatrixXd& q = activations.back();
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(q.rows(), n);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = batch[static_cast<std::size_t>(i)].action;
    if (a < 0 || a >= q.rows()) throw ShapeError("transition action out of range");
    const double err = q(a, i) - targets[static_cast<std::size_t>(i)];
    loss += err * err;
    delta(a, i) = 2.0 * err / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);
  if (!std::isfinite(loss)) throw DivergenceError("non-finite TD loss");

  LossAndGrads out{loss, MlpParams::zeros(online.layer_dims)};
  for (int l = layers - 1; l >= 0; --l) {
    out.grads.weights[l] = delta * activations[l].transpose();
    out.grads.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = online.weights[l].transpose() * delta;
      delta = back.cwiseProduct((activations[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return out;
}

AdamOptimizer::AdamOptimizer(const MlpParams& shape, AdamConfig config)
    : config_(config), m_(MlpParams::zeros(shape.layer_dims)), v_(MlpParams::zeros(shape.layer_dims)) {}

void AdamOptimizer::step(MlpParams& params, const MlpParams& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= config_.learning_rate * (m.array() / c1) /
                     ((v.array() / c2).sqrt() + config_.epsilon);
  };
  for (int l = 0; l < params.layer_count(); ++l) {
    update(params.weights[l], m_.weights[l], v_.weights[l], grads.weights[l]);
    update(params.biases[l], m_.biases[l], v_.biases[l], grads.biases[l]);
  }
}

double EpsilonSchedule::at(std::int64_t step) const {
  if (decay_steps <= 0 || step >= decay_steps) return end;
  const double frac = static_cast<double>(std::max<std::int64_t>(step, 0)) /
                      static_cast<double>(decay_steps);
  return start + (end - start) * frac;
}

void TrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(epsilon.start >= 0.0 && epsilon.start <= 1.0 && epsilon.end >= 0.0 &&
        epsilon.end <= epsilon.start)) {
    throw ConfigError("epsilon schedule must satisfy 0 <= end <= start <= 1");
  }
  if (epsilon.decay_steps < 1) throw ConfigError("epsilon decay steps must be positive");
  if (target_sync_period < 1) throw ConfigError("target_sync_period must be positive");
  if (total_steps < 0) throw ConfigError("total_steps must be non-negative");
  if (flow_change_steps < 1) throw ConfigError("flow_change_steps must be positive");
  if (replay_capacity < 1) throw ConfigError("replay_capacity must be positive");
  if (warmup_steps < 0) throw ConfigError("warmup_steps must be non-negative");
  if (episode_length < 1) throw ConfigError("episode_length must be positive");
  for (int h : hidden_layers) {
    if (h < 1) throw ConfigError("hidden layer widths must be positive");
  }
}

std::vector<int> TrainConfig::layer_dims() const {
  std::vector<int> dims{kObservationSize};
  dims.insert(dims.end(), hidden_layers.begin(), hidden_layers.end());
  dims.push_back(kPhaseCount);
  return dims;
}

DdqnLearner::DdqnLearner(const TrainConfig& config, std::mt19937_64& rng)
    : config_(config),
      online_(MlpParams::initialized(config.layer_dims(), rng)),
      target_(online_),
      optimizer_(online_, AdamConfig{config.learning_rate}),
      memory_(config.replay_capacity) {
  config_.validate();
}

int DdqnLearner::act(const ObservationVector& state, double epsilon, std::mt19937_64& rng) const {
  const Eigen::VectorXd q = forward(online_, state);
  return select_action(std::span<const double>(q.data(), static_cast<std::size_t>(q.size())),
                       epsilon, rng);
}

bool DdqnLearner::ready() const {
  return static_cast<std::int64_t>(memory_.size()) >= std::max<std::int64_t>(config_.warmup_steps, 1);
}

double DdqnLearner::learn(std::mt19937_64& rng) {
  memory_.sample(static_cast<std::size_t>(config_.batch_size), rng, batch_);
  const auto targets = double_q_targets(batch_, online_, target_, config_.gamma);
  const LossAndGrads lg = loss_and_grads(online_, batch_, targets);
  MlpParams next = online_;
  optimizer_.step(next, lg.grads);
  if (!next.all_finite()) throw DivergenceError("parameters became non-finite");
  online_ = std::move(next);
  return lg.loss;
}

TrainResult train(const EnvFactory& make_env, const TrainConfig& config, std::uint64_t seed,
                  const std::string& divergence_checkpoint) {
  config.validate();
  std::mt19937_64 rng(seed);
  DdqnLearner learner(config, rng);
  TrainResult result;
  if (config.total_steps == 0) {
    result.params = learner.online();
    return result;
  }

  TrafficEnv env = make_env();
  const double reward_scale = env.config().reward_scale;
  env.set_profile(FlowProfile::named(kFlowLevels[0]));
  Observation obs = env.reset(rng());

  double reward_sum = 0.0;
  double loss_sum = 0.0;
  std::int64_t loss_count = 0;
  std::int64_t episode_steps = 0;

  for (std::int64_t step = 0; step < config.total_steps; ++step) {
    if (step % config.flow_change_steps == 0) {
      const auto cycle = static_cast<std::size_t>((step / config.flow_change_steps) % 3);
      env.set_profile(FlowProfile::named(kFlowLevels[cycle]));
    }
    const double eps = config.epsilon.at(step);
    const ObservationVector state = obs.flatten();
    const int action = learner.act(state, eps, rng);

    const StepResult res = env.step(static_cast<Phase>(action));
    const bool done = (step + 1) % config.episode_length == 0;
    learner.remember({state, action, res.reward.total * reward_scale, res.observation.flatten(), done});
    reward_sum += res.reward.total;
    ++episode_steps;

    if (learner.ready()) {
      try {
        loss_sum += learner.learn(rng);
        ++loss_count;
      } catch (const DivergenceError& e) {
        if (!divergence_checkpoint.empty()) save_checkpoint(divergence_checkpoint, learner.online());
        throw DivergenceError(fmt::format("training diverged at step {}: {}", step, e.what()));
      }
    }

    if ((step + 1) % config.target_sync_period == 0) learner.sync_target();

    if (done || step + 1 == config.total_steps) {
      result.log.push_back({step + 1, reward_sum / static_cast<double>(episode_steps),
                            loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0,
                            eps, env.profile().level});
      reward_sum = 0.0;
      loss_sum = 0.0;
      loss_count = 0;
      episode_steps = 0;
    }
    obs = done ? env.reset(rng()) : res.observation;
  }
  result.params = learner.online();
  return result;
}

void write_train_log_csv(std::ostream& out, const std::vector<TrainLogRow>& log) {
  out << "step,mean_reward,loss,epsilon,flow_level\n";
  for (const auto& row : log) {
    out << fmt::format("{},{},{},{},{}\n", row.step, row.mean_reward, row.loss, row.epsilon,
                       to_string(row.flow_level));
  }
}

}  // namespace fairsignal
