#ifndef METASLICE_AGENT_HPP_
#define METASLICE_AGENT_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "metaslice/env.hpp"
#include "metaslice/neural.hpp"
#include "metaslice/rng.hpp"

namespace metaslice {

struct Experience {
  SystemState state;
  int action = 0;
  double reward = 0.0;
  SystemState next_state;
};

// Bounded circular store; the oldest entry is overwritten once full.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Experience e);
  std::size_t size() const { return store_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Experience& at(std::size_t slot) const { return store_.at(slot); }

  // Slot indices of a uniform minibatch, distinct within the batch.
  std::vector<std::size_t> sample_slots(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Experience> store_;
};

// Linear decay from `start` to `end` over `decay_steps`, then flat.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.001;
  std::int64_t decay_steps = 187500;

  double at(std::int64_t step) const;
};

struct TrainerConfig {
  EpsilonSchedule epsilon;
  double discount = 0.9;         // alpha
  double learning_rate = 1e-3;
  std::int64_t target_sync = 10000;  // C
  std::size_t batch_size = 32;
  std::size_t replay_capacity = 100000;
  std::size_t warmup = 1000;
  std::int64_t total_steps = 375000;  // T
  double clip_norm = 0.0;  // 0 disables gradient clipping
  NetworkShape network;    // `inputs` is overwritten from the environment
};

void validate(const TrainerConfig& config);

// (n_u / N, n_m / N, one-hot class): width 2P + G, every entry in [0, 1].
class StateEncoder {
 public:
  StateEncoder(ResourceVector capacity, int num_classes);
  explicit StateEncoder(const EnvConfig& env);

  int width() const { return 2 * static_cast<int>(capacity_.size()) + num_classes_; }
  Eigen::VectorXd encode(const SystemState& s) const;
  void encode_into(const SystemState& s, Eigen::Ref<Eigen::VectorXd> out) const;
  Eigen::MatrixXd encode_batch(std::span<const SystemState* const> states) const;

 private:
  ResourceVector capacity_;
  int num_classes_;
};

// argmax over Q with ties going to reject (0).
int argmax_action(const Eigen::Ref<const Eigen::VectorXd>& q);

// Epsilon-greedy. Always draws one uniform; a second bounded draw picks the
// random action when exploring.
int act(const QNetwork& net, const Eigen::VectorXd& encoding, double epsilon, Rng& rng);

// Z = r + alpha * Qbar(s', argmax_a Q(s', a)): online net selects, target
// net evaluates.
std::vector<double> double_q_targets(std::span<const Experience* const> batch,
                                     const QNetwork& online, const QNetwork& target,
                                     double discount, const StateEncoder& encoder);

// Accept iff the request's net demand fits the available resources.
int greedy_policy(const SystemState& state, const ResourceVector& net_demand);

struct TrainDiagnostics {
  std::int64_t step = 0;  // 1-based index of the completed step
  int action = 0;
  double epsilon = 0.0;
  double reward = 0.0;
  bool updated = false;
  double loss = 0.0;  // meaningful only when updated
  bool synced = false;
  StepResult transition;
};

// One learner: online and target nets, replay buffer, environment and a
// single Rng. Draw order: network initialization, environment reset, then
// per step act, environment step, minibatch sample.
class Trainer {
 public:
  Trainer(EnvConfig env_config, TrainerConfig config, std::uint64_t seed);

  TrainDiagnostics train_step();

  std::int64_t steps_done() const { return steps_done_; }
  double current_epsilon() const { return config_.epsilon.at(steps_done_); }
  const TrainerConfig& config() const { return config_; }
  const QNetwork& online() const { return online_; }
  const QNetwork& target() const { return target_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const AdmissionEnv& env() const { return env_; }
  const StateEncoder& encoder() const { return encoder_; }
  std::uint64_t seed() const { return seed_; }

 private:
  double update();

  TrainerConfig config_;
  std::uint64_t seed_;
  Rng rng_;
  AdmissionEnv env_;
  StateEncoder encoder_;
  QNetwork online_;
  QNetwork target_;
  ReplayBuffer buffer_;
  GradientSet grads_;
  std::int64_t steps_done_ = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual int decide(const AdmissionEnv& env) = 0;
};

class GreedyPolicy : public Policy {
 public:
  int decide(const AdmissionEnv& env) override;
};

class RejectAllPolicy : public Policy {
 public:
  int decide(const AdmissionEnv&) override { return 0; }
};

// Exploitation only (epsilon = 0).
class QPolicy : public Policy {
 public:
  QPolicy(QNetwork net, StateEncoder encoder);
  int decide(const AdmissionEnv& env) override;

 private:
  QNetwork net_;
  StateEncoder encoder_;
};

struct EvalMetrics {
  std::int64_t epochs = 0;
  double total_reward = 0.0;
  std::int64_t arrived = 0;
  std::int64_t accepted = 0;
  std::vector<std::int64_t> arrived_by_class;
  std::vector<std::int64_t> accepted_by_class;

  double average_reward() const;
  double acceptance() const;
  double acceptance(int class_id) const;
};

// Resets `env` and runs `horizon` decision epochs.
EvalMetrics evaluate(Policy& policy, AdmissionEnv& env, std::int64_t horizon, Rng& rng);

struct CheckpointMeta {
  std::int64_t step = 0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  std::string config_digest;
};

// Policy file followed by a [checkpoint] block of key = value lines.
void save_checkpoint(std::ostream& os, const QNetwork& net, const CheckpointMeta& meta);
std::pair<QNetwork, CheckpointMeta> load_checkpoint(std::istream& is);

}  // namespace metaslice

#endif  // METASLICE_AGENT_HPP_
