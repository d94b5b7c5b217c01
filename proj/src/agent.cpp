#include "metaslice/agent.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace metaslice {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be > 0");
  store_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Experience e) {
  if (store_.size() < capacity_) {
    store_.push_back(std::move(e));
  } else {
    store_[next_] = std::move(e);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_slots(std::size_t batch, Rng& rng) const {
  if (batch > store_.size()) throw std::invalid_argument("minibatch larger than buffer");
  const auto picks = rng.sample_distinct(store_.size(), batch);
  return {picks.begin(), picks.end()};
}

double EpsilonSchedule::at(std::int64_t step) const {
  if (decay_steps <= 0 || step >= decay_steps) return end;
  const double frac = static_cast<double>(step) / static_cast<double>(decay_steps);
  return std::max(end, start - (start - end) * frac);
}

void validate(const TrainerConfig& c) {
  if (!(c.discount > 0 && c.discount < 1)) throw std::invalid_argument("discount must be in (0,1)");
  if (!(c.epsilon.end <= c.epsilon.start && c.epsilon.start <= 1 && c.epsilon.end >= 0)) {
    throw std::invalid_argument("need 0 <= epsilon_end <= epsilon_start <= 1");
  }
  if (!(c.learning_rate > 0)) throw std::invalid_argument("learning rate must be > 0");
  if (c.target_sync <= 0) throw std::invalid_argument("target sync period must be > 0");
  if (c.batch_size == 0) throw std::invalid_argument("batch size must be > 0");
  if (c.replay_capacity < c.batch_size) {
    throw std::invalid_argument("replay capacity must hold at least one batch");
  }
  if (c.total_steps <= 0) throw std::invalid_argument("total steps must be > 0");
  if (c.clip_norm < 0) throw std::invalid_argument("clip norm must be >= 0");
}

StateEncoder::StateEncoder(ResourceVector capacity, int num_classes)
    : capacity_(std::move(capacity)), num_classes_(num_classes) {
  for (std::size_t p = 0; p < capacity_.size(); ++p) {
    if (capacity_[p] <= 0) throw std::invalid_argument("capacity must be > 0");
  }
  if (num_classes_ <= 0) throw std::invalid_argument("encoder needs at least one class");
}

StateEncoder::StateEncoder(const EnvConfig& env)
    : StateEncoder(env.capacity, env.num_classes()) {}

void StateEncoder::encode_into(const SystemState& s, Eigen::Ref<Eigen::VectorXd> out) const {
  const auto p_count = static_cast<Eigen::Index>(capacity_.size());
  for (Eigen::Index p = 0; p < p_count; ++p) {
    const double cap = static_cast<double>(capacity_[p]);
    out(p) = std::min(1.0, static_cast<double>(s.available[p]) / cap);
    out(p_count + p) = std::min(1.0, static_cast<double>(s.requested[p]) / cap);
  }
  for (int g = 0; g < num_classes_; ++g) out(2 * p_count + g) = (s.class_id == g + 1) ? 1.0 : 0.0;
}

Eigen::VectorXd StateEncoder::encode(const SystemState& s) const {
  Eigen::VectorXd out(width());
  encode_into(s, out);
  return out;
}

Eigen::MatrixXd StateEncoder::encode_batch(std::span<const SystemState* const> states) const {
  Eigen::MatrixXd out(width(), static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) {
    encode_into(*states[i], out.col(static_cast<Eigen::Index>(i)));
  }
  return out;
}

int argmax_action(const Eigen::Ref<const Eigen::VectorXd>& q) {
  int best = 0;
  for (Eigen::Index a = 1; a < q.size(); ++a) {
    if (q(a) > q(best)) best = static_cast<int>(a);
  }
  return best;
}

int act(const QNetwork& net, const Eigen::VectorXd& encoding, double epsilon, Rng& rng) {
  if (rng.uniform() < epsilon) {
    return static_cast<int>(rng.below(static_cast<std::uint64_t>(net.shape().actions)));
  }
  return argmax_action(net.forward(std::span<const double>(encoding.data(), encoding.size())));
}

std::vector<double> double_q_targets(std::span<const Experience* const> batch,
                                     const QNetwork& online, const QNetwork& target,
                                     double discount, const StateEncoder& encoder) {
  std::vector<const SystemState*> next;
  next.reserve(batch.size());
  for (const Experience* e : batch) next.push_back(&e->next_state);
  const Eigen::MatrixXd x = encoder.encode_batch(next);
  const Eigen::MatrixXd q_online = online.forward_batch(x);
  const Eigen::MatrixXd q_target = target.forward_batch(x);
  std::vector<double> z(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    const int a = argmax_action(q_online.col(col));
    z[i] = batch[i]->reward + discount * q_target(a, col);
  }
  return z;
}

int greedy_policy(const SystemState& state, const ResourceVector& net_demand) {
  return net_demand.fits_within(state.available) ? 1 : 0;
}

namespace {

EnvConfig checked(EnvConfig c) {
  validate(c);
  return c;
}

TrainerConfig with_input_width(TrainerConfig c, const EnvConfig& env) {
  validate(c);
  c.network.inputs = 2 * env.resource_types() + env.num_classes();
  return c;
}

}  // namespace

Trainer::Trainer(EnvConfig env_config, TrainerConfig config, std::uint64_t seed)
    : config_(with_input_width(std::move(config), checked(env_config))),
      seed_(seed),
      rng_(seed),
      env_(env_config),
      encoder_(env_config),
      online_(QNetwork::initialized(config_.network, rng_)),
      target_(config_.network),
      buffer_(config_.replay_capacity) {
  online_.clone_into(target_);
  grads_ = online_.zero_gradients();
  env_.reset(rng_);
}

TrainDiagnostics Trainer::train_step() {
  TrainDiagnostics d;
  d.epsilon = config_.epsilon.at(steps_done_);
  const SystemState state = env_.state();
  d.action = act(online_, encoder_.encode(state), d.epsilon, rng_);
  d.transition = env_.step(d.action, rng_);
  d.reward = d.transition.reward;
  buffer_.push({state, d.action, d.reward, d.transition.next_state});

  if (buffer_.size() >= std::max(config_.warmup, config_.batch_size)) {
    d.loss = update();
    d.updated = true;
  }
  d.step = ++steps_done_;
  if (steps_done_ % config_.target_sync == 0) {
    online_.clone_into(target_);
    d.synced = true;
  }
  return d;
}

double Trainer::update() {
  const auto slots = buffer_.sample_slots(config_.batch_size, rng_);
  std::vector<const Experience*> batch;
  std::vector<const SystemState*> states;
  std::vector<int> actions;
  batch.reserve(slots.size());
  for (auto s : slots) {
    const Experience& e = buffer_.at(s);
    batch.push_back(&e);
    states.push_back(&e.state);
    actions.push_back(e.action);
  }
  const std::vector<double> targets =
      double_q_targets(batch, online_, target_, config_.discount, encoder_);
  const double loss =
      online_.backward_batch(encoder_.encode_batch(states), actions, targets, grads_);
  online_.sgd_step(grads_, config_.learning_rate, config_.clip_norm);
  return loss;
}

int GreedyPolicy::decide(const AdmissionEnv& env) {
  return greedy_policy(env.state(), env.pending_net_demand());
}

QPolicy::QPolicy(QNetwork net, StateEncoder encoder)
    : net_(std::move(net)), encoder_(std::move(encoder)) {
  if (net_.shape().inputs != encoder_.width()) {
    throw std::invalid_argument("policy input width " + std::to_string(net_.shape().inputs) +
                                " does not match state encoding width " +
                                std::to_string(encoder_.width()));
  }
}

int QPolicy::decide(const AdmissionEnv& env) {
  const Eigen::VectorXd x = encoder_.encode(env.state());
  return argmax_action(net_.forward(std::span<const double>(x.data(), x.size())));
}

double EvalMetrics::average_reward() const {
  return epochs ? total_reward / static_cast<double>(epochs) : 0.0;
}

double EvalMetrics::acceptance() const {
  return arrived ? static_cast<double>(accepted) / static_cast<double>(arrived) : 0.0;
}

double EvalMetrics::acceptance(int class_id) const {
  const auto g = static_cast<std::size_t>(class_id - 1);
  if (g >= arrived_by_class.size() || arrived_by_class[g] == 0) return 0.0;
  return static_cast<double>(accepted_by_class[g]) / static_cast<double>(arrived_by_class[g]);
}

EvalMetrics evaluate(Policy& policy, AdmissionEnv& env, std::int64_t horizon, Rng& rng) {
  if (horizon < 1) throw std::invalid_argument("evaluation horizon must be >= 1");
  EvalMetrics m;
  const auto classes = static_cast<std::size_t>(env.config().num_classes());
  m.arrived_by_class.assign(classes, 0);
  m.accepted_by_class.assign(classes, 0);
  env.reset(rng);
  for (std::int64_t t = 0; t < horizon; ++t) {
    const int action = policy.decide(env);
    const StepResult r = env.step(action, rng);
    ++m.epochs;
    ++m.arrived;
    ++m.arrived_by_class[r.class_id - 1];
    if (r.accepted) {
      ++m.accepted;
      ++m.accepted_by_class[r.class_id - 1];
    }
    m.total_reward += r.reward;
  }
  return m;
}

void save_checkpoint(std::ostream& os, const QNetwork& net, const CheckpointMeta& meta) {
  net.save(os);
  char eps[32];
  auto res = std::to_chars(eps, eps + sizeof eps, meta.epsilon);
  os << "[checkpoint]\n"
     << "step = " << meta.step << '\n'
     << "epsilon = " << std::string(eps, res.ptr) << '\n'
     << "seed = " << meta.seed << '\n'
     << "config_digest = " << meta.config_digest << '\n';
}

std::pair<QNetwork, CheckpointMeta> load_checkpoint(std::istream& is) {
  QNetwork net = QNetwork::load(is);
  CheckpointMeta meta;
  std::string line;
  bool in_block = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line == "[checkpoint]") {
      in_block = true;
      continue;
    }
    if (!in_block) throw PolicyFormatError("unexpected line after layers: " + line);
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw PolicyFormatError("bad checkpoint line: " + line);
    const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
    try {
      if (key == "step") {
        meta.step = std::stoll(value);
      } else if (key == "epsilon") {
        meta.epsilon = std::stod(value);
      } else if (key == "seed") {
        meta.seed = std::stoull(value);
      } else if (key == "config_digest") {
        meta.config_digest = value;
      } else {
        throw PolicyFormatError("unknown checkpoint key: " + key);
      }
    } catch (const std::logic_error&) {
      throw PolicyFormatError("bad checkpoint value for " + key);
    }
  }
  return {std::move(net), meta};
}

}  // namespace metaslice
