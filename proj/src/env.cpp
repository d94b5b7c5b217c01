#include "metaslice/env.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace metaslice {

namespace {

// Walks arrivals 1..G, then departures 1..G, over cumulative mass `u`.
SystemEvent walk(const std::vector<ClassParams>& classes, const OccupancyVector& x,
                 double u) {
  for (const auto& c : classes) {
    if (u < c.arrival_rate) return {SystemEvent::Kind::kArrival, c.class_id, 0};
    u -= c.arrival_rate;
  }
  for (std::size_t g = 0; g < classes.size(); ++g) {
    const double rate = static_cast<double>(x[g]) * classes[g].departure_rate;
    if (u < rate) return {SystemEvent::Kind::kDeparture, classes[g].class_id, 0};
    u -= rate;
  }
  return {SystemEvent::Kind::kTrivial, 0, 0};
}

const ClassParams& class_of(const std::vector<ClassParams>& classes, int class_id) {
  for (const auto& c : classes) {
    if (c.class_id == class_id) return c;
  }
  throw std::invalid_argument("unknown class id " + std::to_string(class_id));
}

}  // namespace

void validate(const EnvConfig& c) {
  validate_classes(c.classes);
  if (c.function_types <= 0) throw std::invalid_argument("K must be > 0");
  if (c.functions_per_slice <= 0) throw std::invalid_argument("F must be > 0");
  if (c.functions_per_slice > c.function_types) throw std::invalid_argument("F must be <= K");
  if (c.sharing_cap <= 0) throw std::invalid_argument("N_L must be > 0");
  if (c.capacity.size() == 0) throw std::invalid_argument("P must be > 0");
  for (std::size_t p = 0; p < c.capacity.size(); ++p) {
    if (c.capacity[p] <= 0) throw std::invalid_argument("capacities must be > 0");
  }
  if (c.per_function_demand.size() != c.capacity.size()) {
    throw std::invalid_argument("per-function demand must have P entries");
  }
  if (c.per_function_demand.is_zero()) {
    throw std::invalid_argument("per-function demand must be nonzero in some type");
  }
  if (c.reward.weights.size() != c.capacity.size()) {
    throw std::invalid_argument("reward weights must have P entries");
  }
  for (double w : c.reward.weights) {
    if (!(w >= 0)) throw std::invalid_argument("reward weights must be >= 0");
  }
}

std::int64_t max_concurrent_slices(const EnvConfig& c) {
  std::int64_t instances = std::numeric_limits<std::int64_t>::max();
  for (std::size_t p = 0; p < c.capacity.size(); ++p) {
    if (c.per_function_demand[p] == 0) continue;
    instances = std::min(instances, c.capacity[p] / c.per_function_demand[p]);
  }
  return instances * c.sharing_cap / c.functions_per_slice;
}

double uniformization_rate(const std::vector<ClassParams>& classes, std::int64_t x_max) {
  if (x_max < 0) throw std::invalid_argument("X_max must be >= 0");
  double arrivals = 0.0, fastest = 0.0;
  for (const auto& c : classes) {
    arrivals += c.arrival_rate;
    fastest = std::max(fastest, c.departure_rate);
  }
  return arrivals + static_cast<double>(x_max) * fastest;
}

double occupied_rate(const std::vector<ClassParams>& classes, const OccupancyVector& x) {
  double z = 0.0;
  for (std::size_t g = 0; g < classes.size(); ++g) {
    z += classes[g].arrival_rate + static_cast<double>(x[g]) * classes[g].departure_rate;
  }
  return z;
}

SystemEvent sample_event(const std::vector<ClassParams>& classes, const OccupancyVector& x,
                         double z, Rng& rng) {
  return walk(classes, x, rng.uniform() * z);
}

SystemEvent sample_nontrivial_event(const std::vector<ClassParams>& classes,
                                    const OccupancyVector& x, Rng& rng) {
  const double zx = occupied_rate(classes, x);
  SystemEvent e = walk(classes, x, rng.uniform() * zx);
  // Rounding at the top of the range can fall through the walk.
  if (e.kind == SystemEvent::Kind::kTrivial) {
    for (std::size_t g = classes.size(); g-- > 0;) {
      if (x[g] > 0) return {SystemEvent::Kind::kDeparture, classes[g].class_id, 0};
    }
    return {SystemEvent::Kind::kArrival, classes.back().class_id, 0};
  }
  return e;
}

SystemState build_state(const SystemPool& pool, const MetaSliceSpec& spec) {
  return {pool.available(), gross_demand(spec), spec.class_id};
}

double reward(const SystemState& state, int action, const AdmissionOutcome* outcome,
              const std::vector<ClassParams>& classes, const RewardConfig& config) {
  if (action != 1 || outcome == nullptr) return 0.0;
  double r = class_of(classes, state.class_id).income;
  const ResourceVector& n_o = outcome->net_allocation;
  for (std::size_t p = 0; p < n_o.size(); ++p) {
    r -= config.weights.at(p) * static_cast<double>(n_o[p]);
  }
  return r;
}

AdmissionEnv::AdmissionEnv(EnvConfig config)
    : config_((validate(config), std::move(config))),
      x_max_(max_concurrent_slices(config_)),
      z_(uniformization_rate(config_.classes, x_max_)),
      pool_(config_.capacity),
      analyzer_(AnalyzerConfig{config_.function_types, config_.sharing_cap,
                               config_.sharing_enabled}),
      occupancy_(config_.classes.size(), 0),
      live_by_class_(config_.classes.size()) {}

std::int64_t AdmissionEnv::live_slices() const {
  std::int64_t n = 0;
  for (auto x : occupancy_) n += x;
  return n;
}

const SystemState& AdmissionEnv::reset(Rng& rng) {
  pool_ = SystemPool(config_.capacity);
  analyzer_ = MetaSliceAnalyzer(AnalyzerConfig{config_.function_types, config_.sharing_cap,
                                               config_.sharing_enabled});
  std::fill(occupancy_.begin(), occupancy_.end(), 0);
  for (auto& v : live_by_class_) v.clear();
  elapsed_hours_ = 0.0;
  time_at_occupancy_.clear();
  advance_to_arrival(rng, nullptr);
  positioned_ = true;
  return state_;
}

SystemEvent AdmissionEnv::next_event(Rng& rng) {
  const double zx = occupied_rate(config_.classes, occupancy_);
  const double sojourn = config_.materialize_trivial ? 1.0 / z_ : 1.0 / zx;
  const auto n = static_cast<std::size_t>(live_slices());
  if (time_at_occupancy_.size() <= n) time_at_occupancy_.resize(n + 1, 0.0);
  time_at_occupancy_[n] += sojourn;
  elapsed_hours_ += sojourn;

  SystemEvent e = config_.materialize_trivial
                      ? sample_event(config_.classes, occupancy_, z_, rng)
                      : sample_nontrivial_event(config_.classes, occupancy_, rng);
  if (e.kind == SystemEvent::Kind::kDeparture) {
    auto& live = live_by_class_[e.class_id - 1];
    const auto idx = static_cast<std::size_t>(rng.below(live.size()));
    e.slice_id = live[idx];
    live[idx] = live.back();
    live.pop_back();
  }
  return e;
}

void AdmissionEnv::advance_to_arrival(Rng& rng, StepResult* result) {
  for (;;) {
    const SystemEvent e = next_event(rng);
    switch (e.kind) {
      case SystemEvent::Kind::kArrival:
        pending_ = sample_request(e.class_id, rng);
        state_ = build_state(pool_, pending_);
        return;
      case SystemEvent::Kind::kDeparture:
        analyzer_.depart(e.slice_id, pool_);
        --occupancy_[e.class_id - 1];
        if (result) ++result->departures;
        break;
      case SystemEvent::Kind::kTrivial:
        if (result) ++result->trivial_events;
        break;
    }
  }
}

MetaSliceSpec AdmissionEnv::sample_request(int class_id, Rng& rng) const {
  const auto picks = rng.sample_distinct(static_cast<std::uint64_t>(config_.function_types),
                                         static_cast<std::uint64_t>(config_.functions_per_slice));
  std::vector<int> types;
  types.reserve(picks.size());
  for (auto p : picks) types.push_back(static_cast<int>(p) + 1);
  return {class_id,
          FunctionVector::from_types(static_cast<std::size_t>(config_.function_types), types),
          config_.per_function_demand};
}

StepResult AdmissionEnv::step(int action, Rng& rng) {
  if (!positioned_) throw std::logic_error("step() before reset()");
  if (action != 0 && action != 1) throw std::invalid_argument("action must be 0 or 1");

  StepResult result;
  result.class_id = pending_.class_id;
  result.net_allocation = ResourceVector(config_.capacity.size());
  if (action == 1) {
    if (auto outcome = analyzer_.admit(pending_, pool_)) {
      result.accepted = true;
      result.net_allocation = outcome->net_allocation;
      result.reward = reward(state_, 1, &*outcome, config_.classes, config_.reward);
      ++occupancy_[pending_.class_id - 1];
      live_by_class_[pending_.class_id - 1].push_back(outcome->slice_id);
    } else {
      result.coerced = true;
    }
  }
  advance_to_arrival(rng, &result);
  result.next_state = state_;
  return result;
}

}  // namespace metaslice
