#ifndef METASLICE_ENV_HPP_
#define METASLICE_ENV_HPP_

#include <cstdint>
#include <optional>
#include <vector>

#include "metaslice/analyzer.hpp"
#include "metaslice/core.hpp"
#include "metaslice/rng.hpp"

namespace metaslice {

struct SystemEvent {
  enum class Kind { kArrival, kDeparture, kTrivial };
  Kind kind = Kind::kTrivial;
  int class_id = 0;     // 1..G for arrivals and departures
  SliceId slice_id = 0;  // departures only, filled in by the environment

  bool operator==(const SystemEvent&) const = default;
};

// Observation at a decision epoch: (n_u, n_m, g).
struct SystemState {
  ResourceVector available;
  ResourceVector requested;
  int class_id = 1;

  bool operator==(const SystemState&) const = default;
};

// Live slice count per class, x_g. Index 0 is class 1.
using OccupancyVector = std::vector<std::int64_t>;

struct RewardConfig {
  std::vector<double> weights;  // w_p >= 0
};

struct EnvConfig {
  std::vector<ClassParams> classes;
  int function_types = 9;       // K
  int functions_per_slice = 3;  // F
  int sharing_cap = 5;          // N_L
  ResourceVector capacity{12, 12, 12};
  ResourceVector per_function_demand{1, 1, 1};
  RewardConfig reward{{0.1, 0.1, 0.1}};
  bool sharing_enabled = true;
  // Materialize the self-loop events of the uniformized chain. Off by default:
  // non-trivial events are then drawn with probabilities renormalized by z_x,
  // which leaves their ratios unchanged.
  bool materialize_trivial = false;

  int num_classes() const { return static_cast<int>(classes.size()); }
  int resource_types() const { return static_cast<int>(capacity.size()); }
};

// Throws std::invalid_argument on any inconsistent parameter.
void validate(const EnvConfig& config);

// Upper bound on concurrent slices: floor(instances * N_L / F), where
// instances = min_p floor(N^p / d_p) is how many function instances fit.
std::int64_t max_concurrent_slices(const EnvConfig& config);

// z = max over feasible x of sum_g (lambda_g + x_g mu_g). With sum_g x_g <=
// x_max the maximum puts all of x_max on the fastest-departing class.
double uniformization_rate(const std::vector<ClassParams>& classes, std::int64_t x_max);

// z_x = sum_g (lambda_g + x_g mu_g).
double occupied_rate(const std::vector<ClassParams>& classes, const OccupancyVector& x);

// One uniformized draw: arrival g w.p. lambda_g/z, departure g w.p.
// x_g mu_g/z, trivial otherwise. Consumes exactly one uniform. The returned
// departure carries no slice id.
SystemEvent sample_event(const std::vector<ClassParams>& classes, const OccupancyVector& x,
                         double z, Rng& rng);

// Same walk with total mass z_x, so trivial events never occur.
SystemEvent sample_nontrivial_event(const std::vector<ClassParams>& classes,
                                    const OccupancyVector& x, Rng& rng);

SystemState build_state(const SystemPool& pool, const MetaSliceSpec& spec);

// r_g - sum_p w_p n_o^p for an admitted arrival, 0 otherwise.
double reward(const SystemState& state, int action, const AdmissionOutcome* outcome,
              const std::vector<ClassParams>& classes, const RewardConfig& config);

struct StepResult {
  SystemState next_state;
  double reward = 0.0;
  int class_id = 0;      // class of the request that was decided
  bool accepted = false;  // actually admitted
  bool coerced = false;   // accept requested but infeasible
  ResourceVector net_allocation;
  int departures = 0;
  int trivial_events = 0;
};

// Uniformized semi-Markov admission environment. Decision epochs are request
// arrivals; between epochs departures are applied and trivial events
// skipped. All randomness comes from the caller's Rng, drawn in this order
// per event: one uniform to pick the event, then either one bounded integer
// (which live slice departs) or F bounded integers (the arriving request's
// function set).
class AdmissionEnv {
 public:
  explicit AdmissionEnv(EnvConfig config);

  const EnvConfig& config() const { return config_; }
  std::int64_t x_max() const { return x_max_; }
  double z() const { return z_; }

  // Empties the system and advances to the first arrival.
  const SystemState& reset(Rng& rng);

  // action 1 = accept, 0 = reject. Infeasible accepts are turned into
  // rejects with zero reward.
  StepResult step(int action, Rng& rng);

  const SystemState& state() const { return state_; }
  const MetaSliceSpec& pending_request() const { return pending_; }
  // What admitting the pending request would newly allocate.
  ResourceVector pending_net_demand() const { return analyzer_.net_demand(pending_); }

  const SystemPool& pool() const { return pool_; }
  const MetaSliceAnalyzer& analyzer() const { return analyzer_; }
  const OccupancyVector& occupancy() const { return occupancy_; }
  std::int64_t live_slices() const;

  // Expected elapsed time in hours (sum of mean sojourns 1/z or 1/z_x), and
  // the share of it spent at each total live-slice count.
  double elapsed_hours() const { return elapsed_hours_; }
  const std::vector<double>& time_at_occupancy() const { return time_at_occupancy_; }

 private:
  SystemEvent next_event(Rng& rng);
  void advance_to_arrival(Rng& rng, StepResult* result);
  MetaSliceSpec sample_request(int class_id, Rng& rng) const;

  EnvConfig config_;
  std::int64_t x_max_;
  double z_;
  SystemPool pool_;
  MetaSliceAnalyzer analyzer_;
  OccupancyVector occupancy_;
  std::vector<std::vector<SliceId>> live_by_class_;
  MetaSliceSpec pending_;
  SystemState state_;
  double elapsed_hours_ = 0.0;
  std::vector<double> time_at_occupancy_;
  bool positioned_ = false;
};

}  // namespace metaslice

#endif  // METASLICE_ENV_HPP_
