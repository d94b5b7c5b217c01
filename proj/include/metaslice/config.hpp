#ifndef METASLICE_CONFIG_HPP_
#define METASLICE_CONFIG_HPP_

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "metaslice/agent.hpp"
#include "metaslice/env.hpp"

namespace metaslice {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Scheme { kImsacMa, kImsac, kGreedy };

std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& name);  // throws ConfigError

struct ExperimentConfig {
  EnvConfig env;  // sharing_enabled is set per scheme by env_for()
  TrainerConfig trainer;
  Scheme scheme = Scheme::kImsacMa;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "results";
  std::int64_t eval_horizon = 10000;
  std::int64_t log_interval = 1000;
  std::vector<std::int64_t> sweep_capacities{10, 15, 20, 25, 30};
};

// Grammar (INI, parsed with Boost.PropertyTree; ';' or '#' start comments):
//
//   [system]      resource_types, function_types, functions_per_slice,
//                 sharing_cap, capacity (P ints), per_function_demand (P ints),
//                 reward_weights (P reals)
//   [class.<g>]   income, arrival_rate, departure_rate; one section per class,
//                 g = 1..G
//   [trainer]     total_steps, epsilon_start, epsilon_end,
//                 epsilon_decay_fraction, discount, learning_rate, target_sync,
//                 batch_size, replay_capacity, warmup, clip_norm, trunk (ints),
//                 stream_hidden
//   [experiment]  scheme (imsac_ma | imsac | greedy), seeds (ints), output_dir,
//                 eval_horizon, log_interval, capacities (ints)
//
// Lists are whitespace separated. Every section except [system] and the class
// sections is optional, as is every key outside them; unknown sections or
// keys are errors.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);

// Default settings: three classes, 480-unit pool (12 function-units per type).
ExperimentConfig default_config();

// Throws ConfigError on any out-of-range parameter.
void validate(const ExperimentConfig& cfg);

// Environment for a scheme: sharing only for imsac_ma.
EnvConfig env_for(const ExperimentConfig& cfg, Scheme scheme);
// Same with every resource capacity set to `units`.
EnvConfig env_for(const ExperimentConfig& cfg, Scheme scheme, std::int64_t units);

// Canonical rendering of every setting that affects results (not seeds or
// output_dir), and its FNV-1a 64-bit digest in hex.
std::string canonical_text(const ExperimentConfig& cfg);
std::string config_digest(const ExperimentConfig& cfg);

}  // namespace metaslice

#endif  // METASLICE_CONFIG_HPP_
