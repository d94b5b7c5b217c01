#ifndef METASLICE_HARNESS_HPP_
#define METASLICE_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "metaslice/agent.hpp"
#include "metaslice/config.hpp"

namespace metaslice {

// Metrics over the `log_interval` decision epochs ending at `step`.
struct MetricsRow {
  std::int64_t step = 0;
  double avg_reward = 0.0;
  double accept_prob = 0.0;
  std::vector<double> accept_by_class;
  std::optional<double> epsilon;  // empty for greedy
  std::optional<double> loss;     // empty when no update happened in the window
};

struct ConvergenceRun {
  Scheme scheme = Scheme::kGreedy;
  std::uint64_t seed = 0;
  std::vector<MetricsRow> rows;
  EvalMetrics evaluation;          // epsilon = 0, separate seed stream
  std::optional<QNetwork> policy;  // learned schemes only
  CheckpointMeta meta;
};

// Trains `scheme` for cfg.trainer.total_steps decision epochs (greedy just
// runs), logging a row every cfg.log_interval epochs, then evaluates the
// final policy for cfg.eval_horizon epochs.
ConvergenceRun run_convergence(const ExperimentConfig& cfg, Scheme scheme, std::uint64_t seed);
ConvergenceRun run_convergence(const ExperimentConfig& cfg, const EnvConfig& env, Scheme scheme,
                               std::uint64_t seed);

// Evaluation seed stream, independent of the training stream for `seed`.
std::uint64_t evaluation_seed(std::uint64_t seed);

struct SweepRow {
  std::int64_t capacity_units = 0;
  Scheme scheme = Scheme::kGreedy;
  std::uint64_t seed = 0;
  EvalMetrics metrics;
};

// Every (capacity, scheme, seed) cell is independent; up to `jobs` run at
// once. Rows come back in capacity, scheme, seed order regardless of jobs.
std::vector<SweepRow> run_capacity_sweep(const ExperimentConfig& cfg,
                                         const std::vector<std::int64_t>& capacities,
                                         const std::vector<Scheme>& schemes,
                                         const std::vector<std::uint64_t>& seeds,
                                         unsigned jobs = 1);

// CSV output. Line 1 is a '#' comment naming the schema and precision
// (fixed, 9 decimals); line 2 the column header.
//   convergence: step,avg_reward,accept_prob,accept_c1..accept_cG,epsilon,loss
//   sweep: capacity_units,scheme,seed,avg_reward,accept_prob,accept_c1..accept_cG
std::vector<std::string> convergence_columns(int num_classes);
std::vector<std::string> sweep_columns(int num_classes);
void emit_convergence_csv(std::ostream& os, const std::vector<MetricsRow>& rows, int num_classes);
void emit_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, int num_classes);
// Writes through a temporary file; throws std::runtime_error on I/O failure.
void write_file(const std::filesystem::path& path, const std::string& contents);

struct CsvTable {
  std::string comment;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvTable parse_csv(std::istream& is);

}  // namespace metaslice

#endif  // METASLICE_HARNESS_HPP_
