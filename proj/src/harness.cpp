#include "metaslice/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace metaslice {

namespace {

constexpr const char* kConvergenceComment =
    "# metaslice convergence v1; reals fixed-point with 9 decimals; each row covers "
    "the log_interval decision epochs ending at step";
constexpr const char* kSweepComment =
    "# metaslice sweep v1; reals fixed-point with 9 decimals; metrics from an epsilon=0 "
    "evaluation after training";

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  return buf;
}

void join_line(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os << ',';
    os << cells[i];
  }
  os << '\n';
}

// Accumulates one logging window.
class Window {
 public:
  explicit Window(int classes) : arrived_(classes, 0), accepted_(classes, 0) {}

  void add(const StepResult& r) {
    ++epochs_;
    reward_ += r.reward;
    ++arrived_[r.class_id - 1];
    if (r.accepted) ++accepted_[r.class_id - 1];
  }
  void add_loss(double loss) {
    loss_ += loss;
    ++updates_;
  }

  MetricsRow flush(std::int64_t step, std::optional<double> epsilon) {
    MetricsRow row;
    row.step = step;
    row.avg_reward = epochs_ ? reward_ / static_cast<double>(epochs_) : 0.0;
    std::int64_t arrived = 0, accepted = 0;
    for (std::size_t g = 0; g < arrived_.size(); ++g) {
      arrived += arrived_[g];
      accepted += accepted_[g];
      row.accept_by_class.push_back(
          arrived_[g] ? static_cast<double>(accepted_[g]) / static_cast<double>(arrived_[g])
                      : 0.0);
    }
    row.accept_prob = arrived ? static_cast<double>(accepted) / static_cast<double>(arrived) : 0.0;
    row.epsilon = epsilon;
    if (updates_) row.loss = loss_ / static_cast<double>(updates_);
    *this = Window(static_cast<int>(arrived_.size()));
    return row;
  }

  std::int64_t epochs() const { return epochs_; }

 private:
  std::int64_t epochs_ = 0;
  double reward_ = 0.0;
  double loss_ = 0.0;
  std::int64_t updates_ = 0;
  std::vector<std::int64_t> arrived_;
  std::vector<std::int64_t> accepted_;
};

}  // namespace

std::uint64_t evaluation_seed(std::uint64_t seed) { return Rng::derive(seed, 1); }

ConvergenceRun run_convergence(const ExperimentConfig& cfg, Scheme scheme, std::uint64_t seed) {
  return run_convergence(cfg, env_for(cfg, scheme), scheme, seed);
}

ConvergenceRun run_convergence(const ExperimentConfig& cfg, const EnvConfig& env_config,
                               Scheme scheme, std::uint64_t seed) {
  ConvergenceRun run;
  run.scheme = scheme;
  run.seed = seed;
  const std::int64_t total = cfg.trainer.total_steps;
  const int classes = env_config.num_classes();
  Window window(classes);

  std::unique_ptr<Policy> final_policy;
  if (scheme == Scheme::kGreedy) {
    AdmissionEnv env(env_config);
    Rng rng(seed);
    env.reset(rng);
    GreedyPolicy greedy;
    for (std::int64_t t = 1; t <= total; ++t) {
      window.add(env.step(greedy.decide(env), rng));
      if (t % cfg.log_interval == 0 || t == total) run.rows.push_back(window.flush(t, {}));
    }
    final_policy = std::make_unique<GreedyPolicy>();
  } else {
    Trainer trainer(env_config, cfg.trainer, seed);
    for (std::int64_t t = 1; t <= total; ++t) {
      const TrainDiagnostics d = trainer.train_step();
      window.add(d.transition);
      if (d.updated) window.add_loss(d.loss);
      if (t % cfg.log_interval == 0 || t == total) {
        run.rows.push_back(window.flush(t, trainer.current_epsilon()));
      }
    }
    run.policy = trainer.online();
    run.meta = {trainer.steps_done(), trainer.current_epsilon(), seed, config_digest(cfg)};
    final_policy = std::make_unique<QPolicy>(trainer.online(), trainer.encoder());
  }

  AdmissionEnv eval_env(env_config);
  Rng eval_rng(evaluation_seed(seed));
  run.evaluation = evaluate(*final_policy, eval_env, cfg.eval_horizon, eval_rng);
  return run;
}

std::vector<SweepRow> run_capacity_sweep(const ExperimentConfig& cfg,
                                         const std::vector<std::int64_t>& capacities,
                                         const std::vector<Scheme>& schemes,
                                         const std::vector<std::uint64_t>& seeds,
                                         unsigned jobs) {
  std::vector<SweepRow> rows;
  for (auto units : capacities) {
    for (auto scheme : schemes) {
      for (auto seed : seeds) rows.push_back({units, scheme, seed, {}});
    }
  }
  // Validate every cell's environment before starting any work.
  for (const auto& r : rows) validate(env_for(cfg, r.scheme, r.capacity_units));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= rows.size()) return;
      try {
        SweepRow& r = rows[i];
        r.metrics =
            run_convergence(cfg, env_for(cfg, r.scheme, r.capacity_units), r.scheme, r.seed)
                .evaluation;
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = rows.size();
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(rows.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

std::vector<std::string> convergence_columns(int num_classes) {
  std::vector<std::string> cols{"step", "avg_reward", "accept_prob"};
  for (int g = 1; g <= num_classes; ++g) cols.push_back("accept_c" + std::to_string(g));
  cols.push_back("epsilon");
  cols.push_back("loss");
  return cols;
}

std::vector<std::string> sweep_columns(int num_classes) {
  std::vector<std::string> cols{"capacity_units", "scheme", "seed", "avg_reward", "accept_prob"};
  for (int g = 1; g <= num_classes; ++g) cols.push_back("accept_c" + std::to_string(g));
  return cols;
}

void emit_convergence_csv(std::ostream& os, const std::vector<MetricsRow>& rows,
                          int num_classes) {
  os << kConvergenceComment << '\n';
  join_line(os, convergence_columns(num_classes));
  for (const auto& r : rows) {
    if (static_cast<int>(r.accept_by_class.size()) != num_classes) {
      throw std::invalid_argument("metrics row has the wrong number of classes");
    }
    std::vector<std::string> cells{std::to_string(r.step), fixed(r.avg_reward),
                                   fixed(r.accept_prob)};
    for (double a : r.accept_by_class) cells.push_back(fixed(a));
    cells.push_back(r.epsilon ? fixed(*r.epsilon) : "");
    cells.push_back(r.loss ? fixed(*r.loss) : "");
    join_line(os, cells);
  }
}

void emit_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, int num_classes) {
  os << kSweepComment << '\n';
  join_line(os, sweep_columns(num_classes));
  for (const auto& r : rows) {
    std::vector<std::string> cells{std::to_string(r.capacity_units), to_string(r.scheme),
                                   std::to_string(r.seed), fixed(r.metrics.average_reward()),
                                   fixed(r.metrics.acceptance())};
    for (int g = 1; g <= num_classes; ++g) cells.push_back(fixed(r.metrics.acceptance(g)));
    join_line(os, cells);
  }
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot move output into '" + path.string() + "'");
}

CsvTable parse_csv(std::istream& is) {
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  CsvTable t;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (t.header.empty()) t.comment = line;
      continue;
    }
    if (t.header.empty()) {
      t.header = split(line);
    } else {
      t.rows.push_back(split(line));
    }
  }
  return t;
}

}  // namespace metaslice
