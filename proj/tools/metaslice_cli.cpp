// Command-line front end: train, eval, sweep, validate-config.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "metaslice/config.hpp"
#include "metaslice/harness.hpp"

namespace fs = std::filesystem;
using namespace metaslice;

namespace {

enum ExitCode {
  kOk = 0,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kPolicy = 5,
  kInternal = 6,
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::vector<T> parse_numbers(const std::string& text, const char* what) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || v < 0) {
      throw ConfigError(std::string("bad ") + what + " '" + item + "'");
    }
    out.push_back(static_cast<T>(v));
  }
  if (out.empty()) throw ConfigError(std::string("empty ") + what + " list");
  return out;
}

std::string csv_of(const std::vector<MetricsRow>& rows, int classes) {
  std::ostringstream os;
  emit_convergence_csv(os, rows, classes);
  return os.str();
}

void print_metrics(const EvalMetrics& m, int classes) {
  std::cout << "epochs " << m.epochs << "\navg_reward " << m.average_reward()
            << "\naccept_prob " << m.acceptance() << '\n';
  for (int g = 1; g <= classes; ++g) {
    std::cout << "accept_c" << g << ' ' << m.acceptance(g) << '\n';
  }
}

int cmd_validate(const std::string& config_path) {
  const ExperimentConfig cfg = load_config(config_path);
  const EnvConfig env = env_for(cfg, cfg.scheme);
  const std::int64_t x_max = max_concurrent_slices(env);
  std::cout << "config ok (digest " << config_digest(cfg) << ")\n"
            << "classes G = " << env.num_classes() << "\n"
            << "function types K = " << env.function_types << "\n"
            << "functions per slice F = " << env.functions_per_slice << "\n"
            << "sharing cap N_L = " << env.sharing_cap << "\n"
            << "resource types P = " << env.resource_types() << "\n"
            << "capacity = " << env.capacity << "\n"
            << "scheme = " << to_string(cfg.scheme) << "\n"
            << "X_max = " << x_max << "\n"
            << "z = " << uniformization_rate(env.classes, x_max) << "/h\n";
  return kOk;
}

int cmd_train(const std::string& config_path, std::uint64_t seed, const std::string& out_dir,
              const std::string& scheme_override) {
  ExperimentConfig cfg = load_config(config_path);
  if (!scheme_override.empty()) cfg.scheme = parse_scheme(scheme_override);
  const int classes = cfg.env.num_classes();
  const ConvergenceRun run = run_convergence(cfg, cfg.scheme, seed);

  fs::create_directories(out_dir);
  const std::string stem = to_string(cfg.scheme) + "_seed" + std::to_string(seed);
  write_file(fs::path(out_dir) / ("convergence_" + stem + ".csv"), csv_of(run.rows, classes));
  if (run.policy) {
    std::ostringstream os;
    save_checkpoint(os, *run.policy, run.meta);
    write_file(fs::path(out_dir) / ("policy_" + stem + ".txt"), os.str());
  }
  std::ostringstream summary;
  emit_sweep_csv(summary, {{cfg.env.capacity[0], cfg.scheme, seed, run.evaluation}}, classes);
  write_file(fs::path(out_dir) / ("evaluation_" + stem + ".csv"), summary.str());
  print_metrics(run.evaluation, classes);
  return kOk;
}

int cmd_eval(const std::string& policy_path, const std::string& config_path,
             std::int64_t episodes, std::uint64_t seed) {
  const ExperimentConfig cfg = load_config(config_path);
  std::unique_ptr<Policy> policy;
  Scheme scheme = cfg.scheme;
  if (policy_path == "greedy") {
    policy = std::make_unique<GreedyPolicy>();
    scheme = Scheme::kGreedy;
  } else {
    std::ifstream in(policy_path);
    if (!in) throw std::runtime_error("cannot open policy file '" + policy_path + "'");
    auto [net, meta] = load_checkpoint(in);
    if (!meta.config_digest.empty() && meta.config_digest != config_digest(cfg)) {
      std::cerr << "warning: policy was trained under config digest " << meta.config_digest
                << ", evaluating under " << config_digest(cfg) << '\n';
    }
    const EnvConfig env = env_for(cfg, scheme);
    policy = std::make_unique<QPolicy>(std::move(net), StateEncoder(env));
  }
  AdmissionEnv env(env_for(cfg, scheme));
  Rng rng(evaluation_seed(seed));
  print_metrics(evaluate(*policy, env, episodes, rng), cfg.env.num_classes());
  return kOk;
}

int cmd_sweep(const std::string& config_path, const std::string& capacities,
              const std::string& seeds, const std::string& schemes_text,
              const std::string& out_dir, unsigned jobs) {
  const ExperimentConfig cfg = load_config(config_path);
  const auto caps = capacities.empty() ? cfg.sweep_capacities
                                       : parse_numbers<std::int64_t>(capacities, "capacity");
  const auto seed_list = seeds.empty() ? cfg.seeds : parse_numbers<std::uint64_t>(seeds, "seed");
  std::vector<Scheme> schemes;
  if (schemes_text.empty()) {
    schemes = {cfg.scheme};
  } else {
    for (const auto& s : split_list(schemes_text)) schemes.push_back(parse_scheme(s));
  }
  for (auto c : caps) {
    if (c <= 0) throw ConfigError("capacities must be > 0");
  }
  const auto rows = run_capacity_sweep(cfg, caps, schemes, seed_list, jobs);
  std::ostringstream os;
  emit_sweep_csv(os, rows, cfg.env.num_classes());
  fs::create_directories(out_dir);
  write_file(fs::path(out_dir) / "sweep.csv", os.str());
  std::cout << os.str();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MetaSlice admission control: training, evaluation and sweeps"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "results", policy_path, capacities, seeds, schemes, scheme;
  std::uint64_t seed = 1;
  std::int64_t episodes = 10000;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());

  auto* train = app.add_subcommand("train", "train one scheme and write metrics + policy");
  train->add_option("--config", config_path, "config file")->required();
  train->add_option("--seed", seed, "experiment seed");
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--scheme", scheme, "override the config's scheme");

  auto* eval = app.add_subcommand("eval", "evaluate a saved policy (or 'greedy')");
  eval->add_option("--policy", policy_path, "checkpoint file or 'greedy'")->required();
  eval->add_option("--config", config_path, "config file")->required();
  eval->add_option("--episodes", episodes, "decision epochs to evaluate")
      ->check(CLI::PositiveNumber);
  eval->add_option("--seed", seed, "experiment seed (evaluation stream)");

  auto* sweep = app.add_subcommand("sweep", "capacity sweep; writes <out>/sweep.csv");
  sweep->add_option("--config", config_path, "config file")->required();
  sweep->add_option("--capacities", capacities, "comma-separated function-units");
  sweep->add_option("--seeds", seeds, "comma-separated seeds");
  sweep->add_option("--schemes", schemes, "comma-separated schemes (default: config scheme)");
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--jobs", jobs, "parallel cells")->check(CLI::PositiveNumber);

  auto* validate_cmd =
      app.add_subcommand("validate-config", "check a config and print derived quantities");
  validate_cmd->add_option("--config", config_path, "config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*validate_cmd) return cmd_validate(config_path);
    if (*train) return cmd_train(config_path, seed, out_dir, scheme);
    if (*eval) return cmd_eval(policy_path, config_path, episodes, seed);
    if (*sweep) return cmd_sweep(config_path, capacities, seeds, schemes, out_dir, jobs);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const PolicyFormatError& e) {
    std::cerr << "policy file error: " << e.what() << '\n';
    return kPolicy;
  } catch (const AccountingError& e) {
    std::cerr << "accounting error (aborting run): " << e.what() << '\n';
    return kInternal;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  }
  return kUsage;
}
