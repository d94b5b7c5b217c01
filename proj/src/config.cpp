#include "metaslice/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace metaslice {

namespace pt = boost::property_tree;

namespace {

const std::set<std::string> kSystemKeys = {
    "resource_types", "function_types", "functions_per_slice", "sharing_cap",
    "capacity",       "per_function_demand", "reward_weights"};
const std::set<std::string> kClassKeys = {"income", "arrival_rate", "departure_rate"};
const std::set<std::string> kTrainerKeys = {
    "total_steps", "epsilon_start", "epsilon_end",  "epsilon_decay_fraction",
    "discount",    "learning_rate", "target_sync",  "batch_size",
    "replay_capacity", "warmup",    "clip_norm",    "trunk",
    "stream_hidden"};
const std::set<std::string> kExperimentKeys = {"scheme",       "seeds",        "output_dir",
                                               "eval_horizon", "log_interval", "capacities"};

std::string where(const std::string& section, const std::string& key) {
  return "[" + section + "] " + key;
}

template <typename T>
T parse_number(const std::string& text, const std::string& context) {
  T v{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ConfigError(context + ": cannot parse '" + text + "'");
  }
  return v;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& context) {
  std::istringstream in(text);
  std::vector<T> out;
  std::string tok;
  while (in >> tok) out.push_back(parse_number<T>(tok, context));
  if (out.empty()) throw ConfigError(context + ": empty list");
  return out;
}

class Section {
 public:
  Section(const pt::ptree& tree, std::string name, const std::set<std::string>& allowed)
      : tree_(tree), name_(std::move(name)) {
    for (const auto& [key, child] : tree_) {
      if (!child.empty()) throw ConfigError("[" + name_ + "]: nested keys are not allowed");
      if (!allowed.count(key)) throw ConfigError("unknown key " + where(name_, key));
    }
  }

  bool has(const std::string& key) const { return tree_.find(key) != tree_.not_found(); }

  std::string raw(const std::string& key) const {
    auto it = tree_.find(key);
    if (it == tree_.not_found()) throw ConfigError("missing key " + where(name_, key));
    return it->second.data();
  }

  template <typename T>
  T number(const std::string& key) const {
    std::string text = raw(key);
    const auto first = text.find_first_not_of(" \t");
    const auto last = text.find_last_not_of(" \t");
    text = first == std::string::npos ? "" : text.substr(first, last - first + 1);
    return parse_number<T>(text, where(name_, key));
  }

  template <typename T>
  void maybe(const std::string& key, T& out) const {
    if (has(key)) out = number<T>(key);
  }

  template <typename T>
  std::vector<T> list(const std::string& key) const {
    return parse_list<T>(raw(key), where(name_, key));
  }

 private:
  const pt::ptree& tree_;
  std::string name_;
};

void render(std::ostringstream& os, const char* key, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  os << key << '=' << std::string(buf, res.ptr) << '\n';
}

}  // namespace

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::kImsacMa: return "imsac_ma";
    case Scheme::kImsac: return "imsac";
    case Scheme::kGreedy: return "greedy";
  }
  return "?";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "imsac_ma") return Scheme::kImsacMa;
  if (name == "imsac") return Scheme::kImsac;
  if (name == "greedy") return Scheme::kGreedy;
  throw ConfigError("unknown scheme '" + name + "' (expected imsac_ma, imsac or greedy)");
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.env.classes = {{1, 1.0, 60.0, 2.0}, {2, 2.0, 40.0, 2.0}, {3, 4.0, 25.0, 2.0}};
  cfg.trainer.epsilon.decay_steps = cfg.trainer.total_steps / 2;
  return cfg;
}

ExperimentConfig parse_config(std::istream& is) {
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }

  ExperimentConfig cfg;
  cfg.env.classes.clear();
  bool seen_system = false;
  double decay_fraction = 0.5;
  std::map<int, ClassParams> classes;
  int resource_types = 0;

  for (const auto& [name, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("key '" + name + "' outside of any section");
    }
    if (name == "system") {
      seen_system = true;
      Section s(body, name, kSystemKeys);
      resource_types = s.number<int>("resource_types");
      cfg.env.function_types = s.number<int>("function_types");
      cfg.env.functions_per_slice = s.number<int>("functions_per_slice");
      cfg.env.sharing_cap = s.number<int>("sharing_cap");
      try {
        cfg.env.capacity = ResourceVector(s.list<std::int64_t>("capacity"));
        cfg.env.per_function_demand = ResourceVector(s.list<std::int64_t>("per_function_demand"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("[system]: ") + e.what());
      }
      cfg.env.reward.weights = s.list<double>("reward_weights");
    } else if (name.rfind("class.", 0) == 0) {
      const int id = parse_number<int>(name.substr(6), "section [" + name + "]");
      Section s(body, name, kClassKeys);
      classes[id] = {id, s.number<double>("income"), s.number<double>("arrival_rate"),
                     s.number<double>("departure_rate")};
    } else if (name == "trainer") {
      Section s(body, name, kTrainerKeys);
      auto& t = cfg.trainer;
      s.maybe("total_steps", t.total_steps);
      s.maybe("epsilon_start", t.epsilon.start);
      s.maybe("epsilon_end", t.epsilon.end);
      s.maybe("epsilon_decay_fraction", decay_fraction);
      s.maybe("discount", t.discount);
      s.maybe("learning_rate", t.learning_rate);
      s.maybe("target_sync", t.target_sync);
      s.maybe("batch_size", t.batch_size);
      s.maybe("replay_capacity", t.replay_capacity);
      s.maybe("warmup", t.warmup);
      s.maybe("clip_norm", t.clip_norm);
      if (s.has("trunk")) t.network.trunk = s.list<int>("trunk");
      s.maybe("stream_hidden", t.network.stream_hidden);
    } else if (name == "experiment") {
      Section s(body, name, kExperimentKeys);
      if (s.has("scheme")) cfg.scheme = parse_scheme(s.raw("scheme"));
      if (s.has("seeds")) cfg.seeds = s.list<std::uint64_t>("seeds");
      if (s.has("output_dir")) cfg.output_dir = s.raw("output_dir");
      s.maybe("eval_horizon", cfg.eval_horizon);
      s.maybe("log_interval", cfg.log_interval);
      if (s.has("capacities")) cfg.sweep_capacities = s.list<std::int64_t>("capacities");
    } else {
      throw ConfigError("unknown section [" + name + "]");
    }
  }
  if (!seen_system) throw ConfigError("missing section [system]");
  if (resource_types <= 0) throw ConfigError("[system] resource_types must be > 0");
  if (static_cast<int>(cfg.env.capacity.size()) != resource_types ||
      static_cast<int>(cfg.env.per_function_demand.size()) != resource_types ||
      static_cast<int>(cfg.env.reward.weights.size()) != resource_types) {
    throw ConfigError("[system] capacity, per_function_demand and reward_weights need " +
                      std::to_string(resource_types) + " entries");
  }
  if (!(decay_fraction >= 0 && decay_fraction <= 1)) {
    throw ConfigError("[trainer] epsilon_decay_fraction must be in [0,1]");
  }
  cfg.trainer.epsilon.decay_steps = static_cast<std::int64_t>(
      std::llround(decay_fraction * static_cast<double>(cfg.trainer.total_steps)));
  for (auto& [id, c] : classes) cfg.env.classes.push_back(c);
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

void validate(const ExperimentConfig& cfg) {
  try {
    validate(cfg.env);
    validate(cfg.trainer);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  for (const auto& c : cfg.env.classes) {
    if (!std::isfinite(c.income) || !std::isfinite(c.arrival_rate) ||
        !std::isfinite(c.departure_rate)) {
      throw ConfigError("class parameters must be finite");
    }
  }
  if (cfg.seeds.empty()) throw ConfigError("[experiment] seeds must not be empty");
  if (cfg.eval_horizon < 1) throw ConfigError("[experiment] eval_horizon must be >= 1");
  if (cfg.log_interval < 1) throw ConfigError("[experiment] log_interval must be >= 1");
  for (auto u : cfg.sweep_capacities) {
    if (u <= 0) throw ConfigError("[experiment] capacities must be > 0");
  }
}

EnvConfig env_for(const ExperimentConfig& cfg, Scheme scheme) {
  EnvConfig env = cfg.env;
  env.sharing_enabled = scheme == Scheme::kImsacMa;
  return env;
}

EnvConfig env_for(const ExperimentConfig& cfg, Scheme scheme, std::int64_t units) {
  if (units <= 0) throw ConfigError("capacity units must be > 0");
  EnvConfig env = env_for(cfg, scheme);
  env.capacity = ResourceVector(env.capacity.size(), units);
  return env;
}

std::string canonical_text(const ExperimentConfig& cfg) {
  std::ostringstream os;
  const auto& e = cfg.env;
  os << "K=" << e.function_types << "\nF=" << e.functions_per_slice << "\nN_L="
     << e.sharing_cap << "\ncapacity=" << e.capacity << "\ndemand=" << e.per_function_demand
     << '\n';
  for (double w : e.reward.weights) render(os, "w", w);
  for (const auto& c : e.classes) {
    os << "class=" << c.class_id << '\n';
    render(os, "income", c.income);
    render(os, "lambda", c.arrival_rate);
    render(os, "mu", c.departure_rate);
  }
  const auto& t = cfg.trainer;
  os << "T=" << t.total_steps << "\ndecay=" << t.epsilon.decay_steps << '\n';
  render(os, "eps_start", t.epsilon.start);
  render(os, "eps_end", t.epsilon.end);
  render(os, "alpha", t.discount);
  render(os, "lr", t.learning_rate);
  render(os, "clip", t.clip_norm);
  os << "C=" << t.target_sync << "\nbatch=" << t.batch_size << "\nreplay=" << t.replay_capacity
     << "\nwarmup=" << t.warmup << "\ntrunk=";
  for (int h : t.network.trunk) os << h << ',';
  os << "\nstream=" << t.network.stream_hidden << "\nscheme=" << to_string(cfg.scheme)
     << "\neval=" << cfg.eval_horizon << "\nlog=" << cfg.log_interval << '\n';
  return os.str();
}

std::string config_digest(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_text(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace metaslice
