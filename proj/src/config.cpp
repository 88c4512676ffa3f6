#include "vrail/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace vrail::config {

namespace {

using Setter = std::function<void(ExperimentConfig&, const nlohmann::json&)>;
using Getter = std::function<nlohmann::json(const ExperimentConfig&)>;

struct Field {
  Setter set;
  Getter get;
};

template <typename T>
T as(const nlohmann::json& v, std::string_view key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw std::invalid_argument("expected true/false");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw std::invalid_argument("expected a number");
    }
    return v.get<T>();
  } catch (const std::exception& e) {
    throw std::invalid_argument("config key '" + std::string(key) + "': " + e.what());
  }
}

std::vector<int> as_layers(const nlohmann::json& v) {
  if (v.is_array()) return v.get<std::vector<int>>();
  if (v.is_number_integer()) return {v.get<int>()};
  if (v.is_string()) {
    std::vector<int> layers;
    std::stringstream ss(v.get<std::string>());
    for (std::string part; std::getline(ss, part, ',');) layers.push_back(std::stoi(part));
    return layers;
  }
  throw std::invalid_argument("config key 'hidden_layers': expected a list of widths");
}

#define VRAIL_FIELD(key, member, type)                                                       \
  {                                                                                          \
    key, Field {                                                                             \
      [](ExperimentConfig& c, const nlohmann::json& v) { c.member = as<type>(v, key); },     \
          [](const ExperimentConfig& c) { return nlohmann::json(c.member); }                 \
    }                                                                                        \
  }

const std::map<std::string, Field, std::less<>>& fields() {
  static const std::map<std::string, Field, std::less<>> table = {
      VRAIL_FIELD("sparse_rewards", env.sparse_rewards, bool),
      VRAIL_FIELD("wall_features", env.wall_features, bool),
      VRAIL_FIELD("max_episode_steps", env.max_episode_steps, int),
      VRAIL_FIELD("gamma", agent.gamma, double),
      VRAIL_FIELD("lr", agent.lr, double),
      VRAIL_FIELD("batch_size", agent.batch_size, int),
      VRAIL_FIELD("buffer_capacity", agent.buffer_capacity, int),
      VRAIL_FIELD("target_update_every", agent.target_update_every, int),
      VRAIL_FIELD("epsilon_floor", agent.epsilon_floor, double),
      VRAIL_FIELD("epsilon_decay", agent.epsilon_decay, double),
      VRAIL_FIELD("per_step_epsilon", agent.per_step_epsilon, bool),
      VRAIL_FIELD("grad_clip_norm", agent.grad_clip_norm, double),
      VRAIL_FIELD("reshape_at_sample", agent.reshape_at_sample, bool),
      VRAIL_FIELD("outer_cycles", loop.outer_cycles, int),
      VRAIL_FIELD("rl_epochs_per_cycle", loop.rl_epochs_per_cycle, int),
      VRAIL_FIELD("dl_epochs", loop.dl_epochs, int),
      VRAIL_FIELD("dl_lr", loop.dl_lr, double),
      VRAIL_FIELD("warm_start", loop.warm_start, bool),
      VRAIL_FIELD("visited_only", loop.visited_only, bool),
      VRAIL_FIELD("targets_from_target_network", loop.targets_from_target_network, bool),
      {"hidden_layers",
       Field{[](ExperimentConfig& c, const nlohmann::json& v) { c.agent.hidden_layers = as_layers(v); },
             [](const ExperimentConfig& c) { return nlohmann::json(c.agent.hidden_layers); }}},
      {"optimizer",
       Field{[](ExperimentConfig& c, const nlohmann::json& v) {
               const auto name = as<std::string>(v, "optimizer");
               if (name == "adam") {
                 c.agent.optimizer = nn::OptimizerKind::Adam;
               } else if (name == "sgd") {
                 c.agent.optimizer = nn::OptimizerKind::Sgd;
               } else {
                 throw std::invalid_argument("config key 'optimizer': expected adam or sgd");
               }
             },
             [](const ExperimentConfig& c) {
               return nlohmann::json(c.agent.optimizer == nn::OptimizerKind::Adam ? "adam" : "sgd");
             }}},
      {"estimator_kind",
       Field{[](ExperimentConfig& c, const nlohmann::json& v) {
               c.loop.estimator = bilevel::estimator_choice_from_name(as<std::string>(v, "estimator_kind"));
             },
             [](const ExperimentConfig& c) {
               return nlohmann::json(std::string(bilevel::estimator_choice_name(c.loop.estimator)));
             }}},
  };
  return table;
}

#undef VRAIL_FIELD

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

nlohmann::json parse_scalar(std::string_view text) {
  const std::string s(trim(text));
  auto parsed = nlohmann::json::parse(s, nullptr, /*allow_exceptions=*/false);
  if (!parsed.is_discarded()) return parsed;
  return nlohmann::json(s);
}

}  // namespace

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply(ExperimentConfig& cfg, const nlohmann::json& values) {
  if (!values.is_object()) throw std::invalid_argument("config must be a flat object of key/value pairs");
  for (const auto& [key, value] : values.items()) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw std::invalid_argument("unknown config key '" + key + "'");
    it->second.set(cfg, value);
  }
}

void apply(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  nlohmann::json obj = nlohmann::json::object();
  obj[std::string(trim(key))] = parse_scalar(value);
  config::apply(cfg, obj);
}

nlohmann::json parse_config_text(std::string_view text) {
  const std::string_view body = trim(text);
  if (!body.empty() && body.front() == '{') return nlohmann::json::parse(body);
  nlohmann::json obj = nlohmann::json::object();
  std::istringstream in{std::string(text)};
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    std::string_view l = line;
    if (const auto hash = l.find('#'); hash != std::string_view::npos) l = l.substr(0, hash);
    l = trim(l);
    if (l.empty()) continue;
    const auto eq = l.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    obj[std::string(trim(l.substr(0, eq)))] = parse_scalar(l.substr(eq + 1));
  }
  return obj;
}

void load_file(ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  config::apply(cfg, parse_config_text(buffer.str()));
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, field] : fields()) out[name] = field.get(cfg);
  return out;
}

}  // namespace vrail::config
