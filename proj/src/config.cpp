#include "mib/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mib {

using nlohmann::json;

Ablation parse_ablation(const std::string& s) {
  if (s == "full") return Ablation::kFull;
  if (s == "non-kl") return Ablation::kNonKl;
  if (s == "non-loss") return Ablation::kNonLoss;
  if (s == "non-img") return Ablation::kNonImg;
  if (s == "non-prop") return Ablation::kNonProp;
  throw std::invalid_argument("unknown ablation '" + s +
                              "' (expected full|non-kl|non-loss|non-img|non-prop)");
}

std::string ablation_name(Ablation a) {
  switch (a) {
    case Ablation::kFull: return "full";
    case Ablation::kNonKl: return "non-kl";
    case Ablation::kNonLoss: return "non-loss";
    case Ablation::kNonImg: return "non-img";
    case Ablation::kNonProp: return "non-prop";
  }
  return "full";
}

Ablation RunConfig::ablation_mode() const { return parse_ablation(ablation); }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void apply_config_line(RunConfig& c, const std::string& key, const std::string& value) {
  auto as_long = [&] { return std::stol(value); };
  auto as_int = [&] { return std::stoi(value); };
  auto as_double = [&] { return std::stod(value); };
  if (key == "task") c.task = value;
  else if (key == "seed") c.seed = std::stoull(value);
  else if (key == "total_env_steps") c.total_env_steps = as_long();
  else if (key == "batch_size") c.batch_size = as_int();
  else if (key == "alpha") c.alpha = as_double();
  else if (key == "critic_lr") c.critic_lr = as_double();
  else if (key == "actor_lr") c.actor_lr = as_double();
  else if (key == "temp_lr") c.temp_lr = as_double();
  else if (key == "mib_lr") c.mib_lr = as_double();
  else if (key == "encoder_tau") c.encoder_tau = as_double();
  else if (key == "critic_tau") c.critic_tau = as_double();
  else if (key == "initial_steps") c.initial_steps = as_long();
  else if (key == "action_repeat") c.action_repeat = as_int();
  else if (key == "actor_update_freq") c.actor_update_freq = as_int();
  else if (key == "critic_target_update_freq") c.critic_target_update_freq = as_int();
  else if (key == "ablation") { parse_ablation(value); c.ablation = value; }
  else if (key == "eval_interval") c.eval_interval = as_long();
  else if (key == "eval_episodes") c.eval_episodes = as_int();
  else if (key == "discount") c.discount = as_double();
  else if (key == "init_temperature") c.init_temperature = as_double();
  else if (key == "replay_capacity") c.replay_capacity = as_long();
  else if (key == "episode_length") c.episode_length = as_int();
  else if (key == "frame_stack") c.frame_stack = as_int();
  else if (key == "conv_first_stride") c.conv_first_stride = as_int();
  else if (key == "update_log_interval") c.update_log_interval = as_long();
  else if (key == "out_dir") c.out_dir = value;
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  MIB_CHECK(in.good(), "cannot open config file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    MIB_CHECK(eq != std::string::npos,
              path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    apply_config_line(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["task"] = c.task;
  j["seed"] = c.seed;
  j["total_env_steps"] = c.total_env_steps;
  j["batch_size"] = c.batch_size;
  j["alpha"] = c.alpha;
  j["critic_lr"] = c.critic_lr;
  j["actor_lr"] = c.actor_lr;
  j["temp_lr"] = c.temp_lr;
  j["mib_lr"] = c.mib_lr;
  j["encoder_tau"] = c.encoder_tau;
  j["critic_tau"] = c.critic_tau;
  j["initial_steps"] = c.initial_steps;
  j["action_repeat"] = c.action_repeat;
  j["actor_update_freq"] = c.actor_update_freq;
  j["critic_target_update_freq"] = c.critic_target_update_freq;
  j["ablation"] = c.ablation;
  j["eval_interval"] = c.eval_interval;
  j["eval_episodes"] = c.eval_episodes;
  j["discount"] = c.discount;
  j["init_temperature"] = c.init_temperature;
  j["replay_capacity"] = c.replay_capacity;
  j["episode_length"] = c.episode_length;
  j["frame_stack"] = c.frame_stack;
  j["conv_first_stride"] = c.conv_first_stride;
  j["update_log_interval"] = c.update_log_interval;
  j["out_dir"] = c.out_dir;
  return j.dump();
}

RunConfig config_from_json(const std::string& text) {
  const json j = json::parse(text);
  RunConfig c;
  c.task = j.at("task").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.total_env_steps = j.at("total_env_steps").get<long>();
  c.batch_size = j.at("batch_size").get<int>();
  c.alpha = j.at("alpha").get<double>();
  c.critic_lr = j.at("critic_lr").get<double>();
  c.actor_lr = j.at("actor_lr").get<double>();
  c.temp_lr = j.at("temp_lr").get<double>();
  c.mib_lr = j.at("mib_lr").get<double>();
  c.encoder_tau = j.at("encoder_tau").get<double>();
  c.critic_tau = j.at("critic_tau").get<double>();
  c.initial_steps = j.at("initial_steps").get<long>();
  c.action_repeat = j.at("action_repeat").get<int>();
  c.actor_update_freq = j.at("actor_update_freq").get<int>();
  c.critic_target_update_freq = j.at("critic_target_update_freq").get<int>();
  c.ablation = j.at("ablation").get<std::string>();
  c.eval_interval = j.at("eval_interval").get<long>();
  c.eval_episodes = j.at("eval_episodes").get<int>();
  c.discount = j.at("discount").get<double>();
  c.init_temperature = j.at("init_temperature").get<double>();
  c.replay_capacity = j.at("replay_capacity").get<long>();
  c.episode_length = j.at("episode_length").get<int>();
  c.frame_stack = j.at("frame_stack").get<int>();
  c.conv_first_stride = j.at("conv_first_stride").get<int>();
  c.update_log_interval = j.at("update_log_interval").get<long>();
  c.out_dir = j.at("out_dir").get<std::string>();
  return c;
}

}  // namespace mib
