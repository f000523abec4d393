#pragma once

#include <cstdint>
#include <string>

#include "mib/mib_loss.hpp"

namespace mib {

// Full training-run configuration. Defaults are the reference
// hyperparameters; the config file and CLI flags override them
// (CLI wins over file).
struct RunConfig {
  std::string task = "corridor-pointmass";
  std::uint64_t seed = 1;
  long total_env_steps = 100000;  // raw env steps, action-repeat inclusive
  int batch_size = 128;
  double alpha = 1e-4;  // compression coefficient
  double critic_lr = 1e-3;
  double actor_lr = 1e-3;
  double temp_lr = 1e-3;
  double mib_lr = 1e-4;
  double encoder_tau = 0.05;
  double critic_tau = 0.01;
  long initial_steps = 1000;  // agent interactions collected before updates
  int action_repeat = 2;
  int actor_update_freq = 2;
  int critic_target_update_freq = 2;
  std::string ablation = "full";
  long eval_interval = 5000;  // env steps between evaluations
  int eval_episodes = 10;
  double discount = 0.99;
  double init_temperature = 0.1;
  long replay_capacity = 100000;
  int episode_length = 1000;  // raw env steps
  int frame_stack = 3;
  int conv_first_stride = 2;
  long update_log_interval = 100;  // updates between training-metric records
  std::string out_dir = "runs/default";
  bool restart = false;

  Ablation ablation_mode() const;
  long total_interactions() const { return total_env_steps / action_repeat; }
};

Ablation parse_ablation(const std::string& s);
std::string ablation_name(Ablation a);

// Flat key-value config file: one `key = value` per line, '#' comments.
// Unknown keys are an error.
RunConfig load_config_file(const std::string& path, RunConfig base = RunConfig());
void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value);

std::string config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const std::string& json_text);

}  // namespace mib
