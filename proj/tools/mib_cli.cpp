#include <cstdio>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mib/plot.hpp"
#include "mib/trainer.hpp"

using namespace mib;

int main(int argc, char** argv) {
  CLI::App app{"Multimodal information bottleneck agent"};
  app.require_subcommand(1);

  // --- train ---------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Train an agent");
  std::string config_path, task, ablation, out_dir;
  std::uint64_t seed = 0;
  long steps = -1;
  int batch_size = -1, action_repeat = -1;
  double alpha = -1;
  bool restart = false;
  train_cmd->add_option("--config", config_path, "Config file (key = value lines)");
  train_cmd->add_option("--task", task, "Environment name");
  train_cmd->add_option("--seed", seed, "Random seed");
  train_cmd->add_option("--steps", steps, "Total raw environment steps");
  train_cmd->add_option("--batch-size", batch_size, "Minibatch size");
  train_cmd->add_option("--action-repeat", action_repeat, "Action repeat");
  train_cmd->add_option("--alpha", alpha, "Compression coefficient");
  train_cmd->add_option("--ablation", ablation, "full|non-kl|non-loss|non-img|non-prop");
  train_cmd->add_option("--out", out_dir, "Output directory (metrics + checkpoints)");
  train_cmd->add_flag("--restart", restart, "Resume from the latest checkpoint in --out");

  // --- eval ----------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained checkpoint");
  std::string ckpt_path, background = "none", record_path;
  int episodes = 10;
  double noise_std = 0.0;
  std::uint64_t eval_seed = 12345;
  eval_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint path")->required();
  eval_cmd->add_option("--episodes", episodes, "Evaluation episodes");
  eval_cmd->add_option("--noise-std", noise_std,
                       "Proprioception white-noise std (fraction of running std)");
  eval_cmd->add_option("--background", background, "none|moving_pattern");
  eval_cmd->add_option("--seed", eval_seed, "Evaluation seed");
  eval_cmd->add_option("--record", record_path, "Write the first episode to this file");

  // --- plot ----------------------------------------------------------------
  auto* plot_cmd = app.add_subcommand("plot", "Render return-vs-step curve from a metrics log");
  std::string log_path, plot_out;
  plot_cmd->add_option("--log", log_path, "metrics.jsonl path")->required();
  plot_cmd->add_option("--out", plot_out, "Output SVG path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      RunConfig cfg;
      if (!config_path.empty()) cfg = load_config_file(config_path, cfg);
      if (!task.empty()) cfg.task = task;
      if (train_cmd->count("--seed")) cfg.seed = seed;
      if (steps >= 0) cfg.total_env_steps = steps;
      if (batch_size >= 0) cfg.batch_size = batch_size;
      if (action_repeat >= 0) cfg.action_repeat = action_repeat;
      if (alpha >= 0) cfg.alpha = alpha;
      if (!ablation.empty()) {
        parse_ablation(ablation);
        cfg.ablation = ablation;
      }
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      cfg.restart = restart;
      Trainer trainer(cfg);
      trainer.train();
      std::printf("done: %s\n", cfg.out_dir.c_str());
    } else if (*eval_cmd) {
      auto trainer = trainer_from_checkpoint(ckpt_path);
      nlohmann::json out;
      out["checkpoint"] = ckpt_path;
      out["env_steps"] = trainer->env_steps();
      out["episodes"] = episodes;
      if (noise_std > 0.0 || background != "none") {
        PerturbationConfig pert;
        pert.proprio_noise_std = static_cast<float>(noise_std);
        pert.background = parse_background(background);
        pert.background_value =
            make_env(trainer->config().task, EnvOptions())->background_value();
        auto [clean, noisy] = trainer->robustness_evaluate(pert, episodes, eval_seed);
        out["return_mean"] = clean.mean;
        out["return_std"] = clean.stddev;
        out["perturbed_mean"] = noisy.mean;
        out["perturbed_std"] = noisy.stddev;
        out["noise_std"] = noise_std;
        out["background"] = background;
      } else {
        EvalResult ev = record_path.empty()
                            ? trainer->evaluate(episodes, eval_seed)
                            : evaluate_policy(trainer->bundle(), trainer->config(), episodes,
                                              eval_seed, nullptr,
                                              &trainer->proprio_running_std(), record_path);
        out["return_mean"] = ev.mean;
        out["return_std"] = ev.stddev;
      }
      std::printf("%s\n", out.dump(2).c_str());
    } else if (*plot_cmd) {
      plot_metrics(log_path, plot_out);
      std::printf("wrote %s\n", plot_out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
