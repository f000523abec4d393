#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "mib/bundle.hpp"
#include "mib/checkpoint.hpp"
#include "mib/config.hpp"
#include "mib/core.hpp"
#include "mib/env.hpp"
#include "mib/metrics.hpp"
#include "mib/preprocess.hpp"
#include "mib/sac.hpp"

namespace mib {

struct EvalResult {
  double mean = 0;
  double stddev = 0;
  std::vector<double> returns;
};

// Which components an ablation keeps active.
struct AblationWiring {
  bool run_mib_update = true;
  bool image_path = true;
  bool proprio_path = true;
  double alpha_scale = 1.0;  // 0 under non-kl
};
AblationWiring ablation_wiring(Ablation a);

// Per-update scalar record, emitted verbatim into the metrics log.
struct UpdateLosses {
  float kl_term = 0, infonce_term = 0, mib_total = 0, alpha = 0;
  float critic_loss = 0, actor_loss = 0, alpha_loss = 0;
};

// Deterministic evaluation of the current policy: `episodes` full episodes
// with tanh(mean) actions; per-episode rng derives from (seed, episode index)
// only. A non-null perturbation wraps every observation; the identity
// perturbation reproduces the clean evaluation bit-exactly.
EvalResult evaluate_policy(NetworkBundle<float>& bundle, const RunConfig& cfg, int episodes,
                           std::uint64_t eval_seed, const PerturbationConfig* pert = nullptr,
                           const RunningStd* running = nullptr,
                           const std::string& record_path = "", bool deterministic = true);

// Same, against a caller-provided environment instance.
EvalResult evaluate_policy_with_env(NetworkBundle<float>& bundle, Env& env, Ablation mode,
                                    int episodes, std::uint64_t eval_seed,
                                    const PerturbationConfig* pert = nullptr,
                                    const RunningStd* running = nullptr,
                                    const std::string& record_path = "",
                                    bool deterministic = true);

// Mean return of a uniform-random policy, same episode seeding scheme.
EvalResult evaluate_random_policy(const RunConfig& cfg, int episodes, std::uint64_t eval_seed);

// Training-loop driver: collects transitions, performs one gradient step per
// interaction after the warmup, evaluates and checkpoints periodically.
class Trainer {
 public:
  explicit Trainer(const RunConfig& cfg);

  // Full run; writes metrics/checkpoints under cfg.out_dir.
  void train();

  // Single-step pieces, exposed for tests.
  void collect_interaction();
  void update_once();

  EvalResult evaluate(int episodes, std::uint64_t eval_seed);
  // Clean and perturbed returns from one call, logged together when a
  // metrics writer is attached.
  std::pair<EvalResult, EvalResult> robustness_evaluate(const PerturbationConfig& pert,
                                                        int episodes, std::uint64_t eval_seed);

  void save_checkpoint_file(const std::string& path);
  void load_checkpoint_file(const std::string& path);

  NetworkBundle<float>& bundle() { return *bundle_; }
  ReplayBuffer& buffer() { return buffer_; }
  const RunConfig& config() const { return cfg_; }
  long interactions() const { return interactions_; }
  long env_steps() const { return interactions_ * cfg_.action_repeat; }
  long updates_done() const { return updates_; }
  const UpdateLosses& last_losses() const { return last_; }
  const RunningStd& proprio_running_std() const { return proprio_std_; }
  PreparedBatch<float> prepare_batch(const Batch& raw, bool augment);

 private:
  void maybe_eval_and_checkpoint(bool force);
  void write_train_record();

  RunConfig cfg_;
  NetConfig net_cfg_;
  Ablation mode_;
  AblationWiring wiring_;
  std::unique_ptr<Env> env_;
  std::unique_ptr<NetworkBundle<float>> bundle_;
  std::unique_ptr<Adam<float>> critic_opt_, mib_opt_, actor_opt_, temp_opt_;
  ReplayBuffer buffer_;
  RngStream rng_env_, rng_collect_, rng_buffer_, rng_aug_, rng_critic_, rng_mib_, rng_actor_;
  MultimodalObservation obs_;
  bool need_reset_ = false;
  long interactions_ = 0;
  long updates_ = 0;
  double episode_return_ = 0;
  double last_episode_return_ = 0;
  long episodes_done_ = 0;
  long last_eval_interactions_ = -1;
  RunningStd proprio_std_;
  UpdateLosses last_;
  std::unique_ptr<MetricsWriter> metrics_;
  std::chrono::steady_clock::time_point start_time_;
};

// Builds a trainer in the post-training state stored at `path` (used by the
// eval CLI and by resume).
std::unique_ptr<Trainer> trainer_from_checkpoint(const std::string& path);

NetConfig net_config_for(const RunConfig& cfg, const EnvSpec& spec);

}  // namespace mib
