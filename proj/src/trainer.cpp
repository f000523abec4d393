#include "mib/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace mib {

using nlohmann::json;
namespace fs = std::filesystem;

AblationWiring ablation_wiring(Ablation a) {
  AblationWiring w;
  switch (a) {
    case Ablation::kFull:
      break;
    case Ablation::kNonKl:
      w.alpha_scale = 0.0;
      break;
    case Ablation::kNonLoss:
      w.run_mib_update = false;
      break;
    case Ablation::kNonImg:
      w.image_path = false;
      break;
    case Ablation::kNonProp:
      w.proprio_path = false;
      break;
  }
  return w;
}

NetConfig net_config_for(const RunConfig& cfg, const EnvSpec& spec) {
  NetConfig nc;
  nc.frame_stack = spec.frame_stack;
  nc.proprio_dim = spec.proprio_dim;
  nc.action_dim = spec.action_dim;
  nc.first_stride = cfg.conv_first_stride;
  nc.init_temperature = cfg.init_temperature;
  return nc;
}

namespace {

EnvOptions env_options(const RunConfig& cfg) {
  EnvOptions o;
  o.action_repeat = cfg.action_repeat;
  o.episode_length = cfg.episode_length;
  o.frame_stack = cfg.frame_stack;
  return o;
}

MatF obs_image_matrix(const FloatObs& f) {
  return Eigen::Map<const MatF>(f.image.data(), f.image.size(), 1);
}

MatF obs_proprio_matrix(const FloatObs& f) {
  return Eigen::Map<const MatF>(f.proprio.data(), f.proprio.size(), 1);
}

void write_episode_record(const std::string& path, const std::vector<MultimodalObservation>& traj) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  MIB_CHECK(out.good(), "episode record: cannot open '" + path + "'");
  const char magic[9] = "MIBEPREC";
  out.write(magic, 8);
  const std::uint32_t version = 1;
  const std::uint32_t n = static_cast<std::uint32_t>(traj.size());
  const std::uint32_t c = traj.empty() ? 0 : traj[0].channels;
  const std::uint32_t h = traj.empty() ? 0 : traj[0].height;
  const std::uint32_t w = traj.empty() ? 0 : traj[0].width;
  const std::uint32_t dp = traj.empty() ? 0 : static_cast<std::uint32_t>(traj[0].proprio.size());
  for (std::uint32_t v : {version, n, c, h, w, dp})
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  for (const auto& o : traj) {
    out.write(reinterpret_cast<const char*>(o.image.data()),
              static_cast<std::streamsize>(o.image.size()));
    out.write(reinterpret_cast<const char*>(o.proprio.data()),
              static_cast<std::streamsize>(o.proprio.size() * sizeof(float)));
  }
}

}  // namespace

EvalResult evaluate_policy(NetworkBundle<float>& bundle, const RunConfig& cfg, int episodes,
                           std::uint64_t eval_seed, const PerturbationConfig* pert,
                           const RunningStd* running, const std::string& record_path,
                           bool deterministic) {
  auto env = make_env(cfg.task, env_options(cfg));
  return evaluate_policy_with_env(bundle, *env, cfg.ablation_mode(), episodes, eval_seed, pert,
                                  running, record_path, deterministic);
}

EvalResult evaluate_policy_with_env(NetworkBundle<float>& bundle, Env& env_ref, Ablation mode,
                                    int episodes, std::uint64_t eval_seed,
                                    const PerturbationConfig* pert, const RunningStd* running,
                                    const std::string& record_path, bool deterministic) {
  Env* env = &env_ref;
  RunningStd empty_running;
  const RunningStd& rstd = running ? *running : empty_running;
  EvalResult res;
  RngStream dummy(0);
  std::vector<MultimodalObservation> recorded;
  for (int ep = 0; ep < episodes; ++ep) {
    RngStream rng_ep = RngStream::sub(eval_seed, "eval-episode-" + std::to_string(ep));
    RngStream rng_pert = RngStream::sub(eval_seed, "eval-pert-" + std::to_string(ep));
    RngStream rng_act = RngStream::sub(eval_seed, "eval-act-" + std::to_string(ep));
    MultimodalObservation obs = env->reset(rng_ep);
    double ret = 0;
    long t = 0;
    bool done = false;
    while (!done) {
      if (ep == 0 && !record_path.empty()) recorded.push_back(obs);
      FloatObs f = preprocess(obs);
      if (pert) f = apply_perturbation(f, *pert, rstd, rng_pert, t);
      VecF a = act(bundle, obs_image_matrix(f), obs_proprio_matrix(f),
                   deterministic ? ActMode::kDeterministic : ActMode::kStochastic,
                   deterministic ? dummy : rng_act, mode);
      StepResult sr = env->step(a);
      ret += sr.reward;
      obs = std::move(sr.obs);
      done = sr.done;
      ++t;
    }
    res.returns.push_back(ret);
  }
  const double n = static_cast<double>(res.returns.size());
  for (double r : res.returns) res.mean += r;
  res.mean /= n;
  for (double r : res.returns) res.stddev += (r - res.mean) * (r - res.mean);
  res.stddev = n > 1 ? std::sqrt(res.stddev / (n - 1)) : 0.0;
  if (!record_path.empty()) write_episode_record(record_path, recorded);
  return res;
}

EvalResult evaluate_random_policy(const RunConfig& cfg, int episodes, std::uint64_t eval_seed) {
  auto env = make_env(cfg.task, env_options(cfg));
  const int da = env->spec().action_dim;
  EvalResult res;
  for (int ep = 0; ep < episodes; ++ep) {
    RngStream rng_ep = RngStream::sub(eval_seed, "eval-episode-" + std::to_string(ep));
    RngStream rng_act = RngStream::sub(eval_seed, "random-act-" + std::to_string(ep));
    env->reset(rng_ep);
    double ret = 0;
    bool done = false;
    while (!done) {
      VecF a(da);
      for (int i = 0; i < da; ++i) a(i) = static_cast<float>(rng_act.uniform(-1.0, 1.0));
      StepResult sr = env->step(a);
      ret += sr.reward;
      done = sr.done;
    }
    res.returns.push_back(ret);
  }
  const double n = static_cast<double>(res.returns.size());
  for (double r : res.returns) res.mean += r;
  res.mean /= n;
  for (double r : res.returns) res.stddev += (r - res.mean) * (r - res.mean);
  res.stddev = n > 1 ? std::sqrt(res.stddev / (n - 1)) : 0.0;
  return res;
}

Trainer::Trainer(const RunConfig& cfg)
    : cfg_(cfg),
      mode_(cfg.ablation_mode()),
      wiring_(ablation_wiring(mode_)),
      env_(make_env(cfg.task, env_options(cfg))),
      buffer_(cfg.replay_capacity),
      rng_env_(RngStream::sub(cfg.seed, "env")),
      rng_collect_(RngStream::sub(cfg.seed, "collect")),
      rng_buffer_(RngStream::sub(cfg.seed, "buffer")),
      rng_aug_(RngStream::sub(cfg.seed, "augment")),
      rng_critic_(RngStream::sub(cfg.seed, "critic")),
      rng_mib_(RngStream::sub(cfg.seed, "mib")),
      rng_actor_(RngStream::sub(cfg.seed, "actor")),
      start_time_(std::chrono::steady_clock::now()) {
  const EnvSpec spec = env_->spec();
  net_cfg_ = net_config_for(cfg_, spec);
  RngStream rng_init = RngStream::sub(cfg.seed, "init");
  bundle_ = std::make_unique<NetworkBundle<float>>(net_cfg_, rng_init);
  critic_opt_ = std::make_unique<Adam<float>>(bundle_->critic_path_params(), cfg.critic_lr);
  mib_opt_ = std::make_unique<Adam<float>>(bundle_->mib_params(), cfg.mib_lr);
  actor_opt_ = std::make_unique<Adam<float>>(bundle_->actor_params(), cfg.actor_lr);
  // SAC convention: the temperature's Adam runs with beta1 = 0.5
  temp_opt_ = std::make_unique<Adam<float>>(bundle_->temperature_params(), cfg.temp_lr, 0.5);
  obs_ = env_->reset(rng_env_);
}

PreparedBatch<float> Trainer::prepare_batch(const Batch& raw, bool augment) {
  PreparedBatch<float> pb;
  const Eigen::Index B = raw.size();
  pb.obs_image = raw.obs_image.cast<float>() / 255.f;
  pb.next_image = raw.next_image.cast<float>() / 255.f;
  if (augment) {
    VecF tmp(pb.obs_image.rows());
    for (Eigen::Index i = 0; i < B; ++i) {
      tmp = pb.obs_image.col(i);
      random_shift(tmp, raw.channels, raw.height, raw.width, rng_aug_);
      pb.obs_image.col(i) = tmp;
      tmp = pb.next_image.col(i);
      random_shift(tmp, raw.channels, raw.height, raw.width, rng_aug_);
      pb.next_image.col(i) = tmp;
    }
  }
  pb.obs_proprio = raw.obs_proprio;
  pb.next_proprio = raw.next_proprio;
  pb.action = raw.action;
  pb.reward = raw.reward;
  pb.not_done = VecF::Ones(B) - raw.done;
  return pb;
}

void Trainer::collect_interaction() {
  if (need_reset_) {
    obs_ = env_->reset(rng_env_);
    need_reset_ = false;
  }
  const EnvSpec spec = env_->spec();
  VecF action(spec.action_dim);
  if (interactions_ < cfg_.initial_steps) {
    for (int i = 0; i < spec.action_dim; ++i)
      action(i) = static_cast<float>(rng_collect_.uniform(-1.0, 1.0));
  } else {
    FloatObs f = preprocess(obs_);
    action = act(*bundle_, obs_image_matrix(f), obs_proprio_matrix(f), ActMode::kStochastic,
                 rng_collect_, mode_);
  }
  proprio_std_.update(obs_.proprio);
  StepResult sr = env_->step(action);
  Transition t;
  t.obs = obs_;
  t.action = action;
  t.reward = sr.reward;
  t.next_obs = sr.obs;
  // time-limit terminations bootstrap: stored non-terminal
  t.done = sr.done && !sr.truncated;
  buffer_.push(t);
  episode_return_ += sr.reward;
  if (sr.done) {
    need_reset_ = true;
    last_episode_return_ = episode_return_;
    episode_return_ = 0;
    ++episodes_done_;
  } else {
    obs_ = std::move(sr.obs);
  }
  ++interactions_;
}

void Trainer::update_once() {
  Batch raw = buffer_.sample(cfg_.batch_size, rng_buffer_);
  PreparedBatch<float> pb = prepare_batch(raw, /*augment=*/true);
  TargetNextCache<float> tc;

  last_.critic_loss = critic_update<float>(*bundle_, pb, static_cast<float>(cfg_.discount),
                                           rng_critic_, *critic_opt_, mode_, &tc);

  if (wiring_.run_mib_update) {
    mib_opt_->zero_grad();
    const float eff_alpha = static_cast<float>(cfg_.alpha * wiring_.alpha_scale);
    LossBreakdown lb = mib_loss<float>(*bundle_, pb, eff_alpha, rng_mib_, mode_, &tc);
    mib_opt_->step();
    last_.kl_term = lb.kl_term;
    last_.infonce_term = lb.infonce_term;
    last_.mib_total = lb.total;
    last_.alpha = lb.alpha;
  } else {
    last_.kl_term = 0;
    last_.infonce_term = 0;
    last_.mib_total = 0;
    last_.alpha = 0;
  }

  if (updates_ % cfg_.actor_update_freq == cfg_.actor_update_freq - 1) {
    auto [actor_loss, logp] = actor_update<float>(*bundle_, pb, rng_actor_, *actor_opt_, mode_);
    last_.actor_loss = actor_loss;
    const float target_entropy = -static_cast<float>(net_cfg_.action_dim);
    last_.alpha_loss = temperature_update<float>(*bundle_, logp, target_entropy, *temp_opt_);
  }

  ema_update(bundle_->encoder_online_params(), bundle_->encoder_target_params(),
             cfg_.encoder_tau);
  if (updates_ % cfg_.critic_target_update_freq == cfg_.critic_target_update_freq - 1)
    ema_update(bundle_->critic_online_params(), bundle_->critic_target_params(), cfg_.critic_tau);

  ++updates_;
  if (metrics_ && updates_ % cfg_.update_log_interval == 0) write_train_record();
}

void Trainer::write_train_record() {
  json j;
  j["schema"] = kMetricsSchemaVersion;
  j["type"] = "train";
  j["step"] = env_steps();
  j["update"] = updates_;
  j["kl_term"] = last_.kl_term;
  j["infonce_term"] = last_.infonce_term;
  j["mib_total"] = last_.mib_total;
  j["alpha"] = last_.alpha;
  j["critic_loss"] = last_.critic_loss;
  j["actor_loss"] = last_.actor_loss;
  j["alpha_loss"] = last_.alpha_loss;
  j["temperature"] = bundle_->temperature();
  j["episodes"] = episodes_done_;
  j["last_episode_return"] = last_episode_return_;
  j["wall_clock"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time_).count();
  metrics_->write_line(j.dump());
}

EvalResult Trainer::evaluate(int episodes, std::uint64_t eval_seed) {
  return evaluate_policy(*bundle_, cfg_, episodes, eval_seed, nullptr, &proprio_std_);
}

std::pair<EvalResult, EvalResult> Trainer::robustness_evaluate(const PerturbationConfig& pert,
                                                               int episodes,
                                                               std::uint64_t eval_seed) {
  EvalResult clean = evaluate_policy(*bundle_, cfg_, episodes, eval_seed, nullptr, &proprio_std_);
  EvalResult noisy = evaluate_policy(*bundle_, cfg_, episodes, eval_seed, &pert, &proprio_std_);
  if (!metrics_) {
    fs::create_directories(cfg_.out_dir);
    metrics_ = std::make_unique<MetricsWriter>(cfg_.out_dir + "/metrics.jsonl", /*append=*/true);
  }
  if (metrics_) {
    json j;
    j["schema"] = kMetricsSchemaVersion;
    j["type"] = "robustness_eval";
    j["step"] = env_steps();
    j["return_mean"] = clean.mean;
    j["return_std"] = clean.stddev;
    j["perturbed_mean"] = noisy.mean;
    j["perturbed_std"] = noisy.stddev;
    j["noise_std"] = pert.proprio_noise_std;
    j["background"] =
        pert.background == PerturbationConfig::Background::kMovingPattern ? "moving_pattern"
                                                                          : "none";
    j["episodes"] = episodes;
    metrics_->write_line(j.dump());
  }
  return {clean, noisy};
}

void Trainer::maybe_eval_and_checkpoint(bool force) {
  const long interval_interactions = std::max<long>(1, cfg_.eval_interval / cfg_.action_repeat);
  if (!force && interactions_ % interval_interactions != 0) return;
  if (interactions_ == last_eval_interactions_) return;
  last_eval_interactions_ = interactions_;
  EvalResult ev = evaluate(cfg_.eval_episodes, cfg_.seed + 7777);
  if (metrics_) {
    json j;
    j["schema"] = kMetricsSchemaVersion;
    j["type"] = "eval";
    j["step"] = env_steps();
    j["update"] = updates_;
    j["return_mean"] = ev.mean;
    j["return_std"] = ev.stddev;
    j["episodes"] = cfg_.eval_episodes;
    j["wall_clock"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time_).count();
    metrics_->write_line(j.dump());
  }
  save_checkpoint_file(cfg_.out_dir + "/ckpt_latest.mib");
  std::printf("[train %s seed %llu] step %ld/%ld eval return %.2f +- %.2f\n",
              cfg_.ablation.c_str(), static_cast<unsigned long long>(cfg_.seed), env_steps(),
              cfg_.total_env_steps, ev.mean, ev.stddev);
  std::fflush(stdout);
}

void Trainer::train() {
  fs::create_directories(cfg_.out_dir);
  const std::string latest = cfg_.out_dir + "/ckpt_latest.mib";
  bool resumed = false;
  if (cfg_.restart && fs::exists(latest)) {
    load_checkpoint_file(latest);
    resumed = true;
    std::printf("[train] resumed from %s at env step %ld\n", latest.c_str(), env_steps());
  }
  metrics_ = std::make_unique<MetricsWriter>(cfg_.out_dir + "/metrics.jsonl", resumed);
  if (!resumed) {
    json j;
    j["schema"] = kMetricsSchemaVersion;
    j["type"] = "config";
    j["config"] = json::parse(config_to_json(cfg_));
    metrics_->write_line(j.dump());
  }
  // After a resume the buffer starts empty (transitions are not checkpointed);
  // collection refills it before updates continue.
  const long resume_floor = resumed ? interactions_ + cfg_.initial_steps : 0;
  const long total = cfg_.total_interactions();
  while (interactions_ < total) {
    collect_interaction();
    if (interactions_ > cfg_.initial_steps && interactions_ > resume_floor &&
        buffer_.size() >= std::min<long>(cfg_.batch_size, buffer_.capacity()))
      update_once();
    maybe_eval_and_checkpoint(false);
  }
  maybe_eval_and_checkpoint(true);
  metrics_.reset();
}

void Trainer::save_checkpoint_file(const std::string& path) {
  fs::create_directories(fs::path(path).parent_path().empty()
                             ? fs::path(".")
                             : fs::path(path).parent_path());
  CheckpointData d;
  d.config_json = config_to_json(cfg_);
  d.env_steps = env_steps();
  d.interactions = interactions_;
  d.updates = updates_;
  d.buffer_cursor = buffer_.write_cursor();
  d.rng_states["env"] = rng_env_.state();
  d.rng_states["collect"] = rng_collect_.state();
  d.rng_states["buffer"] = rng_buffer_.state();
  d.rng_states["augment"] = rng_aug_.state();
  d.rng_states["critic"] = rng_critic_.state();
  d.rng_states["mib"] = rng_mib_.state();
  d.rng_states["actor"] = rng_actor_.state();
  d.running_n = proprio_std_.count();
  if (proprio_std_.count() > 0) {
    d.running_mean = proprio_std_.mean_acc();
    d.running_m2 = proprio_std_.m2_acc();
  } else {
    d.running_mean = VecD::Zero(env_->spec().proprio_dim);
    d.running_m2 = VecD::Zero(env_->spec().proprio_dim);
  }
  for (Param<float>* p : bundle_->all_params()) d.tensors.emplace_back(p->name, p->value);
  auto dump_adam = [&d](const char* group, Adam<float>& opt) {
    d.counters[std::string("adam.") + group + ".t"] = opt.step_count();
    const auto& ps = opt.params();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      d.tensors.emplace_back(std::string("adam.") + group + ".m." + ps[i]->name, opt.m()[i]);
      d.tensors.emplace_back(std::string("adam.") + group + ".v." + ps[i]->name, opt.v()[i]);
    }
  };
  dump_adam("critic", *critic_opt_);
  dump_adam("mib", *mib_opt_);
  dump_adam("actor", *actor_opt_);
  dump_adam("temperature", *temp_opt_);
  write_checkpoint(path, d);
}

void Trainer::load_checkpoint_file(const std::string& path) {
  CheckpointData d = read_checkpoint(path);
  const RunConfig stored = config_from_json(d.config_json);
  MIB_CHECK(stored.task == cfg_.task && stored.frame_stack == cfg_.frame_stack &&
                stored.conv_first_stride == cfg_.conv_first_stride,
            "load_checkpoint: incompatible architecture/config");
  interactions_ = d.interactions;
  updates_ = d.updates;
  buffer_.set_write_cursor(d.buffer_cursor);
  rng_env_.set_state(d.rng_states.at("env"));
  rng_collect_.set_state(d.rng_states.at("collect"));
  rng_buffer_.set_state(d.rng_states.at("buffer"));
  rng_aug_.set_state(d.rng_states.at("augment"));
  rng_critic_.set_state(d.rng_states.at("critic"));
  rng_mib_.set_state(d.rng_states.at("mib"));
  rng_actor_.set_state(d.rng_states.at("actor"));
  proprio_std_.restore(d.running_mean, d.running_m2, d.running_n);
  for (Param<float>* p : bundle_->all_params()) {
    const MatF& t = d.tensor(p->name);
    MIB_CHECK(t.rows() == p->value.rows() && t.cols() == p->value.cols(),
              "load_checkpoint: shape mismatch for '" + p->name + "'");
    p->value = t;
  }
  auto load_adam = [&d](const char* group, Adam<float>& opt) {
    opt.set_step_count(d.counters.at(std::string("adam.") + group + ".t"));
    const auto& ps = opt.params();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      opt.m()[i] = d.tensor(std::string("adam.") + group + ".m." + ps[i]->name);
      opt.v()[i] = d.tensor(std::string("adam.") + group + ".v." + ps[i]->name);
    }
  };
  load_adam("critic", *critic_opt_);
  load_adam("mib", *mib_opt_);
  load_adam("actor", *actor_opt_);
  load_adam("temperature", *temp_opt_);
}

std::unique_ptr<Trainer> trainer_from_checkpoint(const std::string& path) {
  CheckpointData d = read_checkpoint(path);
  RunConfig cfg = config_from_json(d.config_json);
  auto t = std::make_unique<Trainer>(cfg);
  t->load_checkpoint_file(path);
  return t;
}

}  // namespace mib
