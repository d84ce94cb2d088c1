#include "ecodrive/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <fmt/core.h>

#include "ecodrive/binio.hpp"
#include "ecodrive/common.hpp"

namespace ecodrive::train {

using policy::kObservationSize;
using policy::Observation;

// ---------------------------------------------------------------------------
// Partitions

std::string Partition::name() const {
  return fmt::format("p{:03d}-b{}", static_cast<int>(std::lround(penetration() * 100)), bucket);
}

std::vector<Partition> all_partitions() {
  std::vector<Partition> out;
  for (int p = 0; p < static_cast<int>(kPenetrationLevels.size()); ++p)
    for (int b = 0; b < kLanePhaseBuckets; ++b) out.push_back(Partition{p, b});
  return out;
}

Partition partition_from_id(int id) {
  if (id < 0 || id >= kPartitionCount) throw UsageError(fmt::format("partition id {} out of range", id));
  return Partition{id / kLanePhaseBuckets, id % kLanePhaseBuckets};
}

Partition parse_partition(const std::string& name) {
  for (const auto& p : all_partitions())
    if (p.name() == name) return p;
  throw UsageError(fmt::format("unknown partition '{}' (expected e.g. p100-b0)", name));
}

int lane_phase_bucket(int lanes, int phases) {
  if (lanes < 1) throw ValidationError("lane count must be positive");
  if (lanes == 1) return 0;
  const int lane_group = std::min(lanes, 4) - 2;  // 0: 2 lanes, 1: 3 lanes, 2: 4+ lanes
  return 1 + 2 * lane_group + (phases >= 4 ? 1 : 0);
}

std::pair<int, int> bucket_geometry(int bucket) {
  if (bucket < 0 || bucket >= kLanePhaseBuckets) throw UsageError(fmt::format("bucket {} out of range", bucket));
  if (bucket == 0) return {1, 2};
  const int lanes = 2 + (bucket - 1) / 2;
  const int phases = (bucket - 1) % 2 == 0 ? 2 : 4;
  return {lanes, phases};
}

Partition partition_of(const scenario::ScenarioSpec& spec) {
  int lanes = 1;
  for (const auto& a : spec.geometry.incoming) lanes = std::max(lanes, a.lane_count);
  int best = 0;
  for (int i = 1; i < static_cast<int>(kPenetrationLevels.size()); ++i)
    if (std::abs(kPenetrationLevels[static_cast<std::size_t>(i)] - spec.penetration) <
        std::abs(kPenetrationLevels[static_cast<std::size_t>(best)] - spec.penetration))
      best = i;
  return Partition{best, lane_phase_bucket(lanes, spec.geometry.phase_count)};
}

// ---------------------------------------------------------------------------
// Environments

EnvGrid EnvGrid::reduced() const {
  auto thin = [](const std::vector<double>& v) {
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); i += 3) out.push_back(v[i]);
    if (out.back() != v.back()) out.push_back(v.back());
    return out;
  };
  EnvGrid g;
  g.inflow = thin(inflow);
  g.lane_length = thin(lane_length);
  g.speed_limit = thin(speed_limit);
  g.green = thin(green);
  g.red = thin(red);
  g.offset = thin(offset);
  return g;
}

scenario::ScenarioSpec make_env(const Partition& p, double inflow, double lane_length, double speed_limit, double green,
                                double red, double offset_fraction, std::uint64_t seed) {
  const auto [lanes, phases] = bucket_geometry(p.bucket);
  scenario::ScenarioSpec s;
  s.geometry.phase_count = phases;
  s.geometry.incoming.push_back(scenario::Approach{lanes, lane_length, speed_limit, 0.0, false});
  s.geometry.outgoing.push_back(scenario::Approach{lanes, std::min(lane_length, 200.0), speed_limit, 0.0, false});
  // The served approach sees `green`, then `red` seconds split evenly over the other phases.
  constexpr double yellow = 3.0;
  std::vector<scenario::Phase> list{scenario::Phase{green, yellow, 0.0}};
  for (int k = 1; k < phases; ++k) list.push_back(scenario::Phase{red / (phases - 1) - yellow, yellow, 0.0});
  s.control_signal = scenario::SignalPlan(list, 0.0);
  s.control_signal.offset_s = offset_fraction * s.control_signal.cycle_length();
  s.ghost_signals.push_back(scenario::default_ghost_plan());
  s.inflows.push_back(inflow);
  s.penetration = p.penetration();
  s.seed = seed;
  scenario::validate(s);
  return s;
}

std::vector<scenario::ScenarioSpec> make_training_envs(const Partition& p, const EnvGrid& g, std::uint64_t seed) {
  std::vector<scenario::ScenarioSpec> out;
  out.reserve(g.size());
  std::size_t index = 0;
  for (double q : g.inflow)
    for (double len : g.lane_length)
      for (double v : g.speed_limit)
        for (double green : g.green)
          for (double red : g.red)
            for (double off : g.offset) {
              auto s = make_env(p, q, len, v, green, red, off, hash_combine(seed, index, stream::sampling));
              s.id = fmt::format("{}-e{:04d}", p.name(), index++);
              out.push_back(std::move(s));
            }
  return out;
}

std::size_t sample_env_index(const EnvGrid& grid, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, grid.size() - 1);
  return d(rng);
}

// ---------------------------------------------------------------------------
// Config and checkpoints

TrainConfig TrainConfig::paper_scale() {
  TrainConfig c;
  c.epochs = 5000;
  c.width = 256;
  return c;
}

PolicyCheckpoint init_checkpoint(const Partition& p, policy::Variant v, const TrainConfig& cfg) {
  if (cfg.layers < 2) throw ConfigError("networks need at least two linear layers");
  std::vector<int> sizes{kObservationSize};
  for (int l = 0; l + 1 < cfg.layers; ++l) sizes.push_back(cfg.width);
  sizes.push_back(1);
  PolicyCheckpoint c;
  c.partition = p;
  c.variant = v;
  c.actor = nn::Mlp(sizes);
  c.critic = nn::Mlp(sizes);
  c.actor.init_orthogonal(hash_combine(cfg.seed, 1), std::sqrt(2.0), 0.01);
  c.critic.init_orthogonal(hash_combine(cfg.seed, 2), std::sqrt(2.0), 1.0);
  c.log_std = cfg.init_log_std;
  c.reward = policy::reward_params(v);
  c.reward_scale = cfg.reward_scale;
  c.seed = cfg.seed;
  return c;
}

namespace {

void write_mlp(binio::Writer& w, const nn::Mlp& m) {
  w.u32(static_cast<std::uint32_t>(m.sizes().size()));
  for (int s : m.sizes()) w.i32(s);
  w.f64s(m.params());
}

nn::Mlp read_mlp(binio::Reader& r) {
  const auto n = r.u32();
  if (n < 2 || n > 32) throw DataError("checkpoint network depth out of range");
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i < n; ++i) {
    sizes.push_back(r.i32());
    if (sizes.back() <= 0 || sizes.back() > 65536) throw DataError("checkpoint layer size out of range");
  }
  nn::Mlp m(sizes);
  auto p = r.f64s();
  if (p.size() != m.param_count()) throw DataError("checkpoint weight count does not match its architecture");
  m.params() = std::move(p);
  return m;
}

}  // namespace

std::string serialize_checkpoint(const PolicyCheckpoint& c) {
  binio::Writer w;
  w.magic("ECOCKPT1");
  w.u32(static_cast<std::uint32_t>(kSchemaVersion));
  w.i32(c.partition.id());
  w.i32(c.variant == policy::Variant::pi1 ? 1 : 2);
  w.u64(c.seed);
  w.i32(c.epoch);
  w.f64(c.log_std);
  w.f64(c.reward.alpha);
  w.f64(c.reward.beta);
  w.f64(c.reward.tau_stop);
  w.f64(c.reward_scale);
  for (double v : {c.obs.sensing_range, c.obs.signal_range, c.obs.speed_scale, c.obs.distance_scale, c.obs.time_scale,
                   c.obs.lane_scale, c.obs.length_scale, c.obs.phase_scale})
    w.f64(v);
  write_mlp(w, c.actor);
  write_mlp(w, c.critic);
  return w.bytes();
}

PolicyCheckpoint deserialize_checkpoint(const std::string& bytes) {
  binio::Reader r(bytes);
  r.expect_magic("ECOCKPT1");
  if (r.u32() != static_cast<std::uint32_t>(kSchemaVersion)) throw DataError("unsupported checkpoint version");
  PolicyCheckpoint c;
  const int pid = r.i32();
  if (pid < 0 || pid >= kPartitionCount) throw DataError("checkpoint partition out of range");
  c.partition = partition_from_id(pid);
  const int variant = r.i32();
  if (variant != 1 && variant != 2) throw DataError("checkpoint variant must be pi1 or pi2");
  c.variant = variant == 1 ? policy::Variant::pi1 : policy::Variant::pi2;
  c.seed = r.u64();
  c.epoch = r.i32();
  c.log_std = r.f64();
  c.reward.alpha = r.f64();
  c.reward.beta = r.f64();
  c.reward.tau_stop = r.f64();
  c.reward_scale = r.f64();
  for (double* v : {&c.obs.sensing_range, &c.obs.signal_range, &c.obs.speed_scale, &c.obs.distance_scale,
                    &c.obs.time_scale, &c.obs.lane_scale, &c.obs.length_scale, &c.obs.phase_scale})
    *v = r.f64();
  c.actor = read_mlp(r);
  c.critic = read_mlp(r);
  if (!r.done()) throw DataError("trailing bytes after checkpoint");
  if (c.actor.inputs() != kObservationSize || c.actor.outputs() != 1 || c.critic.inputs() != kObservationSize ||
      c.critic.outputs() != 1)
    throw DataError("checkpoint networks do not match the observation layout");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const PolicyCheckpoint& c) {
  write_file_atomic(path, serialize_checkpoint(c));
}

PolicyCheckpoint load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file(path)); }

std::string epoch_stats_header() {
  return "epoch,mean_return,emissions_g,throughput,kl,entropy,value_loss,kl_coef,lr,transitions\n";
}

std::string to_csv_row(const EpochStats& s) {
  return fmt::format("{},{:.6f},{:.4f},{:.3f},{:.6g},{:.6f},{:.6g},{:.6g},{:.6g},{}\n", s.epoch, s.mean_return,
                     s.emissions_g, s.throughput, s.kl, s.entropy, s.value_loss, s.kl_coef, s.lr, s.transitions);
}

// ---------------------------------------------------------------------------
// PPO

namespace {

struct Transition {
  Observation obs;
  double action = 0.0;
  double logp = 0.0;
  double reward = 0.0;  ///< scaled
};

struct Trajectory {
  std::vector<std::size_t> steps;  ///< indices into the episode's transitions
  bool terminal = false;
  Observation bootstrap{};
};

struct EpisodeData {
  std::vector<Transition> transitions;
  std::vector<Trajectory> trajectories;
  sim::EpisodeMetrics metrics;
  double raw_return = 0.0;  ///< unscaled reward summed over all trajectories
};

EpisodeData rollout(const scenario::ScenarioSpec& spec, const PolicyCheckpoint& ckpt, int horizon,
                    const sim::SimConfig& sim_cfg, const EmissionProvider& emissions, std::uint64_t seed) {
  sim::Engine engine(spec, sim_cfg, emissions.clone(), seed);
  Rng rng = make_rng(seed, stream::policy);
  std::normal_distribution<double> normal;
  const double std_dev = std::exp(ckpt.log_std);
  EpisodeData data;
  std::unordered_map<sim::VehicleId, std::size_t> open;  // vehicle -> trajectory
  std::vector<double> x, accel;
  const int total = sim_cfg.warmup_steps + horizon;
  for (int k = 0; k < total; ++k) {
    engine.begin_step();
    const auto ids = engine.policy_vehicles();
    x.clear();
    std::vector<Observation> obs;
    obs.reserve(ids.size());
    for (auto id : ids) {
      obs.push_back(policy::encode_observation(engine, id, ckpt.obs));
      x.insert(x.end(), obs.back().begin(), obs.back().end());
    }
    accel.assign(ids.size(), 0.0);
    std::vector<double> means;
    if (!ids.empty()) means = ckpt.actor.predict(x, static_cast<int>(ids.size()), nn::Exec::serial);
    for (std::size_t i = 0; i < ids.size(); ++i) accel[i] = means[i] + std_dev * normal(rng);
    engine.finish_step(ids, accel);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto* out = engine.outcome(ids[i]);
      const double r = policy::reward(out->vel, out->grams, ckpt.reward);
      data.raw_return += r;
      auto [it, fresh] = open.try_emplace(ids[i], data.trajectories.size());
      if (fresh) data.trajectories.emplace_back();
      data.trajectories[it->second].steps.push_back(data.transitions.size());
      data.transitions.push_back(
          Transition{obs[i], accel[i], nn::gaussian_log_prob(accel[i], means[i], ckpt.log_std), r * ckpt.reward_scale});
      if (out->exited) {
        data.trajectories[it->second].terminal = true;
        open.erase(it);
      }
    }
  }
  for (auto& [id, t] : open) {
    if (engine.find(id) != nullptr) data.trajectories[t].bootstrap = policy::encode_observation(engine, id, ckpt.obs);
    else data.trajectories[t].terminal = true;
  }
  data.metrics = engine.metrics();
  return data;
}

}  // namespace

PpoTerms ppo_loss(std::span<const PpoSample> batch, std::span<const double> mean, std::span<const double> value,
                  double log_std, double log_std_old, double kl_coef, const TrainConfig& cfg) {
  const std::size_t n = batch.size();
  if (mean.size() != n || value.size() != n) throw UsageError("ppo_loss: batch and network outputs differ in size");
  PpoTerms t;
  t.dmean.assign(n, 0.0);
  t.dvalue.assign(n, 0.0);
  if (n == 0) return t;
  const double var = std::exp(2.0 * log_std);
  const double var_old = std::exp(2.0 * log_std_old);
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& s = batch[r];
    // Clipped surrogate.
    const double ratio = std::exp(nn::gaussian_log_prob(s.action, mean[r], log_std) - s.logp_old);
    const double unclipped = ratio * s.advantage;
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * s.advantage;
    if (unclipped <= clipped) {
      const double u = s.action - mean[r];
      t.dmean[r] -= s.advantage * ratio * u / var * inv;
      t.dlog_std -= s.advantage * ratio * (u * u / var - 1.0) * inv;
    }
    t.policy_loss -= std::min(unclipped, clipped) * inv;
    // KL(old || new) penalty.
    const double d = mean[r] - s.mean_old;
    t.kl += nn::gaussian_kl(s.mean_old, log_std_old, mean[r], log_std) * inv;
    t.dmean[r] += kl_coef * d / var * inv;
    t.dlog_std += kl_coef * (1.0 - (var_old + d * d) / var) * inv;
    // Clipped value loss.
    const double v_clip = s.value_old + std::clamp(value[r] - s.value_old, -cfg.value_clip, cfg.value_clip);
    const double e1 = value[r] - s.ret, e2 = v_clip - s.ret;
    if (e1 * e1 >= e2 * e2) {
      t.dvalue[r] = cfg.value_coef * 2.0 * e1 * inv;
      t.value_loss += e1 * e1 * inv;
    } else {
      const bool inside = std::abs(value[r] - s.value_old) < cfg.value_clip;
      t.dvalue[r] = inside ? cfg.value_coef * 2.0 * e2 * inv : 0.0;
      t.value_loss += e2 * e2 * inv;
    }
  }
  t.entropy = nn::gaussian_entropy(log_std);
  t.dlog_std -= cfg.entropy_coef;
  t.loss = t.policy_loss + kl_coef * t.kl + cfg.value_coef * t.value_loss - cfg.entropy_coef * t.entropy;
  return t;
}

PolicyCheckpoint ppo_train(const std::vector<scenario::ScenarioSpec>& envs, const Partition& partition,
                           policy::Variant variant, const TrainConfig& cfg, const sim::SimConfig& sim_cfg,
                           const EmissionProvider& emissions, const std::function<void(const EpochStats&)>& on_epoch,
                           std::optional<PolicyCheckpoint> warm_start) {
  if (envs.empty()) throw ConfigError("no training environments");
  if (cfg.epochs < 0 || cfg.episodes_per_epoch < 1 || cfg.update_steps < 0) throw ConfigError("invalid training schedule");
  PolicyCheckpoint ckpt = warm_start ? *warm_start : init_checkpoint(partition, variant, cfg);
  ckpt.partition = partition;
  ckpt.variant = variant;
  ckpt.reward = policy::reward_params(variant);
  ckpt.reward_scale = cfg.reward_scale;
  ckpt.seed = cfg.seed;

  nn::AdamConfig acfg{cfg.lr, cfg.adam_beta1, cfg.adam_beta2, 1e-8, 0.0};
  if (cfg.decay_mode == DecayMode::weight_decay) acfg.weight_decay = 1.0 - cfg.decay;
  nn::Adam actor_opt(ckpt.actor.param_count(), acfg), critic_opt(ckpt.critic.param_count(), acfg), std_opt(1, acfg);
  double kl_coef = cfg.kl_coef;
  const auto exec = cfg.parallel ? nn::Exec::parallel : nn::Exec::serial;

  Rng rng = make_rng(cfg.seed, stream::sampling);
  std::optional<double> untrained_return;
  int below = 0;
  std::vector<EpochStats> history;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = cfg.lr;
    if (cfg.decay_mode == DecayMode::lr_schedule) lr *= std::pow(cfg.decay, epoch / std::max(1, cfg.decay_every));
    for (auto* opt : {&actor_opt, &critic_opt, &std_opt}) opt->config().lr = lr;

    // Rollouts.
    std::vector<std::size_t> env_index(static_cast<std::size_t>(cfg.episodes_per_epoch));
    std::uniform_int_distribution<std::size_t> pick(0, envs.size() - 1);
    for (auto& e : env_index) e = pick(rng);
    std::vector<EpisodeData> episodes(env_index.size());
    std::vector<std::string> errors(env_index.size());
#pragma omp parallel for schedule(dynamic, 1) if (cfg.parallel)
    for (int e = 0; e < cfg.episodes_per_epoch; ++e) {
      const auto ue = static_cast<std::size_t>(e);
      try {
        episodes[ue] = rollout(envs[env_index[ue]], ckpt, cfg.horizon, sim_cfg, emissions,
                               hash_combine(cfg.seed, static_cast<std::uint64_t>(epoch), ue));
      } catch (const std::exception& ex) {
        errors[ue] = ex.what();
      }
    }
    for (const auto& err : errors)
      if (!err.empty()) throw SimulationFault(err);

    // Discounted returns, bootstrapped with the current critic at truncation.
    std::vector<double> boot_obs;
    std::size_t boot_count = 0;
    EpochStats stats;
    stats.epoch = epoch;
    std::size_t traj_count = 0;
    for (const auto& ep : episodes) {
      stats.emissions_g += ep.metrics.emissions_g / static_cast<double>(episodes.size());
      stats.throughput += ep.metrics.throughput / static_cast<double>(episodes.size());
      stats.mean_return += ep.raw_return;
      traj_count += ep.trajectories.size();
      for (const auto& tr : ep.trajectories)
        if (!tr.terminal) {
          boot_obs.insert(boot_obs.end(), tr.bootstrap.begin(), tr.bootstrap.end());
          ++boot_count;
        }
    }
    stats.mean_return = traj_count ? stats.mean_return / static_cast<double>(traj_count) : 0.0;
    std::vector<double> boot_values;
    if (boot_count) boot_values = ckpt.critic.predict(boot_obs, static_cast<int>(boot_count), exec);
    std::size_t boot_k = 0;
    std::vector<const Transition*> rows;
    std::vector<double> ret;
    for (const auto& ep : episodes) {
      std::vector<double> returns(ep.transitions.size(), 0.0);
      for (const auto& tr : ep.trajectories) {
        double g = tr.terminal ? 0.0 : boot_values[boot_k++];
        for (auto it = tr.steps.rbegin(); it != tr.steps.rend(); ++it) {
          g = ep.transitions[*it].reward + cfg.gamma * g;
          returns[*it] = g;
        }
      }
      for (std::size_t i = 0; i < ep.transitions.size(); ++i) {
        rows.push_back(&ep.transitions[i]);
        ret.push_back(returns[i]);
      }
    }
    const std::size_t n = rows.size();
    stats.transitions = n;
    if (n == 0) {
      history.push_back(stats);
      if (on_epoch) on_epoch(stats);
      continue;
    }

    // Minibatches are drawn up front; old-policy quantities are only needed on sampled rows.
    const std::size_t mb = cfg.minibatch > 0 ? std::min<std::size_t>(n, static_cast<std::size_t>(cfg.minibatch)) : n;
    std::vector<std::vector<std::size_t>> batches;
    {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      for (int step = 0; step < cfg.update_steps; ++step) {
        if (mb < n) std::shuffle(order.begin(), order.end(), rng);
        batches.emplace_back(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(mb));
      }
    }
    constexpr std::size_t none = static_cast<std::size_t>(-1);
    std::vector<std::size_t> slot(n, none), used;
    for (const auto& batch : batches)
      for (auto i : batch)
        if (slot[i] == none) {
          slot[i] = used.size();
          used.push_back(i);
        }
    auto gather = [&](const std::vector<std::size_t>& idx, std::vector<double>& x) {
      x.resize(idx.size() * kObservationSize);
      for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy_n(rows[idx[r]]->obs.begin(), kObservationSize, x.begin() + static_cast<std::ptrdiff_t>(r * kObservationSize));
    };
    std::vector<double> x_used, value_old, mean_old, adv(used.size());
    gather(used, x_used);
    if (!used.empty()) {
      value_old = ckpt.critic.predict(x_used, static_cast<int>(used.size()), exec);
      mean_old = ckpt.actor.predict(x_used, static_cast<int>(used.size()), exec);
    }
    double mean_adv = 0.0, var_adv = 0.0;
    for (std::size_t k = 0; k < used.size(); ++k) adv[k] = ret[used[k]] - value_old[k];
    for (double a : adv) mean_adv += a / static_cast<double>(adv.size());
    for (double a : adv) var_adv += (a - mean_adv) * (a - mean_adv) / static_cast<double>(adv.size());
    const double sd_adv = std::sqrt(var_adv) + 1e-8;
    for (double& a : adv) a = (a - mean_adv) / sd_adv;
    const double log_std_old = ckpt.log_std;

    // Gradient steps.
    std::vector<double> x, g_actor(ckpt.actor.param_count()), g_critic(ckpt.critic.param_count());
    std::vector<PpoSample> samples;
    nn::Workspace wa, wc;
    double value_loss = 0.0;
    for (const auto& batch : batches) {
      gather(batch, x);
      ckpt.actor.forward(x, static_cast<int>(mb), wa, exec);
      ckpt.critic.forward(x, static_cast<int>(mb), wc, exec);
      const auto& mean = wa.acts.back();
      const auto& value = wc.acts.back();
      samples.clear();
      for (auto i : batch) {
        const std::size_t k = slot[i];
        samples.push_back(PpoSample{rows[i]->action, rows[i]->logp, adv[k], mean_old[k], value_old[k], ret[i]});
      }
      const auto terms = ppo_loss(samples, mean, value, ckpt.log_std, log_std_old, kl_coef, cfg);
      value_loss = terms.value_loss;
      const double dls = terms.dlog_std;
      std::fill(g_actor.begin(), g_actor.end(), 0.0);
      std::fill(g_critic.begin(), g_critic.end(), 0.0);
      ckpt.actor.backward(wa, terms.dmean, g_actor, exec);
      ckpt.critic.backward(wc, terms.dvalue, g_critic, exec);
      if (cfg.max_grad_norm > 0) {
        nn::clip_grad_norm(g_actor, cfg.max_grad_norm);
        nn::clip_grad_norm(g_critic, cfg.max_grad_norm);
      }
      actor_opt.step(ckpt.actor.params(), g_actor);
      critic_opt.step(ckpt.critic.params(), g_critic);
      double ls_param[1] = {ckpt.log_std};
      const double ls_grad[1] = {dls};
      std_opt.step(ls_param, ls_grad);
      ckpt.log_std = ls_param[0];
    }

    // Diagnostics and the adaptive KL coefficient.
    double kl = 0.0;
    if (!used.empty()) {
      const auto mean_new = ckpt.actor.predict(x_used, static_cast<int>(used.size()), exec);
      for (std::size_t k = 0; k < used.size(); ++k)
        kl += nn::gaussian_kl(mean_old[k], log_std_old, mean_new[k], ckpt.log_std) / static_cast<double>(used.size());
    }
    stats.kl = kl;
    stats.entropy = nn::gaussian_entropy(ckpt.log_std);
    stats.value_loss = value_loss;
    stats.kl_coef = kl_coef;
    stats.lr = lr;
    if (kl > 1.5 * cfg.kl_target) kl_coef *= 2.0;
    else if (kl < cfg.kl_target / 1.5) kl_coef *= 0.5;
    ckpt.epoch = epoch + 1;
    history.push_back(stats);
    if (on_epoch) on_epoch(stats);

    if (!untrained_return) untrained_return = stats.mean_return;
    const double floor = *untrained_return - 0.5 * std::abs(*untrained_return);
    below = stats.mean_return < floor ? below + 1 : 0;
    if (cfg.divergence_window > 0 && below >= cfg.divergence_window)
      throw TrainingDiverged(fmt::format("training diverged: mean return stayed below {:.3f} (untrained {:.3f}) for {} epochs; "
                                         "last return {:.3f}, KL {:.4g}, value loss {:.4g}",
                                         floor, *untrained_return, below, stats.mean_return, stats.kl, stats.value_loss),
                             history);
  }
  return ckpt;
}

// ---------------------------------------------------------------------------
// Evaluation

MetricSummary summarize(const std::vector<sim::EpisodeMetrics>& runs) {
  MetricSummary s;
  s.runs = runs;
  if (runs.empty()) return s;
  const double n = static_cast<double>(runs.size());
  for (const auto& m : runs) {
    s.emissions_g += m.emissions_g / n;
    s.throughput += m.throughput / n;
    s.queue_ratio += m.queue_ratio / n;
    s.waiting_time_s += m.waiting_time_s / n;
    s.control_wait_s += m.control_wait_s / n;
  }
  return s;
}

MetricSummary evaluate_policy(const PolicyCheckpoint* checkpoint, const scenario::ScenarioSpec& spec,
                              const std::vector<std::uint64_t>& seeds, int horizon, const sim::SimConfig& sim_cfg,
                              const EmissionProvider& emissions, bool check_partition) {
  if (seeds.empty()) throw UsageError("evaluation needs at least one seed");
  std::vector<sim::EpisodeResult> results;
  if (checkpoint) {
    if (check_partition && !(partition_of(spec) == checkpoint->partition))
      throw UsageError(fmt::format("checkpoint for partition {} cannot evaluate scenario '{}' of partition {}",
                                   checkpoint->partition.name(), spec.id, partition_of(spec).name()));
    policy::PolicyController ctl(std::make_shared<const nn::Mlp>(checkpoint->actor), checkpoint->obs);
    results = sim::run_episodes(spec, ctl, horizon, sim_cfg, emissions, seeds);
  } else {
    results = sim::run_episodes(spec, sim::BaselineController{}, horizon, sim_cfg, emissions, seeds);
  }
  std::vector<sim::EpisodeMetrics> runs;
  for (const auto& r : results) runs.push_back(r.metrics);
  return summarize(runs);
}

std::vector<double> default_green_grid() { return {15, 20, 25, 30, 35, 40, 45}; }

scenario::SignalPlan tune_signal(const scenario::ScenarioSpec& spec, const std::vector<double>& greens,
                                 const std::vector<std::uint64_t>& seeds, int horizon, const sim::SimConfig& sim_cfg,
                                 const EmissionProvider& emissions) {
  if (greens.empty()) throw ConfigError("green grid is empty");
  const auto& current = spec.control_signal;
  const double offset_frac = current.cycle_length() > 0 ? current.offset_s / current.cycle_length() : 0.0;
  auto plan_for = [&](double g) {
    scenario::SignalPlan p = current;
    for (auto& ph : p.phases) ph.green_s = g;
    p.offset_s = offset_frac * p.cycle_length();
    return p;
  };
  if (greens.size() == 1) return plan_for(greens.front());
  std::optional<scenario::SignalPlan> best;
  double best_tp = -1.0;
  for (double g : greens) {
    auto s = spec;
    s.control_signal = plan_for(g);
    const double tp = evaluate_policy(nullptr, s, seeds, horizon, sim_cfg, emissions, false).throughput;
    if (!best || tp > best_tp || (tp == best_tp && s.control_signal.cycle_length() < best->cycle_length())) {
      best = s.control_signal;
      best_tp = tp;
    }
  }
  return *best;
}

}  // namespace ecodrive::train
