#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecodrive/microsim.hpp"
#include "ecodrive/nn.hpp"
#include "ecodrive/policy.hpp"
#include "ecodrive/scenario.hpp"

namespace ecodrive::train {

inline constexpr std::array<double, 4> kPenetrationLevels{0.1, 0.2, 0.5, 1.0};
inline constexpr int kLanePhaseBuckets = 7;
inline constexpr int kPartitionCount = static_cast<int>(kPenetrationLevels.size()) * kLanePhaseBuckets;

/// Bucket 0: one lane. Buckets 1-6: 2, 3, and 4+ lanes, each split into <= 3 and >= 4 phases.
struct Partition {
  int penetration_index = 3;
  int bucket = 0;

  double penetration() const { return kPenetrationLevels.at(static_cast<std::size_t>(penetration_index)); }
  int id() const { return penetration_index * kLanePhaseBuckets + bucket; }
  std::string name() const;
  bool operator==(const Partition&) const = default;
};

std::vector<Partition> all_partitions();
Partition partition_from_id(int id);
Partition parse_partition(const std::string& name);
int lane_phase_bucket(int lanes, int phases);
/// Partition of a scenario: nearest penetration level and the bucket of its widest approach.
Partition partition_of(const scenario::ScenarioSpec& spec);

/// Synthetic training environment factors.
struct EnvGrid {
  std::vector<double> inflow{200, 800.0 / 3, 1000.0 / 3, 400};
  std::vector<double> lane_length{50, 850.0 / 3, 1550.0 / 3, 750};
  std::vector<double> speed_limit{6.5, 6.5 + 23.5 / 3, 6.5 + 47.0 / 3, 30};
  std::vector<double> green{15, 25, 35};
  std::vector<double> red{30, 30 + 25.0 / 3, 30 + 50.0 / 3, 55};
  std::vector<double> offset{0.0, 0.2, 0.4, 0.6, 0.8};  ///< fraction of the cycle

  std::size_t size() const {
    return inflow.size() * lane_length.size() * speed_limit.size() * green.size() * red.size() * offset.size();
  }
  /// Every third valuation on each axis (plus the ends); a subset of the full grid.
  EnvGrid reduced() const;
};

/// Representative lane and phase counts for a bucket.
std::pair<int, int> bucket_geometry(int bucket);

/// One environment: an incoming/outgoing approach pair with its ghost feeder.
scenario::ScenarioSpec make_env(const Partition& p, double inflow, double lane_length, double speed_limit, double green,
                                double red, double offset_fraction, std::uint64_t seed);
/// The full product grid for a partition, in mixed-radix order.
std::vector<scenario::ScenarioSpec> make_training_envs(const Partition& p, const EnvGrid& grid = {},
                                                       std::uint64_t seed = 0);
/// Grid index drawn uniformly.
std::size_t sample_env_index(const EnvGrid& grid, Rng& rng);

enum class DecayMode { lr_schedule, weight_decay };

struct TrainConfig {
  int epochs = 300;
  int width = 64;
  int layers = 4;               ///< linear layers per network
  int episodes_per_epoch = 10;
  int horizon = 1500;           ///< steps after warmup
  int update_steps = 10;        ///< gradient steps per epoch
  int minibatch = 2048;         ///< transitions per gradient step; 0 = all
  double lr = 1e-4;
  double gamma = 0.99;
  double clip = 0.03;
  double kl_coef = 0.1;
  double kl_target = 0.02;
  double value_clip = 3.0;
  double value_coef = 1.0;
  double entropy_coef = 0.005;
  double adam_beta1 = 0.9, adam_beta2 = 0.999;
  double decay = 0.97;
  DecayMode decay_mode = DecayMode::lr_schedule;
  int decay_every = 100;        ///< epochs per decay block
  double reward_scale = 0.01;
  double init_log_std = 0.0;
  double max_grad_norm = 0.0;   ///< 0 disables clipping
  int divergence_window = 100;
  std::uint64_t seed = 1;
  bool parallel = true;

  static TrainConfig paper_scale();
};

struct PolicyCheckpoint {
  Partition partition;
  policy::Variant variant = policy::Variant::pi1;
  nn::Mlp actor;
  nn::Mlp critic;
  double log_std = 0.0;
  policy::RewardParams reward;
  policy::ObservationConfig obs;
  double reward_scale = 0.01;
  std::uint64_t seed = 0;
  int epoch = 0;

  bool operator==(const PolicyCheckpoint&) const = default;
};

std::string serialize_checkpoint(const PolicyCheckpoint& c);
PolicyCheckpoint deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const PolicyCheckpoint& c);
PolicyCheckpoint load_checkpoint(const std::filesystem::path& path);

PolicyCheckpoint init_checkpoint(const Partition& p, policy::Variant v, const TrainConfig& cfg);

struct EpochStats {
  int epoch = 0;
  double mean_return = 0.0;      ///< undiscounted, per controlled vehicle trajectory, unscaled
  double emissions_g = 0.0;      ///< mean per episode
  double throughput = 0.0;       ///< mean per episode
  double kl = 0.0;
  double entropy = 0.0;
  double value_loss = 0.0;
  double kl_coef = 0.0;
  double lr = 0.0;
  std::size_t transitions = 0;
};

std::string epoch_stats_header();
std::string to_csv_row(const EpochStats& s);

class TrainingDiverged : public SimulationFault {
 public:
  TrainingDiverged(const std::string& what, std::vector<EpochStats> history)
      : SimulationFault(what), history(std::move(history)) {}
  std::vector<EpochStats> history;
};

/// One transition as the loss sees it; advantages already normalized.
struct PpoSample {
  double action = 0.0;
  double logp_old = 0.0;
  double advantage = 0.0;
  double mean_old = 0.0;
  double value_old = 0.0;
  double ret = 0.0;
};

struct PpoTerms {
  double loss = 0.0;  ///< policy + kl_coef * kl + value_coef * value - entropy_coef * entropy
  double policy_loss = 0.0, kl = 0.0, value_loss = 0.0, entropy = 0.0;
  std::vector<double> dmean, dvalue;  ///< d loss / d network outputs
  double dlog_std = 0.0;
};

/// Clipped surrogate, KL(old || new) penalty, clipped value loss, and entropy bonus, averaged over the batch.
PpoTerms ppo_loss(std::span<const PpoSample> batch, std::span<const double> mean, std::span<const double> value,
                  double log_std, double log_std_old, double kl_coef, const TrainConfig& cfg);

/// PPO on environments drawn uniformly from `envs`. `on_epoch` sees each epoch's diagnostics.
PolicyCheckpoint ppo_train(const std::vector<scenario::ScenarioSpec>& envs, const Partition& partition,
                           policy::Variant variant, const TrainConfig& cfg, const sim::SimConfig& sim_cfg,
                           const EmissionProvider& emissions,
                           const std::function<void(const EpochStats&)>& on_epoch = {},
                           std::optional<PolicyCheckpoint> warm_start = std::nullopt);

/// Metrics averaged over seeds, with the per-seed runs kept.
struct MetricSummary {
  double emissions_g = 0.0;
  double throughput = 0.0;
  double queue_ratio = 0.0;
  double waiting_time_s = 0.0;
  double control_wait_s = 0.0;
  std::vector<sim::EpisodeMetrics> runs;
};

MetricSummary summarize(const std::vector<sim::EpisodeMetrics>& runs);

inline const std::vector<std::uint64_t> kEvaluationSeeds{101, 202, 303, 404, 505};

/// Evaluates a checkpoint (mean action) or, when `checkpoint` is null, the baseline.
MetricSummary evaluate_policy(const PolicyCheckpoint* checkpoint, const scenario::ScenarioSpec& spec,
                              const std::vector<std::uint64_t>& seeds, int horizon, const sim::SimConfig& sim_cfg,
                              const EmissionProvider& emissions, bool check_partition = true);

/// Fixed-time plan search: every phase gets the same green from `greens`; maximizes baseline throughput,
/// ties go to the shorter cycle. Ghost plans are left untouched.
scenario::SignalPlan tune_signal(const scenario::ScenarioSpec& spec, const std::vector<double>& greens,
                                 const std::vector<std::uint64_t>& seeds, int horizon, const sim::SimConfig& sim_cfg,
                                 const EmissionProvider& emissions);
std::vector<double> default_green_grid();

}  // namespace ecodrive::train
