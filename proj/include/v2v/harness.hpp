#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "v2v/clearing.hpp"
#include "v2v/config.hpp"
#include "v2v/learner.hpp"
#include "v2v/metrics.hpp"

namespace v2v::harness {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kStepsPerDay = 16;  // 30-minute steps, 8-hour trading window

enum class RunMode { Train, Eval1Day, Eval30Day, Sweep, Ablate };

RunMode mode_from_string(const std::string& s);
const char* to_string(RunMode m);

// Everything needed to reproduce a run. The config file supplies
// defaults; nonzero/nonempty fields here override it.
struct RunSpec {
  clearing::Mechanism mechanism = clearing::Mechanism::Nash;
  RunMode mode = RunMode::Train;
  int n_agents = 20;
  std::vector<int> populations;  // sweep mode; e.g. {6,10,15,20,30,50,75,100}
  std::vector<uint64_t> seeds = {1, 2, 3};
  int episodes = 0;  // 0 = learner config default
  int steps = 0;     // eval horizon; 0 = derived from mode
  int n_train = 0;   // 0 = learner config default
  int hidden = 0;
  std::string config_path;
  std::string out_dir = "runs";
  std::string checkpoint_path;  // required by eval modes
  int checkpoint_interval = 0;  // episodes between checkpoints; 0 = end only
  bool no_price_prox = false;   // ablation switches
  bool no_credit = false;
  bool no_global = false;
  int threads = 1;
};

struct EpisodeStats {
  int episode = 0;
  double mean_reward = 0.0;
  double sw_total = 0.0;
  double volume_total = 0.0;
  double base_mean = 0.0;
  double credit_mean = 0.0;
  double prox_mean = 0.0;
  double ir_mean = 0.0;
  double match_mean = 0.0;
  double price_mean = 0.0;
  double critic_loss = 0.0;
};

struct TrainResult {
  uint64_t seed = 0;
  std::string checkpoint_path;
  std::string curve_path;
  std::vector<EpisodeStats> episodes;
};

// Aggregates of one evaluation run, mirroring the summary CSV row.
// Fairness metrics are per-timestep values reduced to the run median.
struct RunSummary {
  clearing::Mechanism mechanism = clearing::Mechanism::Nash;
  int n_agents = 0;
  uint64_t seed = 0;
  int steps = 0;
  double sw_total = 0.0;
  double volume_total = 0.0;
  double gini_median = 0.0;
  double jains_median = 0.0;
  double pmatch_median = 0.0;
  double price_mean = 0.0;  // over all executed trades of the run
  double price_std = 0.0;
  long n_trades = 0;
};

// Trains one run per seed (in parallel when spec.threads > 1) and writes
// per-seed learning-curve CSVs, checkpoints, and metadata. Fully
// reproducible from (spec, seed).
std::vector<TrainResult> run_training(const RunSpec& spec);

// Evaluates a checkpoint without exploration noise: per-timestep metrics
// CSV and a summary row per run. Sweep mode fans out populations x seeds
// across worker threads and additionally writes an aggregate CSV with
// median/IQR/CV per metric.
std::vector<RunSummary> run_evaluation(const RunSpec& spec);

struct AblationVariant {
  std::string name;  // full | no_price_prox | no_credit | no_global
  std::vector<TrainResult> training;
  std::vector<RunSummary> evaluation;       // 30-day eval per seed
  std::vector<double> late_reward_variance;  // per seed, last quarter of episodes
};

// Trains and evaluates the reward-ablation variants.
std::vector<AblationVariant> run_ablation(const RunSpec& spec,
                                          const std::vector<std::string>& variants = {});

// Plot-ready tabular files: learning-curve median + IQR band across the
// given training CSVs, and the per-step-of-day volume profile from the
// given evaluation CSVs.
void emit_plot_data(const std::vector<std::string>& train_csvs,
                    const std::vector<std::string>& eval_csvs, const std::string& out_dir);

// Quantile with linear interpolation; shared by aggregation and tests.
double quantile(std::vector<double> values, double p);

}  // namespace v2v::harness
