#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "v2v/harness.hpp"

namespace {

using v2v::harness::RunSpec;

void add_common(CLI::App* cmd, RunSpec& spec, std::string& mechanism,
                std::vector<uint64_t>& seeds) {
  cmd->add_option("--mechanism", mechanism, "nash | greedy_avg | double_auction | learning_only")
      ->capture_default_str();
  cmd->add_option("--config", spec.config_path, "JSON config file (see docs/config.md)");
  cmd->add_option("--out", spec.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--seeds", seeds, "run seeds")->delimiter(',');
  cmd->add_option("--threads", spec.threads, "worker threads")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"V2V energy trading market simulator"};
  app.require_subcommand(1);

  RunSpec spec;
  // Output root from the environment unless --out is passed.
  if (const char* root = std::getenv("V2V_OUT_ROOT")) spec.out_dir = root;
  std::string mechanism = "nash";
  std::vector<uint64_t> seeds;
  std::vector<int> populations;
  int days = 0;

  CLI::App* train = app.add_subcommand("train", "train agents with the selected mechanism");
  add_common(train, spec, mechanism, seeds);
  train->add_option("--agents", spec.n_agents, "target population")->capture_default_str();
  train->add_option("--episodes", spec.episodes, "training episodes (0 = config default)");
  train->add_option("--n-train", spec.n_train, "critic slot count (0 = config default)");
  train->add_option("--hidden", spec.hidden, "hidden layer width (0 = config default)");
  train->add_option("--checkpoint-interval", spec.checkpoint_interval,
                    "episodes between checkpoints (0 = final only)");
  train->add_flag("--no-price-prox", spec.no_price_prox, "ablate the price-proximity reward");
  train->add_flag("--no-credit", spec.no_credit, "ablate counterfactual credit");
  train->add_flag("--no-global", spec.no_global, "ablate the global objective terms");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint without exploration");
  add_common(eval, spec, mechanism, seeds);
  eval->add_option("--checkpoint", spec.checkpoint_path, "checkpoint file")->required();
  eval->add_option("--agents", spec.n_agents, "population size")->capture_default_str();
  eval->add_option("--days", days, "evaluation horizon in days (1 or 30)");
  eval->add_option("--steps", spec.steps, "evaluation horizon in steps (overrides --days)");

  CLI::App* sweep = app.add_subcommand("sweep", "evaluate one checkpoint across populations");
  add_common(sweep, spec, mechanism, seeds);
  sweep->add_option("--checkpoint", spec.checkpoint_path, "checkpoint file")->required();
  sweep->add_option("--populations", populations, "population sizes")->delimiter(',');
  sweep->add_option("--steps", spec.steps, "evaluation horizon in steps (default 480)");

  CLI::App* ablate = app.add_subcommand("ablate", "train and evaluate reward ablations");
  add_common(ablate, spec, mechanism, seeds);
  ablate->add_option("--agents", spec.n_agents, "target population")->capture_default_str();
  ablate->add_option("--episodes", spec.episodes, "training episodes (0 = config default)");
  ablate->add_option("--n-train", spec.n_train, "critic slot count (0 = config default)");
  ablate->add_option("--hidden", spec.hidden, "hidden layer width (0 = config default)");

  CLI::App* plot = app.add_subcommand("plot-data", "aggregate run CSVs into plot-ready files");
  std::vector<std::string> train_csvs, eval_csvs;
  plot->add_option("--train-csv", train_csvs, "learning-curve CSVs to aggregate");
  plot->add_option("--eval-csv", eval_csvs, "evaluation CSVs for the intra-day profile");
  plot->add_option("--out", spec.out_dir, "output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    spec.mechanism = v2v::clearing::mechanism_from_string(mechanism);
    if (!seeds.empty()) spec.seeds = seeds;
    if (!populations.empty()) spec.populations = populations;

    if (train->parsed()) {
      spec.mode = v2v::harness::RunMode::Train;
      const auto results = v2v::harness::run_training(spec);
      for (const auto& r : results) {
        std::printf("seed %llu: %s\n", static_cast<unsigned long long>(r.seed),
                    r.checkpoint_path.c_str());
      }
    } else if (eval->parsed()) {
      spec.mode = days == 1 ? v2v::harness::RunMode::Eval1Day : v2v::harness::RunMode::Eval30Day;
      const auto sums = v2v::harness::run_evaluation(spec);
      for (const auto& s : sums) {
        std::printf("N=%d seed=%llu sw=%.3f volume=%.1f p_match=%.3f\n", s.n_agents,
                    static_cast<unsigned long long>(s.seed), s.sw_total, s.volume_total,
                    s.pmatch_median);
      }
    } else if (sweep->parsed()) {
      spec.mode = v2v::harness::RunMode::Sweep;
      const auto sums = v2v::harness::run_evaluation(spec);
      std::printf("%zu runs -> %s/summary.csv\n", sums.size(), spec.out_dir.c_str());
    } else if (ablate->parsed()) {
      spec.mode = v2v::harness::RunMode::Ablate;
      const auto variants = v2v::harness::run_ablation(spec);
      std::printf("%zu variants -> %s/ablation_summary.csv\n", variants.size(),
                  spec.out_dir.c_str());
    } else if (plot->parsed()) {
      v2v::harness::emit_plot_data(train_csvs, eval_csvs, spec.out_dir);
      std::printf("plot data -> %s\n", spec.out_dir.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
