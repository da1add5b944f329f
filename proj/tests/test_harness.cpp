#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "v2v/config.hpp"
#include "v2v/harness.hpp"

using namespace v2v;
using harness::RunMode;
using harness::RunSpec;

namespace {

namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

long count_rows(const std::string& csv) {
  long rows = -1;  // minus header
  std::istringstream ss(csv);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty()) ++rows;
  }
  return rows;
}

// Desk-size config so harness tests run in milliseconds.
std::string write_tiny_config(const std::string& dir) {
  fs::create_directories(dir);
  const std::string path = dir + "/config.json";
  std::ofstream out(path);
  out << R"({"learner": {"episodes": 2, "n_train": 8, "hidden": 8, "warmup": 10,
             "batch": 8, "buffer_capacity": 500}})";
  return path;
}

RunSpec tiny_train_spec(const std::string& out_dir) {
  RunSpec spec;
  spec.mode = RunMode::Train;
  spec.n_agents = 4;
  spec.seeds = {11};
  spec.out_dir = out_dir;
  spec.config_path = write_tiny_config(out_dir);
  return spec;
}

}  // namespace

TEST_CASE("config file loading") {
  const std::string dir = "test_out/config";
  fs::create_directories(dir);

  SUBCASE("overrides merge over defaults") {
    std::ofstream out(dir + "/ok.json");
    out << R"({"sim": {"eta": 0.9}, "rewards": {"kappa_price": 2.5}})";
    out.close();
    const auto cfg = config::load_file(dir + "/ok.json");
    CHECK(cfg.sim.eta == doctest::Approx(0.9));
    CHECK(cfg.rewards.kappa_price == doctest::Approx(2.5));
    CHECK(cfg.sim.price_max == doctest::Approx(0.50));  // untouched default
    CHECK(config::to_json_text(cfg).find("0.9") != std::string::npos);
  }

  SUBCASE("unknown keys are rejected") {
    std::ofstream out(dir + "/bad.json");
    out << R"({"sim": {"price_minimum": 0.01}})";
    out.close();
    CHECK_THROWS(config::load_file(dir + "/bad.json"));
  }

  SUBCASE("invalid band is rejected") {
    std::ofstream out(dir + "/band.json");
    out << R"({"sim": {"price_min": 0.6}})";
    out.close();
    CHECK_THROWS(config::load_file(dir + "/band.json"));
  }
}

TEST_CASE("training runs deterministically and writes its artifacts") {
  const RunSpec spec1 = tiny_train_spec("test_out/train_a");
  const RunSpec spec2 = tiny_train_spec("test_out/train_b");
  const auto r1 = harness::run_training(spec1);
  const auto r2 = harness::run_training(spec2);
  REQUIRE(r1.size() == 1);
  REQUIRE(r2.size() == 1);

  SUBCASE("bitwise identical learning curves and checkpoints") {
    CHECK(slurp(r1[0].curve_path) == slurp(r2[0].curve_path));
    CHECK(slurp(r1[0].checkpoint_path) == slurp(r2[0].checkpoint_path));
  }

  SUBCASE("learning curve has one row per episode") {
    CHECK(count_rows(slurp(r1[0].curve_path)) == 2);
  }

  SUBCASE("metadata captures the resolved config") {
    const std::string meta = slurp("test_out/train_a/meta_train_nash_N4_seed11.json");
    CHECK(meta.find("\"warmup\": 10") != std::string::npos);
    CHECK(meta.find("\"mechanism\": \"nash\"") != std::string::npos);
  }
}

TEST_CASE("ablation flags zero the matching reward component") {
  RunSpec spec = tiny_train_spec("test_out/train_noprox");
  spec.no_price_prox = true;
  const auto r = harness::run_training(spec);
  REQUIRE(r.size() == 1);
  for (const auto& ep : r[0].episodes) {
    CHECK(ep.prox_mean == 0.0);
  }

  RunSpec nocredit = tiny_train_spec("test_out/train_nocredit");
  nocredit.no_credit = true;
  const auto rc = harness::run_training(nocredit);
  for (const auto& ep : rc[0].episodes) {
    CHECK(ep.credit_mean == 0.0);
  }
}

TEST_CASE("evaluation horizons, determinism and sweep cardinality") {
  const RunSpec tspec = tiny_train_spec("test_out/eval_base");
  const auto trained = harness::run_training(tspec);
  REQUIRE(trained.size() == 1);

  RunSpec espec = tspec;
  espec.checkpoint_path = trained[0].checkpoint_path;
  espec.seeds = {5};

  SUBCASE("one-day evaluation emits 16 rows") {
    espec.mode = RunMode::Eval1Day;
    espec.out_dir = "test_out/eval_1d";
    const auto sums = harness::run_evaluation(espec);
    REQUIRE(sums.size() == 1);
    CHECK(sums[0].steps == 16);
    CHECK(count_rows(slurp(espec.out_dir + "/eval_nash_N4_seed5_16steps.csv")) == 16);
  }

  SUBCASE("30-day evaluation emits 480 rows and is reproducible") {
    espec.mode = RunMode::Eval30Day;
    espec.out_dir = "test_out/eval_30d_a";
    harness::run_evaluation(espec);
    RunSpec again = espec;
    again.out_dir = "test_out/eval_30d_b";
    harness::run_evaluation(again);
    const std::string a = slurp("test_out/eval_30d_a/eval_nash_N4_seed5_480steps.csv");
    const std::string b = slurp("test_out/eval_30d_b/eval_nash_N4_seed5_480steps.csv");
    CHECK(count_rows(a) == 480);
    CHECK(a == b);
  }

  SUBCASE("sweep covers populations x seeds and aggregates") {
    espec.mode = RunMode::Sweep;
    espec.out_dir = "test_out/sweep";
    espec.populations = {3, 6};
    espec.seeds = {1, 2};
    espec.steps = 8;
    espec.threads = 2;
    const auto sums = harness::run_evaluation(espec);
    CHECK(sums.size() == 4);
    CHECK(count_rows(slurp(espec.out_dir + "/summary.csv")) == 4);
    const std::string agg = slurp(espec.out_dir + "/aggregate.csv");
    CHECK(agg.find("sw_total") != std::string::npos);
    CHECK(agg.find("pmatch_median") != std::string::npos);
  }

  SUBCASE("evaluation without a checkpoint is an error") {
    RunSpec bad = espec;
    bad.mode = RunMode::Eval1Day;
    bad.checkpoint_path.clear();
    CHECK_THROWS(harness::run_evaluation(bad));
  }
}

TEST_CASE("plot data emission") {
  const std::string dir = "test_out/plot";
  fs::create_directories(dir);

  // Three synthetic learning curves.
  std::vector<std::string> curves;
  for (int s = 0; s < 3; ++s) {
    const std::string path = dir + "/curve" + std::to_string(s) + ".csv";
    std::ofstream out(path);
    out << "episode,mean_reward\n";
    for (int e = 0; e < 5; ++e) {
      out << e << "," << (e + s) << "\n";
    }
    curves.push_back(path);
  }
  // One synthetic 2-day eval stream.
  const std::string eval_path = dir + "/eval.csv";
  {
    std::ofstream out(eval_path);
    out << "step,volume_kwh\n";
    for (int t = 0; t < 32; ++t) {
      out << t << "," << (t % 16) << "\n";
    }
  }

  harness::emit_plot_data(curves, {eval_path}, dir);

  const std::string agg = slurp(dir + "/learning_curve_agg.csv");
  CHECK(count_rows(agg) == 5);
  // Episode 0: values {0,1,2} -> median 1, q25 0.5, q75 1.5.
  CHECK(agg.find("0,1,0.5,1.5") != std::string::npos);

  const std::string intraday = slurp(dir + "/intraday_volume.csv");
  CHECK(count_rows(intraday) == 16);
  CHECK(intraday.find("3,3") != std::string::npos);

  SUBCASE("single curve collapses the band onto the line") {
    harness::emit_plot_data({curves[0]}, {}, dir + "/single");
    const std::string single = slurp(dir + "/single/learning_curve_agg.csv");
    CHECK(single.find("2,2,2,2") != std::string::npos);
  }
}

TEST_CASE("quantile helper") {
  CHECK(harness::quantile({1, 2, 3}, 0.5) == doctest::Approx(2.0));
  CHECK(harness::quantile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
  CHECK(harness::quantile({5}, 0.25) == doctest::Approx(5.0));
  CHECK(harness::quantile({1, 3}, 0.25) == doctest::Approx(1.5));
}
