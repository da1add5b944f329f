#include "v2v/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "v2v/env.hpp"
#include "v2v/rewards.hpp"

namespace v2v::harness {

namespace fs = std::filesystem;
using clearing::Mechanism;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

struct Resolved {
  config::ProjectConfig pc;
  rewards::RewardWeights weights;  // with ablation flags applied
  bool shaped = true;              // false for the learning-only baseline
};

Resolved resolve(const RunSpec& spec, int n_agents) {
  Resolved r;
  r.pc = spec.config_path.empty() ? config::ProjectConfig{}
                                  : config::load_file(spec.config_path);
  r.pc.sim.n_target = n_agents;
  if (spec.episodes > 0) r.pc.learner.episodes = spec.episodes;
  if (spec.n_train > 0) r.pc.learner.n_train = spec.n_train;
  if (spec.hidden > 0) r.pc.learner.hidden = spec.hidden;

  r.shaped = spec.mechanism != Mechanism::LearningOnly;
  r.weights = r.pc.rewards;
  r.weights.enable_price_prox = r.shaped && !spec.no_price_prox;
  r.weights.enable_credit = r.shaped && !spec.no_credit;
  r.weights.enable_global = r.shaped && !spec.no_global;
  return r;
}

std::string run_tag(Mechanism mech, int n, uint64_t seed) {
  return std::string(clearing::to_string(mech)) + "_N" + std::to_string(n) + "_seed" +
         std::to_string(seed);
}

void write_metadata(const std::string& path, const RunSpec& spec, const Resolved& r,
                    uint64_t seed, int n_agents, int horizon, const char* horizon_key) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["mode"] = to_string(spec.mode);
  j["mechanism"] = clearing::to_string(spec.mechanism);
  j["n_agents"] = n_agents;
  j["seed"] = seed;
  j[horizon_key] = horizon;
  j["no_price_prox"] = spec.no_price_prox;
  j["no_credit"] = spec.no_credit;
  j["no_global"] = spec.no_global;
  j["config"] = nlohmann::json::parse(config::to_json_text(r.pc));
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metadata: " + path);
  out << j.dump(2) << "\n";
}

// Runs jobs on up to `threads` workers. Jobs write only their own slots,
// so no shared mutable state is involved.
void parallel_for(int threads, const std::vector<std::function<void()>>& jobs) {
  if (threads <= 1 || jobs.size() <= 1) {
    for (const auto& job : jobs) job();
    return;
  }
  std::atomic<size_t> next{0};
  const int workers = std::min<int>(threads, static_cast<int>(jobs.size()));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        jobs[i]();
      }
    });
  }
  for (auto& t : pool) t.join();
}

struct StepRewards {
  std::map<int, rewards::RewardBreakdown> by_agent;
};

StepRewards compute_step_rewards(const std::vector<Offer>& offers,
                                 const std::vector<EVAgent>& agents, const SimConfig& sim,
                                 const Resolved& r, Mechanism mech,
                                 const clearing::ClearingResult& result, uint64_t step_seed) {
  StepRewards out;
  const bool use_credit = r.weights.enable_credit && r.weights.enable_global;
  std::map<int, double> credits;
  if (r.shaped && use_credit) {
    credits = rewards::counterfactual_credits(offers, agents, sim, r.weights, mech, step_seed)
                  .delta;
  }
  const int n = static_cast<int>(offers.size());
  for (const Offer& o : offers) {
    const double base = rewards::base_utility(o.agent_id, result);
    if (!r.shaped) {
      // Learning-only: immediate trade utility, nothing else.
      rewards::RewardBreakdown rb;
      rb.base = base;
      rb.total = base;
      out.by_agent[o.agent_id] = rb;
      continue;
    }
    const double prox = r.weights.enable_price_prox
                            ? rewards::price_proximity(o.agent_id, offers, result,
                                                       r.weights.kappa_price)
                            : 0.0;
    const double credit = use_credit ? credits[o.agent_id] : 0.0;
    out.by_agent[o.agent_id] = rewards::compose(base, credit, prox, r.weights, n);
  }
  return out;
}

std::string curve_header() {
  return "episode,mean_reward,sw_total,volume_total,base_mean,credit_mean,prox_mean,ir_mean,"
         "match_mean,price_mean,critic_loss";
}

std::string curve_row(const EpisodeStats& e) {
  std::string row = std::to_string(e.episode);
  for (double v : {e.mean_reward, e.sw_total, e.volume_total, e.base_mean, e.credit_mean,
                   e.prox_mean, e.ir_mean, e.match_mean, e.price_mean, e.critic_loss}) {
    row += "," + fmt(v);
  }
  return row;
}

TrainResult train_single(const RunSpec& spec, const Resolved& r, uint64_t seed) {
  const auto& sim = r.pc.sim;
  const auto& vp = r.pc.valuation;
  const auto& lc = r.pc.learner;
  const Mechanism mech = spec.mechanism;

  Rng init_rng(mix_seed(seed, 101));
  learner::ActorNet actor = learner::ActorNet::make(lc, init_rng);
  learner::CriticNet critic = learner::CriticNet::make(lc, init_rng);
  learner::ActorNet actor_tgt = actor;
  learner::CriticNet critic_tgt = critic;
  const auto opt_kind = learner::Optimizer::kind_from_string(lc.optimizer);
  learner::Optimizer opt_actor(opt_kind, actor.net, lc.actor_lr, lc.actor_weight_decay);
  learner::Optimizer opt_critic(opt_kind, critic.net, lc.critic_lr);

  learner::ReplayBuffer replay(lc.buffer_capacity);
  Rng replay_rng(mix_seed(seed, 303));
  Rng ou_rng(mix_seed(seed, 404));

  const std::string tag = run_tag(mech, sim.n_target, seed);
  const std::string curve_path = spec.out_dir + "/train_" + tag + ".csv";
  const std::string ckpt_path = spec.out_dir + "/ckpt_" + tag + ".json";
  std::ofstream curve(curve_path);
  if (!curve) throw std::runtime_error("cannot write learning curve: " + curve_path);
  curve << curve_header() << "\n";

  TrainResult result;
  result.seed = seed;
  result.curve_path = curve_path;
  result.checkpoint_path = ckpt_path;

  const int anneal_eps = std::max(1, static_cast<int>(lc.ou_anneal_frac * lc.episodes));

  struct Pending {
    std::vector<int> ids;
    Eigen::VectorXd joint_obs;
    Eigen::VectorXd joint_act;
    Eigen::VectorXd reward;
    Eigen::VectorXd mask;
  };

  for (int ep = 0; ep < lc.episodes; ++ep) {
    env::FleetState fleet = env::make_initial_fleet(sim, mix_seed(mix_seed(seed, 202),
                                                                  static_cast<uint64_t>(ep)));
    const double sigma =
        ep < anneal_eps
            ? lc.ou_sigma + (lc.ou_sigma_end - lc.ou_sigma) * static_cast<double>(ep) /
                                static_cast<double>(anneal_eps)
            : lc.ou_sigma_end;
    std::map<int, learner::OUNoise> noise;

    std::optional<Pending> pending;
    EpisodeStats stats;
    stats.episode = ep;
    double reward_sum = 0.0, base_sum = 0.0, credit_sum = 0.0, prox_sum = 0.0, ir_sum = 0.0;
    long reward_count = 0;
    double match_sum = 0.0;
    double price_sum = 0.0;
    long trade_count = 0;
    double loss_sum = 0.0;
    long update_count = 0;

    for (int t = 0; t < kStepsPerDay; ++t) {
      if (t > 0) env::step_arrivals_departures(fleet, sim);

      std::vector<env::Observation> obs;
      std::vector<Offer> offers;
      std::vector<Eigen::VectorXd> obs_vecs, act_vecs;
      obs.reserve(fleet.agents.size());
      for (const EVAgent& a : fleet.agents) {
        obs.push_back(env::observe(a, fleet.step, sim, vp));
        auto [it, inserted] = noise.try_emplace(a.id, learner::kActDim, lc.ou_theta, sigma);
        if (inserted) it->second.set_sigma(sigma);
        const learner::ActionOut ao = learner::act(actor, a, obs.back(), sim, &it->second,
                                                   &ou_rng);
        offers.push_back(learner::to_offer(a, ao));
        obs_vecs.push_back(obs.back().to_vector());
        act_vecs.push_back((Eigen::VectorXd(2) << ao.price01, ao.qfrac).finished());
      }

      // Close out the previous step's transition now that the population
      // at t is known.
      if (pending.has_value()) {
        const int slots = std::min<int>(static_cast<int>(obs_vecs.size()), lc.n_train);
        const std::vector<Eigen::VectorXd> next_obs(obs_vecs.begin(), obs_vecs.begin() + slots);
        learner::Transition tr;
        tr.joint_obs = pending->joint_obs;
        tr.joint_act = pending->joint_act;
        tr.reward = pending->reward;
        tr.mask = pending->mask;
        tr.done = Eigen::VectorXd::Zero(lc.n_train);
        for (size_t s = 0; s < pending->ids.size(); ++s) {
          if (fleet.find(pending->ids[s]) == nullptr) tr.done(static_cast<int>(s)) = 1.0;
        }
        tr.next_joint_obs = learner::pad_joint(next_obs, {}, lc.n_train)
                                .head(lc.n_train * env::kObsDim);
        replay.push(std::move(tr));
      }

      const uint64_t step_seed = mix_seed(mix_seed(seed, 505),
                                          static_cast<uint64_t>(ep) * 1000003ULL +
                                              static_cast<uint64_t>(t));
      const clearing::ClearingResult cleared =
          clearing::clear(mech, offers, fleet.agents, sim, step_seed);
      const StepRewards rew = compute_step_rewards(offers, fleet.agents, sim, r, mech, cleared,
                                                   step_seed);

      const metrics::MetricsRecord rec = metrics::compute_record(fleet.step, cleared, offers);
      stats.sw_total += rec.sw;
      stats.volume_total += rec.volume_kwh;
      match_sum += rec.p_match;
      for (const clearing::Trade& trd : cleared.trades) {
        price_sum += trd.price;
        ++trade_count;
      }
      for (const auto& [id, rb] : rew.by_agent) {
        reward_sum += rb.total;
        base_sum += rb.base;
        credit_sum += rb.credit;
        prox_sum += rb.price_prox;
        ir_sum += rb.ir_penalty;
        ++reward_count;
      }

      // Stage this step's transition; slots hold the first n_train agents
      // in id order (agents beyond the critic width do not contribute
      // training data).
      {
        const int slots = std::min<int>(static_cast<int>(obs_vecs.size()), lc.n_train);
        Pending p;
        p.joint_obs = Eigen::VectorXd::Zero(lc.n_train * env::kObsDim);
        p.joint_act = Eigen::VectorXd::Zero(lc.n_train * learner::kActDim);
        const std::vector<Eigen::VectorXd> so(obs_vecs.begin(), obs_vecs.begin() + slots);
        const std::vector<Eigen::VectorXd> sa(act_vecs.begin(), act_vecs.begin() + slots);
        const Eigen::VectorXd joint = learner::pad_joint(so, sa, lc.n_train);
        p.joint_obs = joint.head(lc.n_train * env::kObsDim);
        p.joint_act = joint.tail(lc.n_train * learner::kActDim);
        p.reward = Eigen::VectorXd::Zero(lc.n_train);
        p.mask = Eigen::VectorXd::Zero(lc.n_train);
        for (int s = 0; s < slots; ++s) {
          p.ids.push_back(fleet.agents[static_cast<size_t>(s)].id);
          p.mask(s) = 1.0;
          const auto it = rew.by_agent.find(fleet.agents[static_cast<size_t>(s)].id);
          if (it != rew.by_agent.end()) p.reward(s) = it->second.total;
        }
        pending = std::move(p);
      }

      if (replay.size() >= static_cast<size_t>(lc.warmup)) {
        const auto batch = replay.sample(lc.batch, replay_rng);
        loss_sum += learner::critic_update(critic, critic_tgt, actor_tgt, batch, lc, opt_critic);
        learner::soft_update(critic_tgt.net, critic.net, lc.tau);
        if (replay.size() >= static_cast<size_t>(lc.actor_warmup)) {
          learner::actor_update(actor, critic, batch, lc, opt_actor);
          learner::soft_update(actor_tgt.net, actor.net, lc.tau);
        }
        ++update_count;
      }

      env::apply_trades(fleet, cleared, sim);
    }

    // Episode boundary: terminal for every stored slot.
    if (pending.has_value()) {
      learner::Transition tr;
      tr.joint_obs = pending->joint_obs;
      tr.joint_act = pending->joint_act;
      tr.reward = pending->reward;
      tr.mask = pending->mask;
      tr.done = Eigen::VectorXd::Ones(lc.n_train);
      tr.next_joint_obs = Eigen::VectorXd::Zero(lc.n_train * env::kObsDim);
      replay.push(std::move(tr));
      pending.reset();
    }

    if (reward_count > 0) {
      const double n = static_cast<double>(reward_count);
      stats.mean_reward = reward_sum / n;
      stats.base_mean = base_sum / n;
      stats.credit_mean = credit_sum / n;
      stats.prox_mean = prox_sum / n;
      stats.ir_mean = ir_sum / n;
    }
    stats.match_mean = match_sum / kStepsPerDay;
    stats.price_mean = trade_count > 0 ? price_sum / static_cast<double>(trade_count) : 0.0;
    stats.critic_loss = update_count > 0 ? loss_sum / static_cast<double>(update_count) : 0.0;
    curve << curve_row(stats) << "\n";
    result.episodes.push_back(stats);

    if (spec.checkpoint_interval > 0 && (ep + 1) % spec.checkpoint_interval == 0 &&
        ep + 1 < lc.episodes) {
      learner::save_checkpoint(spec.out_dir + "/ckpt_" + tag + "_ep" + std::to_string(ep + 1) +
                                   ".json",
                               {actor, actor_tgt, critic, critic_tgt, lc, seed});
    }
  }

  learner::save_checkpoint(ckpt_path, {actor, actor_tgt, critic, critic_tgt, lc, seed});
  write_metadata(spec.out_dir + "/meta_train_" + tag + ".json", spec, r, seed, sim.n_target,
                 lc.episodes, "episodes");
  return result;
}

RunSummary eval_single(const RunSpec& spec, const Resolved& r, const learner::ActorNet& actor,
                       int n_agents, uint64_t seed, int steps) {
  SimConfig sim = r.pc.sim;
  sim.n_target = n_agents;
  const auto& vp = r.pc.valuation;
  const Mechanism mech = spec.mechanism;

  const std::string tag = run_tag(mech, n_agents, seed) + "_" + std::to_string(steps) + "steps";
  const std::string csv_path = spec.out_dir + "/eval_" + tag + ".csv";
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write eval csv: " + csv_path);
  csv << metrics::csv_header() << "\n";

  RunSummary sum;
  sum.mechanism = mech;
  sum.n_agents = n_agents;
  sum.seed = seed;
  sum.steps = steps;

  std::vector<double> ginis, jains, pmatches, prices;
  env::FleetState fleet = env::make_initial_fleet(sim, mix_seed(seed, 606));
  for (int t = 0; t < steps; ++t) {
    if (t > 0) env::step_arrivals_departures(fleet, sim);
    std::vector<Offer> offers;
    offers.reserve(fleet.agents.size());
    for (const EVAgent& a : fleet.agents) {
      const env::Observation o = env::observe(a, fleet.step, sim, vp);
      offers.push_back(learner::to_offer(a, learner::act(actor, a, o, sim)));
    }
    const uint64_t step_seed = mix_seed(mix_seed(seed, 707), static_cast<uint64_t>(t));
    const clearing::ClearingResult cleared =
        clearing::clear(mech, offers, fleet.agents, sim, step_seed);
    const metrics::MetricsRecord rec = metrics::compute_record(fleet.step, cleared, offers);
    csv << metrics::to_csv_row(rec) << "\n";

    sum.sw_total += rec.sw;
    sum.volume_total += rec.volume_kwh;
    ginis.push_back(rec.gini);
    jains.push_back(rec.jains);
    pmatches.push_back(rec.p_match);
    for (const clearing::Trade& trd : cleared.trades) prices.push_back(trd.price);
    env::apply_trades(fleet, cleared, sim);
  }

  sum.gini_median = quantile(ginis, 0.5);
  sum.jains_median = quantile(jains, 0.5);
  sum.pmatch_median = quantile(pmatches, 0.5);
  sum.n_trades = static_cast<long>(prices.size());
  if (!prices.empty()) {
    double s = 0.0;
    for (double p : prices) s += p;
    sum.price_mean = s / static_cast<double>(prices.size());
    if (prices.size() > 1) {
      double ss = 0.0;
      for (double p : prices) ss += (p - sum.price_mean) * (p - sum.price_mean);
      sum.price_std = std::sqrt(ss / static_cast<double>(prices.size() - 1));
    }
  }
  write_metadata(spec.out_dir + "/meta_eval_" + tag + ".json", spec, r, seed, n_agents, steps,
                 "steps");
  return sum;
}

std::string summary_header() {
  return "mechanism,n_agents,seed,steps,sw_total,volume_total,gini_median,jains_median,"
         "pmatch_median,price_mean,price_std,n_trades";
}

std::string summary_row(const RunSummary& s) {
  std::string row = std::string(clearing::to_string(s.mechanism)) + "," +
                    std::to_string(s.n_agents) + "," + std::to_string(s.seed) + "," +
                    std::to_string(s.steps);
  for (double v : {s.sw_total, s.volume_total, s.gini_median, s.jains_median, s.pmatch_median,
                   s.price_mean, s.price_std}) {
    row += "," + fmt(v);
  }
  row += "," + std::to_string(s.n_trades);
  return row;
}

// Minimal CSV column reader for plot-data aggregation.
std::vector<double> read_csv_column(const std::string& path, const std::string& column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read csv: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty csv: " + path);
  std::vector<std::string> headers;
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) headers.push_back(cell);
  int col = -1;
  for (size_t i = 0; i < headers.size(); ++i) {
    if (headers[i] == column) col = static_cast<int>(i);
  }
  if (col < 0) throw std::runtime_error("column " + column + " not in " + path);
  std::vector<double> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    int c = 0;
    while (std::getline(ls, cell, ',')) {
      if (c == col) out.push_back(std::stod(cell));
      ++c;
    }
  }
  return out;
}

}  // namespace

RunMode mode_from_string(const std::string& s) {
  if (s == "train") return RunMode::Train;
  if (s == "eval_1day") return RunMode::Eval1Day;
  if (s == "eval_30day") return RunMode::Eval30Day;
  if (s == "sweep") return RunMode::Sweep;
  if (s == "ablate") return RunMode::Ablate;
  throw std::invalid_argument("unknown run mode: " + s);
}

const char* to_string(RunMode m) {
  switch (m) {
    case RunMode::Train: return "train";
    case RunMode::Eval1Day: return "eval_1day";
    case RunMode::Eval30Day: return "eval_30day";
    case RunMode::Sweep: return "sweep";
    default: return "ablate";
  }
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

std::vector<TrainResult> run_training(const RunSpec& spec) {
  ensure_dir(spec.out_dir);
  const Resolved r = resolve(spec, spec.n_agents);
  std::vector<TrainResult> results(spec.seeds.size());
  std::vector<std::function<void()>> jobs;
  for (size_t i = 0; i < spec.seeds.size(); ++i) {
    jobs.emplace_back([&, i]() { results[i] = train_single(spec, r, spec.seeds[i]); });
  }
  parallel_for(spec.threads, jobs);
  return results;
}

std::vector<RunSummary> run_evaluation(const RunSpec& spec) {
  if (spec.checkpoint_path.empty()) {
    throw std::runtime_error("evaluation modes require --checkpoint");
  }
  ensure_dir(spec.out_dir);
  const Resolved r = resolve(spec, spec.n_agents);
  const learner::Checkpoint ckpt = learner::load_checkpoint(spec.checkpoint_path);

  std::vector<int> populations;
  if (spec.mode == RunMode::Sweep) {
    populations = spec.populations.empty()
                      ? std::vector<int>{6, 10, 15, 20, 30, 50, 75, 100}
                      : spec.populations;
  } else {
    populations = {spec.n_agents};
  }
  int steps = spec.steps;
  if (steps <= 0) {
    steps = spec.mode == RunMode::Eval1Day ? kStepsPerDay : 30 * kStepsPerDay;
  }

  struct Job {
    int n = 0;
    uint64_t seed = 0;
  };
  std::vector<Job> grid;
  for (int n : populations) {
    for (uint64_t s : spec.seeds) grid.push_back({n, s});
  }
  std::vector<RunSummary> results(grid.size());
  std::vector<std::function<void()>> jobs;
  for (size_t i = 0; i < grid.size(); ++i) {
    jobs.emplace_back([&, i]() {
      results[i] = eval_single(spec, r, ckpt.actor, grid[i].n, grid[i].seed, steps);
    });
  }
  parallel_for(spec.threads, jobs);

  std::ofstream sumcsv(spec.out_dir + "/summary.csv");
  sumcsv << summary_header() << "\n";
  for (const RunSummary& s : results) sumcsv << summary_row(s) << "\n";

  if (spec.mode == RunMode::Sweep) {
    // Median / IQR / CV of each run-level metric across the grid, the
    // aggregation used for the scalability analysis.
    std::ofstream agg(spec.out_dir + "/aggregate.csv");
    agg << "metric,median,q25,q75,iqr,cv\n";
    const std::vector<std::pair<std::string, std::function<double(const RunSummary&)>>> cols = {
        {"sw_total", [](const RunSummary& s) { return s.sw_total; }},
        {"volume_total", [](const RunSummary& s) { return s.volume_total; }},
        {"gini_median", [](const RunSummary& s) { return s.gini_median; }},
        {"jains_median", [](const RunSummary& s) { return s.jains_median; }},
        {"pmatch_median", [](const RunSummary& s) { return s.pmatch_median; }},
        {"price_mean", [](const RunSummary& s) { return s.price_mean; }},
    };
    for (const auto& [name, fn] : cols) {
      std::vector<double> v;
      v.reserve(results.size());
      for (const RunSummary& s : results) v.push_back(fn(s));
      const double med = quantile(v, 0.5);
      const double q25 = quantile(v, 0.25);
      const double q75 = quantile(v, 0.75);
      std::string cv = "nan";
      try {
        cv = fmt(metrics::coefficient_of_variation(v));
      } catch (const metrics::ZeroMean&) {
      }
      agg << name << "," << fmt(med) << "," << fmt(q25) << "," << fmt(q75) << ","
          << fmt(q75 - q25) << "," << cv << "\n";
    }
  }
  return results;
}

std::vector<AblationVariant> run_ablation(const RunSpec& spec,
                                          const std::vector<std::string>& variants) {
  const std::vector<std::string> names =
      variants.empty()
          ? std::vector<std::string>{"full", "no_price_prox", "no_credit", "no_global"}
          : variants;
  ensure_dir(spec.out_dir);

  std::vector<AblationVariant> out;
  for (const std::string& name : names) {
    RunSpec vs = spec;
    vs.mode = RunMode::Train;
    vs.out_dir = spec.out_dir + "/" + name;
    vs.no_price_prox = name == "no_price_prox";
    vs.no_credit = name == "no_credit";
    vs.no_global = name == "no_global";
    ensure_dir(vs.out_dir);

    AblationVariant var;
    var.name = name;
    var.training = run_training(vs);
    for (const TrainResult& tr : var.training) {
      // Variance of the per-episode mean reward over the last quarter,
      // the training-stability measure of the ablation study.
      const size_t n = tr.episodes.size();
      const size_t start = n - n / 4;
      std::vector<double> tail;
      for (size_t i = start; i < n; ++i) tail.push_back(tr.episodes[i].mean_reward);
      double mean = 0.0;
      for (double v : tail) mean += v;
      mean /= tail.empty() ? 1.0 : static_cast<double>(tail.size());
      double var_sum = 0.0;
      for (double v : tail) var_sum += (v - mean) * (v - mean);
      var.late_reward_variance.push_back(
          tail.size() > 1 ? var_sum / static_cast<double>(tail.size() - 1) : 0.0);

      RunSpec es = vs;
      es.mode = RunMode::Eval30Day;
      es.checkpoint_path = tr.checkpoint_path;
      es.seeds = {tr.seed};
      es.threads = 1;
      const auto sums = run_evaluation(es);
      var.evaluation.insert(var.evaluation.end(), sums.begin(), sums.end());
    }
    out.push_back(std::move(var));
  }

  std::ofstream abl(spec.out_dir + "/ablation_summary.csv");
  abl << "variant,seed,sw_total,volume_total,gini_median,jains_median,pmatch_median,"
         "late_reward_variance\n";
  for (const AblationVariant& var : out) {
    for (size_t i = 0; i < var.evaluation.size(); ++i) {
      const RunSummary& s = var.evaluation[i];
      abl << var.name << "," << s.seed << "," << fmt(s.sw_total) << "," << fmt(s.volume_total)
          << "," << fmt(s.gini_median) << "," << fmt(s.jains_median) << ","
          << fmt(s.pmatch_median) << "," << fmt(var.late_reward_variance[i]) << "\n";
    }
  }
  return out;
}

void emit_plot_data(const std::vector<std::string>& train_csvs,
                    const std::vector<std::string>& eval_csvs, const std::string& out_dir) {
  ensure_dir(out_dir);
  if (!train_csvs.empty()) {
    std::vector<std::vector<double>> curves;
    size_t len = SIZE_MAX;
    for (const std::string& path : train_csvs) {
      curves.push_back(read_csv_column(path, "mean_reward"));
      len = std::min(len, curves.back().size());
    }
    std::ofstream out(out_dir + "/learning_curve_agg.csv");
    out << "episode,median,q25,q75\n";
    for (size_t e = 0; e < len; ++e) {
      std::vector<double> v;
      v.reserve(curves.size());
      for (const auto& c : curves) v.push_back(c[e]);
      out << e << "," << fmt(quantile(v, 0.5)) << "," << fmt(quantile(v, 0.25)) << ","
          << fmt(quantile(v, 0.75)) << "\n";
    }
  }
  if (!eval_csvs.empty()) {
    // Per step-of-day volume profile, medians across all covered days.
    std::vector<std::vector<double>> slots(kStepsPerDay);
    for (const std::string& path : eval_csvs) {
      const std::vector<double> vol = read_csv_column(path, "volume_kwh");
      for (size_t i = 0; i < vol.size(); ++i) {
        slots[i % kStepsPerDay].push_back(vol[i]);
      }
    }
    std::ofstream out(out_dir + "/intraday_volume.csv");
    out << "step_of_day,volume_median\n";
    for (int s = 0; s < kStepsPerDay; ++s) {
      out << s << "," << fmt(quantile(slots[static_cast<size_t>(s)], 0.5)) << "\n";
    }
  }
}

}  // namespace v2v::harness
