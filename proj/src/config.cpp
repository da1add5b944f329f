#include "v2v/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace v2v::config {

namespace {

using nlohmann::json;

template <typename T>
void get(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

void check_keys(const json& j, const char* section, std::initializer_list<const char*> known) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw std::runtime_error(std::string("unknown config key: ") + section + "." + it.key());
    }
  }
}

void parse_sim(const json& j, SimConfig& c) {
  check_keys(j, "sim",
             {"dt_hours", "eta", "price_min", "price_max", "grid_price", "duration_min",
              "duration_max", "soc0_min", "soc0_max", "need_min", "need_max", "n_target",
              "capacity_kwh", "buffer_frac", "max_power_kw", "u_base_min", "u_base_max"});
  get(j, "dt_hours", c.dt_hours);
  get(j, "eta", c.eta);
  get(j, "price_min", c.price_min);
  get(j, "price_max", c.price_max);
  get(j, "grid_price", c.grid_price);
  get(j, "duration_min", c.duration_min);
  get(j, "duration_max", c.duration_max);
  get(j, "soc0_min", c.soc0_min);
  get(j, "soc0_max", c.soc0_max);
  get(j, "need_min", c.need_min);
  get(j, "need_max", c.need_max);
  get(j, "n_target", c.n_target);
  get(j, "capacity_kwh", c.capacity_kwh);
  get(j, "buffer_frac", c.buffer_frac);
  get(j, "max_power_kw", c.max_power_kw);
  get(j, "u_base_min", c.u_base_min);
  get(j, "u_base_max", c.u_base_max);
  if (!(c.price_min < c.price_max)) throw std::runtime_error("config: price_min must be < price_max");
  if (!(c.eta > 0.0 && c.eta <= 1.0)) throw std::runtime_error("config: eta must be in (0,1]");
}

void parse_valuation(const json& j, ValuationParams& v) {
  check_keys(j, "valuation",
             {"v_base_buy", "beta_urgency", "gamma_opportunity", "c_base_sell", "v_battery",
              "c_grid", "delta_degrad", "lambda_time"});
  get(j, "v_base_buy", v.v_base_buy);
  get(j, "beta_urgency", v.beta_urgency);
  get(j, "gamma_opportunity", v.gamma_opportunity);
  get(j, "c_base_sell", v.c_base_sell);
  get(j, "v_battery", v.v_battery);
  get(j, "c_grid", v.c_grid);
  get(j, "delta_degrad", v.delta_degrad);
  get(j, "lambda_time", v.lambda_time);
}

void parse_rewards(const json& j, rewards::RewardWeights& w) {
  check_keys(j, "rewards",
             {"alpha_r", "w_price", "kappa_price", "mu", "lambda_w", "lambda_1", "lambda_2"});
  get(j, "alpha_r", w.alpha_r);
  get(j, "w_price", w.w_price);
  get(j, "kappa_price", w.kappa_price);
  get(j, "mu", w.mu);
  get(j, "lambda_w", w.lambda_w);
  get(j, "lambda_1", w.lambda_1);
  get(j, "lambda_2", w.lambda_2);
}

void parse_learner(const json& j, learner::LearnerConfig& c) {
  check_keys(j, "learner",
             {"gamma", "actor_lr", "critic_lr", "batch", "tau", "episodes", "n_train", "seeds",
              "hidden", "warmup", "actor_warmup", "actor_weight_decay", "buffer_capacity",
              "ou_theta", "ou_sigma", "ou_sigma_end", "ou_anneal_frac", "optimizer"});
  get(j, "gamma", c.gamma);
  get(j, "actor_lr", c.actor_lr);
  get(j, "critic_lr", c.critic_lr);
  get(j, "batch", c.batch);
  get(j, "tau", c.tau);
  get(j, "episodes", c.episodes);
  get(j, "n_train", c.n_train);
  get(j, "seeds", c.seeds);
  get(j, "hidden", c.hidden);
  get(j, "warmup", c.warmup);
  get(j, "actor_warmup", c.actor_warmup);
  get(j, "actor_weight_decay", c.actor_weight_decay);
  get(j, "buffer_capacity", c.buffer_capacity);
  get(j, "ou_theta", c.ou_theta);
  get(j, "ou_sigma", c.ou_sigma);
  get(j, "ou_sigma_end", c.ou_sigma_end);
  get(j, "ou_anneal_frac", c.ou_anneal_frac);
  get(j, "optimizer", c.optimizer);
  if (!(c.gamma > 0.0 && c.gamma < 1.0)) throw std::runtime_error("config: gamma must be in (0,1)");
  if (!(c.tau > 0.0 && c.tau <= 1.0)) throw std::runtime_error("config: tau must be in (0,1]");
}

}  // namespace

ProjectConfig from_json_text(const std::string& text) {
  ProjectConfig cfg;
  const json j = json::parse(text);
  check_keys(j, "", {"sim", "valuation", "rewards", "learner"});
  if (j.contains("sim")) parse_sim(j.at("sim"), cfg.sim);
  if (j.contains("valuation")) parse_valuation(j.at("valuation"), cfg.valuation);
  if (j.contains("rewards")) parse_rewards(j.at("rewards"), cfg.rewards);
  if (j.contains("learner")) parse_learner(j.at("learner"), cfg.learner);
  return cfg;
}

ProjectConfig load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string to_json_text(const ProjectConfig& c) {
  json j;
  j["sim"] = {{"dt_hours", c.sim.dt_hours},
              {"eta", c.sim.eta},
              {"price_min", c.sim.price_min},
              {"price_max", c.sim.price_max},
              {"grid_price", c.sim.grid_price},
              {"duration_min", c.sim.duration_min},
              {"duration_max", c.sim.duration_max},
              {"soc0_min", c.sim.soc0_min},
              {"soc0_max", c.sim.soc0_max},
              {"need_min", c.sim.need_min},
              {"need_max", c.sim.need_max},
              {"n_target", c.sim.n_target},
              {"capacity_kwh", c.sim.capacity_kwh},
              {"buffer_frac", c.sim.buffer_frac},
              {"max_power_kw", c.sim.max_power_kw},
              {"u_base_min", c.sim.u_base_min},
              {"u_base_max", c.sim.u_base_max}};
  j["valuation"] = {{"v_base_buy", c.valuation.v_base_buy},
                    {"beta_urgency", c.valuation.beta_urgency},
                    {"gamma_opportunity", c.valuation.gamma_opportunity},
                    {"c_base_sell", c.valuation.c_base_sell},
                    {"v_battery", c.valuation.v_battery},
                    {"c_grid", c.valuation.c_grid},
                    {"delta_degrad", c.valuation.delta_degrad},
                    {"lambda_time", c.valuation.lambda_time}};
  j["rewards"] = {{"alpha_r", c.rewards.alpha_r},
                  {"w_price", c.rewards.w_price},
                  {"kappa_price", c.rewards.kappa_price},
                  {"mu", c.rewards.mu},
                  {"lambda_w", c.rewards.lambda_w},
                  {"lambda_1", c.rewards.lambda_1},
                  {"lambda_2", c.rewards.lambda_2}};
  j["learner"] = {{"gamma", c.learner.gamma},
                  {"actor_lr", c.learner.actor_lr},
                  {"critic_lr", c.learner.critic_lr},
                  {"batch", c.learner.batch},
                  {"tau", c.learner.tau},
                  {"episodes", c.learner.episodes},
                  {"n_train", c.learner.n_train},
                  {"seeds", c.learner.seeds},
                  {"hidden", c.learner.hidden},
                  {"warmup", c.learner.warmup},
                  {"actor_warmup", c.learner.actor_warmup},
                  {"actor_weight_decay", c.learner.actor_weight_decay},
                  {"buffer_capacity", c.learner.buffer_capacity},
                  {"ou_theta", c.learner.ou_theta},
                  {"ou_sigma", c.learner.ou_sigma},
                  {"ou_sigma_end", c.learner.ou_sigma_end},
                  {"ou_anneal_frac", c.learner.ou_anneal_frac},
                  {"optimizer", c.learner.optimizer}};
  return j.dump(2);
}

}  // namespace v2v::config
