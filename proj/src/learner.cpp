#include "v2v/learner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace v2v::learner {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool slot_present(const Eigen::VectorXd& joint_obs, int slot) {
  // A real agent's role one-hot sums to 1; padding is all zeros.
  const int base = slot * env::kObsDim;
  return joint_obs(base + 6) + joint_obs(base + 7) + joint_obs(base + 8) > 0.5;
}

}  // namespace

ActorNet ActorNet::make(const LearnerConfig& cfg, Rng& rng) {
  return ActorNet{Mlp::make({env::kObsDim, cfg.hidden, cfg.hidden, kActDim}, rng)};
}

CriticNet CriticNet::make(const LearnerConfig& cfg, Rng& rng) {
  return CriticNet{Mlp::make({cfg.critic_in_dim(), cfg.hidden, cfg.hidden, 1}, rng),
                   cfg.n_train};
}

ActionOut act(const ActorNet& actor, const EVAgent& agent, const env::Observation& obs,
              const SimConfig& cfg, OUNoise* noise, Rng* rng) {
  const Eigen::VectorXd raw = actor.net.forward(obs.to_vector());
  ActionOut a;
  a.price01 = 0.5 * (std::tanh(raw(0)) + 1.0);
  a.qfrac = sigmoid(raw(1));
  if (noise != nullptr && rng != nullptr) {
    const Eigen::VectorXd& n = noise->sample(*rng);
    a.price01 = std::clamp(a.price01 + n(0), 0.0, 1.0);
    a.qfrac = std::clamp(a.qfrac + n(1), 0.0, 1.0);
  }
  const Role role = classify_role(agent);
  const double cap = role == Role::Buyer ? deficit(agent)
                   : role == Role::Seller ? avail(agent)
                                          : 0.0;
  if (role == Role::Neutral) a.qfrac = 0.0;  // role masking
  a.price = cfg.price_min + a.price01 * cfg.band_width();
  a.quantity = a.qfrac * cap;
  return a;
}

Offer to_offer(const EVAgent& agent, const ActionOut& a) {
  return Offer{agent.id, classify_role(agent), a.price, a.quantity};
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
  }
}

std::vector<const Transition*> ReplayBuffer::sample(int batch, Rng& rng) const {
  std::vector<const Transition*> out;
  const int n = static_cast<int>(data_.size());
  if (n <= batch) {
    for (const Transition& t : data_) out.push_back(&t);
    return out;
  }
  std::set<int> chosen;
  while (static_cast<int>(out.size()) < batch) {
    const int idx = rng.uniform_int(0, n - 1);
    if (chosen.insert(idx).second) out.push_back(&data_[static_cast<size_t>(idx)]);
  }
  return out;
}

Eigen::VectorXd pad_joint(const std::vector<Eigen::VectorXd>& obs,
                          const std::vector<Eigen::VectorXd>& act, int n_train) {
  if (static_cast<int>(obs.size()) > n_train || act.size() > obs.size()) {
    throw std::invalid_argument("pad_joint: more agents than critic slots");
  }
  Eigen::VectorXd joint = Eigen::VectorXd::Zero(n_train * (env::kObsDim + kActDim));
  for (size_t i = 0; i < obs.size(); ++i) {
    joint.segment(static_cast<int>(i) * env::kObsDim, env::kObsDim) = obs[i];
  }
  const int act_base = n_train * env::kObsDim;
  for (size_t i = 0; i < act.size(); ++i) {
    joint.segment(act_base + static_cast<int>(i) * kActDim, kActDim) = act[i];
  }
  return joint;
}

double critic_update(CriticNet& critic, const CriticNet& critic_target,
                     const ActorNet& actor_target, const std::vector<const Transition*>& batch,
                     const LearnerConfig& cfg, Optimizer& opt) {
  const int b = static_cast<int>(batch.size());
  if (b == 0) return 0.0;
  const int obs_block = critic.n_train * env::kObsDim;
  const int in_dim = critic.net.in_dim();

  // Joint next input: stored next observations plus target-actor actions
  // recomputed for the slots that are present at t+1.
  Eigen::MatrixXd x(in_dim, b);
  Eigen::MatrixXd x_next = Eigen::MatrixXd::Zero(in_dim, b);
  std::vector<std::pair<int, int>> present;  // (column, slot)
  for (int c = 0; c < b; ++c) {
    x.col(c).head(obs_block) = batch[static_cast<size_t>(c)]->joint_obs;
    x.col(c).tail(in_dim - obs_block) = batch[static_cast<size_t>(c)]->joint_act;
    x_next.col(c).head(obs_block) = batch[static_cast<size_t>(c)]->next_joint_obs;
    for (int s = 0; s < critic.n_train; ++s) {
      if (slot_present(batch[static_cast<size_t>(c)]->next_joint_obs, s)) {
        present.emplace_back(c, s);
      }
    }
  }
  if (!present.empty()) {
    Eigen::MatrixXd next_obs(env::kObsDim, static_cast<int>(present.size()));
    for (size_t p = 0; p < present.size(); ++p) {
      const auto [c, s] = present[p];
      next_obs.col(static_cast<int>(p)) =
          batch[static_cast<size_t>(c)]->next_joint_obs.segment(s * env::kObsDim, env::kObsDim);
    }
    const Eigen::MatrixXd raw = actor_target.net.forward(next_obs);
    for (size_t p = 0; p < present.size(); ++p) {
      const auto [c, s] = present[p];
      x_next(obs_block + s * kActDim, c) = 0.5 * (std::tanh(raw(0, static_cast<int>(p))) + 1.0);
      x_next(obs_block + s * kActDim + 1, c) = sigmoid(raw(1, static_cast<int>(p)));
    }
  }

  const Eigen::MatrixXd q_next = critic_target.net.forward(x_next);  // 1 x b

  Mlp::Cache cache;
  const Eigen::MatrixXd q = critic.net.forward_cached(x, cache);  // 1 x b

  double loss = 0.0;
  double m_total = 0.0;
  Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(1, b);
  for (int c = 0; c < b; ++c) {
    const Transition& t = *batch[static_cast<size_t>(c)];
    for (int s = 0; s < critic.n_train; ++s) {
      if (t.mask(s) < 0.5) continue;
      const double y = t.reward(s) + cfg.gamma * (1.0 - t.done(s)) * q_next(0, c);
      const double err = q(0, c) - y;
      loss += err * err;
      dq(0, c) += 2.0 * err;
      m_total += 1.0;
    }
  }
  if (m_total == 0.0) return 0.0;
  loss /= m_total;
  dq /= m_total;

  Mlp::Grads grads = Mlp::Grads::zeros_like(critic.net);
  critic.net.backward(cache, dq, grads);
  opt.step(critic.net, grads);
  return loss;
}

namespace {

// Shared by actor_update and actor_gradient: gradient of
// mean_b Q(s_b, mu(s_b)) w.r.t. the actor parameters.
Mlp::Grads composed_actor_gradient(const ActorNet& actor, const CriticNet& critic,
                                   const std::vector<const Transition*>& batch,
                                   double* grad_norm) {
  const int b = static_cast<int>(batch.size());
  const int obs_block = critic.n_train * env::kObsDim;
  const int in_dim = critic.net.in_dim();

  std::vector<std::pair<int, int>> present;
  for (int c = 0; c < b; ++c) {
    for (int s = 0; s < critic.n_train; ++s) {
      if (batch[static_cast<size_t>(c)]->mask(s) > 0.5) present.emplace_back(c, s);
    }
  }
  Mlp::Grads grads = Mlp::Grads::zeros_like(actor.net);
  if (present.empty() || b == 0) {
    if (grad_norm != nullptr) *grad_norm = 0.0;
    return grads;
  }

  Eigen::MatrixXd actor_in(env::kObsDim, static_cast<int>(present.size()));
  for (size_t p = 0; p < present.size(); ++p) {
    const auto [c, s] = present[p];
    actor_in.col(static_cast<int>(p)) =
        batch[static_cast<size_t>(c)]->joint_obs.segment(s * env::kObsDim, env::kObsDim);
  }
  Mlp::Cache actor_cache;
  const Eigen::MatrixXd raw = actor.net.forward_cached(actor_in, actor_cache);

  // Critic input with the current policy's actions in the present slots.
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(in_dim, b);
  for (int c = 0; c < b; ++c) {
    x.col(c).head(obs_block) = batch[static_cast<size_t>(c)]->joint_obs;
  }
  Eigen::MatrixXd tanh_raw(1, static_cast<int>(present.size()));
  Eigen::MatrixXd sig_raw(1, static_cast<int>(present.size()));
  for (size_t p = 0; p < present.size(); ++p) {
    const auto [c, s] = present[p];
    const double th = std::tanh(raw(0, static_cast<int>(p)));
    const double sg = sigmoid(raw(1, static_cast<int>(p)));
    tanh_raw(0, static_cast<int>(p)) = th;
    sig_raw(0, static_cast<int>(p)) = sg;
    x(obs_block + s * kActDim, c) = 0.5 * (th + 1.0);
    x(obs_block + s * kActDim + 1, c) = sg;
  }

  Mlp::Cache critic_cache;
  critic.net.forward_cached(x, critic_cache);
  Eigen::MatrixXd dq = Eigen::MatrixXd::Constant(1, b, 1.0 / static_cast<double>(b));
  Mlp::Grads critic_scratch = Mlp::Grads::zeros_like(critic.net);
  const Eigen::MatrixXd dx = critic.net.backward(critic_cache, dq, critic_scratch);

  // Chain dQ/da through the squashing into the actor's raw outputs.
  Eigen::MatrixXd draw = Eigen::MatrixXd::Zero(kActDim, static_cast<int>(present.size()));
  for (size_t p = 0; p < present.size(); ++p) {
    const auto [c, s] = present[p];
    const double th = tanh_raw(0, static_cast<int>(p));
    const double sg = sig_raw(0, static_cast<int>(p));
    draw(0, static_cast<int>(p)) = dx(obs_block + s * kActDim, c) * 0.5 * (1.0 - th * th);
    draw(1, static_cast<int>(p)) = dx(obs_block + s * kActDim + 1, c) * sg * (1.0 - sg);
  }
  actor.net.backward(actor_cache, draw, grads);
  if (grad_norm != nullptr) *grad_norm = std::sqrt(grads.squared_norm());
  return grads;
}

}  // namespace

Mlp::Grads actor_gradient(const ActorNet& actor, const CriticNet& critic,
                          const std::vector<const Transition*>& batch) {
  return composed_actor_gradient(actor, critic, batch, nullptr);
}

double actor_update(ActorNet& actor, const CriticNet& critic,
                    const std::vector<const Transition*>& batch, const LearnerConfig& cfg,
                    Optimizer& opt) {
  (void)cfg;
  double norm = 0.0;
  const Mlp::Grads grads = composed_actor_gradient(actor, critic, batch, &norm);
  opt.step(actor.net, grads, /*ascend=*/true);
  return norm;
}

namespace {

nlohmann::json mlp_to_json(const Mlp& net) {
  nlohmann::json j;
  j["layers"] = nlohmann::json::array();
  for (size_t l = 0; l < net.W.size(); ++l) {
    nlohmann::json layer;
    layer["rows"] = net.W[l].rows();
    layer["cols"] = net.W[l].cols();
    std::vector<double> w(net.W[l].data(), net.W[l].data() + net.W[l].size());
    std::vector<double> b(net.b[l].data(), net.b[l].data() + net.b[l].size());
    layer["W"] = w;  // column-major
    layer["b"] = b;
    j["layers"].push_back(std::move(layer));
  }
  return j;
}

Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp net;
  for (const auto& layer : j.at("layers")) {
    const long rows = layer.at("rows").get<long>();
    const long cols = layer.at("cols").get<long>();
    const auto w = layer.at("W").get<std::vector<double>>();
    const auto b = layer.at("b").get<std::vector<double>>();
    if (static_cast<long>(w.size()) != rows * cols || static_cast<long>(b.size()) != rows) {
      throw std::runtime_error("checkpoint tensor shape mismatch");
    }
    Eigen::MatrixXd W(rows, cols);
    std::copy(w.begin(), w.end(), W.data());
    Eigen::VectorXd B(rows);
    std::copy(b.begin(), b.end(), B.data());
    net.W.push_back(std::move(W));
    net.b.push_back(std::move(B));
  }
  if (net.W.empty()) throw std::runtime_error("checkpoint has no layers");
  return net;
}

nlohmann::json learner_cfg_to_json(const LearnerConfig& c) {
  return nlohmann::json{{"gamma", c.gamma},
                        {"actor_lr", c.actor_lr},
                        {"critic_lr", c.critic_lr},
                        {"batch", c.batch},
                        {"tau", c.tau},
                        {"episodes", c.episodes},
                        {"n_train", c.n_train},
                        {"seeds", c.seeds},
                        {"hidden", c.hidden},
                        {"warmup", c.warmup},
                        {"actor_warmup", c.actor_warmup},
                        {"actor_weight_decay", c.actor_weight_decay},
                        {"buffer_capacity", c.buffer_capacity},
                        {"ou_theta", c.ou_theta},
                        {"ou_sigma", c.ou_sigma},
                        {"ou_sigma_end", c.ou_sigma_end},
                        {"ou_anneal_frac", c.ou_anneal_frac},
                        {"optimizer", c.optimizer}};
}

LearnerConfig learner_cfg_from_json(const nlohmann::json& j) {
  LearnerConfig c;
  c.gamma = j.at("gamma").get<double>();
  c.actor_lr = j.at("actor_lr").get<double>();
  c.critic_lr = j.at("critic_lr").get<double>();
  c.batch = j.at("batch").get<int>();
  c.tau = j.at("tau").get<double>();
  c.episodes = j.at("episodes").get<int>();
  c.n_train = j.at("n_train").get<int>();
  c.seeds = j.at("seeds").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.warmup = j.at("warmup").get<int>();
  c.actor_warmup = j.at("actor_warmup").get<int>();
  c.actor_weight_decay = j.at("actor_weight_decay").get<double>();
  c.buffer_capacity = j.at("buffer_capacity").get<size_t>();
  c.ou_theta = j.at("ou_theta").get<double>();
  c.ou_sigma = j.at("ou_sigma").get<double>();
  c.ou_sigma_end = j.at("ou_sigma_end").get<double>();
  c.ou_anneal_frac = j.at("ou_anneal_frac").get<double>();
  c.optimizer = j.at("optimizer").get<std::string>();
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json j;
  j["format"] = "v2v-checkpoint";
  j["version"] = 1;
  j["seed"] = ckpt.seed;
  j["learner"] = learner_cfg_to_json(ckpt.cfg);
  j["actor"] = mlp_to_json(ckpt.actor.net);
  j["actor_target"] = mlp_to_json(ckpt.actor_target.net);
  j["critic"] = mlp_to_json(ckpt.critic.net);
  j["critic_target"] = mlp_to_json(ckpt.critic_target.net);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump(0) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("format", "") != "v2v-checkpoint") {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  Checkpoint ckpt;
  ckpt.seed = j.at("seed").get<uint64_t>();
  ckpt.cfg = learner_cfg_from_json(j.at("learner"));
  ckpt.actor.net = mlp_from_json(j.at("actor"));
  ckpt.actor_target.net = mlp_from_json(j.at("actor_target"));
  ckpt.critic.net = mlp_from_json(j.at("critic"));
  ckpt.critic.n_train = ckpt.cfg.n_train;
  ckpt.critic_target.net = mlp_from_json(j.at("critic_target"));
  ckpt.critic_target.n_train = ckpt.cfg.n_train;

  if (ckpt.actor.net.in_dim() != env::kObsDim || ckpt.actor.net.out_dim() != kActDim ||
      ckpt.critic.net.in_dim() != ckpt.cfg.critic_in_dim() || ckpt.critic.net.out_dim() != 1) {
    throw std::runtime_error("checkpoint shape mismatch against learner config");
  }
  return ckpt;
}

}  // namespace v2v::learner
