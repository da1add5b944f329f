#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "v2v/domain.hpp"
#include "v2v/env.hpp"
#include "v2v/nets.hpp"
#include "v2v/rng.hpp"

namespace v2v::learner {

inline constexpr int kActDim = 2;  // (price01, qfrac), both normalized to [0,1]

// Hyperparameters of the shared-network MADDPG learner.
struct LearnerConfig {
  double gamma = 0.95;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  int batch = 256;
  double tau = 0.01;
  int episodes = 2000;
  int n_train = 20;  // critic slot count; fixes the joint input width
  int seeds = 3;
  int hidden = 128;
  int warmup = 1000;        // stored transitions before critic updates begin
  int actor_warmup = 2000;  // stored transitions before actor updates begin;
                            // the critic sees data first so early policy
                            // gradients are not pure noise
  double actor_weight_decay = 0.0;
  size_t buffer_capacity = 100000;
  double ou_theta = 0.15;
  double ou_sigma = 0.2;      // on the normalized action scale
  double ou_sigma_end = 0.05; // sigma after annealing
  double ou_anneal_frac = 0.5;
  std::string optimizer = "adam";  // or "sgd_momentum"

  int critic_in_dim() const { return n_train * (env::kObsDim + kActDim); }
};

// Shared actor: observation (incl. role one-hot) -> raw (price, quantity)
// head. tanh squashes the price into the band; sigmoid scales the
// quantity by the role-dependent cap.
struct ActorNet {
  Mlp net;
  static ActorNet make(const LearnerConfig& cfg, Rng& rng);
};

// Shared centralized critic over the fixed-width joint input
// [obs slots | action slots], slots sorted by agent id, padding last.
struct CriticNet {
  Mlp net;
  int n_train = 0;
  static CriticNet make(const LearnerConfig& cfg, Rng& rng);
};

// Mean-reverting exploration noise, one state per action dimension.
// Reset at every episode start.
class OUNoise {
public:
  OUNoise(int dims, double theta, double sigma)
      : state_(Eigen::VectorXd::Zero(dims)), theta_(theta), sigma_(sigma) {}

  void reset() { state_.setZero(); }
  void set_sigma(double s) { sigma_ = s; }

  const Eigen::VectorXd& sample(Rng& rng) {
    for (int i = 0; i < state_.size(); ++i) {
      state_(i) += theta_ * (0.0 - state_(i)) + sigma_ * rng.normal();
    }
    return state_;
  }

private:
  Eigen::VectorXd state_;
  double theta_;
  double sigma_;
};

struct ActionOut {
  double price01 = 0.0;   // normalized price position in the band
  double qfrac = 0.0;     // fraction of the role cap
  double price = 0.0;     // currency/kWh
  double quantity = 0.0;  // kWh
};

// Deterministic policy evaluation: squash, optional OU perturbation
// (pre-clipping), then role masking. Outputs always respect the action
// bounds: price inside the band, quantity within [0, cap].
ActionOut act(const ActorNet& actor, const EVAgent& agent, const env::Observation& obs,
              const SimConfig& cfg, OUNoise* noise = nullptr, Rng* rng = nullptr);

Offer to_offer(const EVAgent& agent, const ActionOut& a);

// One stored step: fixed-width joint views plus per-slot rewards, done
// flags and a mask of the slots that held real agents at time t. Slots of
// the next observation are assigned independently from the population at
// t+1; absent slots are zero (their all-zero role one-hot marks them).
struct Transition {
  Eigen::VectorXd joint_obs;
  Eigen::VectorXd joint_act;
  Eigen::VectorXd reward;
  Eigen::VectorXd done;
  Eigen::VectorXd mask;
  Eigen::VectorXd next_joint_obs;
};

// FIFO ring buffer with uniform without-replacement batch sampling.
class ReplayBuffer {
public:
  explicit ReplayBuffer(size_t capacity) : capacity_(capacity) {}

  void push(Transition t);
  size_t size() const { return data_.size(); }
  size_t capacity() const { return capacity_; }
  std::vector<const Transition*> sample(int batch, Rng& rng) const;

private:
  size_t capacity_;
  size_t head_ = 0;
  std::vector<Transition> data_;
};

// Fixed-width joint vector [obs slots | action slots] for the critic.
// Callers pass agents sorted by id; empty slots are zero-padded (the
// all-zero role one-hot doubles as the absent flag). Throws
// std::invalid_argument when more agents than slots are supplied.
Eigen::VectorXd pad_joint(const std::vector<Eigen::VectorXd>& obs,
                          const std::vector<Eigen::VectorXd>& act, int n_train);

// One TD step on the critic: squared error against
// y_i = r_i + gamma * (1 - done_i) * Q'(s', mu'(s')). Returns the loss.
double critic_update(CriticNet& critic, const CriticNet& critic_target,
                     const ActorNet& actor_target, const std::vector<const Transition*>& batch,
                     const LearnerConfig& cfg, Optimizer& opt);

// Deterministic policy-gradient step: ascends grad_theta mu * grad_a Q,
// chaining through each agent's own action slot (summed over slots since
// the actor is shared). Returns the gradient norm.
double actor_update(ActorNet& actor, const CriticNet& critic,
                    const std::vector<const Transition*>& batch, const LearnerConfig& cfg,
                    Optimizer& opt);

// Exposed for gradient-check tests: the actor parameter gradient of
// mean_b Q(s_b, mu(s_b)) without taking a step.
Mlp::Grads actor_gradient(const ActorNet& actor, const CriticNet& critic,
                          const std::vector<const Transition*>& batch);

// Checkpoints: versioned JSON dump of all parameter tensors plus the
// learner config and seed.
struct Checkpoint {
  ActorNet actor;
  ActorNet actor_target;
  CriticNet critic;
  CriticNet critic_target;
  LearnerConfig cfg;
  uint64_t seed = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);  // throws on shape mismatch

}  // namespace v2v::learner
