#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "v2v/rng.hpp"

namespace v2v::learner {

// Multilayer perceptron with ReLU hidden activations and a linear output
// layer, operating on column-batches. Backpropagation is implemented by
// hand; both parameter gradients and input gradients are exposed so the
// actor update can chain through the critic's action slots.
struct Mlp {
  std::vector<Eigen::MatrixXd> W;  // W[l]: sizes[l+1] x sizes[l]
  std::vector<Eigen::VectorXd> b;

  // Xavier-uniform hidden layers; the output layer is scaled down so a
  // fresh policy starts near the middle of the action space.
  static Mlp make(const std::vector<int>& sizes, Rng& rng);

  int in_dim() const { return static_cast<int>(W.front().cols()); }
  int out_dim() const { return static_cast<int>(W.back().rows()); }
  size_t n_layers() const { return W.size(); }
  size_t n_params() const;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

  struct Cache {
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> pre;   // pre-activations per layer
    std::vector<Eigen::MatrixXd> post;  // post-activations (ReLU) per hidden layer
  };
  Eigen::MatrixXd forward_cached(const Eigen::MatrixXd& x, Cache& cache) const;

  struct Grads {
    std::vector<Eigen::MatrixXd> W;
    std::vector<Eigen::VectorXd> b;
    static Grads zeros_like(const Mlp& net);
    double squared_norm() const;
  };

  // Backward pass from dL/doutput; accumulates parameter gradients into
  // `grads` and returns dL/dinput.
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& dout, Grads& grads) const;
};

// target <- tau * online + (1 - tau) * target, elementwise.
// Throws std::invalid_argument on shape mismatch.
void soft_update(Mlp& target, const Mlp& online, double tau);

// Gradient-descent state for one Mlp: Adam (default) or SGD with
// momentum 0.9, with optional decoupled weight decay. The choice is
// recorded in run metadata.
class Optimizer {
public:
  enum class Kind { Adam, SgdMomentum };

  Optimizer(Kind kind, const Mlp& net, double lr, double weight_decay = 0.0);
  static Kind kind_from_string(const std::string& s);

  // One descent step (pass ascend=true to maximize).
  void step(Mlp& net, const Mlp::Grads& grads, bool ascend = false);

  double lr() const { return lr_; }

private:
  Kind kind_;
  double lr_;
  double weight_decay_;
  long t_ = 0;
  std::vector<Eigen::MatrixXd> mw_, vw_;
  std::vector<Eigen::VectorXd> mb_, vb_;
};

}  // namespace v2v::learner
