#include "v2v/nets.hpp"

#include <cmath>

namespace v2v::learner {

Mlp Mlp::make(const std::vector<int>& sizes, Rng& rng) {
  if (sizes.size() < 2) throw std::invalid_argument("Mlp needs at least input and output sizes");
  Mlp net;
  for (size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    double scale = std::sqrt(6.0 / (fan_in + fan_out));
    if (l + 2 == sizes.size()) scale *= 0.01;  // small final layer
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) {
        w(r, c) = rng.uniform(-scale, scale);
      }
    }
    net.W.push_back(std::move(w));
    net.b.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return net;
}

size_t Mlp::n_params() const {
  size_t n = 0;
  for (size_t l = 0; l < W.size(); ++l) {
    n += static_cast<size_t>(W[l].size()) + static_cast<size_t>(b[l].size());
  }
  return n;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd h = x;
  for (size_t l = 0; l < W.size(); ++l) {
    h = (W[l] * h).colwise() + b[l];
    if (l + 1 < W.size()) h = h.cwiseMax(0.0);
  }
  return h;
}

Eigen::MatrixXd Mlp::forward_cached(const Eigen::MatrixXd& x, Cache& cache) const {
  cache.input = x;
  cache.pre.clear();
  cache.post.clear();
  Eigen::MatrixXd h = x;
  for (size_t l = 0; l < W.size(); ++l) {
    Eigen::MatrixXd z = (W[l] * h).colwise() + b[l];
    cache.pre.push_back(z);
    if (l + 1 < W.size()) {
      h = z.cwiseMax(0.0);
      cache.post.push_back(h);
    } else {
      h = z;
    }
  }
  return h;
}

Mlp::Grads Mlp::Grads::zeros_like(const Mlp& net) {
  Grads g;
  for (size_t l = 0; l < net.W.size(); ++l) {
    g.W.push_back(Eigen::MatrixXd::Zero(net.W[l].rows(), net.W[l].cols()));
    g.b.push_back(Eigen::VectorXd::Zero(net.b[l].size()));
  }
  return g;
}

double Mlp::Grads::squared_norm() const {
  double n = 0.0;
  for (size_t l = 0; l < W.size(); ++l) {
    n += W[l].squaredNorm() + b[l].squaredNorm();
  }
  return n;
}

Eigen::MatrixXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& dout,
                              Grads& grads) const {
  Eigen::MatrixXd delta = dout;
  for (size_t l = W.size(); l-- > 0;) {
    if (l + 1 < W.size()) {
      // ReLU mask of this layer's pre-activation.
      delta = delta.cwiseProduct(
          (cache.pre[l].array() > 0.0).cast<double>().matrix());
    }
    const Eigen::MatrixXd& acts = l == 0 ? cache.input : cache.post[l - 1];
    grads.W[l] += delta * acts.transpose();
    grads.b[l] += delta.rowwise().sum();
    if (l > 0) delta = W[l].transpose() * delta;
    else return W[0].transpose() * delta;
  }
  return Eigen::MatrixXd();
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
  if (target.W.size() != online.W.size()) throw std::invalid_argument("layer count mismatch");
  for (size_t l = 0; l < target.W.size(); ++l) {
    if (target.W[l].rows() != online.W[l].rows() || target.W[l].cols() != online.W[l].cols()) {
      throw std::invalid_argument("shape mismatch in soft update");
    }
    target.W[l] = tau * online.W[l] + (1.0 - tau) * target.W[l];
    target.b[l] = tau * online.b[l] + (1.0 - tau) * target.b[l];
  }
}

Optimizer::Optimizer(Kind kind, const Mlp& net, double lr, double weight_decay)
    : kind_(kind), lr_(lr), weight_decay_(weight_decay) {
  for (size_t l = 0; l < net.W.size(); ++l) {
    mw_.push_back(Eigen::MatrixXd::Zero(net.W[l].rows(), net.W[l].cols()));
    vw_.push_back(Eigen::MatrixXd::Zero(net.W[l].rows(), net.W[l].cols()));
    mb_.push_back(Eigen::VectorXd::Zero(net.b[l].size()));
    vb_.push_back(Eigen::VectorXd::Zero(net.b[l].size()));
  }
}

Optimizer::Kind Optimizer::kind_from_string(const std::string& s) {
  if (s == "adam") return Kind::Adam;
  if (s == "sgd_momentum") return Kind::SgdMomentum;
  throw std::invalid_argument("unknown optimizer: " + s);
}

void Optimizer::step(Mlp& net, const Mlp::Grads& grads, bool ascend) {
  const double sign = ascend ? -1.0 : 1.0;  // descend on sign * grads
  ++t_;
  if (weight_decay_ > 0.0) {
    // Decoupled decay; keeps squashed outputs away from the saturated
    // tails where their gradients vanish.
    for (size_t l = 0; l < net.W.size(); ++l) {
      net.W[l] *= 1.0 - lr_ * weight_decay_;
    }
  }
  if (kind_ == Kind::SgdMomentum) {
    constexpr double momentum = 0.9;
    for (size_t l = 0; l < net.W.size(); ++l) {
      mw_[l] = momentum * mw_[l] + sign * grads.W[l];
      mb_[l] = momentum * mb_[l] + sign * grads.b[l];
      net.W[l] -= lr_ * mw_[l];
      net.b[l] -= lr_ * mb_[l];
    }
    return;
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (size_t l = 0; l < net.W.size(); ++l) {
    const Eigen::MatrixXd gw = sign * grads.W[l];
    const Eigen::VectorXd gb = sign * grads.b[l];
    mw_[l] = beta1 * mw_[l] + (1.0 - beta1) * gw;
    vw_[l] = beta2 * vw_[l] + (1.0 - beta2) * gw.cwiseProduct(gw);
    mb_[l] = beta1 * mb_[l] + (1.0 - beta1) * gb;
    vb_[l] = beta2 * vb_[l] + (1.0 - beta2) * gb.cwiseProduct(gb);
    net.W[l] -= lr_ * (mw_[l] / bc1).cwiseQuotient(((vw_[l] / bc2).cwiseSqrt().array() + eps).matrix());
    net.b[l] -= lr_ * (mb_[l] / bc1).cwiseQuotient(((vb_[l] / bc2).cwiseSqrt().array() + eps).matrix());
  }
}

}  // namespace v2v::learner
