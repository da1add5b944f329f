#include "v2v/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace v2v::optim {

namespace {

// Half-surplus weights; zero for infeasible pairs so those cells never
// contribute to utilities or gradients.
Eigen::MatrixXd half_surplus(const AllocationProblem& prob) {
  return (prob.surplus.array() >= 0.0).select(0.5 * prob.surplus, 0.0);
}

// Projection of v onto { w >= 0, sum(w) <= cap }, restricted to coords
// where mask is set (others are pinned to zero). Uses the sort-based
// simplex projection when the cap binds.
void project_row_capped(Eigen::VectorXd& v, const Eigen::Array<bool, Eigen::Dynamic, 1>& mask,
                        double cap) {
  const int n = static_cast<int>(v.size());
  double clamped_sum = 0.0;
  for (int k = 0; k < n; ++k) {
    if (!mask(k)) {
      v(k) = 0.0;
    } else {
      clamped_sum += std::max(v(k), 0.0);
    }
  }
  if (clamped_sum <= cap) {
    for (int k = 0; k < n; ++k) v(k) = std::max(v(k), 0.0);
    return;
  }
  // Simplex projection onto sum == cap over the masked coords.
  std::vector<double> vals;
  vals.reserve(n);
  for (int k = 0; k < n; ++k) {
    if (mask(k)) vals.push_back(v(k));
  }
  std::sort(vals.begin(), vals.end(), std::greater<double>());
  double cumsum = 0.0;
  double theta = 0.0;
  int rho = 0;
  for (size_t k = 0; k < vals.size(); ++k) {
    cumsum += vals[k];
    const double t = (cumsum - cap) / static_cast<double>(k + 1);
    if (vals[k] - t > 0.0) {
      rho = static_cast<int>(k + 1);
      theta = t;
    }
  }
  (void)rho;
  for (int k = 0; k < n; ++k) {
    v(k) = mask(k) ? std::max(v(k) - theta, 0.0) : 0.0;
  }
}

struct FeasibleMask {
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> m;
  explicit FeasibleMask(const AllocationProblem& p) : m(p.surplus.array() >= 0.0) {}
};

Eigen::MatrixXd project_rows(const AllocationProblem& prob, const FeasibleMask& fm,
                             Eigen::MatrixXd x) {
  for (int i = 0; i < prob.n_buyers(); ++i) {
    Eigen::VectorXd row = x.row(i).transpose();
    project_row_capped(row, fm.m.row(i).transpose(), prob.buyer_caps(i));
    x.row(i) = row.transpose();
  }
  return x;
}

Eigen::MatrixXd project_cols(const AllocationProblem& prob, const FeasibleMask& fm,
                             Eigen::MatrixXd x) {
  for (int j = 0; j < prob.n_sellers(); ++j) {
    Eigen::VectorXd col = x.col(j);
    project_row_capped(col, fm.m.col(j), prob.seller_caps(j));
    x.col(j) = col;
  }
  return x;
}

Eigen::MatrixXd dykstra_project(const AllocationProblem& prob, const FeasibleMask& fm,
                                Eigen::MatrixXd x) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  Eigen::MatrixXd q = p;
  Eigen::MatrixXd prev = x;
  for (int sweep = 0; sweep < 500; ++sweep) {
    const Eigen::MatrixXd y = project_rows(prob, fm, x + p);
    p = x + p - y;
    x = project_cols(prob, fm, y + q);
    q = y + q - x;
    const double change = (x - y).cwiseAbs().maxCoeff();
    const double drift = (x - prev).cwiseAbs().maxCoeff();
    if (change < 1e-13 && drift < 1e-13) break;
    prev = x;
  }
  return x;
}

Eigen::MatrixXd gradient(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x, double eps) {
  const Eigen::ArrayXd rb = 1.0 / ((w.cwiseProduct(x)).rowwise().sum().array() + eps);
  const Eigen::ArrayXd rs = 1.0 / ((w.cwiseProduct(x)).colwise().sum().transpose().array() + eps);
  Eigen::MatrixXd g = w;
  for (int i = 0; i < g.rows(); ++i) {
    for (int j = 0; j < g.cols(); ++j) {
      g(i, j) *= rb(i) + rs(j);
    }
  }
  return g;
}

double objective_of(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x, double eps) {
  const Eigen::ArrayXd ub = (w.cwiseProduct(x)).rowwise().sum().array();
  const Eigen::ArrayXd us = (w.cwiseProduct(x)).colwise().sum().transpose().array();
  return (ub + eps).log().sum() + (us + eps).log().sum();
}

// Scale rows then columns down to their caps. Column scaling only lowers
// row sums, so one pass yields a strictly feasible point.
void enforce_caps(const AllocationProblem& prob, const FeasibleMask& fm, Eigen::MatrixXd& x) {
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < x.cols(); ++j) {
      if (!fm.m(i, j) || x(i, j) < 0.0) x(i, j) = 0.0;
    }
  }
  for (int i = 0; i < x.rows(); ++i) {
    const double s = x.row(i).sum();
    if (s > prob.buyer_caps(i) && s > 0.0) x.row(i) *= prob.buyer_caps(i) / s;
  }
  for (int j = 0; j < x.cols(); ++j) {
    const double s = x.col(j).sum();
    if (s > prob.seller_caps(j) && s > 0.0) x.col(j) *= prob.seller_caps(j) / s;
  }
}

double pg_residual(const AllocationProblem& prob, const FeasibleMask& fm,
                   const Eigen::MatrixXd& w, const Eigen::MatrixXd& x, double eps) {
  constexpr double probe = 1e-4;
  const Eigen::MatrixXd g = gradient(w, x, eps);
  const Eigen::MatrixXd moved = dykstra_project(prob, fm, x + probe * g);
  return (x - moved).norm() / probe;
}

}  // namespace

Eigen::VectorXd buyer_utilities(const AllocationProblem& prob, const Eigen::MatrixXd& x) {
  return half_surplus(prob).cwiseProduct(x).rowwise().sum();
}

Eigen::VectorXd seller_utilities(const AllocationProblem& prob, const Eigen::MatrixXd& x) {
  return half_surplus(prob).cwiseProduct(x).colwise().sum().transpose();
}

double allocation_objective(const AllocationProblem& prob, const Eigen::MatrixXd& x) {
  return objective_of(half_surplus(prob), x, prob.epsilon);
}

Eigen::MatrixXd project_feasible(const AllocationProblem& prob, Eigen::MatrixXd x) {
  const FeasibleMask fm(prob);
  return dykstra_project(prob, fm, std::move(x));
}

AllocationResult solve_allocation(const AllocationProblem& prob, double tol, int max_iter) {
  const int nb = prob.n_buyers();
  const int ns = prob.n_sellers();
  if (nb == 0 || ns == 0 || !(prob.surplus.array() >= 0.0).any()) {
    throw NoFeasiblePairs();
  }

  const FeasibleMask fm(prob);
  const Eigen::MatrixXd w = half_surplus(prob);
  const double eps = prob.epsilon;

  AllocationResult out;
  out.x = Eigen::MatrixXd::Zero(nb, ns);

  // All feasible pairs have zero surplus: the objective is constant, any
  // feasible point is optimal.
  if (w.maxCoeff() <= 0.0) {
    out.objective = objective_of(w, out.x, eps);
    out.converged = true;
    return out;
  }

  // Warm start proportional to surplus, scaled inside the caps.
  Eigen::MatrixXd x = w;
  double scale = std::numeric_limits<double>::infinity();
  for (int i = 0; i < nb; ++i) {
    const double s = x.row(i).sum();
    if (s > 0.0) scale = std::min(scale, prob.buyer_caps(i) / s);
  }
  for (int j = 0; j < ns; ++j) {
    const double s = x.col(j).sum();
    if (s > 0.0) scale = std::min(scale, prob.seller_caps(j) / s);
  }
  x *= 0.9 * scale;
  x = dykstra_project(prob, fm, x);

  // FISTA with backtracking and function-value restart.
  double fx = objective_of(w, x, eps);
  Eigen::MatrixXd x_prev = x;
  Eigen::MatrixXd y = x;
  double t_acc = 1.0;
  double step = 1.0;
  double best_f = fx;
  Eigen::MatrixXd best_x = x;

  for (int it = 1; it <= max_iter; ++it) {
    out.iterations = it;
    // Extrapolation can step slightly outside the nonnegative orthant,
    // where utilities (and the log's argument) could go negative.
    Eigen::MatrixXd y_safe = y.cwiseMax(0.0);
    const Eigen::MatrixXd g = gradient(w, y_safe, eps);
    const double fy = objective_of(w, y_safe, eps);

    Eigen::MatrixXd x_new;
    double f_new = -std::numeric_limits<double>::infinity();
    for (int bt = 0; bt < 60; ++bt) {
      x_new = dykstra_project(prob, fm, y_safe + step * g);
      f_new = objective_of(w, x_new, eps);
      const Eigen::MatrixXd d = x_new - y_safe;
      const double quad = fy + g.cwiseProduct(d).sum() - d.squaredNorm() / (2.0 * step);
      if (f_new >= quad) break;
      step *= 0.5;
    }

    if (f_new < fx) {
      // Restart acceleration from the best ascent point.
      t_acc = 1.0;
      y = x;
      step *= 0.5;
      continue;
    }

    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_acc * t_acc));
    y = x_new + ((t_acc - 1.0) / t_next) * (x_new - x);
    t_acc = t_next;
    x_prev = x;
    x = x_new;
    fx = f_new;
    if (fx > best_f) {
      best_f = fx;
      best_x = x;
    }
    step *= 1.3;  // allow the step to grow back after backtracking

    const double move = (x - x_prev).cwiseAbs().maxCoeff();
    if (move < 1e-12 || it % 5 == 0 || it == max_iter) {
      const double res = pg_residual(prob, fm, w, x, eps);
      if (res < tol) {
        out.converged = true;
        break;
      }
    }
  }

  Eigen::MatrixXd x_final = best_f > fx ? best_x : x;
  enforce_caps(prob, fm, x_final);
  out.x = x_final;
  out.objective = objective_of(w, x_final, eps);
  out.pg_norm = pg_residual(prob, fm, w, x_final, eps);
  out.converged = out.pg_norm < tol;
  return out;
}

Eigen::MatrixXd oracle_allocation(const AllocationProblem& prob, double grid_step) {
  const int nb = prob.n_buyers();
  const int ns = prob.n_sellers();
  if (nb > 3 || ns > 3) throw ProblemTooLarge();
  if (nb == 0 || ns == 0) throw NoFeasiblePairs();
  if (!(grid_step > 0.0)) throw std::invalid_argument("grid_step must be positive");

  // Budgets in lattice units.
  std::vector<int> row_budget(nb), col_budget(ns);
  for (int i = 0; i < nb; ++i) {
    row_budget[i] = static_cast<int>(std::floor(prob.buyer_caps(i) / grid_step + 1e-9));
  }
  for (int j = 0; j < ns; ++j) {
    col_budget[j] = static_cast<int>(std::floor(prob.seller_caps(j) / grid_step + 1e-9));
  }

  std::vector<int> counts(static_cast<size_t>(nb * ns), 0);
  std::vector<int> best_counts = counts;
  double best_obj = -std::numeric_limits<double>::infinity();

  // Objective evaluated with plain loops, independent of the solver path.
  auto evaluate = [&]() {
    double obj = 0.0;
    for (int i = 0; i < nb; ++i) {
      double ub = 0.0;
      for (int j = 0; j < ns; ++j) {
        const double g = prob.surplus(i, j);
        if (g >= 0.0) ub += 0.5 * g * counts[static_cast<size_t>(i * ns + j)] * grid_step;
      }
      obj += std::log(ub + prob.epsilon);
    }
    for (int j = 0; j < ns; ++j) {
      double us = 0.0;
      for (int i = 0; i < nb; ++i) {
        const double g = prob.surplus(i, j);
        if (g >= 0.0) us += 0.5 * g * counts[static_cast<size_t>(i * ns + j)] * grid_step;
      }
      obj += std::log(us + prob.epsilon);
    }
    if (obj > best_obj) {
      best_obj = obj;
      best_counts = counts;
    }
  };

  std::vector<int> row_rem(row_budget), col_rem(col_budget);
  auto recurse = [&](auto&& self, int cell) -> void {
    if (cell == nb * ns) {
      evaluate();
      return;
    }
    const int i = cell / ns;
    const int j = cell % ns;
    const int hi = prob.feasible(i, j) ? std::min(row_rem[i], col_rem[j]) : 0;
    for (int k = 0; k <= hi; ++k) {
      counts[static_cast<size_t>(cell)] = k;
      row_rem[i] -= k;
      col_rem[j] -= k;
      self(self, cell + 1);
      row_rem[i] += k;
      col_rem[j] += k;
    }
    counts[static_cast<size_t>(cell)] = 0;
  };
  recurse(recurse, 0);

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(nb, ns);
  for (int i = 0; i < nb; ++i) {
    for (int j = 0; j < ns; ++j) {
      x(i, j) = best_counts[static_cast<size_t>(i * ns + j)] * grid_step;
    }
  }
  return x;
}

}  // namespace v2v::optim
