#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace v2v::optim {

struct NoFeasiblePairs : std::runtime_error {
  NoFeasiblePairs() : std::runtime_error("allocation problem has no feasible buyer-seller pairs") {}
};

struct ProblemTooLarge : std::runtime_error {
  ProblemTooLarge() : std::runtime_error("oracle_allocation supports at most 3 buyers x 3 sellers") {}
};

// Inputs of the quantity-allocation program for one timestep.
//
// surplus(i,j) = b_i - a_j for pair (buyer i, seller j); a negative entry
// marks the pair infeasible (bid below ask) and its allocation is pinned
// to zero. Midpoint pricing splits each unit's surplus equally, so buyer
// and seller each earn surplus/2 per kWh traded.
struct AllocationProblem {
  Eigen::MatrixXd surplus;      // n_buyers x n_sellers, currency/kWh
  Eigen::VectorXd buyer_caps;   // kWh, >= 0
  Eigen::VectorXd seller_caps;  // kWh, >= 0
  double epsilon = 1e-6;        // log guard, utility units

  int n_buyers() const { return static_cast<int>(surplus.rows()); }
  int n_sellers() const { return static_cast<int>(surplus.cols()); }
  bool feasible(int i, int j) const { return surplus(i, j) >= 0.0; }
};

struct AllocationResult {
  Eigen::MatrixXd x;     // kWh, n_buyers x n_sellers
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
  double pg_norm = 0.0;  // projected-gradient residual at the returned point
};

// Per-agent utilities at midpoint prices: U_b(i) = sum_j surplus(i,j)/2 * x(i,j).
Eigen::VectorXd buyer_utilities(const AllocationProblem& prob, const Eigen::MatrixXd& x);
Eigen::VectorXd seller_utilities(const AllocationProblem& prob, const Eigen::MatrixXd& x);

// Log Nash social welfare: sum_i log(U_b(i) + eps) + sum_j log(U_s(j) + eps).
// Agents without feasible pairs contribute the constant log(eps).
double allocation_objective(const AllocationProblem& prob, const Eigen::MatrixXd& x);

// Euclidean projection onto the feasible polytope
//   { x >= 0, x(i,j) = 0 for infeasible pairs,
//     row sums <= buyer_caps, column sums <= seller_caps }
// computed with Dykstra's alternating projections. Exposed for tests.
Eigen::MatrixXd project_feasible(const AllocationProblem& prob, Eigen::MatrixXd x);

// Maximizes the log Nash welfare over the feasible polytope with
// accelerated projected-gradient ascent. Returns the best iterate with a
// non-convergence diagnostic when the iteration budget runs out. The
// returned allocation is always strictly feasible. Throws NoFeasiblePairs
// when the problem is empty or no pair has bid >= ask.
AllocationResult solve_allocation(const AllocationProblem& prob, double tol = 1e-6,
                                  int max_iter = 500);

// Exhaustive lattice search with pitch grid_step, for problems up to
// 3 buyers x 3 sellers. This is the test oracle; it evaluates the
// objective with its own arithmetic and shares no code with the solver.
Eigen::MatrixXd oracle_allocation(const AllocationProblem& prob, double grid_step);

}  // namespace v2v::optim
