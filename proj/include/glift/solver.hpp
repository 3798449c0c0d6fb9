#pragma once

#include <optional>

#include "glift/lifted_op.hpp"

namespace glift {

enum class StepMode {
  fista,           ///< accelerated proximal gradient, monotone with adaptive restart
  bb_nonmonotone,  ///< Barzilai-Borwein steps with a nonmonotone acceptance test
};

struct SolverOptions {
  long max_iters = 5000;
  double kkt_tol = 1e-6;
  StepMode step_mode = StepMode::fista;
  int lipschitz_power_iters = 50;
  /// Stop after 10 consecutive steps with ||X_new - X|| <= tol * max(1, ||X||).
  double objective_stall_tol = 1e-12;
  /// Evaluate the KKT residual every this many iterations (and at exit).
  int kkt_check_every = 5;
  /// Skip the power iteration and use this ||Phi||^2 estimate.
  std::optional<double> lipschitz;
  /// Starting point; zero when unset.
  std::optional<CMatrix> initial;

  void validate() const;
};

struct GroupLassoSolution {
  CMatrix estimate;
  /// Objective 0.5 ||y - L(X)||^2 + lambda ||X||_{2,1} at every accepted
  /// iterate; entry 0 is the starting point.
  std::vector<double> objective_trace;
  long iterations = 0;
  double kkt_residual = 0.0;
  bool converged = false;
};

/// Proximal map of tau * ||.||_2: zero when ||v|| <= tau, else (1 - tau/||v||) v.
CVector block_soft_threshold(const CVector& v, double tau);

/// Applies block_soft_threshold to every column of X in place.
void block_soft_threshold_columns(CMatrix& x, double tau);

struct NormEstimate {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// ||Phi||^2 by power iteration on L*L from a fixed pseudo-random start.
/// `converged` is false when the relative change never fell below 1e-10.
NormEstimate operator_norm_sq(const LiftedOperator& op, int max_iters = 50);

double group_lasso_objective(const LiftedOperator& op, const CMatrix& x, const CVector& y,
                             double lambda);

struct KktReport {
  double residual = 0.0;
  /// ||s_j||_2: 1 for active blocks, ||Phi_j^H (y - L(X))|| / lambda otherwise.
  RVector subgradient_block_norms;
  /// Per-block membership of the active set used for the residual.
  std::vector<bool> active;
};

/// Relative floor: block j is active iff ||x_j|| > kActiveFloor * max_k ||x_k||.
inline constexpr double kActiveFloor = 1e-10;

/// First-order optimality violation of X for the group lasso with weight lambda.
KktReport kkt_check(const LiftedOperator& op, const CMatrix& x, const CVector& y, double lambda);

GroupLassoSolution solve_group_lasso(const LiftedOperator& op, const CVector& y, double lambda,
                                     const SolverOptions& opts = {});

}  // namespace glift
