#include "glift/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "glift/rng.hpp"

namespace glift {

namespace {

constexpr std::uint64_t kPowerIterationSeed = 0x9e3779b97f4a7c15ull;
constexpr double kLipschitzSafety = 1.01;
constexpr int kNonmonotoneMemory = 5;
constexpr double kSufficientDecrease = 1e-5;
constexpr double kBbMin = 1e-30;
constexpr double kBbMax = 1e30;
constexpr int kStallPatience = 10;
// Objective increases below this relative size are rounding noise.
constexpr double kRoundingSlack = 1e-13;

double data_fit(const CVector& lx, const CVector& y) { return 0.5 * (lx - y).squaredNorm(); }

// Residual of the first-order condition given the gradient g = L*(L(X) - y).
KktReport kkt_from_gradient(const CMatrix& x, const CMatrix& g, double lambda) {
  KktReport rep;
  const Index m = x.cols();
  rep.subgradient_block_norms.resize(m);
  rep.active.assign(static_cast<std::size_t>(m), false);
  const RVector xnorm = column_norms(x);
  const double floor = m > 0 ? kActiveFloor * xnorm.maxCoeff() : 0.0;
  double residual = 0.0;
  for (Index j = 0; j < m; ++j) {
    const double nj = xnorm(j);
    if (nj > floor && nj > 0.0) {
      rep.active[static_cast<std::size_t>(j)] = true;
      rep.subgradient_block_norms(j) = 1.0;
      residual = std::max(residual, (g.col(j) + (lambda / nj) * x.col(j)).norm());
    } else {
      const double gj = g.col(j).norm();
      rep.subgradient_block_norms(j) = gj / lambda;
      residual = std::max(residual, std::max(0.0, gj - lambda));
    }
  }
  rep.residual = residual;
  return rep;
}

void check_finite(double value, long iteration) {
  if (!std::isfinite(value)) {
    throw NumericalError("group lasso objective is not finite at iteration " +
                             std::to_string(iteration),
                         iteration);
  }
}

struct Iterate {
  CMatrix x;
  CVector lx;
  double objective = 0.0;
};

class Problem {
 public:
  Problem(const LiftedOperator& op, const CVector& y, double lambda)
      : op_(op), y_(y), lambda_(lambda) {}

  Iterate make(CMatrix x) const {
    Iterate it{std::move(x), {}, 0.0};
    op_.forward(it.x, it.lx);
    it.objective = data_fit(it.lx, y_) + lambda_ * norm_21(it.x);
    return it;
  }

  CMatrix gradient(const CVector& lx) const { return op_.adjoint(CVector(lx - y_)); }

  KktReport kkt(const Iterate& it) const {
    return kkt_from_gradient(it.x, gradient(it.lx), lambda_);
  }

  double lambda() const { return lambda_; }

 private:
  const LiftedOperator& op_;
  const CVector& y_;
  double lambda_;
};

void finish(GroupLassoSolution& sol, const Problem& prob, Iterate& cur, double tol) {
  sol.kkt_residual = prob.kkt(cur).residual;
  sol.converged = sol.kkt_residual <= tol;
  sol.estimate = std::move(cur.x);
}

GroupLassoSolution solve_fista(const Problem& prob, Iterate cur, double lipschitz,
                               const SolverOptions& opts) {
  GroupLassoSolution sol;
  sol.objective_trace.push_back(cur.objective);
  const double lambda = prob.lambda();

  CMatrix z = cur.x;
  CVector lz = cur.lx;
  double t = 1.0;
  bool momentum = false;
  int stalled = 0;

  long it = 0;
  while (it < opts.max_iters) {
    ++it;
    const CMatrix g = prob.gradient(lz);
    CMatrix cand = z - g / lipschitz;
    block_soft_threshold_columns(cand, lambda / lipschitz);
    Iterate next = prob.make(std::move(cand));
    check_finite(next.objective, it);

    const double slack = kRoundingSlack * std::max(1.0, std::abs(cur.objective));
    if (next.objective > cur.objective + slack) {
      if (momentum) {
        // Function-value restart: drop the momentum, retry from the last iterate.
        z = cur.x;
        lz = cur.lx;
        t = 1.0;
        momentum = false;
      } else {
        // A plain proximal step went uphill: the Lipschitz estimate is low.
        lipschitz *= 2.0;
      }
      continue;
    }

    const CMatrix step = next.x - cur.x;
    const bool tiny = step.norm() <= opts.objective_stall_tol * std::max(1.0, cur.x.norm());
    stalled = tiny ? stalled + 1 : 0;

    // Gradient restart: momentum pointing against the step is discarded.
    const bool restart = momentum && (z - next.x).cwiseProduct(step.conjugate()).sum().real() > 0.0;
    if (restart) {
      t = 1.0;
      z = next.x;
      lz = next.lx;
      momentum = false;
    } else {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      const double beta = (t - 1.0) / t_next;
      z = next.x + beta * step;
      lz = next.lx + beta * (next.lx - cur.lx);
      t = t_next;
      momentum = true;
    }
    cur = std::move(next);
    sol.objective_trace.push_back(cur.objective);

    if (it % opts.kkt_check_every == 0 && prob.kkt(cur).residual <= opts.kkt_tol) break;
    if (stalled >= kStallPatience) break;
  }
  sol.iterations = it;
  finish(sol, prob, cur, opts.kkt_tol);
  return sol;
}

GroupLassoSolution solve_bb(const Problem& prob, Iterate cur,
                            double lipschitz, const SolverOptions& opts) {
  GroupLassoSolution sol;
  sol.objective_trace.push_back(cur.objective);
  const double lambda = prob.lambda();
  std::deque<double> recent{cur.objective};

  CMatrix g = prob.gradient(cur.lx);
  double alpha = lipschitz;
  int stalled = 0;

  long it = 0;
  while (it < opts.max_iters) {
    if (kkt_from_gradient(cur.x, g, lambda).residual <= opts.kkt_tol) break;
    ++it;
    const double reference = *std::max_element(recent.begin(), recent.end());
    Iterate next;
    double step_sq = 0.0;
    for (;;) {
      CMatrix cand = cur.x - g / alpha;
      block_soft_threshold_columns(cand, lambda / alpha);
      step_sq = (cand - cur.x).squaredNorm();
      next = prob.make(std::move(cand));
      check_finite(next.objective, it);
      if (next.objective <= reference - 0.5 * kSufficientDecrease * alpha * step_sq) break;
      if (alpha >= kBbMax) break;
      alpha *= 2.0;
    }

    const bool tiny =
        std::sqrt(step_sq) <= opts.objective_stall_tol * std::max(1.0, cur.x.norm());
    stalled = tiny ? stalled + 1 : 0;

    const CVector ld = next.lx - cur.lx;
    g = prob.gradient(next.lx);
    cur = std::move(next);
    sol.objective_trace.push_back(cur.objective);
    recent.push_back(cur.objective);
    if (static_cast<int>(recent.size()) > kNonmonotoneMemory) recent.pop_front();

    if (step_sq == 0.0 || stalled >= kStallPatience) break;
    alpha = std::clamp(ld.squaredNorm() / step_sq, kBbMin, kBbMax);
  }
  sol.iterations = it;
  finish(sol, prob, cur, opts.kkt_tol);
  return sol;
}

}  // namespace

void SolverOptions::validate() const {
  if (max_iters < 1) throw ParameterError("max_iters must be positive");
  if (!(kkt_tol > 0.0)) throw ParameterError("kkt_tol must be positive");
  if (lipschitz_power_iters < 1) throw ParameterError("lipschitz_power_iters must be positive");
  if (!(objective_stall_tol > 0.0)) throw ParameterError("objective_stall_tol must be positive");
  if (kkt_check_every < 1) throw ParameterError("kkt_check_every must be positive");
  if (lipschitz && !(*lipschitz >= 0.0)) throw ParameterError("lipschitz must be nonnegative");
}

CVector block_soft_threshold(const CVector& v, double tau) {
  if (tau < 0.0) throw ParameterError("block_soft_threshold: tau must be nonnegative");
  const double nv = v.norm();
  if (nv <= tau) return CVector::Zero(v.size());
  return (1.0 - tau / nv) * v;
}

void block_soft_threshold_columns(CMatrix& x, double tau) {
  for (Index j = 0; j < x.cols(); ++j) {
    const double nj = x.col(j).norm();
    if (nj <= tau) {
      x.col(j).setZero();
    } else {
      x.col(j) *= 1.0 - tau / nj;
    }
  }
}

NormEstimate operator_norm_sq(const LiftedOperator& op, int max_iters) {
  Sampler sampler(kPowerIterationSeed);
  CMatrix v = sampler.complex_normal_matrix(op.subspace_dim(), op.atoms());
  v /= v.norm();
  NormEstimate est;
  double previous = 0.0;
  CVector lv;
  CMatrix w;
  for (int it = 1; it <= max_iters; ++it) {
    op.forward(v, lv);
    op.adjoint(lv, w);
    est.iterations = it;
    const double rayleigh = lv.squaredNorm();  // <v, L*L v> with ||v|| = 1
    const double wn = w.norm();
    est.value = std::max(est.value, rayleigh);
    if (wn == 0.0) {
      est.value = 0.0;
      est.converged = true;
      return est;
    }
    if (it > 1 && std::abs(rayleigh - previous) <= 1e-10 * rayleigh) {
      est.converged = true;
      return est;
    }
    previous = rayleigh;
    v = w / wn;
  }
  return est;
}

double group_lasso_objective(const LiftedOperator& op, const CMatrix& x, const CVector& y,
                             double lambda) {
  return data_fit(op.forward(x), y) + lambda * norm_21(x);
}

KktReport kkt_check(const LiftedOperator& op, const CMatrix& x, const CVector& y, double lambda) {
  if (!(lambda > 0.0)) throw ParameterError("kkt_check: lambda must be positive");
  if (x.rows() != op.subspace_dim() || x.cols() != op.atoms() || y.size() != op.rows()) {
    throw ShapeError("kkt_check: inconsistent shapes");
  }
  const CMatrix g = op.adjoint(CVector(op.forward(x) - y));
  return kkt_from_gradient(x, g, lambda);
}

GroupLassoSolution solve_group_lasso(const LiftedOperator& op, const CVector& y, double lambda,
                                     const SolverOptions& opts) {
  opts.validate();
  if (!(lambda > 0.0)) throw ParameterError("solve_group_lasso: lambda must be positive");
  if (y.size() != op.rows()) throw ShapeError("solve_group_lasso: observation length mismatch");

  Problem prob(op, y, lambda);
  CMatrix x0 = opts.initial ? *opts.initial : CMatrix::Zero(op.subspace_dim(), op.atoms());
  if (x0.rows() != op.subspace_dim() || x0.cols() != op.atoms()) {
    throw ShapeError("solve_group_lasso: initial point has the wrong shape");
  }
  Iterate start = prob.make(std::move(x0));
  check_finite(start.objective, 0);

  const double norm_sq =
      opts.lipschitz ? *opts.lipschitz : operator_norm_sq(op, opts.lipschitz_power_iters).value;
  if (norm_sq == 0.0) {
    // L = 0: the penalty alone is minimized at zero.
    GroupLassoSolution sol;
    sol.estimate = CMatrix::Zero(op.subspace_dim(), op.atoms());
    sol.objective_trace = {start.objective, 0.5 * y.squaredNorm()};
    sol.kkt_residual = 0.0;
    sol.converged = true;
    return sol;
  }
  const double lipschitz = kLipschitzSafety * norm_sq;

  // Already optimal (e.g. y = 0 or lambda >= lambda_max from zero start).
  if (prob.kkt(start).residual <= opts.kkt_tol) {
    GroupLassoSolution sol;
    sol.objective_trace.push_back(start.objective);
    finish(sol, prob, start, opts.kkt_tol);
    return sol;
  }

  return opts.step_mode == StepMode::fista ? solve_fista(prob, std::move(start), lipschitz, opts)
                                           : solve_bb(prob, std::move(start), lipschitz, opts);
}

}  // namespace glift
