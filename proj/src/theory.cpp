#include "glift/theory.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "glift/rng.hpp"
#include "glift/solver.hpp"

namespace glift {

void BoundInputs::validate() const {
  if (n < 1 || m < 1 || k < 1 || j < 1) throw ParameterError("N, M, K, J must be positive");
  if (!(sigma >= 0.0)) throw ParameterError("sigma must be nonnegative");
  if (!(mu_max >= 1.0 - 1e-12) || !(mu_max <= std::sqrt(static_cast<double>(n)) + 1e-12)) {
    throw ParameterError("mu_max must lie in [1, sqrt(N)]");
  }
  if (!(alpha > 1.0)) throw ParameterError("alpha must exceed 1");
  if (!(c_alpha_1 > 0.0 && c_alpha_2 > 0.0 && c_alpha_err > 0.0)) {
    throw ParameterError("bound constants must be positive");
  }
}

namespace {

double log_off_support(const BoundInputs& b) {
  if (b.m <= b.j) throw DomainError("M - J must be positive (log of zero)");
  return std::log(static_cast<double>(b.m - b.j));
}

}  // namespace

double lambda_lower_bound(const BoundInputs& b) {
  b.validate();
  const double logs = log_off_support(b) + std::log(static_cast<double>(b.n));
  return std::sqrt(b.c_alpha_2 * b.sigma * b.sigma * b.mu_max * b.mu_max *
                   static_cast<double>(b.k) * logs);
}

double sample_complexity_bound(const BoundInputs& b) {
  b.validate();
  const double log_n = std::log(static_cast<double>(b.n));
  return b.c_alpha_1 * b.mu_max * b.mu_max * static_cast<double>(b.j * b.k) *
         (log_off_support(b) + log_n * log_n);
}

double error_bound(const BoundInputs& b, double lambda) {
  if (b.j < 1) throw DomainError("error bound needs J >= 1 (log J)");
  b.validate();
  if (!(lambda >= 0.0)) throw ParameterError("lambda must be nonnegative");
  const double logs = std::log(static_cast<double>(b.j)) + std::log(static_cast<double>(b.n));
  const double noise_term = std::sqrt(b.c_alpha_err * b.sigma * b.sigma * b.mu_max * b.mu_max *
                                      static_cast<double>(b.j * b.k) * logs);
  return noise_term + 4.0 * std::sqrt(static_cast<double>(b.j)) * lambda;
}

double gamma_zero(const BoundInputs& b) {
  BoundInputs unit = b;
  unit.c_alpha_2 = 1.0;
  return lambda_lower_bound(unit);
}

double isometry_residual(const LiftedOperator& op, const SupportSet& support) {
  if (support.empty()) return 0.0;
  const CMatrix phi_t = assemble_phi(op, support);
  const CMatrix gram = phi_t.adjoint() * phi_t;
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram, Eigen::EigenvaluesOnly);
  const RVector ev = eig.eigenvalues();
  return std::max(std::abs(ev.maxCoeff() - 1.0), std::abs(ev.minCoeff() - 1.0));
}

WitnessReport witness_certificate(const LiftedOperator& op, const SupportSet& support,
                                  const CMatrix& x0_support, const CVector& noise, double lambda,
                                  double restricted_kkt_tol) {
  if (!(lambda > 0.0)) throw ParameterError("witness_certificate: lambda must be positive");
  if (noise.size() != op.rows()) throw ShapeError("witness_certificate: noise length mismatch");
  const Index k = op.subspace_dim();
  const Index jt = static_cast<Index>(support.size());
  if (x0_support.rows() != k || x0_support.cols() != jt) {
    throw ShapeError("witness_certificate: X0_T must be K x |T|");
  }
  if (!std::is_sorted(support.begin(), support.end())) {
    throw ParameterError("witness_certificate: support must be sorted");
  }

  WitnessReport rep;
  for (Index j = 0, c = 0; j < op.atoms(); ++j) {
    if (c < jt && support[static_cast<std::size_t>(c)] == j) {
      ++c;
    } else {
      rep.complement.push_back(j);
    }
  }

  if (jt == 0) {
    // Nothing to invert; every block is off support.
    rep.gram_invertible = true;
    rep.gram_min_eig = 1.0;
    const CMatrix corr = op.adjoint(CVector(noise / lambda));
    rep.s_tc = vectorize(corr);
    rep.s_tc_via_delta = rep.s_tc;
    rep.s_tc_block_norms = column_norms(corr);
    rep.certified = rep.max_off_support_norm() < 1.0;
    return rep;
  }

  const CMatrix phi_t = assemble_phi(op, support);
  const CMatrix gram = phi_t.adjoint() * phi_t;
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram, Eigen::EigenvaluesOnly);
  const RVector ev = eig.eigenvalues();
  rep.gram_min_eig = ev.minCoeff();
  rep.isometry_residual = std::max(std::abs(ev.maxCoeff() - 1.0), std::abs(ev.minCoeff() - 1.0));
  const CVector noise_corr = phi_t.adjoint() * noise;
  rep.noise_correlation_2inf = norm_2inf(noise_corr.reshaped(k, jt));
  rep.gram_invertible = rep.gram_min_eig >= kGramSingular;
  if (!rep.gram_invertible) return rep;

  // Step 1: support-restricted problem.
  const CVector y = phi_t * vectorize(x0_support) + noise;
  const LiftedOperatorPtr restricted = op.restrict_to(support);
  SolverOptions opts;
  opts.kkt_tol = restricted_kkt_tol;
  opts.max_iters = 50000;
  opts.kkt_check_every = 1;
  opts.objective_stall_tol = 1e-15;
  const GroupLassoSolution sol = solve_group_lasso(*restricted, y, lambda, opts);
  rep.x_t = sol.estimate;

  // Step 2: s_T from the restricted solution.
  const RVector xt_norms = column_norms(rep.x_t);
  const double floor = kActiveFloor * xt_norms.maxCoeff();
  const CVector resid_corr = phi_t.adjoint() * (y - phi_t * vectorize(rep.x_t));
  rep.s_t.resize(k * jt);
  for (Index c = 0; c < jt; ++c) {
    if (xt_norms(c) > floor && xt_norms(c) > 0.0) {
      rep.s_t.segment(k * c, k) = rep.x_t.col(c) / xt_norms(c);
    } else {
      rep.s_t.segment(k * c, k) = resid_corr.segment(k * c, k) / lambda;
    }
  }

  // Step 3: s_{T^C}.
  const Eigen::LDLT<CMatrix> gram_solve(gram);
  rep.delta_x = gram_solve.solve(CVector(noise_corr - lambda * rep.s_t));

  const CVector projected_noise = noise - phi_t * gram_solve.solve(noise_corr);
  const CVector closed_form = projected_noise / lambda + phi_t * gram_solve.solve(rep.s_t);
  const CVector via_delta = (noise - phi_t * rep.delta_x) / lambda;

  const CMatrix full_closed = op.adjoint(closed_form);
  const CMatrix full_delta = op.adjoint(via_delta);
  const Index jc = static_cast<Index>(rep.complement.size());
  rep.s_tc.resize(k * jc);
  rep.s_tc_via_delta.resize(k * jc);
  rep.s_tc_block_norms.resize(jc);
  for (Index c = 0; c < jc; ++c) {
    const Index j = rep.complement[static_cast<std::size_t>(c)];
    rep.s_tc.segment(k * c, k) = full_closed.col(j);
    rep.s_tc_via_delta.segment(k * c, k) = full_delta.col(j);
    rep.s_tc_block_norms(c) = full_closed.col(j).norm();
  }
  rep.certified = rep.max_off_support_norm() < 1.0;
  return rep;
}

double tail_threshold_factor(double alpha, bool complex_input) {
  return complex_input ? 2.0 + (2.0 * std::sqrt(2.0) + 2.0) * alpha : 1.0 + 4.0 * alpha;
}

TailCheckResult tail_bound_check(const CMatrix& h, double sigma, double alpha, long trials,
                                 bool complex_input, std::uint64_t seed) {
  if (trials < 1000) throw ParameterError("tail_bound_check needs at least 1000 trials");
  if (!(alpha > 1.0)) throw ParameterError("alpha must exceed 1");
  if (!(sigma > 0.0)) throw ParameterError("sigma must be positive");
  // Samples use their own stream so they do not depend on how H was made.
  Sampler sampler(seed, 1);
  TailCheckResult res;
  res.trials = trials;
  res.trace_sigma = h.squaredNorm();
  res.threshold = sigma * sigma * tail_threshold_factor(alpha, complex_input) * res.trace_sigma;
  res.bound = std::exp(-alpha);
  const Index n = h.cols();
  CVector a(n);
  long exceed = 0;
  for (long t = 0; t < trials; ++t) {
    for (Index i = 0; i < n; ++i) {
      a(i) = complex_input ? sampler.complex_normal(sigma) : cplx{sampler.normal(sigma), 0.0};
    }
    if ((h * a).squaredNorm() > res.threshold) ++exceed;
  }
  res.empirical_rate = static_cast<double>(exceed) / static_cast<double>(trials);
  return res;
}

TailCheckResult tail_bound_check(Index k, Index n, double sigma, double alpha, long trials,
                                 bool complex_input, std::uint64_t seed) {
  if (k < 1 || n < 1) throw ParameterError("K and N must be positive");
  Sampler sampler(seed, 0);
  const CMatrix h = sampler.complex_normal_matrix(k, n);
  return tail_bound_check(h, sigma, alpha, trials, complex_input, seed);
}

}  // namespace glift
