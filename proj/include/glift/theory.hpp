#pragma once

#include <cstdint>

#include "glift/lifted_op.hpp"

namespace glift {

/// Inputs of the support-recovery bounds. The constants default to 1 because
/// their values are not known; the calculators predict shape, not thresholds.
struct BoundInputs {
  Index n = 100;
  Index m = 150;
  Index k = 3;
  Index j = 3;
  double sigma = 0.1;
  double mu_max = 1.0;
  double alpha = 2.0;
  double c_alpha_1 = 1.0;
  double c_alpha_2 = 1.0;
  double c_alpha_err = 1.0;

  void validate() const;
};

/// sqrt(C2 sigma^2 mu^2 K [log(M-J) + log N])
double lambda_lower_bound(const BoundInputs& b);

/// C1 mu^2 J K [log(M-J) + log^2 N]
double sample_complexity_bound(const BoundInputs& b);

/// sqrt(C sigma^2 mu^2 J K [log J + log N]) + 4 sqrt(J) lambda. Also the
/// minimum on-support column norm that guarantees exact support recovery.
double error_bound(const BoundInputs& b, double lambda);

/// lambda_lower_bound with C2 = 1; lambda = k * gamma_zero in the experiments.
double gamma_zero(const BoundInputs& b);

/// ||Phi_T^H Phi_T - I|| (spectral norm) on the dense JK x JK Gram; 0 for empty T.
double isometry_residual(const LiftedOperator& op, const SupportSet& support);

struct WitnessReport {
  double gram_min_eig = 0.0;
  bool gram_invertible = false;
  double isometry_residual = 0.0;
  /// Subgradient on the support, JK entries in block order.
  CVector s_t;
  /// ||s_j|| for j in T^C (ascending j), from the closed form with the projector.
  RVector s_tc_block_norms;
  /// The same blocks computed from Delta(X) directly; both routes must agree.
  CVector s_tc;
  CVector s_tc_via_delta;
  bool certified = false;
  /// (Phi_T^H Phi_T)^{-1} (Phi_T^H n - lambda s_T)
  CVector delta_x;
  /// Restricted solution X_T (K x J) of the support-restricted problem.
  CMatrix x_t;
  /// ||Phi_T^H n||_{2,inf}
  double noise_correlation_2inf = 0.0;
  SupportSet complement;

  double max_off_support_norm() const {
    return s_tc_block_norms.size() == 0 ? 0.0 : s_tc_block_norms.maxCoeff();
  }
};

/// Gram matrices with smallest eigenvalue below this are treated as singular.
inline constexpr double kGramSingular = 1e-10;

/// Primal-dual witness: solves the support-restricted problem for
/// y = Phi_T vec(X0_T) + noise, forms s_T from it, and s_{T^C} from the
/// complementary dual condition. Never throws on a singular Gram.
WitnessReport witness_certificate(const LiftedOperator& op, const SupportSet& support,
                                  const CMatrix& x0_support, const CVector& noise, double lambda,
                                  double restricted_kkt_tol = 1e-10);

struct TailCheckResult {
  double empirical_rate = 0.0;
  double bound = 0.0;
  double threshold = 0.0;
  double trace_sigma = 0.0;
  long trials = 0;
};

/// Monte-Carlo check of the quadratic Gaussian tail bound
/// P(||H a||^2 > sigma^2 c(alpha) Tr(H^H H)) <= exp(-alpha), with
/// c = 2 + (2 sqrt 2 + 2) alpha for complex a and 1 + 4 alpha for real a.
/// H (K x N, complex normal) is drawn once per call.
TailCheckResult tail_bound_check(Index k, Index n, double sigma, double alpha, long trials,
                                 bool complex_input, std::uint64_t seed);

/// Same, with a caller-supplied H.
TailCheckResult tail_bound_check(const CMatrix& h, double sigma, double alpha, long trials,
                                 bool complex_input, std::uint64_t seed);

/// Exceedance threshold multiplier c(alpha) of the tail bound.
double tail_threshold_factor(double alpha, bool complex_input);

}  // namespace glift
