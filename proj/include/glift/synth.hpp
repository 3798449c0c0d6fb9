#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "glift/lifted_op.hpp"

namespace glift {

enum class BasisKind { dft_first_k, identity_first_k, random_orthonormal };

std::string to_string(BasisKind kind);
BasisKind parse_basis_kind(const std::string& name);

struct InstanceParams {
  Index n = 100;
  Index m = 150;
  Index k = 3;
  Index j = 3;
  double sigma = 0.1;
  BasisKind basis = BasisKind::dft_first_k;
  /// Rescale the on-support columns so gamma_0 / min_j ||x0_j|| hits this value.
  std::optional<double> gamma_target;
  std::uint64_t seed = 0;
  /// Philox stream id; experiments use trial_stream(0, trial) at every grid point.
  std::uint64_t stream = 0;
  Exec exec = Exec::parallel;

  void validate() const;
};

/// A generated problem: y = L(X0) + noise with X0 supported on `support`.
struct Instance {
  InstanceParams params;
  std::shared_ptr<const DirectLift> op;
  CMatrix x0;
  SupportSet support;
  CVector noise;
  CVector y;
};

/// Draw order (one Philox stream): A column-major, B (random kind only),
/// support, then c_j and h_j (K entries) per support index in ascending order,
/// then noise.
Instance gen_instance(const InstanceParams& p);

/// { j : ||x_j|| > rel_threshold * max_k ||x_k|| }; empty for X = 0.
SupportSet extract_support(const CMatrix& x, double rel_threshold = 1e-4);

/// max_j ||xhat_j - x0_j||_2
double l2inf_error(const CMatrix& xhat, const CMatrix& x0);

struct SupportMetrics {
  SupportSet recovered_support;
  bool exact = false;
  double l2inf_error = 0.0;
};

SupportMetrics support_metrics(const CMatrix& xhat, const CMatrix& x0, const SupportSet& truth,
                               double rel_threshold = 1e-4);

/// Little-endian binary container for one instance (see docs/FORMATS.md).
void write_instance(std::ostream& out, const Instance& inst);
Instance read_instance(std::istream& in);
void save_instance(const std::string& path, const Instance& inst);
Instance load_instance(const std::string& path);

}  // namespace glift
