#pragma once

#include <memory>
#include <span>

#include "glift/common.hpp"

namespace glift {

class Sampler;

/// Module-level tolerances for the lifted operator.
struct LiftTolerances {
  /// Max-entry deviation of B^H B from I beyond which B is re-orthonormalized.
  static constexpr double orthonormality = 1e-10;
  /// Per-entry agreement between dense Phi and the factored forward.
  static constexpr double block_consistency = 1e-12;
};

enum class DictionaryKind { gaussian, fourier_spikes };

/// N x M dictionary A. Gaussian dictionaries are real; the Fourier-spike
/// dictionary (column j = DFT of e_j) is complex, so entries are stored complex
/// and `is_real()` lets kernels take the real fast path.
class Dictionary {
 public:
  Dictionary(CMatrix entries, DictionaryKind kind);
  Dictionary(const RMatrix& entries, DictionaryKind kind = DictionaryKind::gaussian);

  static Dictionary gaussian(Index rows, Index cols, Sampler& sampler);
  /// Unnormalized N-point DFT of every spike: A(n, j) = exp(-2 pi i n j / N).
  static Dictionary fourier_spikes(Index n);

  Index rows() const { return entries_.rows(); }
  Index cols() const { return entries_.cols(); }
  DictionaryKind kind() const { return kind_; }
  bool is_real() const { return real_; }
  const CMatrix& entries() const { return entries_; }
  const RMatrix& real_entries() const { return real_entries_; }

  Dictionary select_columns(std::span<const Index> cols) const;

 private:
  CMatrix entries_;
  RMatrix real_entries_;  // empty unless is_real()
  DictionaryKind kind_;
  bool real_ = false;
};

/// N x K basis with orthonormal columns.
class SubspaceBasis {
 public:
  /// Re-orthonormalizes (thin Householder QR) when B^H B deviates from I by
  /// more than LiftTolerances::orthonormality in max entry.
  explicit SubspaceBasis(CMatrix columns);

  static SubspaceBasis dft_first_k(Index n, Index k);
  static SubspaceBasis identity_first_k(Index n, Index k);
  static SubspaceBasis random_orthonormal(Index n, Index k, Sampler& sampler);

  Index rows() const { return columns_.rows(); }
  Index dim() const { return columns_.cols(); }
  const CMatrix& columns() const { return columns_; }
  bool was_reorthonormalized() const { return reorthonormalized_; }

  /// max |(B^H B - I)_{ij}|
  static double orthonormality_defect(const CMatrix& b);

 private:
  CMatrix columns_;
  bool reorthonormalized_ = false;
};

/// sqrt(N) * max_{i,j} |B_ij|, which lies in [1, sqrt(N)].
double coherence(const SubspaceBasis& basis);

/// The lifted linear map L : C^{K x M} -> C^{rows()}.
///
/// Implementations are immutable after construction; forward/adjoint are
/// const and safe to call concurrently.
class LiftedOperator : public std::enable_shared_from_this<LiftedOperator> {
 public:
  virtual ~LiftedOperator() = default;

  virtual Index rows() const = 0;
  virtual Index subspace_dim() const = 0;
  virtual Index atoms() const = 0;

  /// y = L(X). X is K x M, y has rows() entries.
  virtual void forward(const CMatrix& x, CVector& y) const = 0;
  /// X = L*(y).
  virtual void adjoint(const CVector& y, CMatrix& x) const = 0;

  /// The N x K block [phi_{1,j}, ..., phi_{K,j}] (0-based j). The default
  /// implementation applies forward() to unit matrices.
  virtual CMatrix phi_block(Index j) const;

  /// Operator acting on the columns in `cols` only (K x |cols| inputs).
  /// When *this is not owned by a shared_ptr the result borrows it.
  virtual std::shared_ptr<const LiftedOperator> restrict_to(std::span<const Index> cols) const;

  CVector forward(const CMatrix& x) const;
  CMatrix adjoint(const CVector& y) const;

 protected:
  void check_forward_shape(const CMatrix& x) const;
  void check_adjoint_shape(const CVector& y) const;
};

using LiftedOperatorPtr = std::shared_ptr<const LiftedOperator>;

/// The operator of the signal model with a dictionary and subspace basis:
/// y(n) = b'_n^H X a'_n, with b'_n, a'_n the n-th columns of B^H and A^T.
class DirectLift final : public LiftedOperator {
 public:
  DirectLift(Dictionary dict, SubspaceBasis basis, Exec exec = Exec::parallel);

  Index rows() const override { return dict_.rows(); }
  Index subspace_dim() const override { return basis_.dim(); }
  Index atoms() const override { return dict_.cols(); }

  void forward(const CMatrix& x, CVector& y) const override;
  void adjoint(const CVector& y, CMatrix& x) const override;
  CMatrix phi_block(Index j) const override;
  LiftedOperatorPtr restrict_to(std::span<const Index> cols) const override;

  const Dictionary& dictionary() const { return dict_; }
  const SubspaceBasis& basis() const { return basis_; }
  Exec exec() const { return exec_; }

  using LiftedOperator::adjoint;
  using LiftedOperator::forward;

 private:
  Dictionary dict_;
  SubspaceBasis basis_;
  Exec exec_;
  // Row-major views of A used by the forward kernels.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> real_rows_;
  Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> complex_rows_;
};

/// Dense N x K|cols| matrix whose column K*c + i is phi_{i, cols[c]}. The
/// one-argument overload assembles all of Phi. Test and small-instance use only.
CMatrix assemble_phi(const LiftedOperator& op, std::span<const Index> cols);
CMatrix assemble_phi(const LiftedOperator& op);

/// vec(X) in column-major order, matching the block layout of Phi.
CVector vectorize(const CMatrix& x);
CMatrix unvectorize(const CVector& v, Index k, Index m);

}  // namespace glift
