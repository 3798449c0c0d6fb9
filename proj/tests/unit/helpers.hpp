#pragma once

#include <cmath>
#include <complex>

#include "glift/lifted_op.hpp"
#include "glift/rng.hpp"

namespace testing {

using namespace glift;

/// y = Phi vec(X) for an explicit dense Phi (N x K M). Independent of the
/// factored kernels, so it doubles as an oracle.
class DenseOperator final : public LiftedOperator {
 public:
  DenseOperator(CMatrix phi, Index k) : phi_(std::move(phi)), k_(k) {}
  Index rows() const override { return phi_.rows(); }
  Index subspace_dim() const override { return k_; }
  Index atoms() const override { return phi_.cols() / k_; }
  void forward(const CMatrix& x, CVector& y) const override {
    check_forward_shape(x);
    y = phi_ * x.reshaped();
  }
  void adjoint(const CVector& y, CMatrix& x) const override {
    check_adjoint_shape(y);
    x = (phi_.adjoint() * y).reshaped(k_, atoms());
  }
  using LiftedOperator::adjoint;
  using LiftedOperator::forward;
  const CMatrix& phi() const { return phi_; }

 private:
  CMatrix phi_;
  Index k_;
};

/// Random complex matrix with orthonormal columns.
inline CMatrix orthonormal_columns(Index rows, Index cols, Sampler& s) {
  const CMatrix g = s.complex_normal_matrix(rows, cols);
  Eigen::HouseholderQR<CMatrix> qr(g);
  return qr.householderQ() * CMatrix::Identity(rows, cols);
}

/// <u, v> = sum conj(v) u
inline cplx inner(const CVector& u, const CVector& v) { return v.dot(u); }
inline cplx inner(const CMatrix& u, const CMatrix& v) { return (v.conjugate().cwiseProduct(u)).sum(); }

}  // namespace testing
