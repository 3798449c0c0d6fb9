#pragma once

// Lifted forward/adjoint kernels. The `reference` versions evaluate the
// defining sums literally and are kept as test oracles; the `omp` versions
// reorder the loops for contiguous access and parallelize over independent
// outputs. Each output entry of an omp kernel is accumulated by exactly one
// thread in a fixed order, so results do not depend on the thread count.
//
// Shapes: A is N x M (Scalar = double or cplx), B is N x K, X is K x M.

#include "glift/common.hpp"

namespace glift::kernels {

template <class Scalar>
using DictMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using DictRowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace reference {

/// y(n) = sum_i sum_j B(n,i) X(i,j) A(n,j)
template <class Scalar>
void lift_forward(const DictMatrix<Scalar>& a, const CMatrix& b, const CMatrix& x, CVector& y);

/// X(i,j) = sum_l y_l conj(B(l,i)) conj(A(l,j))
template <class Scalar>
void lift_adjoint(const DictMatrix<Scalar>& a, const CMatrix& b, const CVector& y, CMatrix& x);

}  // namespace reference

namespace omp {

/// `a_rows` is A stored row-major.
template <class Scalar>
void lift_forward(const DictRowMatrix<Scalar>& a_rows, const CMatrix& b, const CMatrix& x,
                  CVector& y);

template <class Scalar>
void lift_adjoint(const DictMatrix<Scalar>& a, const CMatrix& b, const CVector& y, CMatrix& x);

/// Column l2 norms, parallel over columns.
void column_norms(const CMatrix& x, RVector& out);

}  // namespace omp

}  // namespace glift::kernels
