#include "glift/kernels.hpp"

namespace glift::kernels::reference {

namespace {
inline cplx conj_of(double v) { return {v, 0.0}; }
inline cplx conj_of(cplx v) { return std::conj(v); }
}  // namespace

template <class Scalar>
void lift_forward(const DictMatrix<Scalar>& a, const CMatrix& b, const CMatrix& x, CVector& y) {
  const Index n_obs = a.rows();
  y.setZero(n_obs);
  for (Index n = 0; n < n_obs; ++n) {
    cplx acc{0.0, 0.0};
    for (Index i = 0; i < x.rows(); ++i) {
      for (Index j = 0; j < x.cols(); ++j) {
        acc += b(n, i) * x(i, j) * a(n, j);
      }
    }
    y(n) = acc;
  }
}

template <class Scalar>
void lift_adjoint(const DictMatrix<Scalar>& a, const CMatrix& b, const CVector& y, CMatrix& x) {
  const Index k = b.cols();
  const Index m = a.cols();
  x.setZero(k, m);
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < m; ++j) {
      cplx acc{0.0, 0.0};
      for (Index l = 0; l < a.rows(); ++l) {
        acc += y(l) * std::conj(b(l, i)) * conj_of(a(l, j));
      }
      x(i, j) = acc;
    }
  }
}

template void lift_forward<double>(const DictMatrix<double>&, const CMatrix&, const CMatrix&,
                                   CVector&);
template void lift_forward<cplx>(const DictMatrix<cplx>&, const CMatrix&, const CMatrix&,
                                 CVector&);
template void lift_adjoint<double>(const DictMatrix<double>&, const CMatrix&, const CVector&,
                                   CMatrix&);
template void lift_adjoint<cplx>(const DictMatrix<cplx>&, const CMatrix&, const CVector&,
                                 CMatrix&);

}  // namespace glift::kernels::reference
