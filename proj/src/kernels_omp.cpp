#include "glift/kernels.hpp"

#include <array>

namespace glift::kernels::omp {

namespace {

// Below this many multiply-adds the fork/join cost dominates.
constexpr Index kParallelWork = Index{1} << 16;
constexpr Index kStackK = 32;

inline double conj_of(double v) { return v; }
inline cplx conj_of(cplx v) { return std::conj(v); }

template <class Scalar>
void forward_row(const Scalar* a_row, const CMatrix& b, const CMatrix& x, Index n, cplx* acc,
                 cplx& out) {
  const Index k = x.rows();
  const Index m = x.cols();
  for (Index i = 0; i < k; ++i) acc[i] = cplx{0.0, 0.0};
  for (Index j = 0; j < m; ++j) {
    const Scalar aj = a_row[j];
    const cplx* xj = x.col(j).data();
    for (Index i = 0; i < k; ++i) acc[i] += aj * xj[i];
  }
  cplx sum{0.0, 0.0};
  for (Index i = 0; i < k; ++i) sum += b(n, i) * acc[i];
  out = sum;
}

}  // namespace

template <class Scalar>
void lift_forward(const DictRowMatrix<Scalar>& a_rows, const CMatrix& b, const CMatrix& x,
                  CVector& y) {
  const Index n_obs = a_rows.rows();
  const Index k = x.rows();
  y.resize(n_obs);
  const bool par = n_obs * x.cols() * k >= kParallelWork;
#pragma omp parallel if (par)
  {
    std::array<cplx, kStackK> stack_acc;
    std::vector<cplx> heap_acc(k > kStackK ? k : 0);
    cplx* acc = k > kStackK ? heap_acc.data() : stack_acc.data();
#pragma omp for schedule(static)
    for (Index n = 0; n < n_obs; ++n) {
      forward_row<Scalar>(a_rows.row(n).data(), b, x, n, acc, y(n));
    }
  }
}

template <class Scalar>
void lift_adjoint(const DictMatrix<Scalar>& a, const CMatrix& b, const CVector& y, CMatrix& x) {
  const Index n_obs = a.rows();
  const Index k = b.cols();
  const Index m = a.cols();
  // w(:, l) = y_l * conj(b'_l), stored K x N so each column is contiguous.
  CMatrix w(k, n_obs);
  for (Index l = 0; l < n_obs; ++l) {
    for (Index i = 0; i < k; ++i) w(i, l) = y(l) * std::conj(b(l, i));
  }
  x.resize(k, m);
  const bool par = n_obs * m * k >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (Index j = 0; j < m; ++j) {
    const Scalar* aj = a.col(j).data();
    cplx* xj = x.col(j).data();
    for (Index i = 0; i < k; ++i) xj[i] = cplx{0.0, 0.0};
    for (Index l = 0; l < n_obs; ++l) {
      const Scalar coeff = conj_of(aj[l]);
      const cplx* wl = w.col(l).data();
      for (Index i = 0; i < k; ++i) xj[i] += coeff * wl[i];
    }
  }
}

void column_norms(const CMatrix& x, RVector& out) {
  out.resize(x.cols());
  const bool par = x.size() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (Index j = 0; j < x.cols(); ++j) out(j) = x.col(j).norm();
}

template void lift_forward<double>(const DictRowMatrix<double>&, const CMatrix&, const CMatrix&,
                                   CVector&);
template void lift_forward<cplx>(const DictRowMatrix<cplx>&, const CMatrix&, const CMatrix&,
                                 CVector&);
template void lift_adjoint<double>(const DictMatrix<double>&, const CMatrix&, const CVector&,
                                   CMatrix&);
template void lift_adjoint<cplx>(const DictMatrix<cplx>&, const CMatrix&, const CVector&,
                                 CMatrix&);

}  // namespace glift::kernels::omp
