#include "glift/lifted_op.hpp"

#include <cmath>
#include <numbers>

#include "glift/kernels.hpp"
#include "glift/rng.hpp"

namespace glift {

RVector column_norms(const CMatrix& x) { return x.colwise().norm().transpose(); }

double norm_2inf(const CMatrix& x) { return x.cols() == 0 ? 0.0 : column_norms(x).maxCoeff(); }

double norm_21(const CMatrix& x) { return column_norms(x).sum(); }

// ---------------------------------------------------------------------------
// Dictionary

Dictionary::Dictionary(CMatrix entries, DictionaryKind kind)
    : entries_(std::move(entries)), kind_(kind) {
  if (entries_.rows() < 1 || entries_.cols() < 1) {
    throw ShapeError("dictionary must be at least 1 x 1");
  }
  real_ = (entries_.imag().array() == 0.0).all();
  if (real_) real_entries_ = entries_.real();
}

Dictionary::Dictionary(const RMatrix& entries, DictionaryKind kind)
    : Dictionary(CMatrix(entries.cast<cplx>()), kind) {}

Dictionary Dictionary::gaussian(Index rows, Index cols, Sampler& sampler) {
  return Dictionary(sampler.normal_matrix(rows, cols), DictionaryKind::gaussian);
}

Dictionary Dictionary::fourier_spikes(Index n) {
  CMatrix a(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index r = 0; r < n; ++r) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>((r * j) % n) /
                           static_cast<double>(n);
      a(r, j) = std::polar(1.0, phase);
    }
  }
  return Dictionary(std::move(a), DictionaryKind::fourier_spikes);
}

Dictionary Dictionary::select_columns(std::span<const Index> cols) const {
  CMatrix sub(rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c] < 0 || cols[c] >= this->cols()) throw ParameterError("column index out of range");
    sub.col(static_cast<Index>(c)) = entries_.col(cols[c]);
  }
  return Dictionary(std::move(sub), kind_);
}

// ---------------------------------------------------------------------------
// SubspaceBasis

double SubspaceBasis::orthonormality_defect(const CMatrix& b) {
  const CMatrix gram = b.adjoint() * b;
  return (gram - CMatrix::Identity(b.cols(), b.cols())).cwiseAbs().maxCoeff();
}

SubspaceBasis::SubspaceBasis(CMatrix columns) : columns_(std::move(columns)) {
  const Index n = columns_.rows();
  const Index k = columns_.cols();
  if (k < 1 || n < 1) throw ShapeError("subspace basis must be at least 1 x 1");
  if (k >= n) throw ParameterError("subspace dimension K must be smaller than N");
  if (orthonormality_defect(columns_) > LiftTolerances::orthonormality) {
    Eigen::HouseholderQR<CMatrix> qr(columns_);
    CMatrix q = qr.householderQ() * CMatrix::Identity(n, k);
    // Fix the phase so column i keeps a positive projection on the input.
    for (Index i = 0; i < k; ++i) {
      const cplx p = q.col(i).dot(columns_.col(i));
      if (std::abs(p) > 0.0) q.col(i) *= p / std::abs(p);
    }
    columns_ = std::move(q);
    reorthonormalized_ = true;
    if (orthonormality_defect(columns_) > LiftTolerances::orthonormality) {
      throw ParameterError("subspace basis is rank deficient");
    }
  }
}

SubspaceBasis SubspaceBasis::dft_first_k(Index n, Index k) {
  CMatrix b(n, k);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Index i = 0; i < k; ++i) {
    for (Index r = 0; r < n; ++r) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>((r * i) % n) /
                           static_cast<double>(n);
      b(r, i) = std::polar(scale, phase);
    }
  }
  return SubspaceBasis(std::move(b));
}

SubspaceBasis SubspaceBasis::identity_first_k(Index n, Index k) {
  return SubspaceBasis(CMatrix::Identity(n, k));
}

SubspaceBasis SubspaceBasis::random_orthonormal(Index n, Index k, Sampler& sampler) {
  return SubspaceBasis(sampler.complex_normal_matrix(n, k));
}

double coherence(const SubspaceBasis& basis) {
  return std::sqrt(static_cast<double>(basis.rows())) * basis.columns().cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// LiftedOperator

void LiftedOperator::check_forward_shape(const CMatrix& x) const {
  if (x.rows() != subspace_dim() || x.cols() != atoms()) {
    throw ShapeError("forward: expected " + std::to_string(subspace_dim()) + " x " +
                     std::to_string(atoms()) + " input, got " + std::to_string(x.rows()) +
                     " x " + std::to_string(x.cols()));
  }
}

void LiftedOperator::check_adjoint_shape(const CVector& y) const {
  if (y.size() != rows()) {
    throw ShapeError("adjoint: expected length " + std::to_string(rows()) + ", got " +
                     std::to_string(y.size()));
  }
}

CVector LiftedOperator::forward(const CMatrix& x) const {
  CVector y;
  forward(x, y);
  return y;
}

CMatrix LiftedOperator::adjoint(const CVector& y) const {
  CMatrix x;
  adjoint(y, x);
  return x;
}

CMatrix LiftedOperator::phi_block(Index j) const {
  if (j < 0 || j >= atoms()) throw ParameterError("phi_block: column index out of range");
  const Index k = subspace_dim();
  CMatrix block(rows(), k);
  CMatrix unit = CMatrix::Zero(k, atoms());
  CVector col;
  for (Index i = 0; i < k; ++i) {
    unit(i, j) = 1.0;
    forward(unit, col);
    block.col(i) = col;
    unit(i, j) = 0.0;
  }
  return block;
}

namespace {

// Embeds K x |cols| inputs into the parent's K x M domain.
class ColumnRestriction final : public LiftedOperator {
 public:
  ColumnRestriction(LiftedOperatorPtr parent, std::span<const Index> cols)
      : parent_(std::move(parent)), cols_(cols.begin(), cols.end()) {
    for (Index c : cols_) {
      if (c < 0 || c >= parent_->atoms()) throw ParameterError("restrict_to: index out of range");
    }
  }

  Index rows() const override { return parent_->rows(); }
  Index subspace_dim() const override { return parent_->subspace_dim(); }
  Index atoms() const override { return static_cast<Index>(cols_.size()); }

  void forward(const CMatrix& x, CVector& y) const override {
    check_forward_shape(x);
    CMatrix full = CMatrix::Zero(parent_->subspace_dim(), parent_->atoms());
    for (std::size_t c = 0; c < cols_.size(); ++c) full.col(cols_[c]) = x.col(static_cast<Index>(c));
    parent_->forward(full, y);
  }

  void adjoint(const CVector& y, CMatrix& x) const override {
    check_adjoint_shape(y);
    const CMatrix full = parent_->adjoint(y);
    x.resize(subspace_dim(), atoms());
    for (std::size_t c = 0; c < cols_.size(); ++c) x.col(static_cast<Index>(c)) = full.col(cols_[c]);
  }

  CMatrix phi_block(Index j) const override {
    if (j < 0 || j >= atoms()) throw ParameterError("phi_block: column index out of range");
    return parent_->phi_block(cols_[static_cast<std::size_t>(j)]);
  }

 private:
  LiftedOperatorPtr parent_;
  std::vector<Index> cols_;
};

struct NoDelete {
  void operator()(const LiftedOperator*) const {}
};

}  // namespace

LiftedOperatorPtr LiftedOperator::restrict_to(std::span<const Index> cols) const {
  LiftedOperatorPtr self = weak_from_this().lock();
  // Not owned by a shared_ptr: the restriction borrows *this.
  if (!self) self = LiftedOperatorPtr(this, NoDelete{});
  return std::make_shared<ColumnRestriction>(std::move(self), cols);
}

// ---------------------------------------------------------------------------
// DirectLift

DirectLift::DirectLift(Dictionary dict, SubspaceBasis basis, Exec exec)
    : dict_(std::move(dict)), basis_(std::move(basis)), exec_(exec) {
  if (dict_.rows() != basis_.rows()) {
    throw ShapeError("dictionary has " + std::to_string(dict_.rows()) + " rows but basis has " +
                     std::to_string(basis_.rows()));
  }
  if (dict_.is_real()) {
    real_rows_ = dict_.real_entries();
  } else {
    complex_rows_ = dict_.entries();
  }
}

void DirectLift::forward(const CMatrix& x, CVector& y) const {
  check_forward_shape(x);
  const CMatrix& b = basis_.columns();
  if (exec_ == Exec::serial) {
    if (dict_.is_real()) {
      kernels::reference::lift_forward<double>(dict_.real_entries(), b, x, y);
    } else {
      kernels::reference::lift_forward<cplx>(dict_.entries(), b, x, y);
    }
  } else if (dict_.is_real()) {
    kernels::omp::lift_forward<double>(real_rows_, b, x, y);
  } else {
    kernels::omp::lift_forward<cplx>(complex_rows_, b, x, y);
  }
}

void DirectLift::adjoint(const CVector& y, CMatrix& x) const {
  check_adjoint_shape(y);
  const CMatrix& b = basis_.columns();
  if (exec_ == Exec::serial) {
    if (dict_.is_real()) {
      kernels::reference::lift_adjoint<double>(dict_.real_entries(), b, y, x);
    } else {
      kernels::reference::lift_adjoint<cplx>(dict_.entries(), b, y, x);
    }
  } else if (dict_.is_real()) {
    kernels::omp::lift_adjoint<double>(dict_.real_entries(), b, y, x);
  } else {
    kernels::omp::lift_adjoint<cplx>(dict_.entries(), b, y, x);
  }
}

CMatrix DirectLift::phi_block(Index j) const {
  if (j < 0 || j >= atoms()) throw ParameterError("phi_block: column index out of range");
  const CMatrix& b = basis_.columns();
  CMatrix block(rows(), subspace_dim());
  for (Index i = 0; i < subspace_dim(); ++i) {
    block.col(i) = b.col(i).cwiseProduct(dict_.entries().col(j));
  }
  return block;
}

LiftedOperatorPtr DirectLift::restrict_to(std::span<const Index> cols) const {
  return std::make_shared<DirectLift>(dict_.select_columns(cols), basis_, exec_);
}

// ---------------------------------------------------------------------------

CMatrix assemble_phi(const LiftedOperator& op, std::span<const Index> cols) {
  const Index k = op.subspace_dim();
  CMatrix phi(op.rows(), k * static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    phi.middleCols(k * static_cast<Index>(c), k) = op.phi_block(cols[c]);
  }
  return phi;
}

CMatrix assemble_phi(const LiftedOperator& op) {
  std::vector<Index> all(static_cast<std::size_t>(op.atoms()));
  for (Index j = 0; j < op.atoms(); ++j) all[static_cast<std::size_t>(j)] = j;
  return assemble_phi(op, all);
}

CVector vectorize(const CMatrix& x) { return x.reshaped(); }

CMatrix unvectorize(const CVector& v, Index k, Index m) {
  if (v.size() != k * m) throw ShapeError("unvectorize: length mismatch");
  return v.reshaped(k, m);
}

}  // namespace glift
