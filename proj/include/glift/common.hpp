#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace glift {

using Index = Eigen::Index;
using cplx = std::complex<double>;

using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Sorted, duplicate-free list of column indices (0-based).
using SupportSet = std::vector<Index>;

/// Kernel execution policy. `serial` runs the reference loops, `parallel`
/// runs the OpenMP kernels. Both produce the same values up to summation order.
enum class Exec { serial, parallel };

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Operand dimensions do not agree.
struct ShapeError : Error {
  using Error::Error;
};

/// An argument is outside its documented range.
struct ParameterError : Error {
  using Error::Error;
};

/// A formula is evaluated outside its mathematical domain (e.g. log 0).
struct DomainError : Error {
  using Error::Error;
};

/// The iteration produced NaN or Inf.
struct NumericalError : Error {
  using Error::Error;
  NumericalError(const std::string& what, long iteration)
      : Error(what), iteration(iteration) {}
  long iteration = -1;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

/// Malformed input text, with a 1-based location.
struct ParseError : Error {
  ParseError(const std::string& what, long line, long column)
      : Error(what + " (line " + std::to_string(line) + ", column " +
              std::to_string(column) + ")"),
        line(line), column(column) {}
  long line;
  long column;
};

/// Column l2 norms of a K x M matrix.
RVector column_norms(const CMatrix& X);

/// max_j ||x_j||_2
double norm_2inf(const CMatrix& X);

/// sum_j ||x_j||_2
double norm_21(const CMatrix& X);

}  // namespace glift
