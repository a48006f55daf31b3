#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace skipfold {

/// Dense real matrix with row-major storage, the single numeric carrier of
/// the library. Column vectors are d-by-1 matrices. Public constructors
/// reject non-finite entries.
class Matrix {
 public:
  Matrix() = default;  // empty 0x0, used only as an "absent" placeholder
  Matrix(int rows, int cols);
  Matrix(int rows, int cols, std::vector<double> entries);

  static Matrix identity(int d);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);
  static Matrix column(std::span<const double> values);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double operator()(int i, int j) const {
    assert(i >= 0 && i < rows_ && j >= 0 && j < cols_);
    return data_[static_cast<std::size_t>(i) * cols_ + j];
  }
  double& operator()(int i, int j) {
    assert(i >= 0 && i < rows_ && j >= 0 && j < cols_);
    return data_[static_cast<std::size_t>(i) * cols_ + j];
  }

  const std::vector<double>& data() const { return data_; }

  Matrix transposed() const;
  double frobenius_norm() const;
  double max_abs() const;

  /// Row/column submatrices; indices must be strictly increasing and in range.
  Matrix rows_subset(std::span<const int> indices) const;
  Matrix cols_subset(std::span<const int> indices) const;

  bool operator==(const Matrix& other) const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);
Matrix operator-(const Matrix& a);
Matrix hadamard(const Matrix& a, const Matrix& b);

/// Inner product of two column vectors.
double dot(const Matrix& a, const Matrix& b);

// Decompositions. These are the only operations backed by Eigen; everything
// above is plain row-major arithmetic.

double smallest_singular_value(const Matrix& a);

/// sigma_max / sigma_min; +inf when singular.
double condition_number(const Matrix& a);

int numerical_rank(const Matrix& a);

/// Moore-Penrose pseudo-inverse.
Matrix pseudo_inverse(const Matrix& a);

/// Inverse of a square matrix; throws SingularMatrixError when the condition
/// number estimate is not below max_condition.
Matrix inverse_checked(const Matrix& a, double max_condition = 1e12);

/// Minimum-norm X minimizing ||A X - B||_F (rank-revealing orthogonal
/// factorization; total even when A is rank deficient).
Matrix solve_least_squares_min_norm(const Matrix& a, const Matrix& b);

}  // namespace skipfold
