#include "skipfold/matrix.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <sstream>

#include "skipfold/errors.hpp"

namespace skipfold {

namespace {

void require_finite(const std::vector<double>& entries) {
  for (double v : entries) {
    if (!std::isfinite(v)) throw Error("matrix entries must be finite");
  }
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream msg;
    msg << op << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x"
        << b.cols();
    throw DimensionError(msg.str());
  }
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

Matrix from_eigen(const Eigen::MatrixXd& e) {
  Matrix m(static_cast<int>(e.rows()), static_cast<int>(e.cols()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = e(i, j);
  return m;
}

void check_subset_indices(std::span<const int> indices, int bound, const char* what) {
  if (indices.empty()) throw IndexError(std::string(what) + ": subset must be nonempty");
  int prev = -1;
  for (int idx : indices) {
    if (idx < 0 || idx >= bound) {
      std::ostringstream msg;
      msg << what << ": index " << idx << " out of range [0, " << bound << ")";
      throw IndexError(msg.str());
    }
    if (idx <= prev) throw IndexError(std::string(what) + ": indices must be strictly increasing");
    prev = idx;
  }
}

}  // namespace

Matrix::Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 1 || cols < 1) throw DimensionError("matrix dimensions must be positive");
  data_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
}

Matrix::Matrix(int rows, int cols, std::vector<double> entries) : rows_(rows), cols_(cols) {
  if (rows < 1 || cols < 1) throw DimensionError("matrix dimensions must be positive");
  if (entries.size() != static_cast<std::size_t>(rows) * cols)
    throw DimensionError("entry count does not match rows * cols");
  require_finite(entries);
  data_ = std::move(entries);
}

Matrix Matrix::identity(int d) {
  Matrix m(d, d);
  for (int i = 0; i < d; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty() || rows.front().empty()) throw DimensionError("from_rows: empty input");
  const int r = static_cast<int>(rows.size());
  const int c = static_cast<int>(rows.front().size());
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(r) * c);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c) throw DimensionError("from_rows: ragged rows");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(flat));
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(static_cast<int>(values.size()), 1,
                std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double Matrix::frobenius_norm() const {
  double sum = 0.0;
  for (double v : data_) sum += v * v;
  return std::sqrt(sum);
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Matrix Matrix::rows_subset(std::span<const int> indices) const {
  check_subset_indices(indices, rows_, "rows_subset");
  Matrix out(static_cast<int>(indices.size()), cols_);
  for (int i = 0; i < out.rows(); ++i)
    for (int j = 0; j < cols_; ++j) out(i, j) = (*this)(indices[i], j);
  return out;
}

Matrix Matrix::cols_subset(std::span<const int> indices) const {
  check_subset_indices(indices, cols_, "cols_subset");
  Matrix out(rows_, static_cast<int>(indices.size()));
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < out.cols(); ++j) out(i, j) = (*this)(i, indices[j]);
  return out;
}

bool Matrix::operator==(const Matrix& other) const {
  return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "operator+");
  Matrix out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) + b(i, j);
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "operator-");
  Matrix out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) - b(i, j);
  return out;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    std::ostringstream msg;
    msg << "operator*: inner dimensions differ, " << a.rows() << "x" << a.cols() << " times "
        << b.rows() << "x" << b.cols();
    throw DimensionError(msg.str());
  }
  Matrix out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) = s * a(i, j);
  return out;
}

Matrix operator-(const Matrix& a) { return -1.0 * a; }

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) * b(i, j);
  return out;
}

double dot(const Matrix& a, const Matrix& b) {
  if (a.cols() != 1 || b.cols() != 1) throw DimensionError("dot expects column vectors");
  require_same_shape(a, b, "dot");
  double sum = 0.0;
  for (int i = 0; i < a.rows(); ++i) sum += a(i, 0) * b(i, 0);
  return sum;
}

double smallest_singular_value(const Matrix& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(a));
  return svd.singularValues().tail(1)(0);
}

double condition_number(const Matrix& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(a));
  const auto& sv = svd.singularValues();
  const double smin = sv.tail(1)(0);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / smin;
}

int numerical_rank(const Matrix& a) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(to_eigen(a));
  return static_cast<int>(qr.rank());
}

Matrix pseudo_inverse(const Matrix& a) {
  Eigen::MatrixXd e = to_eigen(a);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(e, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff =
      std::max(a.rows(), a.cols()) * std::numeric_limits<double>::epsilon() * sv(0);
  Eigen::VectorXd inv = sv;
  for (Eigen::Index i = 0; i < inv.size(); ++i) inv(i) = sv(i) > cutoff ? 1.0 / sv(i) : 0.0;
  Eigen::MatrixXd pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  return from_eigen(pinv);
}

Matrix inverse_checked(const Matrix& a, double max_condition) {
  if (a.rows() != a.cols()) throw DimensionError("inverse_checked: matrix must be square");
  const double cond = condition_number(a);
  if (!(cond < max_condition)) {
    std::ostringstream msg;
    msg << "matrix is singular or ill-conditioned (condition estimate " << cond
        << ", bound " << max_condition << ")";
    throw SingularMatrixError(msg.str());
  }
  return from_eigen(to_eigen(a).partialPivLu().inverse());
}

Matrix solve_least_squares_min_norm(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DimensionError("least squares: row counts differ");
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(to_eigen(a));
  Eigen::MatrixXd x = cod.solve(to_eigen(b));
  return from_eigen(x);
}

}  // namespace skipfold
