#include <doctest.h>

#include <cmath>

#include "skipfold/errors.hpp"
#include "skipfold/matrix.hpp"
#include "skipfold/rng.hpp"

using namespace skipfold;

namespace {

Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("matrix arithmetic basics") {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix b = Matrix::from_rows({{5, 6}, {7, 8}});

  const Matrix sum = a + b;
  CHECK(sum(0, 0) == 6);
  CHECK(sum(1, 1) == 12);

  const Matrix prod = a * b;
  CHECK(prod(0, 0) == 19);
  CHECK(prod(0, 1) == 22);
  CHECK(prod(1, 0) == 43);
  CHECK(prod(1, 1) == 50);

  const Matrix t = a.transposed();
  CHECK(t(0, 1) == 3);
  CHECK(a.frobenius_norm() == doctest::Approx(std::sqrt(30.0)).epsilon(1e-14));
  CHECK(a.max_abs() == 4);
  CHECK((2.0 * a)(1, 1) == 8);
  CHECK((-a)(0, 0) == -1);
  CHECK(hadamard(a, b)(1, 0) == 21);
}

TEST_CASE("matrix shape and finiteness validation") {
  CHECK_THROWS_AS(Matrix(0, 2), DimensionError);
  CHECK_THROWS_AS(Matrix(2, 2, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Matrix(1, 1, {std::nan("")}), Error);
  CHECK_THROWS_AS(Matrix(1, 2, {1.0, std::numeric_limits<double>::infinity()}), Error);
  CHECK_THROWS_AS(Matrix::from_rows({{1, 2}, {3}}), DimensionError);

  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix c = Matrix::from_rows({{1, 2, 3}});
  CHECK_THROWS_AS(a + c, DimensionError);
  CHECK_THROWS_AS(a * a * c.transposed() * a, DimensionError);
  CHECK_THROWS_AS(dot(a, a), DimensionError);
}

TEST_CASE("row and column subsets") {
  const Matrix m = Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
  const int idx[] = {0, 2};
  const Matrix r = m.rows_subset(idx);
  CHECK(r.rows() == 2);
  CHECK(r(1, 1) == 6);

  const int cidx[] = {1};
  const Matrix c = m.cols_subset(cidx);
  CHECK(c.rows() == 3);
  CHECK(c(2, 0) == 6);

  const int bad[] = {0, 3};
  CHECK_THROWS_AS(m.rows_subset(bad), IndexError);
  const int unsorted[] = {2, 0};
  CHECK_THROWS_AS(m.rows_subset(unsorted), IndexError);
  const int dup[] = {1, 1};
  CHECK_THROWS_AS(m.rows_subset(dup), IndexError);
  CHECK_THROWS_AS(m.rows_subset(std::span<const int>{}), IndexError);
}

TEST_CASE("singular values, rank, condition number") {
  const Matrix diag = Matrix::from_rows({{2, 0}, {0, 3}});
  CHECK(smallest_singular_value(diag) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(condition_number(diag) == doctest::Approx(1.5).epsilon(1e-14));

  const Matrix rank1 = Matrix::from_rows({{1, 2}, {2, 4}});
  CHECK(numerical_rank(rank1) == 1);
  CHECK(numerical_rank(Matrix::identity(3)) == 3);
  CHECK(std::isinf(condition_number(rank1)));
}

TEST_CASE("inverse with conditioning guard") {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix inv = inverse_checked(a);
  CHECK(inv(0, 0) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(inv(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(inv(1, 0) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(inv(1, 1) == doctest::Approx(-0.5).epsilon(1e-12));

  CHECK_THROWS_AS(inverse_checked(Matrix::from_rows({{1, 2}, {2, 4}})), SingularMatrixError);
  CHECK_THROWS_AS(inverse_checked(Matrix::from_rows({{1, 2, 3}})), DimensionError);
}

TEST_CASE("pseudo-inverse is a left inverse for full column rank") {
  const Matrix a = random_matrix(5, 3, 42);
  const Matrix p = pseudo_inverse(a);
  const Matrix should_be_identity = p * a;
  CHECK((should_be_identity - Matrix::identity(3)).frobenius_norm() < 1e-12);
}

TEST_CASE("minimum-norm least squares matches the normal equations when full rank") {
  const Matrix a = random_matrix(8, 3, 7);
  const Matrix b = random_matrix(8, 2, 8);
  const Matrix x = solve_least_squares_min_norm(a, b);
  // Independent route: (A^T A)^-1 A^T B.
  const Matrix at = a.transposed();
  const Matrix oracle = inverse_checked(at * a) * (at * b);
  CHECK((x - oracle).frobenius_norm() < 1e-10 * (1.0 + oracle.frobenius_norm()));
}

TEST_CASE("minimum-norm least squares on rank-deficient systems") {
  // A x = b with A = [[1,0],[1,0]]: solutions (1, t); minimum norm is (1, 0).
  const Matrix a = Matrix::from_rows({{1, 0}, {1, 0}});
  const Matrix b = Matrix::from_rows({{1}, {1}});
  const Matrix x = solve_least_squares_min_norm(a, b);
  CHECK(x(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(x(1, 0)) < 1e-12);

  // All-zero A: minimum-norm solution is 0.
  const Matrix zero = Matrix(3, 2);
  const Matrix x0 = solve_least_squares_min_norm(zero, random_matrix(3, 1, 5));
  CHECK(x0.frobenius_norm() == 0.0);
}

TEST_CASE("rng determinism and moments") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());

  Rng r(7);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}
