#include <doctest.h>

#include <cmath>

#include "skipfold/block.hpp"
#include "skipfold/errors.hpp"
#include "skipfold/rng.hpp"

using namespace skipfold;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

Block hand_block(Skip skip = SkipIdentity{}) {
  return Block::ungated(Matrix::from_rows({{1, 0}, {0, 1}, {1, 1}}),
                        Matrix::from_rows({{-1, 0, 0.5}, {0, -1, 0.5}}), ActivationKind::relu,
                        skip);
}

}  // namespace

TEST_CASE("eval_block hand example with identity skip") {
  // W_up x = (1,2,3), relu unchanged, W_down (1,2,3) = (0.5,-0.5), plus x.
  const Block b = hand_block();
  const double xdata[] = {1.0, 2.0};
  const Matrix y = eval_block(b, Matrix::column(xdata));
  CHECK(y(0, 0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(y(1, 0) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("identity skip with zero down projection is the identity map") {
  const Block b = Block::ungated(Matrix::from_rows({{1, 0}, {0, 1}, {1, 1}}), Matrix(2, 3),
                                 ActivationKind::gelu, SkipIdentity{});
  Rng rng(3);
  for (int k = 0; k < 10; ++k) {
    const Matrix x = random_matrix(2, 1, rng);
    CHECK((eval_block(b, x) - x).frobenius_norm() == 0.0);
  }
}

TEST_CASE("gated blocks vanish at the origin") {
  Rng rng(5);
  for (ActivationKind gate : {ActivationKind::silu, ActivationKind::gelu, ActivationKind::relu}) {
    const Block b = Block::gated(random_matrix(4, 2, rng), random_matrix(4, 2, rng),
                                 random_matrix(2, 4, rng), gate, SkipNone{});
    CHECK(eval_block(b, Matrix(2, 1)).frobenius_norm() == 0.0);
  }
}

TEST_CASE("gated block matches its defining formula") {
  const Matrix w_gate = Matrix::from_rows({{1, 0}, {0, 2}});
  const Matrix w_val = Matrix::from_rows({{3, 0}, {0, 1}});
  const Matrix w_down = Matrix::from_rows({{1, 1}, {0, 2}});
  const Block b = Block::gated(w_gate, w_val, w_down, ActivationKind::silu, SkipNone{});
  const double xdata[] = {0.5, -0.25};
  const Matrix x = Matrix::column(xdata);
  // Hidden: g(0.5) * 1.5 and g(-0.5) * (-0.25), then w_down.
  const double h0 = activation_value(ActivationKind::silu, 0.5) * 1.5;
  const double h1 = activation_value(ActivationKind::silu, -0.5) * (-0.25);
  const Matrix y = eval_block(b, x);
  CHECK(y(0, 0) == doctest::Approx(h0 + h1).epsilon(1e-15));
  CHECK(y(1, 0) == doctest::Approx(2.0 * h1).epsilon(1e-15));
}

TEST_CASE("block construction validates shapes and gates") {
  Rng rng(9);
  // N < d
  CHECK_THROWS_AS(Block::ungated(random_matrix(2, 3, rng), random_matrix(3, 2, rng),
                                 ActivationKind::relu),
                  DimensionError);
  // w_down shape
  CHECK_THROWS_AS(Block::ungated(random_matrix(3, 2, rng), random_matrix(3, 2, rng),
                                 ActivationKind::relu),
                  DimensionError);
  // general skip must be d x d
  CHECK_THROWS_AS(Block::ungated(random_matrix(3, 2, rng), random_matrix(2, 3, rng),
                                 ActivationKind::relu, SkipGeneral{Matrix::identity(3)}),
                  DimensionError);
  // relu_squared is not a gate
  CHECK_THROWS_AS(Block::gated(random_matrix(3, 2, rng), random_matrix(3, 2, rng),
                               random_matrix(2, 3, rng), ActivationKind::relu_squared),
                  UnsupportedActivationError);
  // gated shape mismatch between gate and value paths
  CHECK_THROWS_AS(Block::gated(random_matrix(3, 2, rng), random_matrix(4, 2, rng),
                               random_matrix(2, 3, rng), ActivationKind::silu),
                  DimensionError);
}

TEST_CASE("eval_stack composes left to right") {
  Stack empty;
  empty.dim = 3;
  const double xdata[] = {1.0, -2.0, 0.5};
  const Matrix x = Matrix::column(xdata);
  CHECK((eval_stack(empty, x) - x).frobenius_norm() == 0.0);

  const Block b = hand_block();
  const Stack one = single_block_stack(b);
  CHECK((eval_stack(one, Matrix::column(std::span<const double>{xdata, 2})) -
         eval_block(b, Matrix::column(std::span<const double>{xdata, 2})))
            .frobenius_norm() == 0.0);

  // Two identity-skip blocks with zero W_down compose to the identity.
  const Block zero = Block::ungated(Matrix::from_rows({{1, 0}, {0, 1}, {1, 1}}), Matrix(2, 3),
                                    ActivationKind::relu, SkipIdentity{});
  const Stack two = make_stack({zero, zero});
  const Matrix x2 = Matrix::column(std::span<const double>{xdata, 2});
  CHECK((eval_stack(two, x2) - x2).frobenius_norm() == 0.0);

  CHECK_THROWS_AS(make_stack({hand_block(), Block::ungated(Matrix::from_rows({{1, 1, 1}}),
                                                           Matrix::from_rows({{1}, {1}, {1}}),
                                                           ActivationKind::relu)}),
                  DimensionError);
}

TEST_CASE("jacobian_fd is exact for linear maps") {
  const Matrix m = Matrix::from_rows({{1.0, -2.0}, {0.5, 3.0}});
  const auto linear = [&](const Matrix& x) { return m * x; };

  const Matrix at_zero = jacobian_fd(linear, Matrix(2, 1), 1e-5);
  CHECK((at_zero - m).frobenius_norm() <= 1e-10 * m.frobenius_norm());

  const auto ident = [](const Matrix& x) { return x; };
  CHECK((jacobian_fd(ident, Matrix(4, 1), 1e-5) - Matrix::identity(4)).frobenius_norm() == 0.0);
  // Away from the origin the floor is the rounding of (x + h) - (x - h),
  // about eps * |x| / (2h) per entry.
  Rng rng(21);
  const Matrix x = random_matrix(4, 1, rng);
  CHECK((jacobian_fd(ident, x, 1e-5) - Matrix::identity(4)).frobenius_norm() <=
        1e-10 * (1.0 + x.frobenius_norm()));

  CHECK_THROWS_AS(jacobian_fd(ident, x, 0.0), Error);
}

TEST_CASE("jacobian_fd of a skipless gated block at the origin is quadratically small") {
  Rng rng(33);
  const Matrix w_gate = random_matrix(6, 3, rng);
  const Matrix w_val = random_matrix(6, 3, rng);
  const Matrix w_down = random_matrix(3, 6, rng);
  const Block b = Block::gated(w_gate, w_val, w_down, ActivationKind::silu, SkipNone{});
  const double scale =
      std::max({w_gate.frobenius_norm(), w_val.frobenius_norm(), w_down.frobenius_norm()});
  const Matrix jac =
      jacobian_fd([&](const Matrix& x) { return eval_block(b, x); }, Matrix(3, 1), 1e-5);
  CHECK(jac.max_abs() <= 1e-3 * scale * scale);
}

TEST_CASE("homogeneity of relu and relu_squared blocks") {
  Rng rng(55);
  const Block sq = Block::ungated(random_matrix(5, 2, rng), random_matrix(2, 5, rng),
                                  ActivationKind::relu_squared, SkipNone{});
  const Block lin = Block::ungated(random_matrix(5, 2, rng), random_matrix(2, 5, rng),
                                   ActivationKind::relu, SkipNone{});
  for (int k = 0; k < 20; ++k) {
    const Matrix x = random_matrix(2, 1, rng);
    for (double lambda : {0.5, 2.0, 10.0}) {
      const Matrix fsq = eval_block(sq, x);
      CHECK((eval_block(sq, lambda * x) - (lambda * lambda) * fsq).frobenius_norm() <=
            1e-10 * lambda * lambda * fsq.frobenius_norm() + 1e-300);
      const Matrix flin = eval_block(lin, x);
      CHECK((eval_block(lin, lambda * x) - lambda * flin).frobenius_norm() <=
            1e-10 * lambda * flin.frobenius_norm() + 1e-300);
    }
  }
}

TEST_CASE("eval dimension mismatches raise") {
  const Block b = hand_block();
  CHECK_THROWS_AS(eval_block(b, Matrix(3, 1)), DimensionError);
  CHECK_THROWS_AS(eval_stack(single_block_stack(b), Matrix(3, 1)), DimensionError);
}
