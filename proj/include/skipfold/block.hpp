#pragma once

#include <functional>
#include <variant>
#include <vector>

#include "skipfold/activation.hpp"
#include "skipfold/matrix.hpp"

namespace skipfold {

struct SkipNone {};
struct SkipIdentity {};
struct SkipGeneral {
  Matrix m;  // d x d
};
using Skip = std::variant<SkipNone, SkipIdentity, SkipGeneral>;

struct UngatedWeights {
  Matrix w_up;    // N x d
  Matrix w_down;  // d x N
  ActivationKind act = ActivationKind::relu;
};

struct GatedWeights {
  Matrix w_gate;  // N x d
  Matrix w_val;   // N x d
  Matrix w_down;  // d x N
  ActivationKind gate = ActivationKind::silu;
};

/// One residual block: an MLP branch (ungated W_down sigma(W_up x), or gated
/// W_down (g(W_gate x) .* (W_val x))) plus a skip branch that is absent, the
/// identity, or a general d-by-d matrix.
class Block {
 public:
  static Block ungated(Matrix w_up, Matrix w_down, ActivationKind act, Skip skip = SkipIdentity{});
  static Block gated(Matrix w_gate, Matrix w_val, Matrix w_down, ActivationKind gate,
                     Skip skip = SkipIdentity{});

  int d() const { return d_; }
  int n() const { return n_; }
  bool is_ungated() const { return std::holds_alternative<UngatedWeights>(weights_); }
  bool is_gated() const { return !is_ungated(); }
  const UngatedWeights& as_ungated() const;
  const GatedWeights& as_gated() const;
  const Skip& skip() const { return skip_; }
  bool has_no_skip() const { return std::holds_alternative<SkipNone>(skip_); }
  bool has_identity_skip() const { return std::holds_alternative<SkipIdentity>(skip_); }
  bool has_general_skip() const { return std::holds_alternative<SkipGeneral>(skip_); }

  /// Activation tag of the branch (gate activation for gated blocks).
  ActivationKind activation() const;

  Block with_skip(Skip skip) const;

 private:
  Block(std::variant<UngatedWeights, GatedWeights> weights, Skip skip);

  std::variant<UngatedWeights, GatedWeights> weights_;
  Skip skip_;
  int d_ = 0;
  int n_ = 0;
};

/// Ordered composition of blocks, all mapping R^dim -> R^dim. The dimension
/// is stored explicitly so the empty stack (the identity map) is well formed.
struct Stack {
  int dim = 0;
  std::vector<Block> blocks;
};

/// Builds a stack from blocks, validating equal widths.
Stack make_stack(std::vector<Block> blocks);
Stack single_block_stack(Block block);

/// Forward evaluation; x is a d-by-1 column.
Matrix eval_block(const Block& block, const Matrix& x);
Matrix eval_stack(const Stack& stack, const Matrix& x);

/// Central-difference Jacobian, column j = (f(x + h e_j) - f(x - h e_j)) / 2h.
Matrix jacobian_fd(const std::function<Matrix(const Matrix&)>& f, const Matrix& x, double h);

}  // namespace skipfold
