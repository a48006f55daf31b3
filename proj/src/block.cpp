#include "skipfold/block.hpp"

#include <sstream>
#include <string>
#include <utility>

#include "skipfold/errors.hpp"

namespace skipfold {

namespace {

void require_block_shapes(const Matrix& up_shaped, const Matrix& w_down, const char* up_name) {
  const int n = up_shaped.rows();
  const int d = up_shaped.cols();
  if (d < 1 || n < d) {
    std::ostringstream msg;
    msg << "block widths must satisfy N >= d >= 1, got " << up_name << " " << n << "x" << d;
    throw DimensionError(msg.str());
  }
  if (w_down.rows() != d || w_down.cols() != n) {
    std::ostringstream msg;
    msg << "w_down must be " << d << "x" << n << ", got " << w_down.rows() << "x" << w_down.cols();
    throw DimensionError(msg.str());
  }
}

void require_skip_shape(const Skip& skip, int d) {
  if (const auto* general = std::get_if<SkipGeneral>(&skip)) {
    if (general->m.rows() != d || general->m.cols() != d)
      throw DimensionError("general skip matrix must be d x d");
  }
}

}  // namespace

Block::Block(std::variant<UngatedWeights, GatedWeights> weights, Skip skip)
    : weights_(std::move(weights)), skip_(std::move(skip)) {
  if (const auto* u = std::get_if<UngatedWeights>(&weights_)) {
    require_block_shapes(u->w_up, u->w_down, "w_up");
    d_ = u->w_up.cols();
    n_ = u->w_up.rows();
  } else {
    const auto& g = std::get<GatedWeights>(weights_);
    require_block_shapes(g.w_gate, g.w_down, "w_gate");
    if (g.w_val.rows() != g.w_gate.rows() || g.w_val.cols() != g.w_gate.cols())
      throw DimensionError("w_val must match w_gate shape");
    if (!is_gate_eligible(g.gate))
      throw UnsupportedActivationError(std::string("activation '") +
                                       std::string(activation_name(g.gate)) +
                                       "' cannot be used as a gate");
    d_ = g.w_gate.cols();
    n_ = g.w_gate.rows();
  }
  require_skip_shape(skip_, d_);
}

Block Block::ungated(Matrix w_up, Matrix w_down, ActivationKind act, Skip skip) {
  return Block(UngatedWeights{std::move(w_up), std::move(w_down), act}, std::move(skip));
}

Block Block::gated(Matrix w_gate, Matrix w_val, Matrix w_down, ActivationKind gate, Skip skip) {
  return Block(GatedWeights{std::move(w_gate), std::move(w_val), std::move(w_down), gate},
               std::move(skip));
}

const UngatedWeights& Block::as_ungated() const {
  if (const auto* u = std::get_if<UngatedWeights>(&weights_)) return *u;
  throw Error("block is gated, expected ungated");
}

const GatedWeights& Block::as_gated() const {
  if (const auto* g = std::get_if<GatedWeights>(&weights_)) return *g;
  throw Error("block is ungated, expected gated");
}

ActivationKind Block::activation() const {
  if (const auto* u = std::get_if<UngatedWeights>(&weights_)) return u->act;
  return std::get<GatedWeights>(weights_).gate;
}

Block Block::with_skip(Skip skip) const {
  Block copy = *this;
  require_skip_shape(skip, d_);
  copy.skip_ = std::move(skip);
  return copy;
}

Stack make_stack(std::vector<Block> blocks) {
  if (blocks.empty()) throw Error("make_stack needs at least one block; build Stack{d, {}} directly");
  Stack s;
  s.dim = blocks.front().d();
  for (const Block& b : blocks) {
    if (b.d() != s.dim) throw DimensionError("all stack blocks must share the same width d");
  }
  s.blocks = std::move(blocks);
  return s;
}

Stack single_block_stack(Block block) {
  Stack s;
  s.dim = block.d();
  s.blocks.push_back(std::move(block));
  return s;
}

Matrix eval_block(const Block& block, const Matrix& x) {
  if (x.cols() != 1 || x.rows() != block.d()) {
    std::ostringstream msg;
    msg << "eval_block: input must be " << block.d() << "x1, got " << x.rows() << "x" << x.cols();
    throw DimensionError(msg.str());
  }
  Matrix branch = block.is_ungated()
                      ? block.as_ungated().w_down *
                            apply_activation(block.as_ungated().act, block.as_ungated().w_up * x)
                      : block.as_gated().w_down *
                            hadamard(apply_activation(block.as_gated().gate,
                                                      block.as_gated().w_gate * x),
                                     block.as_gated().w_val * x);
  if (block.has_no_skip()) return branch;
  if (block.has_identity_skip()) return x + branch;
  return std::get<SkipGeneral>(block.skip()).m * x + branch;
}

Matrix eval_stack(const Stack& stack, const Matrix& x) {
  if (x.cols() != 1 || x.rows() != stack.dim)
    throw DimensionError("eval_stack: input dimension mismatch");
  Matrix y = x;
  for (const Block& b : stack.blocks) y = eval_block(b, y);
  return y;
}

Matrix jacobian_fd(const std::function<Matrix(const Matrix&)>& f, const Matrix& x, double h) {
  if (!(h > 0.0)) throw Error("jacobian_fd: step h must be positive");
  if (x.cols() != 1) throw DimensionError("jacobian_fd: x must be a column vector");
  const int d = x.rows();
  Matrix jac;
  for (int j = 0; j < d; ++j) {
    Matrix xp = x, xm = x;
    xp(j, 0) += h;
    xm(j, 0) -= h;
    const Matrix diff = f(xp) - f(xm);
    if (jac.empty()) jac = Matrix(diff.rows(), d);
    for (int i = 0; i < diff.rows(); ++i) jac(i, j) = diff(i, 0) / (2.0 * h);
  }
  return jac;
}

}  // namespace skipfold
