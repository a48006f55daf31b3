#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "skipfold/block.hpp"

namespace skipfold::approx {

/// V_up starts from W_up itself.
struct InitFromWeights {};
/// V_up starts from (I - 2 Pi_S) W_up. An empty subset asks for a bounded
/// search: the passing certificate when one exists, otherwise the subset
/// with the smallest residual.
struct InitSignFlips {
  std::vector<int> subset;
};
/// V_up starts from seeded standard normal entries.
struct InitRandom {
  std::uint64_t seed = 0;
};
using Init = std::variant<InitFromWeights, InitSignFlips, InitRandom>;

struct ApproxConfig {
  int sample_count = 4096;
  std::uint64_t seed = 0;
  int max_iters = 2000;
  double step_size = 1e-2;
  Init init = InitFromWeights{};
  int alternate_every = 10;  // iterations between closed-form V_down solves
};

struct ApproxResult {
  Matrix v_up;
  Matrix v_down;
  /// Entry 0 after the initial V_down solve, then one entry per iteration.
  /// Non-increasing across closed-form solve iterations.
  std::vector<double> objective_trace;
  double final_objective = 0.0;
  /// Max relative gap between analytic and central-difference gradients at
  /// the probe iterates {0, max_iters/2, max_iters}.
  double grad_check = 0.0;
};

/// Mean over samples of ||V_down sigma(V_up x) - x - W_down sigma(W_up x)||^2
/// for an ungated identity-skip block.
double discrepancy_objective(const Matrix& v_up, const Matrix& v_down, const Block& skip_block,
                             std::span<const Matrix> samples);

struct Gradients {
  Matrix v_up;
  Matrix v_down;
};

/// Exact analytic gradient of the objective (relu uses the sigma'(0) = 0
/// convention on kink hits).
Gradients discrepancy_gradient(const Matrix& v_up, const Matrix& v_down, const Block& skip_block,
                               std::span<const Matrix> samples);

/// Minimum-norm least-squares minimizer over V_down with V_up fixed.
Matrix solve_down_least_squares(const Matrix& v_up, const Block& skip_block,
                                std::span<const Matrix> samples);

/// Alternating fit: fixed-step gradient iterations on V_up with a
/// closed-form V_down solve every alternate_every iterations.
ApproxResult fit_approximate(const Block& skip_block, const ApproxConfig& cfg = {});

std::vector<Matrix> draw_standard_normal_samples(int d, int count, std::uint64_t seed);

}  // namespace skipfold::approx
