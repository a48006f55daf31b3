#include "skipfold/approx.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "skipfold/absorption.hpp"
#include "skipfold/errors.hpp"
#include "skipfold/rng.hpp"

namespace skipfold::approx {

namespace {

const UngatedWeights& require_fit_target(const Block& skip_block) {
  if (!skip_block.is_ungated() || !skip_block.has_identity_skip())
    throw Error("approximate absorption targets an ungated block with identity skip");
  return skip_block.as_ungated();
}

void require_candidate_shapes(const Matrix& v_up, const Matrix& v_down, const Block& skip_block) {
  if (v_up.rows() != skip_block.n() || v_up.cols() != skip_block.d())
    throw DimensionError("v_up must match the target block's N x d");
  if (v_down.rows() != skip_block.d() || v_down.cols() != skip_block.n())
    throw DimensionError("v_down must match the target block's d x N");
}

void require_samples(std::span<const Matrix> samples, int d) {
  if (samples.empty()) throw Error("samples must be nonempty");
  for (const Matrix& x : samples)
    if (x.cols() != 1 || x.rows() != d) throw DimensionError("samples must be d x 1 columns");
}

/// x + W_down sigma(W_up x), cached per sample during fits.
std::vector<Matrix> fit_targets(const Block& skip_block, std::span<const Matrix> samples) {
  std::vector<Matrix> y;
  y.reserve(samples.size());
  for (const Matrix& x : samples) y.push_back(eval_block(skip_block, x));
  return y;
}

double objective_from_targets(const Matrix& v_up, const Matrix& v_down, ActivationKind act,
                              std::span<const Matrix> samples, std::span<const Matrix> targets) {
  double sum = 0.0;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const Matrix r = v_down * apply_activation(act, v_up * samples[j]) - targets[j];
    for (double v : r.data()) sum += v * v;
  }
  return sum / static_cast<double>(samples.size());
}

Gradients gradient_from_targets(const Matrix& v_up, const Matrix& v_down, ActivationKind act,
                                std::span<const Matrix> samples,
                                std::span<const Matrix> targets) {
  const int n = v_up.rows();
  const int d = v_up.cols();
  Gradients g{Matrix(n, d), Matrix(d, n)};
  const double inv_count = 1.0 / static_cast<double>(samples.size());
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const Matrix& x = samples[j];
    const Matrix u = v_up * x;
    const Matrix phi = apply_activation(act, u);
    const Matrix r = v_down * phi - targets[j];  // d x 1
    // dObj/dV_down = (2/n) sum r phi^T
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < n; ++b) g.v_down(a, b) += 2.0 * inv_count * r(a, 0) * phi(b, 0);
    // dObj/dV_up = (2/n) sum ((V_down^T r) .* sigma'(u)) x^T
    const Matrix vtr = v_down.transposed() * r;  // n x 1
    for (int b = 0; b < n; ++b) {
      const double w = 2.0 * inv_count * vtr(b, 0) * activation_derivative(act, u(b, 0));
      if (w == 0.0) continue;
      for (int a = 0; a < d; ++a) g.v_up(b, a) += w * x(a, 0);
    }
  }
  return g;
}

Matrix solve_from_targets(const Matrix& v_up, ActivationKind act, std::span<const Matrix> samples,
                          std::span<const Matrix> targets) {
  const int n = v_up.rows();
  const int d = v_up.cols();
  const int count = static_cast<int>(samples.size());
  Matrix features(count, n);  // rows sigma(V_up x_j)^T
  Matrix rhs(count, d);       // rows y_j^T
  for (int j = 0; j < count; ++j) {
    const Matrix phi = apply_activation(act, v_up * samples[j]);
    for (int b = 0; b < n; ++b) features(j, b) = phi(b, 0);
    for (int a = 0; a < d; ++a) rhs(j, a) = targets[j](a, 0);
  }
  // Minimum-norm X with features * X ~= rhs; V_down = X^T.
  return solve_least_squares_min_norm(features, rhs).transposed();
}

void flip_rows(Matrix& m, std::span<const int> subset) {
  int prev = -1;
  for (int i : subset) {
    if (i < 0 || i >= m.rows()) throw IndexError("sign-flip index out of range");
    if (i <= prev) throw IndexError("sign-flip indices must be strictly increasing");
    prev = i;
    for (int j = 0; j < m.cols(); ++j) m(i, j) = -m(i, j);
  }
}

Matrix initial_v_up(const Block& skip_block, const Init& init) {
  const UngatedWeights& w = skip_block.as_ungated();
  if (std::holds_alternative<InitFromWeights>(init)) return w.w_up;
  if (const auto* flips = std::get_if<InitSignFlips>(&init)) {
    Matrix v_up = w.w_up;
    if (!flips->subset.empty()) {
      flip_rows(v_up, flips->subset);
      return v_up;
    }
    // Empty subset: bounded search for the best certificate.
    try {
      const Matrix neg_id = -1.0 * Matrix::identity(skip_block.d());
      absorption::SearchLimits limits;
      if (const auto cert = absorption::find_absorbing_subset(w.w_up, w.w_down, neg_id, limits)) {
        flip_rows(v_up, cert->subset);
      } else {
        const auto scan = absorption::scan_best_subset(w.w_up, w.w_down, neg_id, limits);
        flip_rows(v_up, scan.best_subset);
      }
    } catch (const WidthLimitError&) {
      // Too wide to search; keep W_up as the starting point.
    }
    return v_up;
  }
  const auto& random = std::get<InitRandom>(init);
  Rng rng(random.seed);
  Matrix v_up(skip_block.n(), skip_block.d());
  for (int i = 0; i < v_up.rows(); ++i)
    for (int j = 0; j < v_up.cols(); ++j) v_up(i, j) = rng.normal();
  return v_up;
}

/// Max relative gap between analytic and central-difference gradients.
double gradient_gap(const Matrix& v_up, const Matrix& v_down, ActivationKind act,
                    std::span<const Matrix> samples, std::span<const Matrix> targets) {
  const Gradients analytic = gradient_from_targets(v_up, v_down, act, samples, targets);
  double max_diff = 0.0, max_mag = 0.0;
  auto probe = [&](Matrix theta, const Matrix& grad, bool is_up) {
    for (int i = 0; i < theta.rows(); ++i) {
      for (int j = 0; j < theta.cols(); ++j) {
        const double saved = theta(i, j);
        const double h = 1e-6 * (1.0 + std::abs(saved));
        theta(i, j) = saved + h;
        const double fp = is_up ? objective_from_targets(theta, v_down, act, samples, targets)
                                : objective_from_targets(v_up, theta, act, samples, targets);
        theta(i, j) = saved - h;
        const double fm = is_up ? objective_from_targets(theta, v_down, act, samples, targets)
                                : objective_from_targets(v_up, theta, act, samples, targets);
        theta(i, j) = saved;
        const double fd = (fp - fm) / (2.0 * h);
        max_diff = std::max(max_diff, std::abs(fd - grad(i, j)));
        max_mag = std::max({max_mag, std::abs(fd), std::abs(grad(i, j))});
      }
    }
  };
  probe(v_up, analytic.v_up, true);
  probe(v_down, analytic.v_down, false);
  return max_diff / std::max(1e-8, max_mag);
}

}  // namespace

double discrepancy_objective(const Matrix& v_up, const Matrix& v_down, const Block& skip_block,
                             std::span<const Matrix> samples) {
  const UngatedWeights& w = require_fit_target(skip_block);
  require_candidate_shapes(v_up, v_down, skip_block);
  require_samples(samples, skip_block.d());
  const std::vector<Matrix> targets = fit_targets(skip_block, samples);
  return objective_from_targets(v_up, v_down, w.act, samples, targets);
}

Gradients discrepancy_gradient(const Matrix& v_up, const Matrix& v_down, const Block& skip_block,
                               std::span<const Matrix> samples) {
  const UngatedWeights& w = require_fit_target(skip_block);
  if (w.act != ActivationKind::relu && w.act != ActivationKind::gelu)
    throw UnsupportedActivationError("discrepancy_gradient covers relu and gelu");
  require_candidate_shapes(v_up, v_down, skip_block);
  require_samples(samples, skip_block.d());
  const std::vector<Matrix> targets = fit_targets(skip_block, samples);
  return gradient_from_targets(v_up, v_down, w.act, samples, targets);
}

Matrix solve_down_least_squares(const Matrix& v_up, const Block& skip_block,
                                std::span<const Matrix> samples) {
  const UngatedWeights& w = require_fit_target(skip_block);
  if (v_up.rows() != skip_block.n() || v_up.cols() != skip_block.d())
    throw DimensionError("v_up must match the target block's N x d");
  require_samples(samples, skip_block.d());
  const std::vector<Matrix> targets = fit_targets(skip_block, samples);
  return solve_from_targets(v_up, w.act, samples, targets);
}

std::vector<Matrix> draw_standard_normal_samples(int d, int count, std::uint64_t seed) {
  if (d < 1 || count < 1) throw Error("sample draw needs d >= 1 and count >= 1");
  Rng rng(seed);
  std::vector<Matrix> samples;
  samples.reserve(count);
  for (int k = 0; k < count; ++k) {
    Matrix x(d, 1);
    for (int i = 0; i < d; ++i) x(i, 0) = rng.normal();
    samples.push_back(std::move(x));
  }
  return samples;
}

ApproxResult fit_approximate(const Block& skip_block, const ApproxConfig& cfg) {
  const UngatedWeights& w = require_fit_target(skip_block);
  if (w.act != ActivationKind::relu && w.act != ActivationKind::gelu)
    throw UnsupportedActivationError("fit_approximate covers relu and gelu");
  if (cfg.sample_count < 1 || cfg.max_iters < 0 || !(cfg.step_size > 0.0) ||
      cfg.alternate_every < 1)
    throw Error("fit_approximate: config fields must be positive");

  const std::vector<Matrix> samples =
      draw_standard_normal_samples(skip_block.d(), cfg.sample_count, cfg.seed);
  const std::vector<Matrix> targets = fit_targets(skip_block, samples);

  ApproxResult result;
  result.v_up = initial_v_up(skip_block, cfg.init);
  result.v_down = solve_from_targets(result.v_up, w.act, samples, targets);
  result.objective_trace.push_back(
      objective_from_targets(result.v_up, result.v_down, w.act, samples, targets));

  const std::set<int> probes = {0, cfg.max_iters / 2, cfg.max_iters};
  if (probes.count(0))
    result.grad_check = gradient_gap(result.v_up, result.v_down, w.act, samples, targets);

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    if (iter % cfg.alternate_every == 0) {
      // Solve-only iteration: exact least squares cannot increase the
      // objective on the fixed sample set.
      result.v_down = solve_from_targets(result.v_up, w.act, samples, targets);
    } else {
      const Gradients g =
          gradient_from_targets(result.v_up, result.v_down, w.act, samples, targets);
      for (int i = 0; i < result.v_up.rows(); ++i)
        for (int j = 0; j < result.v_up.cols(); ++j)
          result.v_up(i, j) -= cfg.step_size * g.v_up(i, j);
    }
    result.objective_trace.push_back(
        objective_from_targets(result.v_up, result.v_down, w.act, samples, targets));
    if (probes.count(iter))
      result.grad_check = std::max(
          result.grad_check, gradient_gap(result.v_up, result.v_down, w.act, samples, targets));
  }
  result.final_objective = result.objective_trace.back();
  return result;
}

}  // namespace skipfold::approx
