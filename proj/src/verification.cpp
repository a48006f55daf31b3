#include "skipfold/verification.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "skipfold/errors.hpp"
#include "skipfold/rng.hpp"

namespace skipfold::verification {

namespace {

using Dist = SamplerConfig::Distribution;

Matrix draw_point(Rng& rng, int d, const SamplerConfig& cfg) {
  Matrix x(d, 1);
  for (int i = 0; i < d; ++i)
    x(i, 0) = cfg.distribution == Dist::uniform_box ? rng.uniform_symmetric(cfg.radius)
                                                    : rng.normal();
  return x;
}

/// Kink hyperplane normals: rows of w_up for every ungated relu block.
std::vector<Matrix> collect_kink_normals(const Stack& stack) {
  std::vector<Matrix> normals;
  for (const Block& b : stack.blocks) {
    if (!b.is_ungated() || b.as_ungated().act != ActivationKind::relu) continue;
    const Matrix& w_up = b.as_ungated().w_up;
    for (int i = 0; i < w_up.rows(); ++i) {
      Matrix w(w_up.cols(), 1);
      for (int j = 0; j < w_up.cols(); ++j) w(j, 0) = w_up(i, j);
      if (w.frobenius_norm() > 1e-12) normals.push_back(std::move(w));
    }
  }
  return normals;
}

std::vector<Matrix> near_kink_samples(const Stack& lhs, const Stack& rhs,
                                      const SamplerConfig& cfg, Rng& rng) {
  std::vector<Matrix> normals = collect_kink_normals(lhs);
  for (Matrix& w : collect_kink_normals(rhs)) normals.push_back(std::move(w));
  std::vector<Matrix> samples;
  if (normals.empty()) return samples;
  const int planes = static_cast<int>(normals.size());
  const int per_plane = std::min(cfg.per_plane, std::max(1, 100000 / planes));
  samples.reserve(static_cast<std::size_t>(planes) * per_plane);
  const int d = lhs.dim;
  for (const Matrix& w : normals) {
    const double wnorm2 = dot(w, w);
    const double wnorm = std::sqrt(wnorm2);
    for (int k = 0; k < per_plane; ++k) {
      Matrix y(d, 1);
      for (int i = 0; i < d; ++i) y(i, 0) = rng.normal();
      const double along = dot(w, y) / wnorm2;
      const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
      const double dist = cfg.offset * rng.uniform();
      Matrix x(d, 1);
      for (int i = 0; i < d; ++i) x(i, 0) = y(i, 0) - along * w(i, 0) + side * dist * w(i, 0) / wnorm;
      samples.push_back(std::move(x));
    }
  }
  return samples;
}

void set_passed(VerificationReport& report) {
  report.passed = report.max_residual <= report.tolerance;
}

struct RowView {
  Matrix v;      // column vector copy of the row
  double norm = 0.0;
};

std::vector<RowView> matrix_rows(const Matrix& m) {
  std::vector<RowView> rows(m.rows());
  for (int i = 0; i < m.rows(); ++i) {
    Matrix r(m.cols(), 1);
    for (int j = 0; j < m.cols(); ++j) r(j, 0) = m(i, j);
    rows[i].norm = r.frobenius_norm();
    rows[i].v = std::move(r);
  }
  return rows;
}

}  // namespace

VerificationReport functional_equality(const Stack& lhs, const Stack& rhs,
                                       const SamplerConfig& cfg, double tolerance) {
  if (lhs.dim != rhs.dim) throw DimensionError("functional_equality: dimensions differ");
  Rng rng(cfg.seed);
  std::vector<Matrix> samples;
  if (cfg.distribution == Dist::near_kinks) {
    samples = near_kink_samples(lhs, rhs, cfg, rng);
  } else {
    samples.reserve(cfg.count);
    for (int k = 0; k < cfg.count; ++k) samples.push_back(draw_point(rng, lhs.dim, cfg));
  }

  VerificationReport report;
  report.tolerance = tolerance;
  report.samples_used = static_cast<int>(samples.size());
  for (const Matrix& x : samples) {
    const double r = (eval_stack(lhs, x) - eval_stack(rhs, x)).frobenius_norm() /
                     (1.0 + x.frobenius_norm());
    if (r >= report.max_residual) {
      if (r > report.max_residual || !report.witness) report.witness = x;
      report.max_residual = r;
    }
  }
  set_passed(report);
  return report;
}

VerificationReport functional_equality(const Block& lhs, const Block& rhs,
                                       const SamplerConfig& cfg, double tolerance) {
  return functional_equality(single_block_stack(lhs), single_block_stack(rhs), cfg, tolerance);
}

VerificationReport parity_check(ActivationKind kind, const SamplerConfig& cfg, double tolerance) {
  if (!has_parity_split(kind))
    throw UnsupportedActivationError(std::string("parity_check does not support '") +
                                     std::string(activation_name(kind)) + "'");
  if (cfg.distribution == Dist::near_kinks)
    throw Error("parity_check: near_kinks sampling does not apply to scalar checks");

  Rng rng(cfg.seed);
  VerificationReport report;
  report.tolerance = tolerance;
  report.samples_used = cfg.count;
  double odd_max = 0.0, even_max = 0.0;
  for (int k = 0; k < cfg.count; ++k) {
    const double z = cfg.distribution == Dist::uniform_box ? rng.uniform_symmetric(cfg.radius)
                                                           : rng.normal();
    const double denom = 1.0 + std::abs(z);
    const double odd =
        std::abs(activation_value(kind, z) - activation_value(kind, -z) - z) / denom;
    const double even =
        std::abs(activation_even_part(kind, z) - activation_even_part(kind, -z)) / denom;
    odd_max = std::max(odd_max, odd);
    even_max = std::max(even_max, even);
    const double r = std::max(odd, even);
    if (r > report.max_residual || !report.witness) {
      report.max_residual = std::max(report.max_residual, r);
      if (r >= report.max_residual) report.witness = Matrix(1, 1, {z});
    }
  }
  report.detail.emplace_back("odd_part_max", odd_max);
  report.detail.emplace_back("even_part_max", even_max);
  set_passed(report);
  return report;
}

VerificationReport algebraic_absorption_check(const Block& skip_block,
                                              const Block& absorbed_block, double tolerance) {
  if (!skip_block.is_ungated() || !absorbed_block.is_ungated())
    throw Error("algebraic_absorption_check requires ungated blocks");
  if (!skip_block.has_identity_skip())
    throw Error("algebraic_absorption_check: the W block must carry the identity skip");
  if (!absorbed_block.has_no_skip())
    throw Error("algebraic_absorption_check: the V block must carry no skip");
  const UngatedWeights& w = skip_block.as_ungated();
  const UngatedWeights& v = absorbed_block.as_ungated();
  if (skip_block.d() != absorbed_block.d() || skip_block.n() != absorbed_block.n())
    throw DimensionError("algebraic_absorption_check: block shapes differ");
  if (w.act != v.act) throw Error("algebraic_absorption_check: activations differ");
  if (w.act != ActivationKind::relu && w.act != ActivationKind::gelu)
    throw UnsupportedActivationError("algebraic_absorption_check covers relu and gelu");

  constexpr double kCosBound = 1.0 - 1e-9;
  const int n = skip_block.n();
  const int d = skip_block.d();

  VerificationReport report;
  report.tolerance = tolerance;

  // Greedy bijective matching of V_up rows to W_up rows by |cosine|, ties by
  // index order. Under the theorem hypotheses rows are pairwise
  // non-collinear, so a valid pairing is unambiguous.
  const std::vector<RowView> w_rows = matrix_rows(w.w_up);
  const std::vector<RowView> v_rows = matrix_rows(v.w_up);
  std::vector<int> match_of_w(n, -1);  // w row index -> v row index
  std::vector<bool> v_used(n, false);
  double min_matched_cos = 1.0;
  bool matching_found = true;
  for (int round = 0; round < n; ++round) {
    int best_i = -1, best_j = -1;
    double best_cos = -1.0;
    for (int i = 0; i < n; ++i) {
      if (match_of_w[i] >= 0) continue;
      for (int j = 0; j < n; ++j) {
        if (v_used[j]) continue;
        if (w_rows[i].norm <= 1e-12 || v_rows[j].norm <= 1e-12) continue;
        const double c = std::abs(dot(w_rows[i].v, v_rows[j].v)) / (w_rows[i].norm * v_rows[j].norm);
        if (c > best_cos) {
          best_cos = c;
          best_i = i;
          best_j = j;
        }
      }
    }
    if (best_i < 0 || best_cos < kCosBound) {
      matching_found = false;
      break;
    }
    match_of_w[best_i] = best_j;
    v_used[best_j] = true;
    min_matched_cos = std::min(min_matched_cos, best_cos);
  }

  report.detail.emplace_back("matching_found", matching_found ? 1.0 : 0.0);
  report.detail.emplace_back("alignment_gap", matching_found ? 1.0 - min_matched_cos : 1.0);

  if (!matching_found) {
    // Finite sentinel above any sensible tolerance.
    report.max_residual = 2.0;
    set_passed(report);
    return report;
  }

  // Recover c_i with v_row = c_i * w_row, then check the coefficient laws.
  double scale_residual = 0.0;
  int negative_scalars = 0;
  for (int i = 0; i < n; ++i) {
    const int j = match_of_w[i];
    const double c = dot(v_rows[j].v, w_rows[i].v) / (w_rows[i].norm * w_rows[i].norm);
    if (c < 0.0) ++negative_scalars;
    const double abs_c = std::abs(c);
    // Column of W_down for w-row i, column of V_down for v-row j.
    double col_diff = 0.0, col_norm = 0.0;
    for (int r = 0; r < d; ++r) {
      const double target = w.w_down(r, i);
      // relu: V_down = W_down |C|^-1; gelu: V_down = W_down with |c_i| = 1.
      const double got = w.act == ActivationKind::relu ? abs_c * v.w_down(r, j) : v.w_down(r, j);
      col_diff += (got - target) * (got - target);
      col_norm += target * target;
    }
    double r_i = std::sqrt(col_diff) / (1.0 + std::sqrt(col_norm));
    if (w.act == ActivationKind::gelu) r_i = std::max(r_i, std::abs(abs_c - 1.0));
    scale_residual = std::max(scale_residual, r_i);
  }
  report.detail.emplace_back("scale_residual", scale_residual);
  report.detail.emplace_back("negative_scalars", static_cast<double>(negative_scalars));

  // R1/G2: V_down V_up = W_down W_up + 2 I_d, relative Frobenius residual.
  const Matrix lhs = v.w_down * v.w_up;
  const Matrix rhs = w.w_down * w.w_up + 2.0 * Matrix::identity(d);
  const double r1_scale = 1.0 + w.w_down.frobenius_norm() * w.w_up.frobenius_norm();
  const double r1_residual = (lhs - rhs).frobenius_norm() / r1_scale;
  report.detail.emplace_back("r1_residual", r1_residual);

  report.max_residual = std::max(scale_residual, r1_residual);
  set_passed(report);
  return report;
}

VerificationReport homogeneity_check(const Block& block, int degree, const SamplerConfig& cfg,
                                     double tolerance) {
  if (!block.has_no_skip()) throw Error("homogeneity_check requires a block without skip");
  std::optional<int> declared;
  if (block.is_ungated()) {
    declared = homogeneity_degree(block.as_ungated().act);
  } else if (block.as_gated().gate == ActivationKind::relu) {
    declared = 2;  // relu(a^T x) * (b^T x) is homogeneous of degree 2
  }
  if (!declared)
    throw UnsupportedActivationError("homogeneity_check: activation has no declared degree");

  Rng rng(cfg.seed);
  VerificationReport report;
  report.tolerance = tolerance;
  report.samples_used = cfg.count;
  const double lambdas[] = {0.5, 2.0, 10.0};
  for (int k = 0; k < cfg.count; ++k) {
    const Matrix x = draw_point(rng, block.d(), cfg);
    const Matrix fx = eval_block(block, x);
    for (double lambda : lambdas) {
      const double lk = std::pow(lambda, degree);
      const double r = (eval_block(block, lambda * x) - lk * fx).frobenius_norm() /
                       (lk * (1.0 + fx.frobenius_norm()));
      if (r > report.max_residual || !report.witness) {
        report.max_residual = std::max(report.max_residual, r);
        if (r >= report.max_residual) report.witness = x;
      }
    }
  }
  report.detail.emplace_back("declared_degree", static_cast<double>(*declared));
  report.detail.emplace_back("tested_degree", static_cast<double>(degree));
  set_passed(report);
  return report;
}

VerificationReport origin_jacobian_report(const Stack& stack, double h) {
  if (!(h > 0.0)) throw Error("origin_jacobian_report: step h must be positive");
  if (stack.dim < 1) throw DimensionError("origin_jacobian_report: stack dimension must be set");
  int with_identity = 0, with_none = 0;
  double scale = 0.0;
  for (const Block& b : stack.blocks) {
    const bool quadratic_at_origin =
        b.is_gated() || (b.is_ungated() && b.as_ungated().act == ActivationKind::relu_squared);
    if (!quadratic_at_origin)
      throw UnsupportedActivationError(
          "origin_jacobian_report: every block must be gated or relu_squared (no linear term at "
          "the origin)");
    if (b.has_identity_skip())
      ++with_identity;
    else if (b.has_no_skip())
      ++with_none;
    else
      throw Error("origin_jacobian_report: general skips are not supported");
    if (b.is_ungated()) {
      scale = std::max({scale, b.as_ungated().w_up.frobenius_norm(),
                        b.as_ungated().w_down.frobenius_norm()});
    } else {
      scale = std::max({scale, b.as_gated().w_gate.frobenius_norm(),
                        b.as_gated().w_val.frobenius_norm(), b.as_gated().w_down.frobenius_norm()});
    }
  }
  if (with_identity > 0 && with_none > 0)
    throw Error("origin_jacobian_report: mixed-skip stacks are rejected");
  const bool residual_mode = with_none == 0;  // empty stack counts as identity

  const Matrix origin(stack.dim, 1);
  const Matrix jac =
      jacobian_fd([&](const Matrix& x) { return eval_stack(stack, x); }, origin, h);
  const Matrix target = residual_mode ? Matrix::identity(stack.dim) : Matrix(stack.dim, stack.dim);

  VerificationReport report;
  report.samples_used = 2 * stack.dim;
  report.tolerance = 10.0 * h * scale * scale;
  report.max_residual = (jac - target).frobenius_norm();
  report.witness = origin;
  report.detail.emplace_back("residual_mode", residual_mode ? 1.0 : 0.0);
  report.detail.emplace_back("weight_scale", scale);
  report.detail.emplace_back("depth", static_cast<double>(stack.blocks.size()));
  set_passed(report);
  return report;
}

VerificationReport merge_max(const VerificationReport& a, const VerificationReport& b) {
  if (a.tolerance != b.tolerance) throw Error("merge_max: tolerances differ");
  VerificationReport merged;
  merged.tolerance = a.tolerance;
  merged.samples_used = a.samples_used + b.samples_used;
  const bool a_wins = a.max_residual >= b.max_residual;
  merged.max_residual = a_wins ? a.max_residual : b.max_residual;
  merged.witness = a_wins ? a.witness : b.witness;
  merged.detail = a.detail;
  merged.detail.insert(merged.detail.end(), b.detail.begin(), b.detail.end());
  set_passed(merged);
  return merged;
}

ProbeStats generic_probe(int d, int n, int trials, const absorption::SearchLimits& limits,
                         std::uint64_t seed, bool planted_control) {
  if (trials < 0) throw Error("generic_probe: trials must be nonnegative");
  if (n > limits.max_hidden_width)
    throw WidthLimitError("hidden width exceeds the exhaustive search limit");

  const Matrix neg_id = -1.0 * Matrix::identity(d);
  ProbeStats stats;
  stats.trials = trials;
  for (int trial = 0; trial < trials; ++trial) {
    const std::uint64_t sub_seed = derive_seed(seed, static_cast<std::uint64_t>(trial));
    Matrix w_up(std::max(n, 1), std::max(d, 1)), w_down(std::max(d, 1), std::max(n, 1));
    if (planted_control) {
      const auto planted = absorption::plant_instance(d, n, d, std::nullopt, sub_seed);
      w_up = planted.block.as_ungated().w_up;
      w_down = planted.block.as_ungated().w_down;
    } else {
      Rng rng(sub_seed);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) w_up(i, j) = rng.normal();
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < n; ++j) w_down(i, j) = rng.normal();
    }
    if (absorption::find_absorbing_subset(w_up, w_down, neg_id, limits)) ++stats.hits;
    stats.best_residuals.push_back(
        absorption::scan_best_subset(w_up, w_down, neg_id, limits).best_relative_residual);
  }
  if (trials > 0) {
    stats.min_best = stats.best_residuals.front();
    stats.max_best = stats.best_residuals.front();
    double sum = 0.0;
    for (double r : stats.best_residuals) {
      stats.min_best = std::min(stats.min_best, r);
      stats.max_best = std::max(stats.max_best, r);
      sum += r;
    }
    stats.mean_best = sum / trials;
  }
  return stats;
}

}  // namespace skipfold::verification
