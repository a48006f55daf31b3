#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "skipfold/absorption.hpp"
#include "skipfold/block.hpp"

namespace skipfold::verification {

/// Outcome of a numerical check. passed is always max_residual <= tolerance.
struct VerificationReport {
  double max_residual = 0.0;
  std::optional<Matrix> witness;  // input achieving the max, when meaningful
  int samples_used = 0;
  double tolerance = 0.0;
  bool passed = false;
  std::vector<std::pair<std::string, double>> detail;  // ordered diagnostics
};

struct SamplerConfig {
  enum class Distribution { standard_normal, uniform_box, near_kinks };
  int count = 10000;
  Distribution distribution = Distribution::standard_normal;
  double radius = 1.0;   // uniform_box half-width
  double offset = 1e-6;  // near_kinks: max distance from each kink hyperplane
  int per_plane = 1000;  // near_kinks draws per hyperplane, total capped at 1e5
  std::uint64_t seed = 0;
};

/// Samples ||f(x) - g(x)|| / (1 + ||x||) and reports the max with a witness.
/// With near_kinks sampling the points concentrate around the relu kink
/// hyperplanes {w_i^T x = 0} collected from both sides.
VerificationReport functional_equality(const Stack& lhs, const Stack& rhs,
                                       const SamplerConfig& cfg, double tolerance = 1e-8);
VerificationReport functional_equality(const Block& lhs, const Block& rhs,
                                       const SamplerConfig& cfg, double tolerance = 1e-8);

/// Checks sigma(z) - sigma(-z) = z and E(z) = E(-z) on sampled z, residuals
/// normalized by 1 + |z|. Supports relu, gelu, and silu.
VerificationReport parity_check(ActivationKind kind, const SamplerConfig& cfg,
                                double tolerance = 1e-12);

/// The necessity identities for an (identity-skip W, skipless V) ungated
/// pair: bijective row matching by collinearity, recovered diagonal scalars
/// (|c_i| = 1 with V_down = W_down for gelu; V_down = W_down |C|^-1 for
/// relu), and V_down V_up = W_down W_up + 2I. A failed matching is reported
/// as failure, not an error.
VerificationReport algebraic_absorption_check(const Block& skip_block, const Block& absorbed_block,
                                              double tolerance = 1e-9);

/// max over samples and lambda in {0.5, 2, 10} of
/// ||f(lambda x) - lambda^k f(x)|| / (lambda^k (1 + ||f(x)||)). The block
/// must carry a declared homogeneity degree (ungated relu/relu_squared, or a
/// relu-gated block); `degree` is the exponent under test.
VerificationReport homogeneity_check(const Block& block, int degree, const SamplerConfig& cfg,
                                     double tolerance = 1e-10);

/// Central-difference Jacobian of the stack at the origin, compared against
/// I (all identity skips) or 0 (no skips). Every block must be quadratic
/// near the origin: gated, or ungated relu_squared. Pass threshold
/// 10 * h * scale^2 with scale the largest weight Frobenius norm.
VerificationReport origin_jacobian_report(const Stack& stack, double h = 1e-5);

/// Combines two reports over the same property: max of residuals, sum of
/// sample counts, pass iff both pass (tolerances must agree).
VerificationReport merge_max(const VerificationReport& a, const VerificationReport& b);

/// Draws `trials` Gaussian weight pairs (or planted instances when
/// planted_control is set), runs the subset search with target -I on each,
/// and aggregates hit counts plus the per-trial best relative residual.
struct ProbeStats {
  int trials = 0;
  int hits = 0;
  std::vector<double> best_residuals;
  double min_best = 0.0;  // aggregates defined only when trials > 0
  double mean_best = 0.0;
  double max_best = 0.0;
};
ProbeStats generic_probe(int d, int n, int trials, const absorption::SearchLimits& limits,
                         std::uint64_t seed, bool planted_control = false);

}  // namespace skipfold::verification
