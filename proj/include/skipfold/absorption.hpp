#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "skipfold/block.hpp"

namespace skipfold::absorption {

/// Witness for the submatrix condition W_down[:,S] * W_up[S,:] = T: the index
/// set together with the measured Frobenius residual and the norm scale used
/// by the relative pass rule residual <= tol * scale.
struct SubsetCertificate {
  std::vector<int> subset;  // strictly increasing, 0-based
  double residual = 0.0;
  double scale = 1.0;  // 1 + ||W_down[:,S]||_F * ||W_up[S,:]||_F
  bool neg_identity_target = true;
  Matrix target;  // d x d, always materialized

  bool passes(double tolerance) const { return residual <= tolerance * scale; }
};

/// Bounds for the exhaustive subset search. Negative min_size/max_size mean
/// "use d" and "use N"; max_size is clamped to N.
struct SearchLimits {
  int max_hidden_width = 24;
  int min_size = -1;
  int max_size = -1;
  double tolerance = 1e-9;  // relative Frobenius tolerance
};

/// Measures the condition for one subset. Indices must be strictly
/// increasing and in range; the target must be d x d.
SubsetCertificate check_subset_product(const Matrix& w_up, const Matrix& w_down,
                                       std::span<const int> subset, const Matrix& target);

/// Exhaustive search, size-ascending then lexicographic, pruning subsets
/// whose W_up rows are rank deficient (the product cannot reach rank d).
/// Returns the first passing certificate. Refuses N > max_hidden_width.
std::optional<SubsetCertificate> find_absorbing_subset(const Matrix& w_up, const Matrix& w_down,
                                                       const Matrix& target,
                                                       const SearchLimits& limits = {});

/// Theorem construction: V_up = (I - 2 Pi_S) W_up (rows in S negated),
/// V_down = W_down, skip dropped. Requires an ungated relu/gelu block with
/// identity skip whose subset passes at `tolerance`.
Block construct_absorbed(const Block& block, std::span<const int> subset, double tolerance = 1e-9);

struct PlantedInstance {
  Block block;  // identity skip
  SubsetCertificate certificate;
};

/// Builds weights satisfying W_down[:,S] * W_up[S,:] = target exactly (up to
/// rounding) for S = {0..m-1}: the planted rows are drawn until full column
/// rank, the planted W_down columns come from the Moore-Penrose left inverse,
/// the rest is Gaussian fill. Redraws until the theorem hypotheses hold
/// (pairwise non-collinear non-zero W_up rows, non-zero W_down columns);
/// at most 100 attempts, then InternalError. target defaults to -I_d.
PlantedInstance plant_instance(int d, int n, int m, const std::optional<Matrix>& target,
                               std::uint64_t seed, ActivationKind act = ActivationKind::relu);

/// Rewrites M x + branch(x) as the identity-skip problem: skip becomes
/// Identity and w_down becomes M^-1 w_down. Solutions of the reduced problem
/// map back by left-multiplying the found V_down by M.
Block reduce_invertible_skip(const Block& block, double max_condition = 1e12);

/// Corollary test for phi_{W,Z} = phi_{W',Z'}: requires Z - Z' invertible and
/// delegates to find_absorbing_subset with target Z' - Z.
std::optional<SubsetCertificate> perturbation_condition(const Matrix& w_up, const Matrix& w_down,
                                                        const Matrix& z, const Matrix& z_prime,
                                                        const SearchLimits& limits = {});

/// Minimum relative residual over every subset in the search range, no
/// pruning, no early exit. Quantifies the distance from the condition
/// variety for weights where no subset passes.
struct SubsetScan {
  double best_relative_residual = std::numeric_limits<double>::infinity();
  std::vector<int> best_subset;
  long long subsets_scanned = 0;
};
SubsetScan scan_best_subset(const Matrix& w_up, const Matrix& w_down, const Matrix& target,
                            const SearchLimits& limits = {});

}  // namespace skipfold::absorption
