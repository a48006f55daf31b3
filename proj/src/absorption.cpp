#include "skipfold/absorption.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

#include "skipfold/errors.hpp"
#include "skipfold/rng.hpp"

namespace skipfold::absorption {

namespace {

void require_weight_shapes(const Matrix& w_up, const Matrix& w_down) {
  const int n = w_up.rows();
  const int d = w_up.cols();
  if (d < 1 || n < d) throw DimensionError("weights must satisfy N >= d >= 1");
  if (w_down.rows() != d || w_down.cols() != n)
    throw DimensionError("w_down shape must be d x N matching w_up");
}

void require_target_shape(const Matrix& target, int d) {
  if (target.rows() != d || target.cols() != d)
    throw DimensionError("target matrix must be d x d");
}

bool is_neg_identity(const Matrix& t) {
  if (t.rows() != t.cols()) return false;
  for (int i = 0; i < t.rows(); ++i)
    for (int j = 0; j < t.cols(); ++j)
      if (t(i, j) != (i == j ? -1.0 : 0.0)) return false;
  return true;
}

/// Visits k-combinations of {0..n-1} in lexicographic order; stops when the
/// callback returns true.
template <typename Fn>
void for_each_combination(int n, int k, Fn&& fn) {
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    if (fn(std::span<const int>(idx))) return;
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

struct SizeRange {
  int lo = 0;
  int hi = -1;  // empty when lo > hi
};

SizeRange resolve_size_range(int d, int n, const SearchLimits& limits) {
  SizeRange r;
  r.lo = std::max(d, limits.min_size < 0 ? d : limits.min_size);
  r.hi = limits.max_size < 0 ? n : std::min(limits.max_size, n);
  return r;
}

bool rows_pairwise_noncollinear(const Matrix& w_up, double cos_bound) {
  const int n = w_up.rows();
  const int d = w_up.cols();
  std::vector<double> norms(n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += w_up(i, j) * w_up(i, j);
    norms[i] = std::sqrt(s);
    if (norms[i] <= 1e-12) return false;
  }
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      double dp = 0.0;
      for (int j = 0; j < d; ++j) dp += w_up(a, j) * w_up(b, j);
      if (std::abs(dp) / (norms[a] * norms[b]) > cos_bound) return false;
    }
  }
  return true;
}

bool columns_nonzero(const Matrix& w_down) {
  for (int j = 0; j < w_down.cols(); ++j) {
    double s = 0.0;
    for (int i = 0; i < w_down.rows(); ++i) s += w_down(i, j) * w_down(i, j);
    if (std::sqrt(s) <= 1e-12) return false;
  }
  return true;
}

}  // namespace

SubsetCertificate check_subset_product(const Matrix& w_up, const Matrix& w_down,
                                       std::span<const int> subset, const Matrix& target) {
  require_weight_shapes(w_up, w_down);
  require_target_shape(target, w_up.cols());
  // rows_subset/cols_subset validate the index set itself.
  const Matrix b = w_up.rows_subset(subset);
  const Matrix a = w_down.cols_subset(subset);
  const Matrix residual_matrix = a * b - target;

  SubsetCertificate cert;
  cert.subset.assign(subset.begin(), subset.end());
  cert.residual = residual_matrix.frobenius_norm();
  cert.scale = 1.0 + a.frobenius_norm() * b.frobenius_norm();
  cert.neg_identity_target = is_neg_identity(target);
  cert.target = target;
  return cert;
}

std::optional<SubsetCertificate> find_absorbing_subset(const Matrix& w_up, const Matrix& w_down,
                                                       const Matrix& target,
                                                       const SearchLimits& limits) {
  require_weight_shapes(w_up, w_down);
  const int n = w_up.rows();
  const int d = w_up.cols();
  require_target_shape(target, d);
  if (n > limits.max_hidden_width) {
    std::ostringstream msg;
    msg << "hidden width " << n << " exceeds the exhaustive search limit "
        << limits.max_hidden_width;
    throw WidthLimitError(msg.str());
  }

  const SizeRange range = resolve_size_range(d, n, limits);
  std::optional<SubsetCertificate> found;
  for (int m = range.lo; m <= range.hi && !found; ++m) {
    for_each_combination(n, m, [&](std::span<const int> s) {
      // The product has rank at most rank(W_up[S,:]); a rank-deficient row
      // subset can never reach the rank-d target.
      if (numerical_rank(w_up.rows_subset(s)) < d) return false;
      SubsetCertificate cert = check_subset_product(w_up, w_down, s, target);
      if (cert.passes(limits.tolerance)) {
        found = std::move(cert);
        return true;
      }
      return false;
    });
  }
  return found;
}

Block construct_absorbed(const Block& block, std::span<const int> subset, double tolerance) {
  if (!block.is_ungated() || !block.has_identity_skip())
    throw Error("construct_absorbed requires an ungated block with identity skip");
  const UngatedWeights& w = block.as_ungated();
  if (w.act != ActivationKind::relu && w.act != ActivationKind::gelu)
    throw UnsupportedActivationError(
        std::string("absorption construction covers relu and gelu, not '") +
        std::string(activation_name(w.act)) + "'");

  const Matrix neg_id = -1.0 * Matrix::identity(block.d());
  const SubsetCertificate cert = check_subset_product(w.w_up, w.w_down, subset, neg_id);
  if (!cert.passes(tolerance)) {
    std::ostringstream msg;
    msg << "subset does not satisfy W_down[:,S] W_up[S,:] = -I (residual " << cert.residual
        << ", allowed " << tolerance * cert.scale << ")";
    throw ConditionViolatedError(msg.str(), cert.residual);
  }

  // V_up = (I - 2 Pi_S) W_up: rows indexed by S flip sign.
  Matrix v_up = w.w_up;
  for (int i : subset)
    for (int j = 0; j < v_up.cols(); ++j) v_up(i, j) = -v_up(i, j);
  return Block::ungated(std::move(v_up), w.w_down, w.act, SkipNone{});
}

PlantedInstance plant_instance(int d, int n, int m, const std::optional<Matrix>& target,
                               std::uint64_t seed, ActivationKind act) {
  if (d < 1 || m < d || n < m) throw DimensionError("plant_instance needs 1 <= d <= m <= n");
  const Matrix t = target.value_or(-1.0 * Matrix::identity(d));
  require_target_shape(t, d);

  constexpr int kMaxAttempts = 100;
  constexpr double kCollinearCosBound = 1.0 - 1e-9;
  Rng rng(seed);
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    // Planted rows, redrawn within the attempt budget until full column rank.
    Matrix planted_rows(m, d);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < d; ++j) planted_rows(i, j) = rng.normal();
    if (smallest_singular_value(planted_rows) <= 1e-6) continue;

    const Matrix left_inverse = pseudo_inverse(planted_rows);  // d x m
    const Matrix planted_cols = t * left_inverse;              // d x m

    Matrix w_up(n, d);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < d; ++j) w_up(i, j) = planted_rows(i, j);
    for (int i = m; i < n; ++i)
      for (int j = 0; j < d; ++j) w_up(i, j) = rng.normal();

    Matrix w_down(d, n);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < m; ++j) w_down(i, j) = planted_cols(i, j);
    for (int j = m; j < n; ++j)
      for (int i = 0; i < d; ++i) w_down(i, j) = rng.normal();

    if (!rows_pairwise_noncollinear(w_up, kCollinearCosBound)) continue;
    if (!columns_nonzero(w_down)) continue;

    std::vector<int> subset(m);
    std::iota(subset.begin(), subset.end(), 0);
    SubsetCertificate cert = check_subset_product(w_up, w_down, subset, t);
    return PlantedInstance{Block::ungated(std::move(w_up), std::move(w_down), act, SkipIdentity{}),
                           std::move(cert)};
  }
  throw InternalError("plant_instance: exceeded 100 resampling attempts");
}

Block reduce_invertible_skip(const Block& block, double max_condition) {
  if (!block.has_general_skip())
    throw Error("reduce_invertible_skip requires a block with a general skip matrix");
  const Matrix& m = std::get<SkipGeneral>(block.skip()).m;
  const Matrix m_inv = inverse_checked(m, max_condition);
  if (block.is_ungated()) {
    const UngatedWeights& w = block.as_ungated();
    return Block::ungated(w.w_up, m_inv * w.w_down, w.act, SkipIdentity{});
  }
  const GatedWeights& g = block.as_gated();
  return Block::gated(g.w_gate, g.w_val, m_inv * g.w_down, g.gate, SkipIdentity{});
}

std::optional<SubsetCertificate> perturbation_condition(const Matrix& w_up, const Matrix& w_down,
                                                        const Matrix& z, const Matrix& z_prime,
                                                        const SearchLimits& limits) {
  require_weight_shapes(w_up, w_down);
  const int d = w_up.cols();
  require_target_shape(z, d);
  require_target_shape(z_prime, d);
  const Matrix diff = z - z_prime;
  const double cond = condition_number(diff);
  if (!(cond < 1e12)) {
    std::ostringstream msg;
    msg << "Z - Z' is singular or ill-conditioned (condition estimate " << cond << ")";
    throw SingularMatrixError(msg.str());
  }
  return find_absorbing_subset(w_up, w_down, z_prime - z, limits);
}

SubsetScan scan_best_subset(const Matrix& w_up, const Matrix& w_down, const Matrix& target,
                            const SearchLimits& limits) {
  require_weight_shapes(w_up, w_down);
  const int n = w_up.rows();
  const int d = w_up.cols();
  require_target_shape(target, d);
  if (n > limits.max_hidden_width)
    throw WidthLimitError("hidden width exceeds the exhaustive search limit");

  const SizeRange range = resolve_size_range(d, n, limits);
  SubsetScan scan;
  for (int m = range.lo; m <= range.hi; ++m) {
    for_each_combination(n, m, [&](std::span<const int> s) {
      const SubsetCertificate cert = check_subset_product(w_up, w_down, s, target);
      ++scan.subsets_scanned;
      const double relative = cert.residual / cert.scale;
      if (relative < scan.best_relative_residual) {
        scan.best_relative_residual = relative;
        scan.best_subset = cert.subset;
      }
      return false;
    });
  }
  return scan;
}

}  // namespace skipfold::absorption
