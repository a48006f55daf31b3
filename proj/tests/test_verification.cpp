#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "skipfold/absorption.hpp"
#include "skipfold/errors.hpp"
#include "skipfold/rng.hpp"
#include "skipfold/verification.hpp"

using namespace skipfold;
using namespace skipfold::verification;

namespace {

Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

double detail_value(const VerificationReport& report, const std::string& key) {
  for (const auto& [k, v] : report.detail)
    if (k == key) return v;
  FAIL("missing detail key ", key);
  return 0.0;
}

SamplerConfig normal_cfg(int count, std::uint64_t seed) {
  SamplerConfig cfg;
  cfg.count = count;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("parity_check passes for relu, gelu, silu") {
  SamplerConfig cfg;
  cfg.count = 20000;
  cfg.distribution = SamplerConfig::Distribution::uniform_box;
  cfg.radius = 50.0;
  cfg.seed = 3;
  for (ActivationKind kind : {ActivationKind::relu, ActivationKind::gelu, ActivationKind::silu}) {
    const auto report = parity_check(kind, cfg);
    CHECK(report.passed);
    CHECK(report.max_residual <= 1e-12);
    CHECK(detail_value(report, "even_part_max") <= 1e-13);
  }
  CHECK_THROWS_AS(parity_check(ActivationKind::relu_squared, cfg), UnsupportedActivationError);

  // GELU(1) - GELU(-1) = 1 exactly (error-function parity).
  const double diff = activation_value(ActivationKind::gelu, 1.0) -
                      activation_value(ActivationKind::gelu, -1.0);
  CHECK(diff == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("functional_equality basics") {
  const auto planted = absorption::plant_instance(2, 4, 3, std::nullopt, 8);
  const Block absorbed =
      absorption::construct_absorbed(planted.block, planted.certificate.subset);

  // f = g: identically zero.
  const auto self = functional_equality(planted.block, planted.block, normal_cfg(200, 1));
  CHECK(self.max_residual == 0.0);
  CHECK(self.passed);
  CHECK(self.samples_used == 200);
  CHECK(self.witness.has_value());

  // Planted vs constructed: equal to rounding.
  const auto pair = functional_equality(planted.block, absorbed, normal_cfg(5000, 2));
  CHECK(pair.passed);

  // Dropping the skip changes the function by exactly x.
  const Block no_skip = planted.block.with_skip(SkipNone{});
  const auto broken = functional_equality(planted.block, no_skip, normal_cfg(500, 3));
  CHECK(!broken.passed);
  CHECK(broken.max_residual > 0.1);

  const Block other_dim = Block::ungated(random_matrix(6, 3, 4), random_matrix(3, 6, 5),
                                         ActivationKind::relu, SkipIdentity{});
  CHECK_THROWS_AS(functional_equality(planted.block, other_dim, normal_cfg(10, 1)),
                  DimensionError);
}

TEST_CASE("near-kink sampling covers the piecewise-linear boundaries") {
  const auto planted = absorption::plant_instance(2, 4, 3, std::nullopt, 12);
  const Block absorbed =
      absorption::construct_absorbed(planted.block, planted.certificate.subset);

  const auto normal = functional_equality(planted.block, absorbed, normal_cfg(2000, 7));

  SamplerConfig kinks;
  kinks.distribution = SamplerConfig::Distribution::near_kinks;
  kinks.per_plane = 200;
  kinks.seed = 7;
  const auto near = functional_equality(planted.block, absorbed, kinks);
  CHECK(near.samples_used == 200 * 8);  // w rows + v rows
  CHECK(near.passed);
  // Kink coverage: boundary points expose no violation beyond sampling noise.
  CHECK(near.max_residual <= std::max(normal.max_residual, 1e-12));

  // Without relu blocks there are no kink hyperplanes to sample.
  const Block gelu_block = Block::ungated(random_matrix(4, 2, 1), random_matrix(2, 4, 2),
                                          ActivationKind::gelu, SkipIdentity{});
  const auto none = functional_equality(gelu_block, gelu_block, kinks);
  CHECK(none.samples_used == 0);
  CHECK(none.passed);
}

TEST_CASE("algebraic_absorption_check accepts constructed pairs") {
  for (ActivationKind act : {ActivationKind::relu, ActivationKind::gelu}) {
    const auto planted = absorption::plant_instance(3, 6, 4, std::nullopt, 21, act);
    const Block absorbed =
        absorption::construct_absorbed(planted.block, planted.certificate.subset);
    const auto report = algebraic_absorption_check(planted.block, absorbed);
    CHECK(report.passed);
    CHECK(detail_value(report, "matching_found") == 1.0);
    CHECK(detail_value(report, "r1_residual") <= 1e-12);
    CHECK(detail_value(report, "negative_scalars") == 4.0);  // the planted flips
  }
}

TEST_CASE("algebraic_absorption_check rejects V = W (skip ignored)") {
  const auto planted = absorption::plant_instance(2, 4, 2, std::nullopt, 23);
  const auto& w = planted.block.as_ungated();
  const Block v_same = Block::ungated(w.w_up, w.w_down, w.act, SkipNone{});
  const auto report = algebraic_absorption_check(planted.block, v_same);
  CHECK(!report.passed);
  // V_down V_up - W_down W_up = 0, so the R1 gap is exactly ||2 I_d||_F = 2 sqrt(d).
  const double r1_scale = 1.0 + w.w_down.frobenius_norm() * w.w_up.frobenius_norm();
  CHECK(detail_value(report, "r1_residual") * r1_scale ==
        doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("algebraic_absorption_check is permutation and rescaling tolerant") {
  const auto planted = absorption::plant_instance(2, 4, 2, std::nullopt, 29);
  const Block absorbed =
      absorption::construct_absorbed(planted.block, planted.certificate.subset);
  const auto& v = absorbed.as_ungated();

  // Permute hidden units of V: rows of V_up and columns of V_down together.
  const int perm[] = {2, 0, 3, 1};
  Matrix v_up(4, 2), v_down(2, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) {
      v_up(i, j) = v.w_up(perm[i], j);
      v_down(j, i) = v.w_down(j, perm[i]);
    }
  const Block permuted = Block::ungated(v_up, v_down, v.act, SkipNone{});
  CHECK(algebraic_absorption_check(planted.block, permuted).passed);

  // Positive rescaling of a relu hidden unit also preserves the function.
  Matrix v_up_scaled = v.w_up;
  Matrix v_down_scaled = v.w_down;
  for (int j = 0; j < 2; ++j) {
    v_up_scaled(1, j) *= 3.0;
    v_down_scaled(j, 1) /= 3.0;
  }
  const Block rescaled = Block::ungated(v_up_scaled, v_down_scaled, v.act, SkipNone{});
  CHECK(algebraic_absorption_check(planted.block, rescaled).passed);
}

TEST_CASE("algebraic_absorption_check reports unmatched rows as failure") {
  const auto planted = absorption::plant_instance(2, 4, 2, std::nullopt, 31);
  const Block v = Block::ungated(random_matrix(4, 2, 77), random_matrix(2, 4, 78),
                                 ActivationKind::relu, SkipNone{});
  const auto report = algebraic_absorption_check(planted.block, v);
  CHECK(!report.passed);
  CHECK(detail_value(report, "matching_found") == 0.0);

  CHECK_THROWS(algebraic_absorption_check(planted.block, planted.block));  // V must be skipless
}

TEST_CASE("equivalence of oracles on constructed pairs") {
  for (std::uint64_t seed : {101, 102, 103}) {
    const auto planted =
        absorption::plant_instance(2, 4, 3, std::nullopt, seed, ActivationKind::gelu);
    const Block absorbed =
        absorption::construct_absorbed(planted.block, planted.certificate.subset);
    const bool algebraic = algebraic_absorption_check(planted.block, absorbed).passed;
    const bool functional =
        functional_equality(planted.block, absorbed, normal_cfg(2000, seed), 1e-8).passed;
    CHECK(algebraic);
    CHECK((!algebraic || functional));  // algebraic pass implies functional pass

    // Mangling V_down breaks both oracles coherently.
    Matrix bad_down = absorbed.as_ungated().w_down;
    bad_down(0, 0) += 0.5;
    const Block mangled =
        Block::ungated(absorbed.as_ungated().w_up, bad_down, ActivationKind::gelu, SkipNone{});
    CHECK(!algebraic_absorption_check(planted.block, mangled).passed);
    CHECK(!functional_equality(planted.block, mangled, normal_cfg(2000, seed), 1e-8).passed);
  }
}

TEST_CASE("homogeneity_check degrees") {
  const Block sq = Block::ungated(random_matrix(6, 3, 41), random_matrix(3, 6, 42),
                                  ActivationKind::relu_squared, SkipNone{});
  CHECK(homogeneity_check(sq, 2, normal_cfg(300, 1)).passed);
  CHECK(!homogeneity_check(sq, 1, normal_cfg(300, 1)).passed);

  const Block lin = Block::ungated(random_matrix(6, 3, 43), random_matrix(3, 6, 44),
                                   ActivationKind::relu, SkipNone{});
  CHECK(homogeneity_check(lin, 1, normal_cfg(300, 2)).passed);
  CHECK(!homogeneity_check(lin, 2, normal_cfg(300, 2)).passed);

  const Block reglu = Block::gated(random_matrix(6, 3, 45), random_matrix(6, 3, 46),
                                   random_matrix(3, 6, 47), ActivationKind::relu, SkipNone{});
  CHECK(homogeneity_check(reglu, 2, normal_cfg(300, 3)).passed);

  const Block swiglu = Block::gated(random_matrix(6, 3, 48), random_matrix(6, 3, 49),
                                    random_matrix(3, 6, 50), ActivationKind::silu, SkipNone{});
  CHECK_THROWS_AS(homogeneity_check(swiglu, 2, normal_cfg(10, 4)), UnsupportedActivationError);
  const Block gelu_block = Block::ungated(random_matrix(6, 3, 51), random_matrix(3, 6, 52),
                                          ActivationKind::gelu, SkipNone{});
  CHECK_THROWS_AS(homogeneity_check(gelu_block, 1, normal_cfg(10, 5)),
                  UnsupportedActivationError);
  CHECK_THROWS(homogeneity_check(sq.with_skip(SkipIdentity{}), 2, normal_cfg(10, 6)));
}

TEST_CASE("origin_jacobian_report for residual and skipless stacks") {
  auto make_gated_stack = [](ActivationKind gate, int layers, bool residual, std::uint64_t seed) {
    Stack stack;
    stack.dim = 4;
    for (int l = 0; l < layers; ++l) {
      const Skip skip = residual ? Skip{SkipIdentity{}} : Skip{SkipNone{}};
      stack.blocks.push_back(Block::gated(random_matrix(8, 4, derive_seed(seed, 3 * l)),
                                          random_matrix(8, 4, derive_seed(seed, 3 * l + 1)),
                                          random_matrix(4, 8, derive_seed(seed, 3 * l + 2)), gate,
                                          skip));
    }
    return stack;
  };

  for (int layers : {1, 3}) {
    const auto residual_report =
        origin_jacobian_report(make_gated_stack(ActivationKind::silu, layers, true, 60 + layers));
    CHECK(residual_report.passed);
    CHECK(detail_value(residual_report, "residual_mode") == 1.0);

    const auto skipless_report =
        origin_jacobian_report(make_gated_stack(ActivationKind::silu, layers, false, 80 + layers));
    CHECK(skipless_report.passed);
    CHECK(detail_value(skipless_report, "residual_mode") == 0.0);
  }

  // Empty stack: the map is the identity, residual exactly zero.
  Stack empty;
  empty.dim = 3;
  const auto empty_report = origin_jacobian_report(empty);
  CHECK(empty_report.passed);
  CHECK(empty_report.max_residual == 0.0);

  // Mixed skips are rejected.
  Stack mixed = make_gated_stack(ActivationKind::silu, 1, true, 91);
  mixed.blocks.push_back(make_gated_stack(ActivationKind::silu, 1, false, 92).blocks[0]);
  CHECK_THROWS(origin_jacobian_report(mixed));

  // Blocks with a linear term at the origin are rejected.
  Stack linear_term;
  linear_term.dim = 2;
  linear_term.blocks.push_back(Block::ungated(random_matrix(4, 2, 93), random_matrix(2, 4, 94),
                                              ActivationKind::relu, SkipIdentity{}));
  CHECK_THROWS_AS(origin_jacobian_report(linear_term), UnsupportedActivationError);

  // relu_squared blocks qualify.
  Stack squared;
  squared.dim = 2;
  squared.blocks.push_back(Block::ungated(random_matrix(4, 2, 95), random_matrix(2, 4, 96),
                                          ActivationKind::relu_squared, SkipIdentity{}));
  CHECK(origin_jacobian_report(squared).passed);
}

TEST_CASE("scaling impossibility witness for relu_squared") {
  // f has the skip, g does not: ||f(lx) - g(lx)|| / l tends to ||x|| as l -> 0.
  const Block f = Block::ungated(random_matrix(4, 2, 71), random_matrix(2, 4, 72),
                                 ActivationKind::relu_squared, SkipIdentity{});
  const Block g = Block::ungated(random_matrix(4, 2, 73), random_matrix(2, 4, 74),
                                 ActivationKind::relu_squared, SkipNone{});
  Rng rng(75);
  const double lambda = 1e-3;
  for (int k = 0; k < 20; ++k) {
    Matrix x(2, 1);
    for (int i = 0; i < 2; ++i) x(i, 0) = rng.normal();
    const double ratio =
        (eval_block(f, lambda * x) - eval_block(g, lambda * x)).frobenius_norm() / lambda;
    CHECK(ratio >= 0.5 * x.frobenius_norm());
    CHECK(ratio <= 2.0 * x.frobenius_norm());
  }
}

TEST_CASE("generic_probe statistics") {
  const absorption::SearchLimits limits;
  const auto empty = generic_probe(2, 4, 0, limits, 1);
  CHECK(empty.trials == 0);
  CHECK(empty.best_residuals.empty());

  const auto generic = generic_probe(2, 4, 25, limits, 5);
  CHECK(generic.trials == 25);
  CHECK(generic.hits == 0);
  CHECK(generic.min_best > 1e-3);
  CHECK(generic.mean_best >= generic.min_best);
  CHECK(generic.max_best >= generic.mean_best);

  const auto control = generic_probe(2, 4, 10, limits, 5, true);
  CHECK(control.hits == 10);
  CHECK(control.min_best <= 1e-10);

  CHECK_THROWS_AS(generic_probe(2, 30, 1, limits, 1), WidthLimitError);
}

TEST_CASE("reports are deterministic given seeds") {
  const auto planted = absorption::plant_instance(2, 4, 3, std::nullopt, 61);
  const Block absorbed =
      absorption::construct_absorbed(planted.block, planted.certificate.subset);
  const auto a = functional_equality(planted.block, absorbed, normal_cfg(500, 9));
  const auto b = functional_equality(planted.block, absorbed, normal_cfg(500, 9));
  CHECK(a.max_residual == b.max_residual);
  REQUIRE(a.witness.has_value());
  REQUIRE(b.witness.has_value());
  CHECK(*a.witness == *b.witness);

  const auto pa = generic_probe(2, 4, 5, {}, 33);
  const auto pb = generic_probe(2, 4, 5, {}, 33);
  CHECK(pa.best_residuals == pb.best_residuals);
}

TEST_CASE("merge_max combines reports") {
  const auto planted = absorption::plant_instance(2, 4, 3, std::nullopt, 62);
  const Block no_skip = planted.block.with_skip(SkipNone{});
  const auto small = functional_equality(planted.block, planted.block, normal_cfg(100, 1));
  const auto large = functional_equality(planted.block, no_skip, normal_cfg(100, 1));
  const auto merged = merge_max(small, large);
  CHECK(merged.max_residual == large.max_residual);
  CHECK(merged.samples_used == 200);
  CHECK(!merged.passed);
}
