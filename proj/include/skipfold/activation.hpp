#pragma once

#include <optional>
#include <string_view>

#include "skipfold/matrix.hpp"

namespace skipfold {

/// Scalar activation functions. gelu is the exact z * Phi(z) with the
/// error-function normal CDF, never the tanh approximation: the parity
/// identity Phi(-z) = 1 - Phi(z) has to hold to rounding.
enum class ActivationKind { relu, gelu, relu_squared, silu, identity };

double activation_value(ActivationKind kind, double z);

/// Even component E with sigma(z) = E(z) + z/2. Defined for relu (|z|/2),
/// gelu (z * (Phi(z) - 1/2)), and silu (z * tanh(z/2) / 2); the other kinds
/// have no such split and raise UnsupportedActivationError.
double activation_even_part(ActivationKind kind, double z);

/// Derivative; relu-family kinds use the convention sigma'(0) = 0.
double activation_derivative(ActivationKind kind, double z);

/// Positive-homogeneity degree: relu has 1, relu_squared has 2, the rest none.
std::optional<int> homogeneity_degree(ActivationKind kind);

/// Whether the activation may gate a gated block (g(0) = 0 required).
bool is_gate_eligible(ActivationKind kind);

/// Whether the z/2 odd-part decomposition exists for this kind.
bool has_parity_split(ActivationKind kind);

std::string_view activation_name(ActivationKind kind);
ActivationKind parse_activation(std::string_view name);

/// Elementwise application.
Matrix apply_activation(ActivationKind kind, const Matrix& m);

/// Standard normal CDF and density (exposed for gradient code).
double normal_cdf(double z);
double normal_pdf(double z);

}  // namespace skipfold
