#include "skipfold/activation.hpp"

#include <cmath>
#include <string>

#include "skipfold/errors.hpp"

namespace skipfold {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double activation_value(ActivationKind kind, double z) {
  switch (kind) {
    case ActivationKind::relu:
      return z > 0.0 ? z : 0.0;
    case ActivationKind::gelu:
      return z * normal_cdf(z);
    case ActivationKind::relu_squared: {
      const double r = z > 0.0 ? z : 0.0;
      return r * r;
    }
    case ActivationKind::silu:
      return z / (1.0 + std::exp(-z));
    case ActivationKind::identity:
      return z;
  }
  throw Error("unreachable activation kind");
}

double activation_even_part(ActivationKind kind, double z) {
  switch (kind) {
    case ActivationKind::relu:
      return 0.5 * std::abs(z);
    case ActivationKind::gelu:
      // z * (Phi(z) - 1/2) written through erf so evenness holds to rounding.
      return 0.5 * z * std::erf(z * kInvSqrt2);
    case ActivationKind::silu:
      // sigmoid(z) - 1/2 = tanh(z/2) / 2
      return 0.5 * z * std::tanh(0.5 * z);
    default:
      throw UnsupportedActivationError(std::string("no even/odd parity split for activation '") +
                                       std::string(activation_name(kind)) + "'");
  }
}

double activation_derivative(ActivationKind kind, double z) {
  switch (kind) {
    case ActivationKind::relu:
      return z > 0.0 ? 1.0 : 0.0;
    case ActivationKind::gelu:
      return normal_cdf(z) + z * normal_pdf(z);
    case ActivationKind::relu_squared:
      return z > 0.0 ? 2.0 * z : 0.0;
    case ActivationKind::silu: {
      const double s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 + z * (1.0 - s));
    }
    case ActivationKind::identity:
      return 1.0;
  }
  throw Error("unreachable activation kind");
}

std::optional<int> homogeneity_degree(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::relu:
      return 1;
    case ActivationKind::relu_squared:
      return 2;
    default:
      return std::nullopt;
  }
}

bool is_gate_eligible(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::silu:
    case ActivationKind::gelu:
    case ActivationKind::relu:
    case ActivationKind::identity:
      return true;
    default:
      return false;
  }
}

bool has_parity_split(ActivationKind kind) {
  return kind == ActivationKind::relu || kind == ActivationKind::gelu ||
         kind == ActivationKind::silu;
}

std::string_view activation_name(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::relu:
      return "relu";
    case ActivationKind::gelu:
      return "gelu";
    case ActivationKind::relu_squared:
      return "relu_squared";
    case ActivationKind::silu:
      return "silu";
    case ActivationKind::identity:
      return "identity";
  }
  return "unknown";
}

ActivationKind parse_activation(std::string_view name) {
  if (name == "relu") return ActivationKind::relu;
  if (name == "gelu") return ActivationKind::gelu;
  if (name == "relu_squared") return ActivationKind::relu_squared;
  if (name == "silu") return ActivationKind::silu;
  if (name == "identity") return ActivationKind::identity;
  throw UnsupportedActivationError("unknown activation '" + std::string(name) + "'");
}

Matrix apply_activation(ActivationKind kind, const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out(i, j) = activation_value(kind, m(i, j));
  return out;
}

}  // namespace skipfold
