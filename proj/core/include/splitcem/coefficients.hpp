#pragma once

#include <string>
#include <string_view>

#include "splitcem/fields.hpp"

namespace splitcem {

enum class DiffusionKind { linear, one_plus_u_sq, two_plus_cos };

/// Scalar factor alpha(u) multiplying kappa in the diffusion operator.
struct DiffusionNonlinearity {
  DiffusionKind kind = DiffusionKind::linear;

  double value(double u) const noexcept;
  double derivative(double u) const noexcept;
  bool is_linear() const noexcept { return kind == DiffusionKind::linear; }
  std::string name() const;

  /// Accepts "linear", "one_plus_u_sq", "two_plus_cos".
  static DiffusionNonlinearity parse(std::string_view name);
};

enum class ReactionKind { none, linear, cubic, cosine };

/// Reaction term g(u, x) with its pointwise derivative and energy density E2.
///
///   none    g = 0
///   linear  g = c u - g0
///   cubic   g = -(s u (u^2 - 1) + g0)
///   cosine  g = -(1 + cos(a1 u) + g0)
///
/// g0 and a1 are piecewise constant on fine cells; the energy density is an
/// antiderivative in u, so the integral of E2(u) is the energy G(u).
class ReactionTerm {
 public:
  ReactionTerm() = default;

  static ReactionTerm none();
  static ReactionTerm linear(double coefficient, CellField source = {});
  static ReactionTerm cubic(double scale, CellField source);
  static ReactionTerm cosine(CellField a1, CellField source);

  ReactionKind kind() const noexcept { return kind_; }
  std::string name() const;
  /// The Jacobian of the reaction does not depend on the state.
  bool affine() const noexcept { return kind_ == ReactionKind::none || kind_ == ReactionKind::linear; }

  double value(double u, int cell) const noexcept;
  double derivative(double u, int cell) const noexcept;
  double energy_density(double u, int cell) const noexcept;

  const CellField& source() const noexcept { return source_; }
  const CellField& a1() const noexcept { return a1_; }
  double parameter() const noexcept { return parameter_; }

 private:
  double g0(int cell) const noexcept { return source_.empty() ? 0.0 : source_[cell]; }

  ReactionKind kind_ = ReactionKind::none;
  double parameter_ = 0.0;  // c for linear, s for cubic
  CellField source_;
  CellField a1_;
};

}  // namespace splitcem
