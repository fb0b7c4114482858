#include "splitcem/coefficients.hpp"

#include <cmath>

#include "splitcem/error.hpp"

namespace splitcem {

double DiffusionNonlinearity::value(double u) const noexcept {
  switch (kind) {
    case DiffusionKind::linear: return 1.0;
    case DiffusionKind::one_plus_u_sq: return 1.0 + u * u;
    case DiffusionKind::two_plus_cos: return 2.0 + std::cos(u);
  }
  return 1.0;
}

double DiffusionNonlinearity::derivative(double u) const noexcept {
  switch (kind) {
    case DiffusionKind::linear: return 0.0;
    case DiffusionKind::one_plus_u_sq: return 2.0 * u;
    case DiffusionKind::two_plus_cos: return -std::sin(u);
  }
  return 0.0;
}

std::string DiffusionNonlinearity::name() const {
  switch (kind) {
    case DiffusionKind::linear: return "linear";
    case DiffusionKind::one_plus_u_sq: return "one_plus_u_sq";
    case DiffusionKind::two_plus_cos: return "two_plus_cos";
  }
  return "linear";
}

DiffusionNonlinearity DiffusionNonlinearity::parse(std::string_view name) {
  if (name == "linear") return {DiffusionKind::linear};
  if (name == "one_plus_u_sq") return {DiffusionKind::one_plus_u_sq};
  if (name == "two_plus_cos") return {DiffusionKind::two_plus_cos};
  throw ConfigError("unknown diffusion nonlinearity '" + std::string(name) +
                    "' (valid: linear, one_plus_u_sq, two_plus_cos)");
}

ReactionTerm ReactionTerm::none() { return ReactionTerm(); }

ReactionTerm ReactionTerm::linear(double coefficient, CellField source) {
  ReactionTerm g;
  g.kind_ = ReactionKind::linear;
  g.parameter_ = coefficient;
  g.source_ = std::move(source);
  return g;
}

ReactionTerm ReactionTerm::cubic(double scale, CellField source) {
  ReactionTerm g;
  g.kind_ = ReactionKind::cubic;
  g.parameter_ = scale;
  g.source_ = std::move(source);
  return g;
}

ReactionTerm ReactionTerm::cosine(CellField a1, CellField source) {
  if (a1.empty()) throw ConfigError("cosine reaction requires an a1 field");
  ReactionTerm g;
  g.kind_ = ReactionKind::cosine;
  g.a1_ = std::move(a1);
  g.source_ = std::move(source);
  return g;
}

std::string ReactionTerm::name() const {
  switch (kind_) {
    case ReactionKind::none: return "none";
    case ReactionKind::linear: return "linear";
    case ReactionKind::cubic: return "cubic";
    case ReactionKind::cosine: return "cosine";
  }
  return "none";
}

double ReactionTerm::value(double u, int cell) const noexcept {
  switch (kind_) {
    case ReactionKind::none: return 0.0;
    case ReactionKind::linear: return parameter_ * u - g0(cell);
    case ReactionKind::cubic: return -(parameter_ * u * (u * u - 1.0) + g0(cell));
    case ReactionKind::cosine: return -(1.0 + std::cos(a1_[cell] * u) + g0(cell));
  }
  return 0.0;
}

double ReactionTerm::derivative(double u, int cell) const noexcept {
  switch (kind_) {
    case ReactionKind::none: return 0.0;
    case ReactionKind::linear: return parameter_;
    case ReactionKind::cubic: return -parameter_ * (3.0 * u * u - 1.0);
    case ReactionKind::cosine: {
      const double a = a1_[cell];
      return a * std::sin(a * u);
    }
  }
  return 0.0;
}

double ReactionTerm::energy_density(double u, int cell) const noexcept {
  switch (kind_) {
    case ReactionKind::none: return 0.0;
    case ReactionKind::linear: return 0.5 * parameter_ * u * u - g0(cell) * u;
    case ReactionKind::cubic: {
      const double u2 = u * u;
      return -(parameter_ * (0.25 * u2 * u2 - 0.5 * u2) + g0(cell) * u);
    }
    case ReactionKind::cosine: {
      const double a = a1_[cell];
      const double x = a * u;
      // sin(a u) / a, with the series near a = 0
      double sinc_term;
      if (std::abs(x) < 1e-4) {
        const double x2 = x * x;
        sinc_term = u * (1.0 - x2 / 6.0 + x2 * x2 / 120.0);
      } else {
        sinc_term = std::sin(x) / a;
      }
      return -(u + sinc_term + g0(cell) * u);
    }
  }
  return 0.0;
}

}  // namespace splitcem
