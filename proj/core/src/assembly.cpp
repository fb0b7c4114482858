#include "splitcem/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "splitcem/error.hpp"

namespace splitcem {
namespace q1 {
namespace {

struct Tables {
  std::array<std::array<double, 4>, kPoints> values{};
  // reference gradients on [0,1]^2, [q][a][dir]
  std::array<std::array<std::array<double, 2>, 4>, kPoints> grads{};

  Tables() {
    const double g = 0.5 / std::sqrt(3.0);
    const std::array<double, 2> pts = {0.5 - g, 0.5 + g};
    const std::array<std::array<double, 2>, kPoints> qp = {
        {{pts[0], pts[0]}, {pts[1], pts[0]}, {pts[1], pts[1]}, {pts[0], pts[1]}}};
    for (int q = 0; q < kPoints; ++q) {
      const double x = qp[q][0];
      const double y = qp[q][1];
      values[q] = {(1 - x) * (1 - y), x * (1 - y), x * y, (1 - x) * y};
      grads[q][0] = {-(1 - y), -(1 - x)};
      grads[q][1] = {(1 - y), -x};
      grads[q][2] = {y, x};
      grads[q][3] = {-y, (1 - x)};
    }
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

}  // namespace

const std::array<std::array<double, 4>, kPoints>& basis_values() { return tables().values; }

PointValues interpolate(const std::array<double, 4>& corner) noexcept {
  const auto& n = tables().values;
  PointValues out{};
  for (int q = 0; q < kPoints; ++q)
    out[q] = n[q][0] * corner[0] + n[q][1] * corner[1] + n[q][2] * corner[2] + n[q][3] * corner[3];
  return out;
}

ElementMatrix weighted_mass(const PointValues& w, double h) noexcept {
  const auto& n = tables().values;
  const double jac = 0.25 * h * h;
  ElementMatrix m{};
  for (int q = 0; q < kPoints; ++q) {
    const double wq = jac * w[q];
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) m[a * 4 + b] += wq * n[q][a] * n[q][b];
  }
  return m;
}

ElementMatrix weighted_stiffness(const PointValues& c) noexcept {
  const auto& gr = tables().grads;
  ElementMatrix k{};
  for (int q = 0; q < kPoints; ++q) {
    const double cq = 0.25 * c[q];
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        k[a * 4 + b] += cq * (gr[q][a][0] * gr[q][b][0] + gr[q][a][1] * gr[q][b][1]);
  }
  return k;
}

}  // namespace q1

Assembler::Assembler(const GridHierarchy& grid, DofScope scope)
    : grid_(&grid), scope_(scope),
      size_(scope == DofScope::interior ? grid.num_dofs() : grid.num_nodes()) {
  const int ne = grid.num_fine_elements();
  dofs_.resize(ne);
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(ne) * 16);
  for (int e = 0; e < ne; ++e) {
    dofs_[e] = scope == DofScope::interior ? grid.element_dofs(e) : grid.element_nodes(e);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        if (dofs_[e][a] >= 0 && dofs_[e][b] >= 0) trip.emplace_back(dofs_[e][a], dofs_[e][b], 1.0);
  }
  pattern_.resize(size_, size_);
  pattern_.setFromTriplets(trip.begin(), trip.end());
  pattern_.makeCompressed();
  std::fill(pattern_.valuePtr(), pattern_.valuePtr() + pattern_.nonZeros(), 0.0);

  const int* outer = pattern_.outerIndexPtr();
  const int* inner = pattern_.innerIndexPtr();
  slots_.resize(ne);
  for (int e = 0; e < ne; ++e) {
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        const int row = dofs_[e][a];
        const int col = dofs_[e][b];
        if (row < 0 || col < 0) {
          slots_[e][a * 4 + b] = -1;
          continue;
        }
        const int* begin = inner + outer[col];
        const int* end = inner + outer[col + 1];
        slots_[e][a * 4 + b] = static_cast<int>(std::lower_bound(begin, end, row) - inner);
      }
    }
  }
}

template <class Kernel>
SparseMatrix Assembler::assemble(Kernel&& kernel) const {
  SparseMatrix out = pattern_;
  double* values = out.valuePtr();
  const int ne = grid_->num_fine_elements();
  for (int e = 0; e < ne; ++e) {
    const q1::ElementMatrix local = kernel(e);
    const auto& slots = slots_[e];
    for (int k = 0; k < 16; ++k)
      if (slots[k] >= 0) values[slots[k]] += local[k];
  }
  return out;
}

std::array<double, 4> Assembler::gather(const Vector& u, int e) const noexcept {
  const auto& d = dofs_[e];
  return {d[0] >= 0 ? u[d[0]] : 0.0, d[1] >= 0 ? u[d[1]] : 0.0, d[2] >= 0 ? u[d[2]] : 0.0,
          d[3] >= 0 ? u[d[3]] : 0.0};
}

SparseMatrix Assembler::mass() const {
  const auto unit = q1::weighted_mass({1.0, 1.0, 1.0, 1.0}, grid_->fine_size());
  return assemble([&](int) { return unit; });
}

SparseMatrix Assembler::mass(const CellField& weight) const {
  weight.require_positive("mass weight");
  const auto unit = q1::weighted_mass({1.0, 1.0, 1.0, 1.0}, grid_->fine_size());
  return assemble([&](int e) {
    q1::ElementMatrix m = unit;
    for (double& v : m) v *= weight[e];
    return m;
  });
}

SparseMatrix Assembler::mass_at_points(const Vector& weight) const {
  const double h = grid_->fine_size();
  return assemble([&](int e) {
    const int o = 4 * e;
    return q1::weighted_mass({weight[o], weight[o + 1], weight[o + 2], weight[o + 3]}, h);
  });
}

SparseMatrix Assembler::stiffness(const CellField& kappa) const {
  kappa.require_positive("kappa");
  const auto unit = q1::weighted_stiffness({1.0, 1.0, 1.0, 1.0});
  return assemble([&](int e) {
    q1::ElementMatrix k = unit;
    for (double& v : k) v *= kappa[e];
    return k;
  });
}

Vector Assembler::point_values(const Vector& u) const {
  const int ne = grid_->num_fine_elements();
  Vector out(4 * ne);
  for (int e = 0; e < ne; ++e) {
    const auto p = q1::interpolate(gather(u, e));
    for (int q = 0; q < 4; ++q) out[4 * e + q] = p[q];
  }
  return out;
}

Vector Assembler::diffusion_coefficient(const CellField& kappa, const Vector& u,
                                        const DiffusionNonlinearity& alpha) const {
  Vector c = point_values(u);
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    const double a = alpha.value(c[k]);
    if (!(a > 0.0)) {
      throw NumericalError("diffusion coefficient alpha(u) = " + std::to_string(a) +
                           " is not positive in cell " + std::to_string(k / 4) +
                           " (loss of ellipticity)");
    }
    c[k] = kappa[static_cast<int>(k / 4)] * a;
  }
  return c;
}

SparseMatrix Assembler::stiffness(const CellField& kappa, const Vector& u,
                                  const DiffusionNonlinearity& alpha) const {
  return stiffness_at_points(diffusion_coefficient(kappa, u, alpha));
}

SparseMatrix Assembler::stiffness_at_points(const Vector& coefficient) const {
  return assemble([&](int e) {
    const int o = 4 * e;
    return q1::weighted_stiffness(
        {coefficient[o], coefficient[o + 1], coefficient[o + 2], coefficient[o + 3]});
  });
}

Vector Assembler::load(const CellField& g0) const {
  Vector b = Vector::Zero(size_);
  const double h = grid_->fine_size();
  // int phi_a over a square cell is h^2 / 4
  const double w = 0.25 * h * h;
  for (int e = 0; e < grid_->num_fine_elements(); ++e) {
    if (g0[e] == 0.0) continue;
    for (int a = 0; a < 4; ++a)
      if (dofs_[e][a] >= 0) b[dofs_[e][a]] += w * g0[e];
  }
  return b;
}

Vector Assembler::reaction_residual(const ReactionTerm& g, const Vector& u) const {
  Vector r = Vector::Zero(size_);
  if (g.kind() == ReactionKind::none) return r;
  const auto& n = q1::basis_values();
  const double jac = 0.25 * grid_->fine_size() * grid_->fine_size();
  for (int e = 0; e < grid_->num_fine_elements(); ++e) {
    const auto uq = q1::interpolate(gather(u, e));
    std::array<double, 4> local{};
    for (int q = 0; q < 4; ++q) {
      const double gq = jac * g.value(uq[q], e);
      for (int a = 0; a < 4; ++a) local[a] += gq * n[q][a];
    }
    for (int a = 0; a < 4; ++a)
      if (dofs_[e][a] >= 0) r[dofs_[e][a]] += local[a];
  }
  return r;
}

ReactionAssembly Assembler::reaction(const ReactionTerm& g, const Vector& u) const {
  ReactionAssembly out;
  out.residual = reaction_residual(g, u);
  if (g.kind() == ReactionKind::none) {
    out.jacobian = pattern_;
    return out;
  }
  const double h = grid_->fine_size();
  out.jacobian = assemble([&](int e) {
    const auto uq = q1::interpolate(gather(u, e));
    q1::PointValues d{};
    for (int q = 0; q < 4; ++q) d[q] = g.derivative(uq[q], e);
    return q1::weighted_mass(d, h);
  });
  return out;
}

Vector Assembler::reaction_derivative(const ReactionTerm& g, const Vector& u) const {
  const int ne = grid_->num_fine_elements();
  Vector out(4 * ne);
  for (int e = 0; e < ne; ++e) {
    const auto uq = q1::interpolate(gather(u, e));
    for (int q = 0; q < 4; ++q) out[4 * e + q] = g.derivative(uq[q], e);
  }
  return out;
}

double Assembler::reaction_energy(const ReactionTerm& g, const Vector& u) const {
  const double jac = 0.25 * grid_->fine_size() * grid_->fine_size();
  double total = 0.0;
  for (int e = 0; e < grid_->num_fine_elements(); ++e) {
    const auto uq = q1::interpolate(gather(u, e));
    for (int q = 0; q < 4; ++q) total += jac * g.energy_density(uq[q], e);
  }
  return total;
}

double Assembler::diffusion_energy(const CellField& kappa, const Vector& u,
                                   const DiffusionNonlinearity& alpha) const {
  const SparseMatrix k = alpha.is_linear() ? stiffness(kappa) : stiffness(kappa, u, alpha);
  return 0.5 * u.dot(k * u);
}

SparseMatrix assemble_mass(const GridHierarchy& grid) { return Assembler(grid).mass(); }

SparseMatrix assemble_mass(const GridHierarchy& grid, const CellField& weight) {
  return Assembler(grid).mass(weight);
}

SparseMatrix assemble_stiffness(const GridHierarchy& grid, const CellField& kappa) {
  return Assembler(grid).stiffness(kappa);
}

SparseMatrix assemble_stiffness(const GridHierarchy& grid, const CellField& kappa, const Field& u,
                                const DiffusionNonlinearity& alpha) {
  if (!u.belongs_to(grid)) throw ConfigError("field does not belong to the grid");
  return Assembler(grid).stiffness(kappa, u.values(), alpha);
}

ReactionAssembly assemble_reaction(const GridHierarchy& grid, const ReactionTerm& g, const Field& u) {
  if (!u.belongs_to(grid)) throw ConfigError("field does not belong to the grid");
  return Assembler(grid).reaction(g, u.values());
}

Vector assemble_load(const GridHierarchy& grid, const CellField& g0) { return Assembler(grid).load(g0); }

}  // namespace splitcem
