#pragma once

#include <array>
#include <vector>

#include "splitcem/coefficients.hpp"
#include "splitcem/fields.hpp"
#include "splitcem/grid.hpp"
#include "splitcem/types.hpp"

namespace splitcem {

/// Bilinear element kernels with 2x2 Gauss quadrature on an axis-aligned square cell.
namespace q1 {

inline constexpr int kPoints = 4;
using ElementMatrix = std::array<double, 16>;  // row-major, local node order ccw from lower-left
using PointValues = std::array<double, kPoints>;

/// N_a at quadrature point q, stored [q][a].
const std::array<std::array<double, 4>, kPoints>& basis_values();

/// Interpolate corner values to the quadrature points.
PointValues interpolate(const std::array<double, 4>& corner) noexcept;

/// sum_q (h^2/4) w_q N_a N_b
ElementMatrix weighted_mass(const PointValues& w, double h) noexcept;
/// sum_q (1/4) c_q grad N_a . grad N_b (independent of h in 2D)
ElementMatrix weighted_stiffness(const PointValues& c) noexcept;

}  // namespace q1

enum class DofScope {
  interior,   // homogeneous Dirichlet: boundary nodes eliminated
  all_nodes,  // every node is a dof (used for partition-of-unity checks)
};

struct ReactionAssembly {
  Vector residual;       // G_i = (g(u), phi_i)
  SparseMatrix jacobian;  // dG_i / dU_j = (g'(u) phi_j, phi_i)
};

/// Assembles Q1 operators on the fine grid. The sparsity pattern and the
/// element-to-nonzero scatter map are built once; every matrix returned by
/// one assembler shares the same pattern, so their value arrays can be
/// combined directly.
class Assembler {
 public:
  explicit Assembler(const GridHierarchy& grid, DofScope scope = DofScope::interior);

  const GridHierarchy& grid() const noexcept { return *grid_; }
  DofScope scope() const noexcept { return scope_; }
  int size() const noexcept { return size_; }
  const SparseMatrix& pattern() const noexcept { return pattern_; }

  SparseMatrix mass() const;
  /// Weighted mass; the weight must be strictly positive.
  SparseMatrix mass(const CellField& weight) const;
  /// Mass weighted by values at the quadrature points (4 per cell, cell-major).
  SparseMatrix mass_at_points(const Vector& weight) const;

  SparseMatrix stiffness(const CellField& kappa) const;
  /// int kappa alpha(u) grad phi_j . grad phi_i, alpha evaluated at the quadrature points.
  SparseMatrix stiffness(const CellField& kappa, const Vector& u,
                         const DiffusionNonlinearity& alpha) const;
  SparseMatrix stiffness_at_points(const Vector& coefficient) const;

  Vector load(const CellField& g0) const;
  Vector reaction_residual(const ReactionTerm& g, const Vector& u) const;
  ReactionAssembly reaction(const ReactionTerm& g, const Vector& u) const;

  /// g'(u) at the quadrature points of every cell, cell-major.
  Vector reaction_derivative(const ReactionTerm& g, const Vector& u) const;
  /// u at the quadrature points of every cell, cell-major.
  Vector point_values(const Vector& u) const;
  /// kappa * alpha(u) at the quadrature points; throws NumericalError when nonpositive.
  Vector diffusion_coefficient(const CellField& kappa, const Vector& u,
                               const DiffusionNonlinearity& alpha) const;

  /// Integral of the reaction energy density E2(u) over the domain.
  double reaction_energy(const ReactionTerm& g, const Vector& u) const;
  /// 1/2 int kappa alpha(u) |grad u|^2
  double diffusion_energy(const CellField& kappa, const Vector& u,
                          const DiffusionNonlinearity& alpha) const;

  /// Local dofs of a fine element (-1 for eliminated boundary nodes).
  const std::array<int, 4>& element_dofs(int e) const noexcept { return dofs_[e]; }

 private:
  std::array<double, 4> gather(const Vector& u, int e) const noexcept;
  template <class Kernel>
  SparseMatrix assemble(Kernel&& kernel) const;

  const GridHierarchy* grid_;
  DofScope scope_;
  int size_;
  SparseMatrix pattern_;
  std::vector<std::array<int, 4>> dofs_;
  std::vector<std::array<int, 16>> slots_;
};

// Free-function forms of the assembler, interior dofs.
SparseMatrix assemble_mass(const GridHierarchy& grid);
SparseMatrix assemble_mass(const GridHierarchy& grid, const CellField& weight);
SparseMatrix assemble_stiffness(const GridHierarchy& grid, const CellField& kappa);
SparseMatrix assemble_stiffness(const GridHierarchy& grid, const CellField& kappa, const Field& u,
                                const DiffusionNonlinearity& alpha);
ReactionAssembly assemble_reaction(const GridHierarchy& grid, const ReactionTerm& g, const Field& u);
Vector assemble_load(const GridHierarchy& grid, const CellField& g0);

}  // namespace splitcem
