#pragma once

#include <vector>

#include "splitcem/assembly.hpp"
#include "splitcem/types.hpp"

namespace splitcem {

/// Forms reduced operators Z^T B Z directly from quadrature-point data,
/// one coarse element at a time: per element the basis is stored densely on
/// the element's closure nodes, restricted to the columns active there.
class GalerkinProjector {
 public:
  GalerkinProjector(const Assembler& assembler, const SparseMatrix& basis);

  int size() const noexcept { return n_; }
  const SparseMatrix& basis() const noexcept { return basis_; }

  /// Z^T M_w Z, weight given at the quadrature points (4 per cell, cell-major).
  Matrix mass(const Vector& point_weight) const;
  /// Z^T A_c Z, coefficient given at the quadrature points.
  Matrix stiffness(const Vector& point_coefficient) const;

  Vector restrict(const Vector& fine) const { return basis_.transpose() * fine; }
  Vector prolong(const Vector& coeff) const { return basis_ * coeff; }

 private:
  struct Block {
    std::vector<int> columns;  // global reduced indices active on the element
    Matrix zt;                 // columns x closure nodes
    std::vector<int> cells;
    std::vector<std::array<int, 4>> corners;  // closure-node index per cell corner
  };
  template <class Kernel>
  Matrix assemble(Kernel&& kernel) const;

  const GridHierarchy* grid_;
  SparseMatrix basis_;
  std::vector<Block> blocks_;
  int n_;
};

/// Z^T B Z for a general sparse B.
Matrix galerkin(const SparseMatrix& z, const SparseMatrix& b);

}  // namespace splitcem
