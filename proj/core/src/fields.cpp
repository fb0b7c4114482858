#include "splitcem/fields.hpp"

#include <string>

#include "splitcem/error.hpp"

namespace splitcem {

bool is_symmetric(const SparseMatrix& a, double tol) {
  if (a.rows() != a.cols()) return false;
  double max_abs = 0.0;
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) max_abs = std::max(max_abs, std::abs(it.value()));
  const SparseMatrix at = a.transpose();
  const SparseMatrix diff = a - at;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it)
      if (std::abs(it.value()) > tol * max_abs) return false;
  return true;
}

Field::Field(const GridHierarchy& grid)
    : values_(Vector::Zero(grid.num_dofs())), fine_cells_(grid.fine_cells()) {}

Field::Field(const GridHierarchy& grid, Vector values)
    : values_(std::move(values)), fine_cells_(grid.fine_cells()) {
  if (values_.size() != grid.num_dofs()) {
    throw ConfigError("field length " + std::to_string(values_.size()) +
                      " does not match interior dof count " + std::to_string(grid.num_dofs()));
  }
}

CellField::CellField(int fine_cells, double value)
    : values_(Vector::Constant(static_cast<Eigen::Index>(fine_cells) * fine_cells, value)),
      fine_cells_(fine_cells) {}

CellField::CellField(int fine_cells, Vector values)
    : values_(std::move(values)), fine_cells_(fine_cells) {
  if (values_.size() != static_cast<Eigen::Index>(fine_cells) * fine_cells) {
    throw ConfigError("cell field has " + std::to_string(values_.size()) + " values, expected " +
                      std::to_string(fine_cells * fine_cells));
  }
}

double CellField::min() const { return values_.minCoeff(); }
double CellField::max() const { return values_.maxCoeff(); }

double CellField::contrast() const {
  require_positive("field");
  return max() / min();
}

void CellField::require_positive(std::string_view name) const {
  for (Eigen::Index e = 0; e < values_.size(); ++e) {
    if (!(values_[e] > 0.0)) {
      throw ConfigError(std::string(name) + " must be strictly positive; cell (" +
                        std::to_string(e % fine_cells_) + ", " + std::to_string(e / fine_cells_) +
                        ") has value " + std::to_string(values_[e]));
    }
  }
}

CellField CellField::scaled(double factor) const { return CellField(fine_cells_, values_ * factor); }

}  // namespace splitcem
