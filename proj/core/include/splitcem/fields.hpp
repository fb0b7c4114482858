#pragma once

#include <string_view>

#include "splitcem/grid.hpp"
#include "splitcem/types.hpp"

namespace splitcem {

/// FE coefficient vector on the interior fine dofs of a grid.
class Field {
 public:
  Field() = default;
  explicit Field(const GridHierarchy& grid);
  Field(const GridHierarchy& grid, Vector values);

  const Vector& values() const noexcept { return values_; }
  Vector& values() noexcept { return values_; }
  int fine_cells() const noexcept { return fine_cells_; }
  bool belongs_to(const GridHierarchy& grid) const noexcept {
    return grid.fine_cells() == fine_cells_;
  }

 private:
  Vector values_;
  int fine_cells_ = 0;
};

/// One value per fine element (piecewise-constant data such as kappa, a1, g0).
class CellField {
 public:
  CellField() = default;
  CellField(int fine_cells, double value);
  CellField(int fine_cells, Vector values);

  int fine_cells() const noexcept { return fine_cells_; }
  int size() const noexcept { return static_cast<int>(values_.size()); }
  bool empty() const noexcept { return values_.size() == 0; }

  double operator[](int e) const noexcept { return values_[e]; }
  double& operator[](int e) noexcept { return values_[e]; }
  double at(int ix, int iy) const noexcept { return values_[iy * fine_cells_ + ix]; }
  const Vector& values() const noexcept { return values_; }

  double min() const;
  double max() const;
  /// max / min; requires strictly positive values.
  double contrast() const;

  /// Throws ConfigError naming the first nonpositive cell as (ix, iy).
  void require_positive(std::string_view name) const;

  CellField scaled(double factor) const;

 private:
  Vector values_;
  int fine_cells_ = 0;
};

}  // namespace splitcem
