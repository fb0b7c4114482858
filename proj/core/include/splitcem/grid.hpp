#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace splitcem {

/// Nested structured coarse/fine quadrilateral meshes of the unit square.
///
/// Nodes are numbered row-major, node(ix, iy) = iy * (Nf + 1) + ix. Fine
/// element e = ey * Nf + ex has corner nodes ordered counter-clockwise from
/// its lower-left corner. Degrees of freedom are the interior nodes (homogeneous
/// Dirichlet on the boundary), again numbered row-major.
class GridHierarchy {
 public:
  GridHierarchy(int coarse_cells, int fine_cells);

  int coarse_cells() const noexcept { return nc_; }
  int fine_cells() const noexcept { return nf_; }
  int ratio() const noexcept { return nf_ / nc_; }
  double coarse_size() const noexcept { return 1.0 / nc_; }
  double fine_size() const noexcept { return 1.0 / nf_; }

  int num_nodes() const noexcept { return (nf_ + 1) * (nf_ + 1); }
  int num_dofs() const noexcept { return (nf_ - 1) * (nf_ - 1); }
  int num_fine_elements() const noexcept { return nf_ * nf_; }
  int num_coarse_elements() const noexcept { return nc_ * nc_; }

  int node(int ix, int iy) const noexcept { return iy * (nf_ + 1) + ix; }
  double node_x(int node) const noexcept { return static_cast<double>(node % (nf_ + 1)) / nf_; }
  double node_y(int node) const noexcept { return static_cast<double>(node / (nf_ + 1)) / nf_; }

  /// Interior dof of a node, -1 for boundary nodes.
  int dof_of_node(int node) const noexcept { return node_to_dof_[node]; }
  int node_of_dof(int dof) const noexcept { return dof_to_node_[dof]; }
  std::span<const int> node_to_dof() const noexcept { return node_to_dof_; }

  std::array<int, 4> element_nodes(int e) const noexcept;
  /// Element corner dofs in element_nodes order, -1 where the corner is on the boundary.
  std::array<int, 4> element_dofs(int e) const noexcept;
  std::array<double, 2> element_center(int e) const noexcept;

  int coarse_of_fine_element(int e) const noexcept { return fine_to_coarse_[e]; }
  std::span<const int> fine_elements_of(int coarse) const noexcept;
  /// Nodes in the closure of a coarse element.
  std::vector<int> nodes_of_coarse(int coarse) const;

  bool same_as(const GridHierarchy& other) const noexcept {
    return nc_ == other.nc_ && nf_ == other.nf_;
  }

 private:
  int nc_;
  int nf_;
  std::vector<int> node_to_dof_;
  std::vector<int> dof_to_node_;
  std::vector<int> fine_to_coarse_;
  std::vector<int> coarse_to_fine_;  // ratio^2 consecutive entries per coarse element
};

/// Throws ConfigError unless Nf is a multiple of Nc with Nf / Nc >= 2.
GridHierarchy build_grids(int coarse_cells, int fine_cells);

/// Oversampled neighbourhood K_i^+ of a coarse element: the ring of `layers`
/// coarse elements around it, clipped to the domain. Always a rectangle of
/// coarse cells. Local dofs are the fine nodes strictly inside the rectangle
/// (zero trace on the patch boundary), ordered row-major like the global dofs.
class Patch {
 public:
  Patch(const GridHierarchy& grid, int center, int layers);

  int center() const noexcept { return center_; }
  int layers() const noexcept { return layers_; }

  /// Inclusive coarse-cell range.
  int coarse_x0() const noexcept { return cx0_; }
  int coarse_x1() const noexcept { return cx1_; }
  int coarse_y0() const noexcept { return cy0_; }
  int coarse_y1() const noexcept { return cy1_; }

  const std::vector<int>& coarse_elements() const noexcept { return coarse_; }
  std::vector<int> fine_elements() const;
  bool contains_coarse(int coarse) const noexcept;

  int num_local_dofs() const noexcept { return static_cast<int>(local_to_global_.size()); }
  const std::vector<int>& local_to_global() const noexcept { return local_to_global_; }
  std::optional<int> local_of_global(int global_dof) const noexcept;

 private:
  int nf_;
  int center_;
  int layers_;
  int cx0_, cx1_, cy0_, cy1_;
  int nx0_, nx1_, ny0_, ny1_;  // node box, inclusive
  std::vector<int> coarse_;
  std::vector<int> local_to_global_;
};

/// Throws std::out_of_range for an invalid coarse index, ConfigError for negative layers.
Patch oversample(const GridHierarchy& grid, int coarse_index, int layers);

}  // namespace splitcem
